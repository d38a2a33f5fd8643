#include "attdmm/scoring/risk.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "attdmm/inference/posterior.hpp"
#include "attdmm/model/networks.hpp"
#include "attdmm/numcore/errors.hpp"
#include "attdmm/training/loss.hpp"

namespace attdmm {
namespace {

std::string fmt17(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

double percentile(std::vector<double> values, double q) {
  require(!values.empty(), "percentile: no values");
  require(q >= 0.0 && q <= 1.0, "percentile: q must lie in [0, 1]");
  std::sort(values.begin(), values.end());
  const double pos = q * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return values[lo] + frac * (values[hi] - values[lo]);
}

RiskScore summarize_samples(std::vector<double> samples) {
  require(!samples.empty(), "summarize_samples: no samples");
  RiskScore r;
  r.mean = std::accumulate(samples.begin(), samples.end(), 0.0) / static_cast<double>(samples.size());
  if (samples.size() == 1) {
    r.ci_low = r.ci_high = r.mean;
  } else {
    r.ci_low = std::min(percentile(samples, 0.025), r.mean);
    r.ci_high = std::max(percentile(samples, 0.975), r.mean);
  }
  r.samples = std::move(samples);
  return r;
}

RiskScore score_at_time(const PatientRecord& record, int steps, const ModelParams& params,
                        int n_samples, std::uint64_t seed) {
  if (record.steps() < 1) throw DataError("score_at_time: record " + record.stay_id + " is empty");
  require(steps >= 1 && steps <= record.steps(), "score_at_time: steps must lie in [1, T]");
  require(n_samples >= 1, "score_at_time: n_samples must be >= 1");
  const PatientRecord rec = record.truncated(steps);
  const Weights<Tensor>& w = params.weights;
  const auto h = encode_backward(rec, w.posterior);
  const Vector z0 = w.z0;
  std::vector<double> samples;
  samples.reserve(static_cast<std::size_t>(n_samples));
  for (int n = 0; n < n_samples; ++n) {
    const auto eps = draw_noise(steps, params.dims.latent_dim, record_noise_seed(seed, rec, n));
    const auto path = sample_path<Vector, Tensor>(z0, rec.s, h, w.posterior, params.settings, eps);
    const auto att = attention_aggregate<Vector, Tensor>(path.z, w.attention);
    samples.push_back(predict(att.summary, w.predictor));
  }
  return summarize_samples(std::move(samples));
}

std::vector<TrajectoryPoint> score_trajectory(const PatientRecord& record, const ModelParams& params,
                                              int n_samples, int stride, std::uint64_t seed) {
  require(stride >= 1, "score_trajectory: stride must be >= 1");
  std::vector<TrajectoryPoint> out;
  for (int t = stride; t <= record.steps(); t += stride) {
    out.push_back({t, 2.0 * t, score_at_time(record, t, params, n_samples, seed)});
  }
  // the last point is always the full stay
  if (out.empty() || out.back().steps != record.steps()) {
    const int t = record.steps();
    out.push_back({t, 2.0 * t, score_at_time(record, t, params, n_samples, seed)});
  }
  return out;
}

std::string trajectory_csv_header() { return "stay_id,hours_from_admission,mean,ci_low,ci_high\n"; }

std::string trajectory_csv_rows(const std::string& stay_id, const std::vector<TrajectoryPoint>& points) {
  std::string out;
  for (const TrajectoryPoint& p : points) {
    out += stay_id + "," + fmt17(p.hours) + "," + fmt17(p.score.mean) + "," +
           fmt17(p.score.ci_low) + "," + fmt17(p.score.ci_high) + "\n";
  }
  return out;
}

}  // namespace attdmm
