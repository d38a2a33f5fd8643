#include "attdmm/data/synth.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

#include <Eigen/Eigenvalues>

#include "attdmm/numcore/errors.hpp"
#include "attdmm/numcore/functions.hpp"
#include "attdmm/numcore/random.hpp"

namespace attdmm {
namespace {

// stream purposes
enum : std::uint64_t {
  kModelStream = 1,
  kStaticStream = 2,
  kLatentStream = 3,
  kObservationStream = 4,
  kMissingStream = 5,
  kLabelStream = 6,
};

constexpr double kAgeMean = 65.0;
constexpr double kAgeStd = 15.0;

Matrix gaussian_matrix(Rng& rng, Eigen::Index rows, Eigen::Index cols, double scale) {
  std::normal_distribution<double> n(0.0, scale);
  Matrix a(rows, cols);
  for (Eigen::Index i = 0; i < a.size(); ++i) a(i) = n(rng);
  return a;
}

StaticFeatures draw_statics(Rng& rng) {
  std::normal_distribution<double> age(kAgeMean, kAgeStd);
  std::bernoulli_distribution aids(0.01), heme(0.05), meta(0.08);
  std::discrete_distribution<int> adm({0.15, 0.80, 0.05});
  StaticFeatures s;
  s.age = std::clamp(std::round(age(rng)), 16.0, 95.0);
  s.aids = aids(rng);
  s.hematologic_malignancy = heme(rng);
  s.metastatic_cancer = meta(rng);
  s.admission_type = synth_admission_types()[static_cast<std::size_t>(adm(rng))];
  return s;
}

double mean_sigmoid(const std::vector<double>& logits, double b0) {
  double acc = 0.0;
  for (double v : logits) acc += sigmoid(v + b0);
  return acc / static_cast<double>(logits.size());
}

}  // namespace

void SynthConfig::validate() const {
  require(records >= 1, "SynthConfig: records must be >= 1");
  require(latent_dim >= 1 && feature_dim >= 1, "SynthConfig: dimensions must be positive");
  require(spectral_radius >= 0.0 && spectral_radius < 1.0,
          "SynthConfig: spectral radius must lie in [0, 1)");
  require(process_noise > 0.0 && observation_noise > 0.0, "SynthConfig: noise scales must be positive");
  require(min_steps >= 1 && max_steps >= min_steps, "SynthConfig: invalid step range");
  require(prevalence >= 0.0 && prevalence <= 1.0, "SynthConfig: prevalence must lie in [0, 1]");
  require(missing_rates.empty() || static_cast<int>(missing_rates.size()) == feature_dim,
          "SynthConfig: missing_rates needs one entry per feature");
  for (int i = 0; i < feature_dim; ++i) {
    const double r = missing_rate_of(i);
    require(r >= 0.0 && r < 1.0, "SynthConfig: missingness rate must lie in [0, 1)");
  }
}

double SynthConfig::missing_rate_of(int feature) const {
  return missing_rates.empty() ? missing_rate : missing_rates[static_cast<std::size_t>(feature)];
}

const std::vector<std::string>& synth_admission_types() {
  static const std::vector<std::string> types{"ELECTIVE", "EMERGENCY", "URGENT"};
  return types;
}

Vector synth_static_code(const StaticFeatures& s) {
  const auto& types = synth_admission_types();
  Vector v = Vector::Zero(4 + static_cast<Eigen::Index>(types.size()));
  v(0) = (s.age - kAgeMean) / kAgeStd;
  v(1) = s.aids;
  v(2) = s.hematologic_malignancy;
  v(3) = s.metastatic_cancer;
  auto it = std::find(types.begin(), types.end(), s.admission_type);
  if (it != types.end()) v(4 + (it - types.begin())) = 1.0;
  return v;
}

Matrix observed_mask(const Matrix& values) {
  return values.unaryExpr([](double v) { return std::isnan(v) ? 0.0 : 1.0; });
}

SynthResult synth_generate(const SynthConfig& cfg) {
  cfg.validate();
  const int d = cfg.latent_dim;
  const int M = cfg.feature_dim;
  const int S = 4 + static_cast<int>(synth_admission_types().size());
  const std::uint64_t obs_seed = cfg.observation_seed.value_or(cfg.seed);

  SynthResult out;
  oracle::LGSSM& g = out.truth.lgssm;
  {
    Rng rng(derive_seed(cfg.seed, kModelStream));
    Matrix A = gaussian_matrix(rng, d, d, 1.0);
    const double radius = A.eigenvalues().cwiseAbs().maxCoeff();
    g.A = radius > 0.0 ? Matrix(A * (cfg.spectral_radius / radius)) : Matrix::Zero(d, d);
    g.B = gaussian_matrix(rng, d, S, cfg.static_drive / std::sqrt(static_cast<double>(S)));
    g.b = Vector::Zero(d);
    g.q = Vector::Constant(d, cfg.process_noise * cfg.process_noise);
    g.C = gaussian_matrix(rng, M, d, 1.0 / std::sqrt(static_cast<double>(d)));
    g.d = gaussian_matrix(rng, M, 1, 2.0);
    g.r = Vector::Constant(M, cfg.observation_noise * cfg.observation_noise);
    g.z0_mean = Vector::Zero(d);
    g.z0_cov = Matrix::Zero(d, d);
    Vector u = gaussian_matrix(rng, d, 1, 1.0);
    out.truth.readout = u * (cfg.readout_scale / u.norm());
  }

  out.data.feature_names.reserve(static_cast<std::size_t>(M));
  for (int i = 0; i < M; ++i) out.data.feature_names.push_back("feature_" + std::to_string(i + 1));

  std::vector<double> logits;
  logits.reserve(static_cast<std::size_t>(cfg.records));
  const Vector sd_w = g.q.cwiseSqrt();
  const Vector sd_v = g.r.cwiseSqrt();
  for (int k = 0; k < cfg.records; ++k) {
    const auto key = static_cast<std::uint64_t>(k);
    RawStay stay;
    stay.stay_id = std::to_string(100000 + k);

    Rng static_rng(derive_seed(cfg.seed, kStaticStream, key));
    stay.statics = draw_statics(static_rng);
    std::uniform_int_distribution<int> len(cfg.min_steps, cfg.max_steps);
    const int T = len(static_rng);
    const Vector drive = g.B * synth_static_code(stay.statics) + g.b;

    Rng latent_rng(derive_seed(cfg.seed, kLatentStream, key));
    Matrix z(T, d);
    Vector prev = g.z0_mean;
    for (int t = 0; t < T; ++t) {
      prev = g.A * prev + drive + sd_w.cwiseProduct(standard_normal(latent_rng, d));
      z.row(t) = prev.transpose();
    }

    Rng obs_rng(derive_seed(obs_seed, kObservationStream, key));
    Rng miss_rng(derive_seed(obs_seed, kMissingStream, key));
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    stay.values.resize(T, M);
    for (int t = 0; t < T; ++t) {
      const Vector x = g.C * z.row(t).transpose() + g.d + sd_v.cwiseProduct(standard_normal(obs_rng, M));
      for (int i = 0; i < M; ++i) {
        const bool missing = unit(miss_rng) < cfg.missing_rate_of(i);
        stay.values(t, i) = missing ? std::numeric_limits<double>::quiet_NaN() : x(i);
      }
    }
    logits.push_back(out.truth.readout.dot(z.row(T - 1).transpose()));
    out.data.stays.push_back(std::move(stay));
    out.latents.push_back(std::move(z));
  }

  // b0 such that the expected positive share matches the target
  double lo = -50.0;
  double hi = 50.0;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    (mean_sigmoid(logits, mid) < cfg.prevalence ? lo : hi) = mid;
  }
  const double b0 = 0.5 * (lo + hi);
  // targets outside the open range spanned by the bracket cannot be met
  const bool outside = cfg.prevalence <= mean_sigmoid(logits, -50.0) || cfg.prevalence >= mean_sigmoid(logits, 50.0);
  if (outside || std::abs(mean_sigmoid(logits, b0) - cfg.prevalence) > 1e-6) {
    throw DataError("synth_generate: prevalence target " + format_double(cfg.prevalence) +
                    " is unreachable with the offset bracket [-50, 50]");
  }
  out.truth.offset = b0;

  for (int k = 0; k < cfg.records; ++k) {
    Rng label_rng(derive_seed(cfg.seed, kLabelStream, static_cast<std::uint64_t>(k)));
    std::bernoulli_distribution y(sigmoid(logits[static_cast<std::size_t>(k)] + b0));
    out.data.stays[static_cast<std::size_t>(k)].label = y(label_rng) ? 1 : 0;
  }
  return out;
}

double bayes_reference_score(const SynthTruth& truth, const RawStay& stay) {
  const Matrix mask = observed_mask(stay.values);
  const Matrix x = stay.values.unaryExpr([](double v) { return std::isnan(v) ? 0.0 : v; });
  const oracle::FilterResult f =
      oracle::kalman_filter(truth.lgssm, synth_static_code(stay.statics), x, mask);
  // the smoothed and filtered means coincide at the last step
  return sigmoid(truth.readout.dot(f.filtered_mean.back()) + truth.offset);
}

std::vector<double> bayes_reference_scores(const SynthTruth& truth, std::span<const RawStay> stays) {
  std::vector<double> out;
  out.reserve(stays.size());
  for (const RawStay& s : stays) out.push_back(bayes_reference_score(truth, s));
  return out;
}

}  // namespace attdmm
