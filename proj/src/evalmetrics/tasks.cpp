#include "attdmm/evalmetrics/tasks.hpp"

#include <cmath>
#include <cstdio>

#include "attdmm/evalmetrics/metrics.hpp"
#include "attdmm/numcore/errors.hpp"
#include "attdmm/numcore/parallel.hpp"
#include "attdmm/scoring/risk.hpp"

namespace attdmm {
namespace {

std::string fmt17(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

int label_of(const PatientRecord& r) {
  if (!r.y) throw DataError("evaluation: record " + r.stay_id + " has no label");
  return *r.y;
}

struct Cohort {
  std::vector<double> scores;
  std::vector<int> labels;
};

// Scores records[i] truncated to steps[i]; entries with steps < 1 are skipped.
Cohort score_cohort(const ModelParams& params, std::span<const PatientRecord> records,
                    const std::vector<int>& steps, const EvalOptions& opts) {
  std::vector<double> scores(records.size(), 0.0);
  parallel_for(records.size(), opts.threads, [&](std::size_t i, int) {
    if (steps[i] >= 1) scores[i] = score_at_time(records[i], steps[i], params, opts.n_samples, opts.seed).mean;
  });
  Cohort c;
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (steps[i] < 1) continue;
    c.scores.push_back(scores[i]);
    c.labels.push_back(label_of(records[i]));
  }
  return c;
}

// Scores the cohort and appends a point, or records why it was omitted.
void add_point(EvalCurve& curve, double axis, const Cohort& c) {
  if (c.scores.empty()) {
    curve.omitted.push_back({axis, "no eligible records"});
    return;
  }
  std::size_t pos = 0;
  for (int y : c.labels) pos += static_cast<std::size_t>(y);
  if (pos == 0 || pos == c.labels.size()) {
    curve.omitted.push_back({axis, "single-class cohort"});
    return;
  }
  curve.points.push_back({axis, auroc(c.scores, c.labels), auprc(c.scores, c.labels),
                          static_cast<int>(c.scores.size())});
}

void finish(EvalCurve& curve) {
  if (!curve.points.empty()) {
    const auto [a, p] = weighted_aggregate(curve.points);
    curve.aggregate_auroc = a;
    curve.aggregate_auprc = p;
  }
}

}  // namespace

std::vector<int> default_horizons() {
  std::vector<int> h;
  for (int v = 12; v <= 48; v += 2) h.push_back(v);
  return h;
}

std::vector<int> default_leads() {
  std::vector<int> l;
  for (int v = -120; v <= 0; v += 2) l.push_back(v);
  return l;
}

std::pair<double, double> weighted_aggregate(std::span<const CurvePoint> points) {
  double wa = 0.0, wp = 0.0, wn = 0.0;
  for (const CurvePoint& p : points) {
    wa += p.n * p.auroc;
    wp += p.n * p.auprc;
    wn += p.n;
  }
  require(wn > 0.0, "weighted_aggregate: no points");
  return {wa / wn, wp / wn};
}

EvalCurve eval_task1(const ModelParams& params, std::span<const PatientRecord> records,
                     std::span<const int> horizons_hours, const EvalOptions& opts) {
  require(!horizons_hours.empty(), "eval_task1: no horizons");
  int longest = 0;
  for (const PatientRecord& r : records) longest = std::max(longest, r.steps());
  EvalCurve curve;
  curve.axis = "hours_after_admission";
  for (int h : horizons_hours) {
    require(h >= 2, "eval_task1: horizons must be at least 2 hours");
    const int steps = h / 2;
    if (steps > longest) {
      throw DataError("eval_task1: horizon " + std::to_string(h) + " h exceeds every record");
    }
    std::vector<int> cut;
    for (const PatientRecord& r : records) cut.push_back(r.steps() >= steps ? steps : 0);
    add_point(curve, h, score_cohort(params, records, cut, opts));
  }
  for (const CurvePoint& p : curve.points) {
    if (p.axis_hours == 48.0) curve.headline = p;
  }
  finish(curve);
  return curve;
}

EvalCurve eval_task2(const ModelParams& params, std::span<const PatientRecord> records,
                     std::span<const int> leads_hours, const EvalOptions& opts) {
  require(!leads_hours.empty(), "eval_task2: no lead times");
  EvalCurve curve;
  curve.axis = "hours_to_outcome";
  for (int lead : leads_hours) {
    require(lead <= 0, "eval_task2: lead times are non-positive hours");
    // nearest grid step, halves rounded away from the outcome
    const int back = static_cast<int>(std::lround(std::abs(lead) / 2.0));
    std::vector<int> cut;
    for (const PatientRecord& r : records) cut.push_back(std::max(0, r.steps() - back));
    add_point(curve, lead, score_cohort(params, records, cut, opts));
  }
  finish(curve);
  return curve;
}

std::string eval_curve_csv(const EvalCurve& curve) {
  std::string out = "axis_hours,auroc,auprc,n\n";
  for (const CurvePoint& p : curve.points) {
    out += fmt17(p.axis_hours) + "," + fmt17(p.auroc) + "," + fmt17(p.auprc) + "," +
           std::to_string(p.n) + "\n";
  }
  out += "# axis," + curve.axis + "\n";
  if (!curve.points.empty()) {
    out += "# aggregate_auroc," + fmt17(curve.aggregate_auroc) + "\n";
    out += "# aggregate_auprc," + fmt17(curve.aggregate_auprc) + "\n";
  }
  if (curve.headline) {
    out += "# headline_auroc," + fmt17(curve.headline->auroc) + "\n";
    out += "# headline_auprc," + fmt17(curve.headline->auprc) + "\n";
  }
  for (const OmittedPoint& o : curve.omitted) {
    out += "# omitted," + fmt17(o.axis_hours) + "," + o.reason + "\n";
  }
  return out;
}

}  // namespace attdmm
