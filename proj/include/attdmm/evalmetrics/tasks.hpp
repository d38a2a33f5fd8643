#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "attdmm/data/record.hpp"
#include "attdmm/model/params.hpp"

namespace attdmm {

struct CurvePoint {
  double axis_hours = 0.0;
  double auroc = 0.0;
  double auprc = 0.0;
  int n = 0;
};

struct OmittedPoint {
  double axis_hours = 0.0;
  std::string reason;
};

struct EvalCurve {
  std::string axis;  // "hours_after_admission" or "hours_to_outcome"
  std::vector<CurvePoint> points;
  std::vector<OmittedPoint> omitted;
  // sum_p n_p * metric_p / sum_p n_p over the reported points
  double aggregate_auroc = 0.0;
  double aggregate_auprc = 0.0;
  std::optional<CurvePoint> headline;  // Task 1: the 48 h point when present
};

struct EvalOptions {
  int n_samples = 10;
  std::uint64_t seed = 0;
  int threads = 0;  // 0: hardware concurrency
};

// 12, 14, ..., 48
std::vector<int> default_horizons();
// -120, -118, ..., 0
std::vector<int> default_leads();

// Mortality from the first h hours (h/2 steps). Records shorter than the
// horizon are left out of that point. Throws DataError when a horizon
// exceeds every record.
EvalCurve eval_task1(const ModelParams& params, std::span<const PatientRecord> records,
                     std::span<const int> horizons_hours, const EvalOptions& opts);

// Forecast issued |lead| hours before discharge/death: each record is
// truncated to T - |lead|/2 steps (nearest step) and enters the point only
// if at least one step remains.
EvalCurve eval_task2(const ModelParams& params, std::span<const PatientRecord> records,
                     std::span<const int> leads_hours, const EvalOptions& opts);

// axis_hours,auroc,auprc,n rows followed by '#' footer lines with the
// aggregate and any omitted points.
std::string eval_curve_csv(const EvalCurve& curve);

// Recomputes the weighted aggregates from the points.
std::pair<double, double> weighted_aggregate(std::span<const CurvePoint> points);

}  // namespace attdmm
