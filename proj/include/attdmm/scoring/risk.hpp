#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "attdmm/data/record.hpp"
#include "attdmm/model/params.hpp"

namespace attdmm {

inline constexpr int kDefaultScoringSamples = 100;

struct RiskScore {
  std::vector<double> samples;  // one prediction per posterior path
  double mean = 0.0;
  double ci_low = 0.0;   // 2.5th percentile
  double ci_high = 0.0;  // 97.5th percentile

  int n() const { return static_cast<int>(samples.size()); }
};

// Linear interpolation between order statistics (position q * (n - 1)).
double percentile(std::vector<double> values, double q);

RiskScore summarize_samples(std::vector<double> samples);

// Mortality probability from the first `steps` rows of the record only.
// Path n uses the noise stream record_noise_seed(seed, record, n).
RiskScore score_at_time(const PatientRecord& record, int steps, const ModelParams& params,
                        int n_samples, std::uint64_t seed);

struct TrajectoryPoint {
  int steps = 0;
  double hours = 0.0;  // hours from admission, 2 per step
  RiskScore score;
};

// score_at_time at stride, 2*stride, ... and finally at T.
std::vector<TrajectoryPoint> score_trajectory(const PatientRecord& record, const ModelParams& params,
                                              int n_samples, int stride, std::uint64_t seed);

// Header line of the trajectory CSV.
std::string trajectory_csv_header();
// Rows stay_id,hours_from_admission,mean,ci_low,ci_high.
std::string trajectory_csv_rows(const std::string& stay_id, const std::vector<TrajectoryPoint>& points);

}  // namespace attdmm
