#pragma once

#include <span>
#include <string>
#include <vector>

#include "attdmm/data/csv_io.hpp"
#include "attdmm/data/record.hpp"

namespace attdmm {

struct ImputedSeries {
  Vector values;
  Vector mask;
};

// NaN marks a missing cell. Interior gaps are linearly interpolated between
// the nearest observed neighbours, leading/trailing gaps take the nearest
// observed value, and an all-missing series is set to `fill`.
ImputedSeries impute_and_mask(const Vector& raw, double fill);

// Column-wise impute_and_mask; fill(i) is used for an all-missing column i.
void impute_and_mask(const Matrix& raw, const Vector& fill, Matrix& values, Matrix& mask);

// Per-feature z-scores fitted on observed training cells, z-scored age,
// binary statics as 0/1 and a one-hot block over the admission types seen
// in training (sorted). An unseen admission type encodes as all zeros.
class Normalizer {
 public:
  static constexpr double kMinStddev = 1e-6;

  void fit(std::span<const RawStay> train);
  bool fitted() const { return fitted_; }

  // Normalizes observed cells, then imputes; all-missing features get the
  // training mean, i.e. 0 in normalized units.
  PatientRecord apply(const RawStay& stay) const;
  std::vector<PatientRecord> apply(std::span<const RawStay> stays) const;

  Vector encode_statics(const StaticFeatures& s) const;
  Matrix inverse_features(const Matrix& normalized) const;
  double inverse_age(double normalized) const;

  int static_dim() const { return 4 + static_cast<int>(admission_types.size()); }

  Vector feature_mean;
  Vector feature_std;
  double age_mean = 0.0;
  double age_std = 1.0;
  std::vector<std::string> admission_types;

  void mark_fitted() { fitted_ = true; }

 private:
  void require_fitted() const;
  bool fitted_ = false;
};

}  // namespace attdmm
