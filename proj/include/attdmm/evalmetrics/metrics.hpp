#pragma once

#include <span>

namespace attdmm {

// Mann-Whitney AUROC, ties count 1/2. labels are 0/1; both classes required.
double auroc(std::span<const double> scores, std::span<const int> labels);

// Average precision: sum over distinct thresholds (descending score) of
// recall increment times precision at that threshold; tied scores form one
// threshold. At least one positive required.
double auprc(std::span<const double> scores, std::span<const int> labels);

struct DelongResult {
  double auroc_a = 0.0;
  double auroc_b = 0.0;
  double z = 0.0;
  double p_value = 1.0;
};

// Two-sided test of auroc_a == auroc_b on paired scores, covariance from the
// midrank structural components. A zero-variance difference reports p = 1 if
// the AUROCs are equal and p = 0 otherwise.
DelongResult delong_test(std::span<const double> scores_a, std::span<const double> scores_b,
                         std::span<const int> labels);

}  // namespace attdmm
