#pragma once

#include <optional>
#include <string>
#include <vector>

#include "attdmm/numcore/tensor.hpp"

namespace attdmm {

// One stay after preprocessing: x is imputed and finite everywhere, m marks
// the cells that were actually observed. Rows are 2-hour steps.
struct PatientRecord {
  std::string stay_id;
  Vector s;  // encoded static features
  Matrix x;  // T x M
  Matrix m;  // T x M, entries in {0, 1}
  std::optional<int> y;

  int steps() const { return static_cast<int>(x.rows()); }
  int features() const { return static_cast<int>(x.cols()); }
  // First `steps` rows only.
  PatientRecord truncated(int steps) const;
};

}  // namespace attdmm
