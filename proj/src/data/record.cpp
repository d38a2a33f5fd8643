#include "attdmm/data/record.hpp"

#include "attdmm/numcore/errors.hpp"

namespace attdmm {

PatientRecord PatientRecord::truncated(int n) const {
  require(n >= 1 && n <= steps(), "truncated: steps must be in [1, T]");
  return {stay_id, s, x.topRows(n), m.topRows(n), y};
}

}  // namespace attdmm
