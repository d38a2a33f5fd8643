#pragma once

#include <stdexcept>
#include <string>

namespace attdmm {

// Broken precondition on the caller's side (shape mismatch, non-scalar root, ...).
class ContractViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// NaN/Inf produced during evaluation, or an unstable filter.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed input files, schema violations, checkpoint mismatches.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline void require(bool cond, const std::string& what) {
  if (!cond) throw ContractViolation(what);
}

}  // namespace attdmm
