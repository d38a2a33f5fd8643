#pragma once

#include <functional>
#include <string>
#include <vector>

#include "attdmm/model/params.hpp"
#include "attdmm/numcore/tensor.hpp"

namespace attdmm::oracle {

// Central differences (f(x + h e_i) - f(x - h e_i)) / 2h.
Vector fd_gradient(const std::function<double(const Vector&)>& f, const Vector& x, double h = 1e-5);

// Same, for every scalar in every parameter tensor. The loss must be
// deterministic (fixed noise seeds); two evaluations at the unperturbed point
// that disagree raise ContractViolation.
Weights<Tensor> fd_gradient(const std::function<double(const ModelParams&)>& loss,
                            const ModelParams& params, double h = 1e-5);

struct GroupError {
  std::string name;
  double relative_error = 0.0;  // ||a - b|| / max(||a||, ||b||)
  double max_abs_error = 0.0;
};

struct GradientComparison {
  std::vector<GroupError> groups;
  double max_relative_error = 0.0;
  std::string worst_group;
};

// Per-tensor relative error between two gradients of the same layout. A group
// where both norms are below 1e-12 falls back to absolute error.
GradientComparison compare_gradients(const Weights<Tensor>& a, const Weights<Tensor>& b);

}  // namespace attdmm::oracle
