#pragma once

#include <Eigen/Core>

namespace attdmm {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
// Parameter storage: every weight and bias is a dense column-major matrix
// (biases are n x 1).
using Tensor = Eigen::MatrixXd;

// Gaussian with diagonal covariance. V is Vector for plain evaluation and
// ad::Var when the computation is being recorded.
template <class V>
struct DiagGaussian {
  V mean;
  V stddev;
};

}  // namespace attdmm
