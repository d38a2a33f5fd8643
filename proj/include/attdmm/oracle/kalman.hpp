#pragma once

#include <vector>

#include "attdmm/model/params.hpp"
#include "attdmm/numcore/tensor.hpp"

namespace attdmm::oracle {

// z_1 = A z_0 + B s + b + w_1,  z_t = A z_{t-1} + B s + b + w_t,  w ~ N(0, diag(q))
// x_t = C z_t + d + v_t,  v ~ N(0, diag(r)),  z_0 ~ N(z0_mean, z0_cov)
struct LGSSM {
  Matrix A;
  Matrix B;
  Vector b;
  Vector q;  // process variances
  Matrix C;
  Vector d;
  Vector r;  // observation variances
  Vector z0_mean;
  Matrix z0_cov;

  int latent_dim() const { return static_cast<int>(A.rows()); }
  int feature_dim() const { return static_cast<int>(C.rows()); }
  void validate() const;
};

// Reads the exact linear-Gaussian model implied by a linear-mode model:
// A, B from the affine transition mean split at latent_dim, q and r from the
// constant stddev heads squared, z_0 a point mass at params.z0.
LGSSM lgssm_from_linear_model(const ModelParams& params);

struct FilterResult {
  double loglik = 0.0;
  std::vector<Vector> filtered_mean;  // E[z_t | x_{1:t}]
  std::vector<Matrix> filtered_cov;
  std::vector<Vector> predicted_mean;  // E[z_t | x_{1:t-1}]
  std::vector<Matrix> predicted_cov;
};

// Kalman filter over observed cells only (mask == 1); a step without any
// observed cell is a pure prediction. Joseph-form update, covariances
// symmetrized each step. Throws NumericError on a non-finite or
// non-positive-definite covariance.
FilterResult kalman_filter(const LGSSM& m, const Vector& s, const Matrix& x, const Matrix& mask);

// log p(x_observed | s)
double kalman_loglik(const LGSSM& m, const Vector& s, const Matrix& x, const Matrix& mask);

struct SmootherResult {
  std::vector<Vector> mean;  // E[z_t | x_{1:T}]
  std::vector<Matrix> cov;
};

// Rauch-Tung-Striebel smoother on top of kalman_filter.
SmootherResult kalman_smoother(const LGSSM& m, const Vector& s, const Matrix& x, const Matrix& mask);

}  // namespace attdmm::oracle
