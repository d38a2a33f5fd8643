#include "attdmm/oracle/kalman.hpp"

#include <cmath>
#include <sstream>

#include <Eigen/Cholesky>

#include "attdmm/numcore/errors.hpp"
#include "attdmm/numcore/functions.hpp"

namespace attdmm::oracle {
namespace {

void symmetrize(Matrix& p) { p = 0.5 * (p + p.transpose()).eval(); }

void require_finite(const Matrix& p, int step) {
  if (!p.allFinite()) {
    std::ostringstream os;
    os << "kalman filter: non-finite covariance at step " << step;
    throw NumericError(os.str());
  }
}

}  // namespace

void LGSSM::validate() const {
  const Eigen::Index d_ = A.rows();
  require(A.cols() == d_ && b.size() == d_ && q.size() == d_ && B.rows() == d_,
          "LGSSM: dynamics shape mismatch");
  require(C.cols() == d_ && d.size() == C.rows() && r.size() == C.rows(),
          "LGSSM: emission shape mismatch");
  require(z0_mean.size() == d_ && z0_cov.rows() == d_ && z0_cov.cols() == d_,
          "LGSSM: initial state shape mismatch");
  require((q.array() > 0.0).all() && (r.array() > 0.0).all(),
          "LGSSM: noise variances must be positive");
}

LGSSM lgssm_from_linear_model(const ModelParams& params) {
  if (!params.settings.linear_mode) {
    throw ContractViolation("lgssm_from_linear_model: model is not in linear mode");
  }
  const Weights<Tensor>& w = params.weights;
  const int L = params.dims.latent_dim;
  const int S = params.dims.static_dim;
  const double floor = params.settings.var_floor;
  LGSSM m;
  m.A = w.transition.linear_w.leftCols(L);
  m.B = w.transition.linear_w.rightCols(S);
  m.b = w.transition.linear_b;
  m.q = softplus(w.transition.sigma_b, floor).array().square();
  m.C = w.emission.linear_w;
  m.d = w.emission.linear_b;
  m.r = softplus(w.emission.sigma_b, floor).array().square();
  m.z0_mean = w.z0;
  m.z0_cov = Matrix::Zero(L, L);
  return m;
}

FilterResult kalman_filter(const LGSSM& m, const Vector& s, const Matrix& x, const Matrix& mask) {
  m.validate();
  require(x.rows() == mask.rows() && x.cols() == mask.cols() && x.cols() == m.feature_dim(),
          "kalman_filter: observation shape mismatch");
  require(m.B.cols() == s.size(), "kalman_filter: static input length mismatch");
  const Eigen::Index dim = m.latent_dim();
  const Vector drive = m.B * s + m.b;
  const Matrix Q = m.q.asDiagonal();

  FilterResult out;
  Vector mu = m.z0_mean;
  Matrix P = m.z0_cov;
  for (Eigen::Index t = 0; t < x.rows(); ++t) {
    mu = m.A * mu + drive;
    P = m.A * P * m.A.transpose() + Q;
    symmetrize(P);
    require_finite(P, static_cast<int>(t));
    out.predicted_mean.push_back(mu);
    out.predicted_cov.push_back(P);

    std::vector<Eigen::Index> obs;
    for (Eigen::Index i = 0; i < x.cols(); ++i) {
      if (mask(t, i) != 0.0) obs.push_back(i);
    }
    if (!obs.empty()) {
      const auto k = static_cast<Eigen::Index>(obs.size());
      Matrix Co(k, dim);
      Vector innov(k);
      Vector ro(k);
      for (Eigen::Index j = 0; j < k; ++j) {
        Co.row(j) = m.C.row(obs[j]);
        innov(j) = x(t, obs[j]) - m.d(obs[j]);
        ro(j) = m.r(obs[j]);
      }
      innov -= Co * mu;
      Matrix Sm = Co * P * Co.transpose();
      Sm.diagonal() += ro;
      symmetrize(Sm);
      Eigen::LLT<Matrix> llt(Sm);
      if (llt.info() != Eigen::Success) {
        std::ostringstream os;
        os << "kalman filter: innovation covariance not positive definite at step " << t;
        throw NumericError(os.str());
      }
      const Matrix L = llt.matrixL();
      const double logdet = 2.0 * L.diagonal().array().log().sum();
      const Vector alpha = llt.solve(innov);
      out.loglik += -kHalfLog2Pi * static_cast<double>(k) - 0.5 * logdet - 0.5 * innov.dot(alpha);

      const Matrix gain = llt.solve(Co * P).transpose();  // P C^T S^-1
      mu += gain * innov;
      const Matrix ikc = Matrix::Identity(dim, dim) - gain * Co;
      P = ikc * P * ikc.transpose() + gain * ro.asDiagonal() * gain.transpose();
      symmetrize(P);
      require_finite(P, static_cast<int>(t));
    }
    out.filtered_mean.push_back(mu);
    out.filtered_cov.push_back(P);
  }
  if (!std::isfinite(out.loglik)) throw NumericError("kalman filter: non-finite log-likelihood");
  return out;
}

double kalman_loglik(const LGSSM& m, const Vector& s, const Matrix& x, const Matrix& mask) {
  return kalman_filter(m, s, x, mask).loglik;
}

SmootherResult kalman_smoother(const LGSSM& m, const Vector& s, const Matrix& x, const Matrix& mask) {
  const FilterResult f = kalman_filter(m, s, x, mask);
  const std::size_t steps = f.filtered_mean.size();
  SmootherResult out;
  out.mean.resize(steps);
  out.cov.resize(steps);
  if (steps == 0) return out;
  out.mean[steps - 1] = f.filtered_mean[steps - 1];
  out.cov[steps - 1] = f.filtered_cov[steps - 1];
  for (std::size_t t = steps - 1; t-- > 0;) {
    const Matrix& Pf = f.filtered_cov[t];
    const Matrix& Pp = f.predicted_cov[t + 1];
    const Matrix J = Pp.ldlt().solve(m.A * Pf).transpose();  // Pf A^T Pp^-1
    out.mean[t] = f.filtered_mean[t] + J * (out.mean[t + 1] - f.predicted_mean[t + 1]);
    out.cov[t] = Pf + J * (out.cov[t + 1] - Pp) * J.transpose();
    symmetrize(out.cov[t]);
  }
  return out;
}

}  // namespace attdmm::oracle
