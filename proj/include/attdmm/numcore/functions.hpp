#pragma once

#include <cmath>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "attdmm/numcore/errors.hpp"
#include "attdmm/numcore/tensor.hpp"

// Plain (non-recording) numeric kernels. Every function here has an
// ad::Var overload in tape.hpp with the same name and semantics, so that the
// network code in model/ and inference/ can be written once as a template.
namespace attdmm {

inline constexpr double kHalfLog2Pi = 0.91893853320467274178;

// max(x, 0) + ln(1 + exp(-|x|)); does not overflow for large |x|.
inline double softplus(double x) {
  return (x > 0.0 ? x : 0.0) + std::log1p(std::exp(-std::abs(x)));
}

inline double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

template <class Derived>
Vector relu(const Eigen::MatrixBase<Derived>& x) {
  return x.cwiseMax(0.0);
}

template <class Derived>
Vector sigmoid(const Eigen::MatrixBase<Derived>& x) {
  return x.unaryExpr([](double v) { return attdmm::sigmoid(v); });
}

// softplus(x) + floor, elementwise.
template <class Derived>
Vector softplus(const Eigen::MatrixBase<Derived>& x, double floor = 0.0) {
  return x.unaryExpr([floor](double v) { return attdmm::softplus(v) + floor; });
}

// scale * tanh(x), elementwise.
template <class Derived>
Vector scaled_tanh(const Eigen::MatrixBase<Derived>& x, double scale) {
  return scale * x.array().tanh().matrix();
}

template <class DW, class DX, class DB>
Vector affine(const Eigen::MatrixBase<DW>& w, const Eigen::MatrixBase<DX>& x,
              const Eigen::MatrixBase<DB>& b) {
  require(w.cols() == x.rows() && w.rows() == b.rows(), "affine: shape mismatch");
  return w * x + b;
}

template <class DW, class DX>
Vector matvec(const Eigen::MatrixBase<DW>& w, const Eigen::MatrixBase<DX>& x) {
  require(w.cols() == x.rows(), "matvec: shape mismatch");
  return w * x;
}

template <class DA, class DB>
Vector concat(const Eigen::MatrixBase<DA>& a, const Eigen::MatrixBase<DB>& b) {
  Vector out(a.size() + b.size());
  out << a, b;
  return out;
}

template <class DA, class DB>
Vector add(const Eigen::MatrixBase<DA>& a, const Eigen::MatrixBase<DB>& b) {
  return a + b;
}

template <class DA, class DB>
Vector hadamard(const Eigen::MatrixBase<DA>& a, const Eigen::MatrixBase<DB>& b) {
  return a.cwiseProduct(b);
}

// gate * a + (1 - gate) * b
template <class DG, class DA, class DB>
Vector gate_mix(const Eigen::MatrixBase<DG>& gate, const Eigen::MatrixBase<DA>& a,
                const Eigen::MatrixBase<DB>& b) {
  return gate.cwiseProduct(a) + (Vector::Ones(gate.size()) - gate).cwiseProduct(b);
}

// Cosine similarity; defined as 0 when either argument has zero norm.
template <class DA, class DB>
double cosine_similarity(const Eigen::MatrixBase<DA>& a, const Eigen::MatrixBase<DB>& b) {
  const double na = a.norm();
  const double nb = b.norm();
  if (na == 0.0 || nb == 0.0) return 0.0;
  return a.cwiseProduct(b).sum() / (na * nb);
}

template <class Derived>
Vector softmax(const Eigen::MatrixBase<Derived>& logits) {
  const double mx = logits.maxCoeff();
  Vector e = (logits.array() - mx).exp().matrix();
  return e / e.sum();
}

inline Vector stack(std::span<const double> values) {
  return Eigen::Map<const Vector>(values.data(), static_cast<Eigen::Index>(values.size()));
}

// scalar (1x1) times vector
template <class DS, class DX>
Vector scale_by(const Eigen::MatrixBase<DS>& scalar, const Eigen::MatrixBase<DX>& x) {
  require(scalar.size() == 1, "scale_by: first operand must be a scalar");
  return scalar(0, 0) * x;
}

inline Vector weighted_sum(const Vector& weights, std::span<const Vector> xs) {
  require(!xs.empty() && weights.size() == static_cast<Eigen::Index>(xs.size()),
          "weighted_sum: weight count mismatch");
  Vector out = Vector::Zero(xs.front().size());
  for (std::size_t i = 0; i < xs.size(); ++i) out += weights(static_cast<Eigen::Index>(i)) * xs[i];
  return out;
}

inline double add_n(std::span<const double> xs) {
  double acc = 0.0;
  for (double x : xs) acc += x;
  return acc;
}

inline double scale(double x, double k) { return k * x; }
inline double add(double a, double b) { return a + b; }
inline double sub(double a, double b) { return a - b; }

// -rho*y*log(yhat) - (1-y)*log(1-yhat), yhat clamped to [clamp, 1-clamp].
inline double weighted_cross_entropy(double yhat, double y, double rho, double clamp = 1e-12) {
  const double c = yhat < clamp ? clamp : (yhat > 1.0 - clamp ? 1.0 - clamp : yhat);
  return -rho * y * std::log(c) - (1.0 - y) * std::log(1.0 - c);
}

inline Vector as_value(const Tensor& t) { return t; }

// Uniform accessors used by the templated network code.
inline double to_scalar(const Vector& v) { return v(0); }
inline const Vector& value_of(const Vector& v) { return v; }
inline double value_of(double v) { return v; }

// Log density of N(mean, stddev^2) at x.
inline double gaussian_logpdf(double x, double mean, double stddev) {
  require(stddev > 0.0, "gaussian_logpdf: stddev must be positive");
  const double r = (x - mean) / stddev;
  return -kHalfLog2Pi - std::log(stddev) - 0.5 * r * r;
}

// Sum of per-coordinate log densities over entries with mask == 1.
template <class DX, class DM>
double masked_gaussian_loglik(const Eigen::MatrixBase<DX>& x, const Eigen::MatrixBase<DM>& mask,
                              const DiagGaussian<Vector>& g) {
  require(x.size() == g.mean.size() && mask.size() == x.size(),
          "masked_gaussian_loglik: length mismatch");
  double acc = 0.0;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    if (mask(i) != 0.0) acc += gaussian_logpdf(x(i), g.mean(i), g.stddev(i));
  }
  return acc;
}

// KL(q || p) for diagonal Gaussians, summed over dimensions.
inline double kl_diag_gaussians(const DiagGaussian<Vector>& q, const DiagGaussian<Vector>& p) {
  require(q.mean.size() == p.mean.size() && q.stddev.size() == p.stddev.size() &&
              q.mean.size() == q.stddev.size(),
          "kl_diag_gaussians: dimension mismatch");
  double acc = 0.0;
  for (Eigen::Index i = 0; i < q.mean.size(); ++i) {
    const double sq = q.stddev(i);
    const double sp = p.stddev(i);
    require(sq > 0.0 && sp > 0.0, "kl_diag_gaussians: stddev must be positive");
    const double dm = q.mean(i) - p.mean(i);
    acc += std::log(sp / sq) + (sq * sq + dm * dm) / (2.0 * sp * sp) - 0.5;
  }
  return acc;
}

template <class DE>
Vector reparam_sample(const DiagGaussian<Vector>& g, const Eigen::MatrixBase<DE>& eps) {
  require(eps.size() == g.mean.size(), "reparam_sample: length mismatch");
  return g.mean + g.stddev.cwiseProduct(eps);
}

}  // namespace attdmm
