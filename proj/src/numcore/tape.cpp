#include "attdmm/numcore/tape.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "attdmm/numcore/errors.hpp"
#include "attdmm/numcore/functions.hpp"

namespace attdmm::ad {

const char* op_name(Op op) {
  switch (op) {
    case Op::Leaf: return "leaf";
    case Op::Affine: return "affine";
    case Op::MatVec: return "matvec";
    case Op::Add: return "add";
    case Op::Sub: return "sub";
    case Op::Hadamard: return "hadamard";
    case Op::GateMix: return "gate_mix";
    case Op::Concat: return "concat";
    case Op::Relu: return "relu";
    case Op::Sigmoid: return "sigmoid";
    case Op::Softplus: return "softplus";
    case Op::ScaledTanh: return "scaled_tanh";
    case Op::ScaleConst: return "scale";
    case Op::AddN: return "add_n";
    case Op::Sum: return "sum";
    case Op::Cosine: return "cosine_similarity";
    case Op::Stack: return "stack";
    case Op::ScaleBy: return "scale_by";
    case Op::Softmax: return "softmax";
    case Op::WeightedSum: return "weighted_sum";
    case Op::MaskedLogLik: return "masked_gaussian_loglik";
    case Op::KlDiag: return "kl_diag_gaussians";
    case Op::Reparam: return "reparam_sample";
    case Op::WeightedCe: return "weighted_cross_entropy";
  }
  return "?";
}

Eigen::Index Var::rows() const { return tape_->value(*this).rows(); }
Eigen::Index Var::cols() const { return tape_->value(*this).cols(); }
Eigen::Map<const Matrix> Var::value() const { return tape_->value(*this); }
double Var::scalar() const {
  auto v = value();
  require(v.size() == 1, "Var::scalar on a non-scalar value");
  return v(0, 0);
}

Var Tape::record(Op op, Eigen::Index rows, Eigen::Index cols, std::span<const Var> parents,
                 double k1, double k2) {
  Node n{op, rows, cols, values_.size(), static_cast<int>(parents_.size()),
         static_cast<int>(parents.size()), k1, k2};
  for (const Var& p : parents) {
    require(p.tape_ == this, std::string(op_name(op)) + ": operand belongs to another tape");
    parents_.push_back(p.id_);
  }
  values_.resize(values_.size() + static_cast<std::size_t>(rows * cols));
  nodes_.push_back(n);
  has_grads_ = false;
  return Var(this, static_cast<int>(nodes_.size()) - 1);
}

Var Tape::leaf(const Eigen::Ref<const Matrix>& value) {
  Var v = record(Op::Leaf, value.rows(), value.cols(), std::span<const Var>{});
  mutable_value(v) = value;
  return v;
}

Var Tape::leaf(double value) {
  Var v = record(Op::Leaf, 1, 1, std::span<const Var>{});
  mutable_value(v)(0, 0) = value;
  return v;
}

void Tape::clear() {
  nodes_.clear();
  parents_.clear();
  values_.clear();
  grads_.clear();
  has_grads_ = false;
}

Eigen::Map<const Matrix> Tape::value_of(int id) const {
  const Node& n = nodes_[id];
  return Eigen::Map<const Matrix>(values_.data() + n.offset, n.rows, n.cols);
}

Eigen::Map<Matrix> Tape::grad_of(int id) {
  const Node& n = nodes_[id];
  return Eigen::Map<Matrix>(grads_.data() + n.offset, n.rows, n.cols);
}

Eigen::Map<const Matrix> Tape::value(const Var& v) const {
  require(v.tape_ == this, "value: Var belongs to another tape");
  return value_of(v.id_);
}

Eigen::Map<Matrix> Tape::mutable_value(const Var& v) {
  const Node& n = nodes_[v.id_];
  return Eigen::Map<Matrix>(values_.data() + n.offset, n.rows, n.cols);
}

Eigen::Map<const Matrix> Tape::grad(const Var& v) const {
  require(v.tape_ == this, "grad: Var belongs to another tape");
  require(has_grads_, "grad: backward() has not been run since the last record");
  const Node& n = nodes_[v.id_];
  return Eigen::Map<const Matrix>(grads_.data() + n.offset, n.rows, n.cols);
}

void Tape::check_finite() const {
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    const Node& n = nodes_[i];
    const double* p = values_.data() + n.offset;
    const double* e = p + n.rows * n.cols;
    if (std::any_of(p, e, [](double v) { return !std::isfinite(v); })) {
      std::ostringstream os;
      os << "non-finite value in forward pass at node " << i << " (" << op_name(n.op) << ")";
      throw NumericError(os.str());
    }
  }
}

void Tape::backward(const Var& root) {
  require(root.tape_ == this, "backward: root belongs to another tape");
  const Node& r = nodes_[root.id_];
  require(r.rows == 1 && r.cols == 1, "backward: root must be a scalar");
  check_finite();
  grads_.assign(values_.size(), 0.0);
  grads_[r.offset] = 1.0;
  for (int id = root.id_; id >= 0; --id) {
    if (nodes_[id].op != Op::Leaf) backprop(id);
  }
  has_grads_ = true;
}

void Tape::backprop(int id) {
  const Node& n = nodes_[id];
  auto g = grad_of(id);
  if (g.isZero(0.0)) return;
  auto y = value_of(id);
  auto in = [&](int i) { return value_of(parent(n, i)); };
  auto gin = [&](int i) { return grad_of(parent(n, i)); };

  switch (n.op) {
    case Op::Leaf:
      break;
    case Op::Affine:
      gin(2) += g;
      [[fallthrough]];
    case Op::MatVec:
      gin(0).noalias() += g * in(1).transpose();
      gin(1).noalias() += in(0).transpose() * g;
      break;
    case Op::Add:
      gin(0) += g;
      gin(1) += g;
      break;
    case Op::Sub:
      gin(0) += g;
      gin(1) -= g;
      break;
    case Op::Hadamard:
      gin(0).array() += g.array() * in(1).array();
      gin(1).array() += g.array() * in(0).array();
      break;
    case Op::GateMix: {
      auto gate = in(0).array();
      gin(0).array() += g.array() * (in(1).array() - in(2).array());
      gin(1).array() += g.array() * gate;
      gin(2).array() += g.array() * (1.0 - gate);
      break;
    }
    case Op::Concat: {
      const Eigen::Index na = in(0).rows();
      gin(0) += g.topRows(na);
      gin(1) += g.bottomRows(g.rows() - na);
      break;
    }
    case Op::Relu:
      gin(0).array() += (in(0).array() > 0.0).select(g.array(), 0.0);
      break;
    case Op::Sigmoid:
      gin(0).array() += g.array() * y.array() * (1.0 - y.array());
      break;
    case Op::Softplus:
      gin(0).array() += g.array() * in(0).array().unaryExpr([](double v) { return attdmm::sigmoid(v); });
      break;
    case Op::ScaledTanh:
      gin(0).array() += g.array() * n.k1 * (1.0 - in(0).array().tanh().square());
      break;
    case Op::ScaleConst:
      gin(0) += n.k1 * g;
      break;
    case Op::AddN:
      for (int i = 0; i < n.parent_count; ++i) gin(i) += g;
      break;
    case Op::Sum:
      gin(0).array() += g(0, 0);
      break;
    case Op::Cosine: {
      if (n.k1 != 0.0) break;  // degenerate: similarity held at 0
      auto a = in(0);
      auto b = in(1);
      const double na = a.norm();
      const double nb = b.norm();
      const double s = y(0, 0);
      const double gs = g(0, 0);
      gin(0) += gs * (b / (na * nb) - (s / (na * na)) * a);
      gin(1) += gs * (a / (na * nb) - (s / (nb * nb)) * b);
      break;
    }
    case Op::Stack:
      for (int i = 0; i < n.parent_count; ++i) gin(i)(0, 0) += g(i, 0);
      break;
    case Op::ScaleBy: {
      const double s = in(0)(0, 0);
      gin(0)(0, 0) += g.cwiseProduct(in(1)).sum();
      gin(1) += s * g;
      break;
    }
    case Op::Softmax: {
      const double gy = g.cwiseProduct(y).sum();
      gin(0).array() += y.array() * (g.array() - gy);
      break;
    }
    case Op::WeightedSum: {
      auto w = in(0);
      for (int i = 1; i < n.parent_count; ++i) {
        gin(0)(i - 1, 0) += g.cwiseProduct(in(i)).sum();
        gin(i) += w(i - 1, 0) * g;
      }
      break;
    }
    case Op::MaskedLogLik: {
      auto x = in(0).array();
      auto m = in(1).array();
      auto mu = in(2).array();
      auto sd = in(3).array();
      const double gs = g(0, 0);
      const Eigen::ArrayXXd r = (x - mu) / sd;
      gin(0).array() -= gs * m * r / sd;
      gin(2).array() += gs * m * r / sd;
      gin(3).array() += gs * m * (r.square() - 1.0) / sd;
      break;
    }
    case Op::KlDiag: {
      auto mq = in(0).array();
      auto sq = in(1).array();
      auto mp = in(2).array();
      auto sp = in(3).array();
      const double gs = g(0, 0);
      const Eigen::ArrayXXd dm = mq - mp;
      const Eigen::ArrayXXd vp = sp.square();
      gin(0).array() += gs * dm / vp;
      gin(1).array() += gs * (sq / vp - 1.0 / sq);
      gin(2).array() -= gs * dm / vp;
      gin(3).array() += gs * (1.0 / sp - (sq.square() + dm.square()) / (vp * sp));
      break;
    }
    case Op::Reparam:
      gin(0) += g;
      gin(1).array() += g.array() * in(2).array();
      gin(2).array() += g.array() * in(1).array();
      break;
    case Op::WeightedCe: {
      // k1 = rho*y, k2 = 1-y; clamp bound stored after the parent list.
      const double clamp = value_of(parent(n, 1))(0, 0);
      const double yhat = in(0)(0, 0);
      if (yhat <= clamp || yhat >= 1.0 - clamp) break;
      gin(0)(0, 0) += g(0, 0) * (-n.k1 / yhat + n.k2 / (1.0 - yhat));
      break;
    }
  }
}

std::vector<Matrix> reverse_gradients(Tape& tape, const Var& root, std::span<const Var> wrt) {
  tape.backward(root);
  std::vector<Matrix> out;
  out.reserve(wrt.size());
  for (const Var& v : wrt) out.emplace_back(tape.grad(v));
  return out;
}

// ---------------------------------------------------------------------------

namespace {

Tape& tape_of(const Var& v) {
  require(v.valid(), "operation on an unbound Var");
  return *v.tape();
}

void require_same_shape(const Var& a, const Var& b, const char* what) {
  require(a.rows() == b.rows() && a.cols() == b.cols(), std::string(what) + ": shape mismatch");
}

void require_column(const Var& a, const char* what) {
  require(a.cols() == 1, std::string(what) + ": expected a column vector");
}

}  // namespace

Var affine(const Var& w, const Var& x, const Var& b) {
  Tape& t = tape_of(w);
  require_column(x, "affine");
  require(w.cols() == x.rows() && b.rows() == w.rows() && b.cols() == 1, "affine: shape mismatch");
  Var out = t.record(Op::Affine, w.rows(), 1, {w, x, b});
  auto y = t.mutable_value(out);
  y.noalias() = t.value(w) * t.value(x);
  y += t.value(b);
  return out;
}

Var matvec(const Var& w, const Var& x) {
  Tape& t = tape_of(w);
  require_column(x, "matvec");
  require(w.cols() == x.rows(), "matvec: shape mismatch");
  Var out = t.record(Op::MatVec, w.rows(), 1, {w, x});
  t.mutable_value(out).noalias() = t.value(w) * t.value(x);
  return out;
}

Var add(const Var& a, const Var& b) {
  Tape& t = tape_of(a);
  require_same_shape(a, b, "add");
  Var out = t.record(Op::Add, a.rows(), a.cols(), {a, b});
  t.mutable_value(out) = t.value(a) + t.value(b);
  return out;
}

Var sub(const Var& a, const Var& b) {
  Tape& t = tape_of(a);
  require_same_shape(a, b, "sub");
  Var out = t.record(Op::Sub, a.rows(), a.cols(), {a, b});
  t.mutable_value(out) = t.value(a) - t.value(b);
  return out;
}

Var hadamard(const Var& a, const Var& b) {
  Tape& t = tape_of(a);
  require_same_shape(a, b, "hadamard");
  Var out = t.record(Op::Hadamard, a.rows(), a.cols(), {a, b});
  t.mutable_value(out) = t.value(a).cwiseProduct(t.value(b));
  return out;
}

Var gate_mix(const Var& gate, const Var& a, const Var& b) {
  Tape& t = tape_of(gate);
  require_same_shape(gate, a, "gate_mix");
  require_same_shape(gate, b, "gate_mix");
  Var out = t.record(Op::GateMix, a.rows(), a.cols(), {gate, a, b});
  auto g = t.value(gate).array();
  t.mutable_value(out).array() = g * t.value(a).array() + (1.0 - g) * t.value(b).array();
  return out;
}

Var concat(const Var& a, const Var& b) {
  Tape& t = tape_of(a);
  require_column(a, "concat");
  require_column(b, "concat");
  Var out = t.record(Op::Concat, a.rows() + b.rows(), 1, {a, b});
  auto y = t.mutable_value(out);
  y.topRows(a.rows()) = t.value(a);
  y.bottomRows(b.rows()) = t.value(b);
  return out;
}

Var relu(const Var& x) {
  Tape& t = tape_of(x);
  Var out = t.record(Op::Relu, x.rows(), x.cols(), {x});
  t.mutable_value(out) = t.value(x).cwiseMax(0.0);
  return out;
}

Var sigmoid(const Var& x) {
  Tape& t = tape_of(x);
  Var out = t.record(Op::Sigmoid, x.rows(), x.cols(), {x});
  t.mutable_value(out) = t.value(x).unaryExpr([](double v) { return attdmm::sigmoid(v); });
  return out;
}

Var softplus(const Var& x, double floor) {
  Tape& t = tape_of(x);
  Var out = t.record(Op::Softplus, x.rows(), x.cols(), {x}, floor);
  t.mutable_value(out) =
      t.value(x).unaryExpr([floor](double v) { return attdmm::softplus(v) + floor; });
  return out;
}

Var scaled_tanh(const Var& x, double scale) {
  Tape& t = tape_of(x);
  Var out = t.record(Op::ScaledTanh, x.rows(), x.cols(), {x}, scale);
  t.mutable_value(out) = scale * t.value(x).array().tanh().matrix();
  return out;
}

Var scale(const Var& x, double k) {
  Tape& t = tape_of(x);
  Var out = t.record(Op::ScaleConst, x.rows(), x.cols(), {x}, k);
  t.mutable_value(out) = k * t.value(x);
  return out;
}

Var add_n(std::span<const Var> xs) {
  require(!xs.empty(), "add_n: empty operand list");
  Tape& t = tape_of(xs.front());
  for (const Var& x : xs) require_same_shape(xs.front(), x, "add_n");
  Var out = t.record(Op::AddN, xs.front().rows(), xs.front().cols(), xs);
  auto y = t.mutable_value(out);
  y.setZero();
  for (const Var& x : xs) y += t.value(x);
  return out;
}

Var sum(const Var& x) {
  Tape& t = tape_of(x);
  Var out = t.record(Op::Sum, 1, 1, {x});
  t.mutable_value(out)(0, 0) = t.value(x).sum();
  return out;
}

Var cosine_similarity(const Var& a, const Var& b) {
  Tape& t = tape_of(a);
  require_same_shape(a, b, "cosine_similarity");
  const double na = t.value(a).norm();
  const double nb = t.value(b).norm();
  const bool degenerate = na == 0.0 || nb == 0.0;
  Var out = t.record(Op::Cosine, 1, 1, {a, b}, degenerate ? 1.0 : 0.0);
  t.mutable_value(out)(0, 0) =
      degenerate ? 0.0 : t.value(a).cwiseProduct(t.value(b)).sum() / (na * nb);
  return out;
}

Var stack(std::span<const Var> scalars) {
  require(!scalars.empty(), "stack: empty operand list");
  Tape& t = tape_of(scalars.front());
  for (const Var& s : scalars) require(s.size() == 1, "stack: operands must be scalars");
  Var out = t.record(Op::Stack, static_cast<Eigen::Index>(scalars.size()), 1, scalars);
  auto y = t.mutable_value(out);
  for (std::size_t i = 0; i < scalars.size(); ++i) {
    y(static_cast<Eigen::Index>(i), 0) = t.value(scalars[i])(0, 0);
  }
  return out;
}

Var scale_by(const Var& scalar, const Var& x) {
  Tape& t = tape_of(scalar);
  require(scalar.size() == 1, "scale_by: first operand must be a scalar");
  Var out = t.record(Op::ScaleBy, x.rows(), x.cols(), {scalar, x});
  t.mutable_value(out) = t.value(scalar)(0, 0) * t.value(x);
  return out;
}

Var softmax(const Var& logits) {
  Tape& t = tape_of(logits);
  require_column(logits, "softmax");
  Var out = t.record(Op::Softmax, logits.rows(), 1, {logits});
  t.mutable_value(out) = attdmm::softmax(Vector(t.value(logits)));
  return out;
}

Var weighted_sum(const Var& weights, std::span<const Var> xs) {
  Tape& t = tape_of(weights);
  require(!xs.empty() && weights.rows() == static_cast<Eigen::Index>(xs.size()) &&
              weights.cols() == 1,
          "weighted_sum: weight count mismatch");
  for (const Var& x : xs) require_same_shape(xs.front(), x, "weighted_sum");
  std::vector<Var> parents;
  parents.reserve(xs.size() + 1);
  parents.push_back(weights);
  parents.insert(parents.end(), xs.begin(), xs.end());
  Var out = t.record(Op::WeightedSum, xs.front().rows(), xs.front().cols(), parents);
  auto y = t.mutable_value(out);
  y.setZero();
  auto w = t.value(weights);
  for (std::size_t i = 0; i < xs.size(); ++i) {
    y += w(static_cast<Eigen::Index>(i), 0) * t.value(xs[i]);
  }
  return out;
}

Var masked_gaussian_loglik(const Var& x, const Var& mask, const DiagGaussian<Var>& g) {
  Tape& t = tape_of(x);
  require_same_shape(x, mask, "masked_gaussian_loglik");
  require_same_shape(x, g.mean, "masked_gaussian_loglik");
  require_same_shape(x, g.stddev, "masked_gaussian_loglik");
  require((t.value(g.stddev).array() > 0.0).all(), "masked_gaussian_loglik: stddev must be positive");
  Var out = t.record(Op::MaskedLogLik, 1, 1, {x, mask, g.mean, g.stddev});
  auto xv = t.value(x).array();
  auto mv = t.value(mask).array();
  auto mu = t.value(g.mean).array();
  auto sd = t.value(g.stddev).array();
  const Eigen::ArrayXXd r = (xv - mu) / sd;
  const Eigen::ArrayXXd ll = -kHalfLog2Pi - sd.log() - 0.5 * r.square();
  t.mutable_value(out)(0, 0) = (mv != 0.0).select(ll, 0.0).sum();
  return out;
}

Var kl_diag_gaussians(const DiagGaussian<Var>& q, const DiagGaussian<Var>& p) {
  Tape& t = tape_of(q.mean);
  require_same_shape(q.mean, p.mean, "kl_diag_gaussians");
  require_same_shape(q.mean, q.stddev, "kl_diag_gaussians");
  require_same_shape(p.mean, p.stddev, "kl_diag_gaussians");
  Var out = t.record(Op::KlDiag, 1, 1, {q.mean, q.stddev, p.mean, p.stddev});
  auto mq = t.value(q.mean).array();
  auto sq = t.value(q.stddev).array();
  auto mp = t.value(p.mean).array();
  auto sp = t.value(p.stddev).array();
  require((sq > 0.0).all() && (sp > 0.0).all(), "kl_diag_gaussians: stddev must be positive");
  t.mutable_value(out)(0, 0) =
      ((sp / sq).log() + (sq.square() + (mq - mp).square()) / (2.0 * sp.square()) - 0.5).sum();
  return out;
}

Var reparam_sample(const DiagGaussian<Var>& g, const Var& eps) {
  Tape& t = tape_of(g.mean);
  require_same_shape(g.mean, eps, "reparam_sample");
  require_same_shape(g.mean, g.stddev, "reparam_sample");
  Var out = t.record(Op::Reparam, eps.rows(), eps.cols(), {g.mean, g.stddev, eps});
  t.mutable_value(out) = t.value(g.mean) + t.value(g.stddev).cwiseProduct(t.value(eps));
  return out;
}

Var weighted_cross_entropy(const Var& yhat, double y, double rho, double clamp) {
  Tape& t = tape_of(yhat);
  require(yhat.size() == 1, "weighted_cross_entropy: prediction must be a scalar");
  Var bound = t.leaf(clamp);
  Var out = t.record(Op::WeightedCe, 1, 1, {yhat, bound}, rho * y, 1.0 - y);
  const double c = std::clamp(t.value(yhat)(0, 0), clamp, 1.0 - clamp);
  t.mutable_value(out)(0, 0) = -rho * y * std::log(c) - (1.0 - y) * std::log(1.0 - c);
  return out;
}

}  // namespace attdmm::ad
