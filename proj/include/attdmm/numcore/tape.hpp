#pragma once

#include <cstdint>
#include <initializer_list>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "attdmm/numcore/tensor.hpp"

// Reverse-mode differentiation over dense matrices.
//
// A Tape records every operation applied to Var handles. Values and
// gradients live in two flat arenas owned by the tape, so clearing and
// reusing a tape for the next record does not allocate. Nodes are stored in
// creation order, which is already a topological order; backward() walks it
// in reverse.
//
// The op set is the one the model needs and nothing more.
namespace attdmm::ad {

enum class Op : std::uint8_t {
  Leaf,
  Affine,
  MatVec,
  Add,
  Sub,
  Hadamard,
  GateMix,
  Concat,
  Relu,
  Sigmoid,
  Softplus,
  ScaledTanh,
  ScaleConst,
  AddN,
  Sum,
  Cosine,
  Stack,
  ScaleBy,
  Softmax,
  WeightedSum,
  MaskedLogLik,
  KlDiag,
  Reparam,
  WeightedCe,
};

const char* op_name(Op op);

class Tape;

class Var {
 public:
  Var() = default;

  Tape* tape() const { return tape_; }
  int id() const { return id_; }
  bool valid() const { return tape_ != nullptr; }

  Eigen::Index rows() const;
  Eigen::Index cols() const;
  Eigen::Index size() const { return rows() * cols(); }
  Eigen::Map<const Matrix> value() const;
  double scalar() const;

 private:
  friend class Tape;
  Var(Tape* tape, int id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  int id_ = -1;
};

class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  // Leaves are both constants and parameters; the distinction only matters
  // to the caller, who decides which gradients to read back.
  Var leaf(const Eigen::Ref<const Matrix>& value);
  Var leaf(double value);

  void clear();
  std::size_t num_nodes() const { return nodes_.size(); }

  Eigen::Map<const Matrix> value(const Var& v) const;
  // Valid after backward(); zero for nodes the root does not depend on.
  Eigen::Map<const Matrix> grad(const Var& v) const;

  // Seeds d(root)/d(root) = 1 and propagates. Throws ContractViolation for a
  // non-scalar root, NumericError if any recorded value is not finite.
  void backward(const Var& root);

  // Low-level recording used by the op functions below.
  Var record(Op op, Eigen::Index rows, Eigen::Index cols, std::span<const Var> parents,
             double k1 = 0.0, double k2 = 0.0);
  Var record(Op op, Eigen::Index rows, Eigen::Index cols, std::initializer_list<Var> parents,
             double k1 = 0.0, double k2 = 0.0) {
    return record(op, rows, cols, std::span<const Var>(parents.begin(), parents.size()), k1, k2);
  }
  Eigen::Map<Matrix> mutable_value(const Var& v);

 private:
  struct Node {
    Op op;
    Eigen::Index rows;
    Eigen::Index cols;
    std::size_t offset;
    int parent_begin;
    int parent_count;
    double k1;
    double k2;
  };

  Eigen::Map<const Matrix> value_of(int id) const;
  Eigen::Map<Matrix> grad_of(int id);
  int parent(const Node& n, int i) const { return parents_[n.parent_begin + i]; }
  void check_finite() const;
  void backprop(int id);

  std::vector<Node> nodes_;
  std::vector<int> parents_;
  std::vector<double> values_;
  std::vector<double> grads_;
  bool has_grads_ = false;
};

// Gradients of a scalar root with respect to each requested Var, in order.
std::vector<Matrix> reverse_gradients(Tape& tape, const Var& root, std::span<const Var> wrt);

// ---- differentiable ops (same names as the plain kernels in functions.hpp) ----

Var affine(const Var& w, const Var& x, const Var& b);
Var matvec(const Var& w, const Var& x);
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var hadamard(const Var& a, const Var& b);
Var gate_mix(const Var& gate, const Var& a, const Var& b);
Var concat(const Var& a, const Var& b);
Var relu(const Var& x);
Var sigmoid(const Var& x);
Var softplus(const Var& x, double floor = 0.0);
Var scaled_tanh(const Var& x, double scale);
Var scale(const Var& x, double k);
Var add_n(std::span<const Var> xs);
Var sum(const Var& x);
// Cosine similarity of two vectors; 0 (with zero gradient) if either has zero norm.
Var cosine_similarity(const Var& a, const Var& b);
Var stack(std::span<const Var> scalars);
// scalar (1x1) times vector
Var scale_by(const Var& scalar, const Var& x);
Var softmax(const Var& logits);
Var weighted_sum(const Var& weights, std::span<const Var> xs);
Var masked_gaussian_loglik(const Var& x, const Var& mask, const DiagGaussian<Var>& g);
Var kl_diag_gaussians(const DiagGaussian<Var>& q, const DiagGaussian<Var>& p);
Var reparam_sample(const DiagGaussian<Var>& g, const Var& eps);
// -rho*y*log(yhat) - (1-y)*log(1-yhat), yhat clamped to [clamp, 1-clamp].
Var weighted_cross_entropy(const Var& yhat, double y, double rho, double clamp = 1e-12);

// Uniform accessors used by the templated network code.
inline Var to_scalar(const Var& v) { return v; }
inline Var as_value(const Var& v) { return v; }
inline Eigen::Map<const Matrix> value_of(const Var& v) { return v.value(); }

inline Var operator+(const Var& a, const Var& b) { return add(a, b); }
inline Var operator-(const Var& a, const Var& b) { return sub(a, b); }

}  // namespace attdmm::ad
