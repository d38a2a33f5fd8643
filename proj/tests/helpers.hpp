#pragma once

#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include <doctest.h>

#include "attdmm/cli/checks.hpp"
#include "attdmm/numcore/tape.hpp"

namespace attdmm::test {

inline Matrix random_matrix(std::mt19937_64& rng, Eigen::Index rows, Eigen::Index cols, double scale = 1.0) {
  std::normal_distribution<double> n(0.0, scale);
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m(i) = n(rng);
  return m;
}

using OpBuilder = std::function<ad::Var(ad::Tape&, const std::vector<ad::Var>&)>;

// Max relative error of the tape gradient of sum(w .* op(inputs)) against
// central differences, over all input entries.
inline double op_gradient_error(const OpBuilder& build, const std::vector<Matrix>& inputs,
                                std::uint64_t seed = 1, double h = 1e-6) {
  std::mt19937_64 rng(seed);
  ad::Tape probe;
  std::vector<ad::Var> leaves;
  for (const Matrix& m : inputs) leaves.push_back(probe.leaf(m));
  const ad::Var out0 = build(probe, leaves);
  const Matrix w = random_matrix(rng, out0.rows(), out0.cols());

  auto eval = [&](const std::vector<Matrix>& in) {
    ad::Tape t;
    std::vector<ad::Var> l;
    for (const Matrix& m : in) l.push_back(t.leaf(m));
    return build(t, l).value().cwiseProduct(w).sum();
  };

  ad::Tape tape;
  std::vector<ad::Var> vars;
  for (const Matrix& m : inputs) vars.push_back(tape.leaf(m));
  const ad::Var out = build(tape, vars);
  const ad::Var root = ad::sum(ad::hadamard(out, tape.leaf(w)));
  const std::vector<Matrix> grads = ad::reverse_gradients(tape, root, vars);

  double worst = 0.0;
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    for (Eigen::Index i = 0; i < inputs[k].size(); ++i) {
      std::vector<Matrix> plus = inputs, minus = inputs;
      plus[k](i) += h;
      minus[k](i) -= h;
      const double fd = (eval(plus) - eval(minus)) / (2.0 * h);
      const double err = std::abs(fd - grads[k](i)) / std::max(1.0, std::abs(fd));
      worst = std::max(worst, err);
    }
  }
  return worst;
}

// Small preprocessed synthetic cohort.
inline SyntheticCohort small_cohort(int records, int steps, int features, double missing,
                                    std::uint64_t seed = 3, double prevalence = 0.3) {
  SynthConfig sc;
  sc.records = records;
  sc.min_steps = sc.max_steps = steps;
  sc.feature_dim = features;
  sc.missing_rate = missing;
  sc.prevalence = prevalence;
  sc.seed = seed;
  return make_synthetic_cohort(sc);
}

inline Dims dims_for(const SyntheticCohort& c, int latent = 4) {
  Dims d;
  d.latent_dim = latent;
  d.feature_dim = static_cast<int>(c.records.front().x.cols());
  d.static_dim = c.normalizer.static_dim();
  d.transition_hidden = 8;
  d.emission_hidden = 8;
  d.rnn_dim = 6;
  d.attention_dim = 5;
  d.predictor_hidden = 3;
  return d;
}

}  // namespace attdmm::test
