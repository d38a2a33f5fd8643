#pragma once

#include <cstdint>
#include <string>
#include <string_view>

#include "attdmm/numcore/tape.hpp"
#include "attdmm/numcore/tensor.hpp"

namespace attdmm {

struct Dims {
  int latent_dim = 16;
  int static_dim = 7;
  int feature_dim = 12;
  int transition_hidden = 64;
  int emission_hidden = 32;
  int rnn_dim = 16;
  int attention_dim = 24;
  int predictor_hidden = 4;

  void validate() const;
  bool operator==(const Dims&) const = default;
};

// The parameter trees below are templated on the leaf type T. T = Tensor for
// storage (and gradient accumulators), T = ad::Var once bound to a tape.
// visit(f, trees...) calls f(name, leaf...) across any number of trees of the
// same layout, which is how binding, Adam, checkpointing and finite
// differences walk the parameters.

// Shared by the transition and emission networks: a gate net, a two-layer
// nonlinear mean, an affine mean and a stddev head on ReLU(nonlinear mean).
template <class T>
struct GatedNetParams {
  T gate_hidden_w, gate_hidden_b;
  T gate_w, gate_b;
  T nonlinear_hidden_w, nonlinear_hidden_b;
  T nonlinear_w, nonlinear_b;
  T linear_w, linear_b;
  T sigma_w, sigma_b;

  template <class F, class... S>
  static void visit(F&& f, S&&... s) {
    f("gate_hidden_w", s.gate_hidden_w...);
    f("gate_hidden_b", s.gate_hidden_b...);
    f("gate_w", s.gate_w...);
    f("gate_b", s.gate_b...);
    f("nonlinear_hidden_w", s.nonlinear_hidden_w...);
    f("nonlinear_hidden_b", s.nonlinear_hidden_b...);
    f("nonlinear_w", s.nonlinear_w...);
    f("nonlinear_b", s.nonlinear_b...);
    f("linear_w", s.linear_w...);
    f("linear_b", s.linear_b...);
    f("sigma_w", s.sigma_w...);
    f("sigma_b", s.sigma_b...);
  }
};

template <class T>
using TransitionParams = GatedNetParams<T>;
template <class T>
using EmissionParams = GatedNetParams<T>;

template <class T>
struct AttentionParams {
  T key_w, key_b;
  T query;        // attention_dim x 1
  T temperature;  // 1 x 1

  template <class F, class... S>
  static void visit(F&& f, S&&... s) {
    f("key_w", s.key_w...);
    f("key_b", s.key_b...);
    f("query", s.query...);
    f("temperature", s.temperature...);
  }
};

template <class T>
struct PredictorParams {
  T hidden_w, hidden_b;
  T out_w, out_b;  // 1 x predictor_hidden, 1 x 1

  template <class F, class... S>
  static void visit(F&& f, S&&... s) {
    f("hidden_w", s.hidden_w...);
    f("hidden_b", s.hidden_b...);
    f("out_w", s.out_w...);
    f("out_b", s.out_b...);
  }
};

// Backward ReLU recurrence over [m_t; x_t] plus the combiner network.
template <class T>
struct PosteriorParams {
  T rnn_input_w, rnn_recurrent_w, rnn_b;
  T combiner_w, combiner_b;
  T mean_w, mean_b;
  T sigma_w, sigma_b;

  template <class F, class... S>
  static void visit(F&& f, S&&... s) {
    f("rnn_input_w", s.rnn_input_w...);
    f("rnn_recurrent_w", s.rnn_recurrent_w...);
    f("rnn_b", s.rnn_b...);
    f("combiner_w", s.combiner_w...);
    f("combiner_b", s.combiner_b...);
    f("mean_w", s.mean_w...);
    f("mean_b", s.mean_b...);
    f("sigma_w", s.sigma_w...);
    f("sigma_b", s.sigma_b...);
  }
};

template <class T>
struct Weights {
  TransitionParams<T> transition;
  EmissionParams<T> emission;
  AttentionParams<T> attention;
  PredictorParams<T> predictor;
  PosteriorParams<T> posterior;
  T z0;  // parent of z_1 in the prior

  template <class F, class... S>
  static void visit(F&& f, S&&... s) {
    auto prefixed = [&f](std::string_view prefix) {
      return [&f, prefix](std::string_view name, auto&... leaves) {
        std::string full(prefix);
        full += '.';
        full += name;
        f(std::string_view(full), leaves...);
      };
    };
    GatedNetParams<T>::visit(prefixed("transition"), s.transition...);
    GatedNetParams<T>::visit(prefixed("emission"), s.emission...);
    AttentionParams<T>::visit(prefixed("attention"), s.attention...);
    PredictorParams<T>::visit(prefixed("predictor"), s.predictor...);
    PosteriorParams<T>::visit(prefixed("posterior"), s.posterior...);
    f(std::string_view("z0"), s.z0...);
  }
};

struct NetSettings {
  double var_floor = 1e-4;
  // Test hook: gates forced to 0 and stddevs to softplus(sigma_b) + var_floor,
  // which turns the generative model into a linear-Gaussian state-space model.
  bool linear_mode = false;
};

struct ModelParams {
  Dims dims;
  Weights<Tensor> weights;
  NetSettings settings;
};

// Scaled-uniform weights (bound 1/sqrt(fan_in)), zero biases, zero z0,
// nonzero query, temperature 1. Deterministic in (dims, seed).
ModelParams init_params(const Dims& dims, std::uint64_t seed, double var_floor = 1e-4,
                        bool linear_mode = false);

// Same layout, all zeros.
Weights<Tensor> zeros_like(const Weights<Tensor>& w);

// Throws DataError naming the first tensor whose shape does not match dims.
void check_shapes(const Weights<Tensor>& w, const Dims& dims);

std::size_t parameter_count(const Weights<Tensor>& w);

Weights<ad::Var> bind(ad::Tape& tape, const Weights<Tensor>& w);

// acc += scale * d(root)/d(bound) after tape.backward(root).
void accumulate_gradients(const ad::Tape& tape, const Weights<ad::Var>& bound,
                          Weights<Tensor>& acc, double scale = 1.0);

}  // namespace attdmm
