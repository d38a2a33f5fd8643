#pragma once

#include <span>
#include <vector>

#include "attdmm/model/params.hpp"
#include "attdmm/numcore/diagnostics.hpp"
#include "attdmm/numcore/functions.hpp"
#include "attdmm/numcore/tape.hpp"

// Generative networks. Each function is a template over the value type V
// (Vector or ad::Var) and the parameter leaf type P (Tensor or ad::Var);
// the same code runs the fast plain path and the recorded path.
namespace attdmm {

template <class V>
struct GatedOutput {
  DiagGaussian<V> dist;
  V gate;
  V nonlinear_mean;
  V linear_mean;
};

// g = sigmoid(W_g ReLU(W_g' u + b_g') + b_g)
// mu~ = W_mu~ ReLU(W_mu~' u + b_mu~') + b_mu~,  mu_ = W_lin u + b_lin
// mu = g * mu~ + (1 - g) * mu_,  sigma = softplus(W_s ReLU(mu~) + b_s) + floor
// In linear mode only mu_ and the constant head softplus(b_s) + floor are
// computed; gate and nonlinear_mean are left empty.
template <class V, class P>
GatedOutput<V> gated_gaussian(const V& input, const GatedNetParams<P>& p, const NetSettings& s) {
  require(input.size() == p.linear_w.cols(), "gated network: input dimension mismatch");
  GatedOutput<V> out;
  out.linear_mean = affine(p.linear_w, input, p.linear_b);
  if (s.linear_mode) {
    out.dist.mean = out.linear_mean;
    out.dist.stddev = softplus(p.sigma_b, s.var_floor);
    return out;
  }
  out.gate = sigmoid(affine(p.gate_w, relu(affine(p.gate_hidden_w, input, p.gate_hidden_b)), p.gate_b));
  out.nonlinear_mean = affine(p.nonlinear_w,
                              relu(affine(p.nonlinear_hidden_w, input, p.nonlinear_hidden_b)),
                              p.nonlinear_b);
  out.dist.mean = gate_mix(out.gate, out.nonlinear_mean, out.linear_mean);
  out.dist.stddev = softplus(affine(p.sigma_w, relu(out.nonlinear_mean), p.sigma_b), s.var_floor);
  return out;
}

// p(z_t | z_{t-1}, s)
template <class V, class P>
DiagGaussian<V> transition(const V& z_prev, const V& s, const TransitionParams<P>& p,
                           const NetSettings& settings) {
  return gated_gaussian(V(concat(z_prev, s)), p, settings).dist;
}

// p(x_t | z_t), one univariate Gaussian per feature.
template <class V, class P>
DiagGaussian<V> emission(const V& z, const EmissionParams<P>& p, const NetSettings& settings) {
  return gated_gaussian(z, p, settings).dist;
}

template <class V>
struct AttentionOutput {
  V summary;  // sum_t gamma_t z_t
  V weights;  // gamma, T x 1
};

// gamma = softmax_t(zeta * cos(v, W z_t + b)); the summary pools the raw z_t.
template <class V, class P>
AttentionOutput<V> attention_aggregate(std::span<const V> z_path, const AttentionParams<P>& p) {
  require(!z_path.empty(), "attention_aggregate: empty latent path");
  using S = decltype(to_scalar(std::declval<V>()));
  std::vector<S> similarity;
  similarity.reserve(z_path.size());
  for (const V& z : z_path) {
    require(z.size() == p.key_w.cols(), "attention_aggregate: dimension mismatch");
    V key = affine(p.key_w, z, p.key_b);
    if (value_of(key).norm() == 0.0) diagnostics::note_degenerate_attention_key();
    similarity.push_back(cosine_similarity(p.query, key));
  }
  AttentionOutput<V> out;
  out.weights = softmax(V(scale_by(p.temperature, V(stack(std::span<const S>(similarity))))));
  out.summary = weighted_sum(out.weights, z_path);
  return out;
}

// yhat = sigmoid(U ReLU(W z~ + b) + c); returns double or a 1x1 Var.
template <class V, class P>
auto predict(const V& summary, const PredictorParams<P>& p) {
  require(summary.size() == p.hidden_w.cols(), "predict: dimension mismatch");
  return to_scalar(V(sigmoid(affine(p.out_w, relu(affine(p.hidden_w, summary, p.hidden_b)), p.out_b))));
}

}  // namespace attdmm
