#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "attdmm/data/record.hpp"
#include "attdmm/model/params.hpp"
#include "attdmm/numcore/functions.hpp"
#include "attdmm/numcore/tape.hpp"

// Structured posterior q(z_t | z_{t-1}, s, x_{t:T}, m_{t:T}).
namespace attdmm {

// h_t = ReLU(W_h [m_t; x_t] + U_h h_{t+1} + b_h), run from t = T down to 1
// with h_{T+1} = 0.
template <class V, class P>
std::vector<V> encode_backward(std::span<const V> x, std::span<const V> m,
                               const PosteriorParams<P>& p) {
  require(x.size() == m.size(), "encode_backward: x and m have different lengths");
  std::vector<V> h(x.size());
  for (std::size_t k = x.size(); k-- > 0;) {
    require(x[k].size() == m[k].size() && x[k].size() + m[k].size() == p.rnn_input_w.cols(),
            "encode_backward: shape mismatch between [m_t; x_t] and the recurrence input width");
    V in = affine(p.rnn_input_w, V(concat(m[k], x[k])), p.rnn_b);
    if (k + 1 < x.size()) in = add(in, V(matvec(p.rnn_recurrent_w, h[k + 1])));
    h[k] = relu(in);
  }
  return h;
}

// c = W_c [z_{t-1}; s] + b_c,  h~ = 0.5 tanh(c + h_t)
// mu = W_mu h~ + b_mu,  sigma = softplus(W_sigma h~ + b_sigma) + floor
template <class V, class P>
DiagGaussian<V> combine(const V& z_prev, const V& s, const V& h, const PosteriorParams<P>& p,
                        const NetSettings& settings) {
  require(z_prev.size() + s.size() == p.combiner_w.cols() && h.size() == p.combiner_w.rows(),
          "combine: dimension mismatch");
  V c = affine(p.combiner_w, V(concat(z_prev, s)), p.combiner_b);
  V mixed = scaled_tanh(V(add(c, h)), 0.5);
  return {V(affine(p.mean_w, mixed, p.mean_b)),
          V(softplus(V(affine(p.sigma_w, mixed, p.sigma_b)), settings.var_floor))};
}

template <class V>
struct PathSample {
  std::vector<V> z;
  std::vector<DiagGaussian<V>> q;
};

// Sequential ancestral draw z_t = mu_t + sigma_t * eps_t, z_0 = z0.
template <class V, class P>
PathSample<V> sample_path(const V& z0, const V& s, std::span<const V> h,
                          const PosteriorParams<P>& p, const NetSettings& settings,
                          std::span<const V> eps) {
  require(h.size() == eps.size(), "sample_path: noise length mismatch");
  PathSample<V> out;
  out.z.reserve(h.size());
  out.q.reserve(h.size());
  for (std::size_t t = 0; t < h.size(); ++t) {
    const V& prev = t == 0 ? z0 : out.z.back();
    out.q.push_back(combine(prev, s, h[t], p, settings));
    out.z.push_back(reparam_sample(out.q.back(), eps[t]));
  }
  return out;
}

// ---- plain-value API ----

struct LatentPath {
  std::vector<Vector> z;
  std::vector<DiagGaussian<Vector>> q;
  std::vector<Vector> eps;
};

std::vector<Vector> rows_of(const Matrix& a);

// T standard-normal vectors of length latent_dim from one seeded stream.
// The t-th draw does not depend on T, so truncating a record keeps the
// noise of its remaining steps.
std::vector<Vector> draw_noise(int steps, int latent_dim, std::uint64_t seed);

std::vector<Vector> encode_backward(const PatientRecord& record, const PosteriorParams<Tensor>& p);

LatentPath sample_posterior_path(const PatientRecord& record, const ModelParams& params,
                                 std::uint64_t seed);
LatentPath sample_posterior_path(const PatientRecord& record, const ModelParams& params,
                                 std::vector<Vector> eps);

}  // namespace attdmm
