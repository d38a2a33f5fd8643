#include "attdmm/training/loss.hpp"

#include <vector>

#include "attdmm/model/networks.hpp"
#include "attdmm/numcore/errors.hpp"
#include "attdmm/numcore/random.hpp"

namespace attdmm {
namespace {

template <class V>
using ScalarOf = decltype(to_scalar(std::declval<V>()));

template <class V>
struct PathElbo {
  ScalarOf<V> recon;
  ScalarOf<V> kl;
};

// recon = sum_t sum_{i: m_ti = 1} log p(x_ti | z_t)
// kl    = sum_t KL(q_t || p(z_t | z_{t-1}, s)), z_{t-1} the sampled parent
template <class V, class P>
PathElbo<V> path_elbo(std::span<const V> x, std::span<const V> m, const V& z0, const V& s,
                      const PathSample<V>& path, const Weights<P>& w, const NetSettings& st) {
  const std::size_t steps = path.z.size();
  std::vector<ScalarOf<V>> recon;
  std::vector<ScalarOf<V>> kl;
  recon.reserve(steps);
  kl.reserve(steps);
  for (std::size_t t = 0; t < steps; ++t) {
    const V& prev = t == 0 ? z0 : path.z[t - 1];
    kl.push_back(kl_diag_gaussians(path.q[t], transition(prev, s, w.transition, st)));
    recon.push_back(masked_gaussian_loglik(x[t], m[t], emission(path.z[t], w.emission, st)));
  }
  return {add_n(std::span<const ScalarOf<V>>(recon)), add_n(std::span<const ScalarOf<V>>(kl))};
}

template <class V>
struct Objective {
  ScalarOf<V> loss;
  ScalarOf<V> ce;
  ScalarOf<V> elbo;
  ScalarOf<V> yhat;
  bool has_ce = false;
  bool has_elbo = false;
};

// lift: Vector -> V (identity for plain values, tape leaf when recording).
template <class V, class P, class Lift>
Objective<V> objective(const PatientRecord& rec, const Weights<P>& w, const NetSettings& st,
                       const LossConfig& cfg, double rho, std::uint64_t seed, Lift&& lift) {
  using S = ScalarOf<V>;
  require(rec.steps() >= 1, "record_loss: empty record");
  require(cfg.mc_samples >= 1, "record_loss: mc_samples must be >= 1");
  const bool want_ce = cfg.supervised;
  const bool want_elbo = cfg.alpha != 0.0 || !cfg.supervised;
  if (want_ce && !rec.y) throw DataError("record " + rec.stay_id + " has no label");

  std::vector<V> x, m;
  for (const Vector& r : rows_of(rec.x)) x.push_back(lift(r));
  for (const Vector& r : rows_of(rec.m)) m.push_back(lift(r));
  const V s = lift(rec.s);
  const V z0 = as_value(w.z0);
  const int latent = static_cast<int>(value_of(z0).size());
  const std::vector<V> h = encode_backward<V, P>(x, m, w.posterior);

  std::vector<S> yhats, elbos;
  for (int n = 0; n < cfg.mc_samples; ++n) {
    std::vector<V> eps;
    for (const Vector& e : draw_noise(rec.steps(), latent, record_noise_seed(seed, rec, n))) {
      eps.push_back(lift(e));
    }
    const PathSample<V> path = sample_path<V, P>(z0, s, h, w.posterior, st, eps);
    if (want_elbo) {
      const PathElbo<V> terms = path_elbo<V, P>(x, m, z0, s, path, w, st);
      elbos.push_back(sub(terms.recon, terms.kl));
    }
    if (want_ce) {
      const AttentionOutput<V> att = attention_aggregate<V, P>(path.z, w.attention);
      yhats.push_back(predict(att.summary, w.predictor));
    }
  }

  const double inv_n = 1.0 / cfg.mc_samples;
  Objective<V> out;
  if (want_ce) {
    out.yhat = scale(add_n(std::span<const S>(yhats)), inv_n);
    out.ce = weighted_cross_entropy(out.yhat, static_cast<double>(*rec.y), rho);
    out.has_ce = true;
  }
  if (want_elbo) {
    out.elbo = scale(add_n(std::span<const S>(elbos)), inv_n);
    out.has_elbo = true;
  }
  if (want_ce && want_elbo) {
    out.loss = sub(out.ce, scale(out.elbo, cfg.alpha));
  } else if (want_ce) {
    out.loss = out.ce;
  } else {
    out.loss = scale(out.elbo, -cfg.alpha);
  }
  return out;
}

double to_double(double v) { return v; }
double to_double(const ad::Var& v) { return v.scalar(); }

template <class V>
RecordLoss summarize(const Objective<V>& o) {
  RecordLoss r;
  r.loss = to_double(o.loss);
  if (o.has_ce) {
    r.ce = to_double(o.ce);
    r.yhat = to_double(o.yhat);
  }
  if (o.has_elbo) r.elbo = to_double(o.elbo);
  return r;
}

}  // namespace

double compute_rho(std::span<const int> labels) {
  std::size_t pos = 0;
  std::size_t neg = 0;
  for (int y : labels) {
    if (y == 1) {
      ++pos;
    } else if (y == 0) {
      ++neg;
    } else {
      throw ContractViolation("compute_rho: labels must be 0 or 1");
    }
  }
  if (pos == 0 || neg == 0) {
    throw ContractViolation("compute_rho: both classes are required (ratio undefined)");
  }
  return static_cast<double>(neg) / static_cast<double>(pos);
}

double weighted_ce(int y, double yhat, double rho) {
  return weighted_cross_entropy(yhat, static_cast<double>(y), rho);
}

std::uint64_t record_noise_seed(std::uint64_t seed, const PatientRecord& record, int sample) {
  return derive_seed(seed, stream_id(record.stay_id), static_cast<std::uint64_t>(sample));
}

ElboTerms elbo_terms(const PatientRecord& record, const ModelParams& params, const LatentPath& path) {
  require(static_cast<int>(path.z.size()) == record.steps(), "elbo_terms: path length mismatch");
  const auto x = rows_of(record.x);
  const auto m = rows_of(record.m);
  const Vector z0 = params.weights.z0;
  PathSample<Vector> sample{path.z, path.q};
  const auto terms = path_elbo<Vector, Tensor>(x, m, z0, record.s, sample, params.weights,
                                               params.settings);
  return {terms.recon - terms.kl, terms.recon, terms.kl};
}

ElboTerms elbo_estimate(const PatientRecord& record, const ModelParams& params, int n_samples,
                        std::uint64_t seed) {
  require(n_samples >= 1, "elbo_estimate: n_samples must be >= 1");
  ElboTerms acc;
  for (int n = 0; n < n_samples; ++n) {
    const LatentPath path =
        sample_posterior_path(record, params, record_noise_seed(seed, record, n));
    const ElboTerms t = elbo_terms(record, params, path);
    acc.recon += t.recon;
    acc.kl += t.kl;
  }
  acc.recon /= n_samples;
  acc.kl /= n_samples;
  acc.elbo = acc.recon - acc.kl;
  return acc;
}

RecordLoss record_loss(const PatientRecord& record, const ModelParams& params,
                       const LossConfig& cfg, double rho, std::uint64_t seed) {
  auto lift = [](const Vector& v) -> Vector { return v; };
  return summarize(objective<Vector, Tensor>(record, params.weights, params.settings, cfg, rho,
                                             seed, lift));
}

double total_loss(std::span<const PatientRecord> batch, const ModelParams& params,
                  const LossConfig& cfg, double rho, std::uint64_t seed) {
  require(!batch.empty(), "total_loss: empty batch");
  double acc = 0.0;
  for (const PatientRecord& r : batch) acc += record_loss(r, params, cfg, rho, seed).loss;
  return acc / static_cast<double>(batch.size());
}

LossGradient total_loss_gradient(std::span<const PatientRecord> batch, const ModelParams& params,
                                 const LossConfig& cfg, double rho, std::uint64_t seed,
                                 ad::Tape& tape) {
  require(!batch.empty(), "total_loss_gradient: empty batch");
  LossGradient out;
  out.grad = zeros_like(params.weights);
  const double inv_b = 1.0 / static_cast<double>(batch.size());
  for (const PatientRecord& r : batch) {
    tape.clear();
    const Weights<ad::Var> bound = bind(tape, params.weights);
    auto lift = [&tape](const Vector& v) { return tape.leaf(v); };
    const Objective<ad::Var> o =
        objective<ad::Var, ad::Var>(r, bound, params.settings, cfg, rho, seed, lift);
    tape.backward(o.loss);
    accumulate_gradients(tape, bound, out.grad, inv_b);
    const RecordLoss s = summarize(o);
    out.loss += inv_b * s.loss;
    out.ce += inv_b * s.ce;
    out.elbo += inv_b * s.elbo;
  }
  return out;
}

}  // namespace attdmm
