#include <doctest.h>

#include "attdmm/inference/posterior.hpp"
#include "attdmm/numcore/errors.hpp"
#include "attdmm/oracle/kalman.hpp"
#include "attdmm/training/trainer.hpp"
#include "helpers.hpp"

using namespace attdmm;
using attdmm::test::random_matrix;

namespace {

struct Fixture {
  SyntheticCohort cohort = test::small_cohort(4, 8, 3, 0.3);
  ModelParams params = init_params(test::dims_for(cohort), 17);
  const PatientRecord& rec() const { return cohort.records[0]; }
};

}  // namespace

TEST_SUITE("inference") {

TEST_CASE("zero parameters give zero encoder states") {
  Fixture f;
  Weights<Tensor>::visit([](std::string_view, Tensor& t) { t.setZero(); }, f.params.weights);
  for (const Vector& h : encode_backward(f.rec(), f.params.weights.posterior)) CHECK(h.isZero(0.0));
}

TEST_CASE("input-decoupled encoder ignores x") {
  Fixture f;
  PosteriorParams<Tensor>& p = f.params.weights.posterior;
  p.rnn_input_w.setZero();
  p.rnn_b.setConstant(0.3);
  PatientRecord other = f.rec();
  other.x.setRandom();
  const auto a = encode_backward(f.rec(), p), b = encode_backward(other, p);
  for (std::size_t t = 0; t < a.size(); ++t) CHECK(a[t] == b[t]);
  CHECK((a.back().array() - 0.3).abs().maxCoeff() < 1e-15);
}

TEST_CASE("backward causality of the encoder") {
  Fixture f;
  const auto base = encode_backward(f.rec(), f.params.weights.posterior);
  PatientRecord late = f.rec();
  late.x.row(late.steps() - 1).array() += 1.0;
  const auto h_late = encode_backward(late, f.params.weights.posterior);
  CHECK(h_late.front() != base.front());
  PatientRecord early = f.rec();
  early.x.row(0).array() += 1.0;
  const auto h_early = encode_backward(early, f.params.weights.posterior);
  for (std::size_t t = 1; t < base.size(); ++t) CHECK(h_early[t] == base[t]);
}

TEST_CASE("mask flips change the encoder state") {
  Fixture f;
  PatientRecord flipped = f.rec();
  flipped.m(2, 1) = 1.0 - flipped.m(2, 1);
  const auto a = encode_backward(f.rec(), f.params.weights.posterior);
  const auto b = encode_backward(flipped, f.params.weights.posterior);
  CHECK(a[2] != b[2]);
}

TEST_CASE("combiner bounds") {
  Fixture f;
  const PosteriorParams<Tensor>& p = f.params.weights.posterior;
  std::mt19937_64 rng(2);
  const int L = f.params.dims.latent_dim, S = f.params.dims.static_dim, R = f.params.dims.rnn_dim;
  for (int i = 0; i < 50; ++i) {
    const Vector z = random_matrix(rng, L, 1, 5.0), s = random_matrix(rng, S, 1), h = random_matrix(rng, R, 1, 5.0);
    const auto q = combine<Vector, Tensor>(z, s, h, p, f.params.settings);
    CHECK((q.stddev.array() >= f.params.settings.var_floor).all());
    const Vector mixed = scaled_tanh(Vector(affine(p.combiner_w, concat(z, s), p.combiner_b) + h), 0.5);
    CHECK(mixed.cwiseAbs().maxCoeff() <= 0.5);
  }
  // c + h = 0
  const Vector z = Vector::Zero(L), s = Vector::Zero(S);
  const Vector h = -Vector(p.combiner_b);
  const auto q = combine<Vector, Tensor>(z, s, h, p, f.params.settings);
  CHECK((q.mean - p.mean_b).cwiseAbs().maxCoeff() < 1e-15);
  CHECK((q.stddev - softplus(p.sigma_b, f.params.settings.var_floor)).cwiseAbs().maxCoeff() < 1e-15);
  CHECK_THROWS_AS((combine<Vector, Tensor>(Vector::Zero(L + 1), s, h, p, f.params.settings)), ContractViolation);
}

TEST_CASE("latent path reproducibility and reconstruction identity") {
  Fixture f;
  const LatentPath a = sample_posterior_path(f.rec(), f.params, 5), b = sample_posterior_path(f.rec(), f.params, 5);
  for (std::size_t t = 0; t < a.z.size(); ++t) {
    CHECK(a.z[t] == b.z[t]);
    CHECK(a.z[t] == Vector(a.q[t].mean + a.q[t].stddev.cwiseProduct(a.eps[t])));
  }
  std::vector<Vector> zeros(f.rec().steps(), Vector::Zero(f.params.dims.latent_dim));
  const LatentPath m = sample_posterior_path(f.rec(), f.params, zeros);
  for (std::size_t t = 0; t < m.z.size(); ++t) CHECK(m.z[t] == m.q[t].mean);
}

TEST_CASE("truncation keeps the noise prefix but not the encoder state") {
  Fixture f;
  const LatentPath full = sample_posterior_path(f.rec(), f.params, 8);
  const LatentPath part = sample_posterior_path(f.rec().truncated(4), f.params, 8);
  for (int t = 0; t < 4; ++t) CHECK(part.eps[t] == full.eps[t]);
}

TEST_CASE("trained linear posterior tracks the Kalman smoother") {
  SynthConfig sc;
  sc.records = 600;
  sc.latent_dim = 2;
  sc.feature_dim = 4;
  sc.min_steps = sc.max_steps = 15;
  sc.missing_rate = 0.2;
  sc.seed = 4;
  const SyntheticCohort c = make_synthetic_cohort(sc);
  const std::vector<PatientRecord> train_set(c.records.begin(), c.records.begin() + 500);
  const std::vector<PatientRecord> held_out(c.records.begin() + 500, c.records.end());
  TrainConfig tc;
  tc.dims = test::dims_for(c, 2);
  tc.dims.rnn_dim = 16;
  tc.linear_mode = true;
  tc.loss.alpha = 1.0;
  tc.loss.supervised = false;
  tc.learning_rate = 3e-3;
  tc.batch_size = 50;
  tc.max_epochs = 80;
  tc.patience = 80;
  tc.stop_metric = StopMetric::ValidationLoss;
  const TrainResult r = train(train_set, held_out, tc);
  const oracle::LGSSM lg = oracle::lgssm_from_linear_model(r.params);
  std::vector<double> a, b;
  for (const PatientRecord& rec : held_out) {
    std::vector<Vector> zeros(rec.steps(), Vector::Zero(2));
    const LatentPath path = sample_posterior_path(rec, r.params, zeros);
    const auto sm = oracle::kalman_smoother(lg, rec.s, rec.x, rec.m);
    for (int t = 0; t < rec.steps(); ++t) {
      for (int d = 0; d < 2; ++d) {
        a.push_back(path.z[t](d));
        b.push_back(sm.mean[t](d));
      }
    }
  }
  const Eigen::Map<const Vector> va(a.data(), a.size()), vb(b.data(), b.size());
  const double ma = va.mean(), mb = vb.mean();
  const double corr = ((va.array() - ma) * (vb.array() - mb)).sum() /
                      std::sqrt((va.array() - ma).square().sum() * (vb.array() - mb).square().sum());
  CHECK(corr > 0.9);
}

}  // TEST_SUITE
