#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>

#include "attdmm/model/networks.hpp"
#include "attdmm/numcore/errors.hpp"
#include "attdmm/oracle/finite_diff.hpp"
#include "attdmm/training/folds.hpp"
#include "attdmm/training/loss.hpp"
#include "attdmm/training/trainer.hpp"
#include "helpers.hpp"

using namespace attdmm;
using attdmm::test::dims_for;
using attdmm::test::small_cohort;

namespace {

std::vector<int> labels_of(int zeros, int ones) {
  std::vector<int> y(static_cast<std::size_t>(zeros), 0);
  y.insert(y.end(), static_cast<std::size_t>(ones), 1);
  return y;
}

}  // namespace

TEST_SUITE("training") {

TEST_CASE("rho") {
  CHECK(compute_rho(labels_of(9, 1)) == 9.0);
  CHECK(compute_rho(labels_of(5, 5)) == 1.0);
  const double rho = compute_rho(labels_of(28584, 3311));
  CHECK(rho == doctest::Approx(28584.0 / 3311.0).epsilon(1e-15));
  CHECK(rho == doctest::Approx(8.633).epsilon(1e-4));
  CHECK_THROWS_AS(compute_rho(labels_of(4, 0)), ContractViolation);
  CHECK_THROWS_AS(compute_rho(labels_of(0, 4)), ContractViolation);
}

TEST_CASE("weighted cross-entropy") {
  CHECK(weighted_ce(1, 0.5, 1.0) == doctest::Approx(std::log(2.0)).epsilon(1e-15));
  CHECK(weighted_ce(0, 0.5, 1.0) == doctest::Approx(std::log(2.0)).epsilon(1e-15));
  CHECK(weighted_ce(0, 0.5, 8.633) == doctest::Approx(std::log(2.0)).epsilon(1e-15));
  CHECK(weighted_ce(1, 0.5, 8.633) == doctest::Approx(8.633 * std::log(2.0)).epsilon(1e-15));
  CHECK(weighted_ce(1, 0.5, 8.633) == doctest::Approx(5.985).epsilon(1e-3));
  CHECK(std::isfinite(weighted_ce(1, 0.0, 1.0)));
  CHECK(std::isfinite(weighted_ce(0, 1.0, 1.0)));
}

TEST_CASE("ELBO terms") {
  const SyntheticCohort c = small_cohort(4, 8, 5, 0.3);
  const ModelParams p = init_params(dims_for(c), 5);
  const PatientRecord& r = c.records[0];

  SUBCASE("all masks zero") {
    PatientRecord blank = r;
    blank.m.setZero();
    const ElboTerms t = elbo_estimate(blank, p, 3, 1);
    CHECK(t.recon == 0.0);
    CHECK(t.elbo == doctest::Approx(-t.kl).epsilon(1e-15));
    CHECK(t.elbo <= 0.0);
  }
  SUBCASE("posterior equal to the prior gives zero KL") {
    LatentPath path = sample_posterior_path(r, p, 9);
    for (std::size_t t = 0; t < path.z.size(); ++t) {
      const Vector prev = t == 0 ? Vector(p.weights.z0) : path.z[t - 1];
      path.q[t] = transition(prev, r.s, p.weights.transition, p.settings);
    }
    CHECK(elbo_terms(r, p, path).kl == doctest::Approx(0.0).epsilon(1e-14));
  }
  SUBCASE("KL is nonnegative and recon ignores masked cells") {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      const LatentPath path = sample_posterior_path(r, p, seed);
      const ElboTerms t = elbo_terms(r, p, path);
      CHECK(t.kl >= 0.0);
      PatientRecord poked = r;
      for (Eigen::Index i = 0; i < poked.x.size(); ++i) {
        if (poked.m(i) == 0.0) poked.x(i) += 100.0 * static_cast<double>(seed + 1);
      }
      CHECK(std::abs(elbo_terms(poked, p, path).recon - t.recon) <= 1e-12);
    }
  }
  SUBCASE("estimate is the mean of single-path terms") {
    const ElboTerms est = elbo_estimate(r, p, 4, 2);
    double acc = 0.0;
    for (int n = 0; n < 4; ++n) {
      acc += elbo_terms(r, p, sample_posterior_path(r, p, record_noise_seed(2, r, n))).elbo;
    }
    CHECK(est.elbo == doctest::Approx(acc / 4.0).epsilon(1e-12));
  }
}

TEST_CASE("total loss") {
  const SyntheticCohort c = small_cohort(6, 6, 4, 0.2);
  const ModelParams p = init_params(dims_for(c), 2);
  const PatientRecord& r = c.records[0];

  SUBCASE("alpha = 0 is pure cross-entropy") {
    LossConfig cfg;
    cfg.alpha = 0.0;
    const RecordLoss l = record_loss(r, p, cfg, 3.0, 4);
    CHECK(l.loss == l.ce);
    CHECK(l.ce == doctest::Approx(weighted_ce(*r.y, l.yhat, 3.0)).epsilon(1e-15));
  }
  SUBCASE("default loss combines both terms") {
    LossConfig cfg;
    const RecordLoss l = record_loss(r, p, cfg, 3.0, 4);
    CHECK(l.loss == doctest::Approx(l.ce - cfg.alpha * l.elbo).epsilon(1e-14));
  }
  SUBCASE("duplicate record has the loss of a single copy") {
    const std::vector<PatientRecord> one{r}, two{r, r};
    LossConfig cfg;
    CHECK(total_loss(two, p, cfg, 2.0, 1) == total_loss(one, p, cfg, 2.0, 1));
  }
  SUBCASE("rho scales the positive term exactly") {
    PatientRecord pos = r;
    pos.y = 1;
    LossConfig cfg;
    cfg.alpha = 0.0;
    const std::vector<PatientRecord> b{pos};
    const double base = total_loss(b, p, cfg, 1.0, 3);
    CHECK(total_loss(b, p, cfg, 7.5, 3) == doctest::Approx(7.5 * base).epsilon(1e-14));
  }
  SUBCASE("unsupervised loss ignores labels") {
    PatientRecord unlabeled = r;
    unlabeled.y.reset();
    LossConfig cfg;
    cfg.supervised = false;
    cfg.alpha = 1.0;
    const RecordLoss l = record_loss(unlabeled, p, cfg, 1.0, 3);
    CHECK(l.loss == doctest::Approx(-l.elbo).epsilon(1e-15));
    LossConfig sup;
    CHECK_THROWS_AS(record_loss(unlabeled, p, sup, 1.0, 3), DataError);
  }
  SUBCASE("gradient matches finite differences") {
    const std::vector<PatientRecord> batch(c.records.begin(), c.records.begin() + 2);
    LossConfig cfg;
    cfg.alpha = 0.5;
    cfg.mc_samples = 2;
    ad::Tape tape;
    const LossGradient g = total_loss_gradient(batch, p, cfg, 2.0, 11, tape);
    CHECK(g.loss == doctest::Approx(total_loss(batch, p, cfg, 2.0, 11)).epsilon(1e-12));
    const Weights<Tensor> fd = oracle::fd_gradient(
        [&](const ModelParams& q) { return total_loss(batch, q, cfg, 2.0, 11); }, p, 1e-6);
    const oracle::GradientComparison cmp = oracle::compare_gradients(g.grad, fd);
    CHECK(cmp.max_relative_error < 1e-4);
  }
  SUBCASE("threaded batch gradient is bitwise reproducible") {
    LossConfig cfg;
    const LossGradient a = batch_loss_gradient(c.records, p, cfg, 2.0, 5, 1);
    const LossGradient b = batch_loss_gradient(c.records, p, cfg, 2.0, 5, 3);
    CHECK(a.loss == b.loss);
    CHECK(oracle::compare_gradients(a.grad, b.grad).max_relative_error == 0.0);
  }
}

TEST_CASE("stratified folds") {
  SUBCASE("50 records, 10 positive") {
    const std::vector<int> y = labels_of(40, 10);
    const std::vector<int> f = stratified_folds(y, 5, 1);
    for (int k = 0; k < 5; ++k) {
      int n = 0, pos = 0;
      for (std::size_t i = 0; i < y.size(); ++i) {
        if (f[i] == k) {
          ++n;
          pos += y[i];
        }
      }
      CHECK(n == 10);
      CHECK(pos == 2);
    }
    CHECK(f == stratified_folds(y, 5, 1));
    CHECK(f != stratified_folds(y, 5, 2));
  }
  SUBCASE("cohort of the original size") {
    const std::vector<int> y = labels_of(28584, 3311);
    const std::vector<int> f = stratified_folds(y, 5, 0);
    std::vector<int> n(5, 0), pos(5, 0);
    for (std::size_t i = 0; i < y.size(); ++i) {
      REQUIRE((f[i] >= 0 && f[i] < 5));
      ++n[f[i]];
      pos[f[i]] += y[i];
    }
    CHECK(std::accumulate(n.begin(), n.end(), 0) == 31895);
    for (int k = 0; k < 5; ++k) {
      const double share = static_cast<double>(pos[k]) / n[k];
      CHECK(share >= 0.103);
      CHECK(share <= 0.105);
    }
  }
  SUBCASE("split partitions indices") {
    const std::vector<int> y = labels_of(30, 12);
    const std::vector<int> f = stratified_folds(y, 5, 4);
    const FoldSplit s = fold_split(f, 2, 5);
    std::set<std::size_t> all;
    for (auto i : s.train) all.insert(i);
    for (auto i : s.val) all.insert(i);
    for (auto i : s.test) all.insert(i);
    CHECK(all.size() == y.size());
    CHECK(s.train.size() + s.val.size() + s.test.size() == y.size());
    for (auto i : s.test) CHECK(f[i] == 2);
    for (auto i : s.val) CHECK(f[i] == 3);
  }
  SUBCASE("errors") {
    CHECK_THROWS(stratified_folds(labels_of(2, 1), 5, 0));
    CHECK_THROWS(stratified_folds(labels_of(10, 0), 5, 0));
  }
}

TEST_CASE("Adam bias-corrected first step") {
  Weights<Tensor> w = zeros_like(init_params(Dims{}, 0).weights);
  Weights<Tensor> g = zeros_like(w);
  g.z0.setConstant(3.0);
  AdamState st = adam_init(w);
  adam_update(w, g, st, 0.1);
  // first step moves every coordinate by lr * sign(g) up to eps
  CHECK(w.z0(0) == doctest::Approx(-0.1).epsilon(1e-7));
  CHECK(w.transition.linear_b.cwiseAbs().maxCoeff() == 0.0);
  CHECK(st.step == 1);
}

TEST_CASE("trainer") {
  const SyntheticCohort c = small_cohort(40, 6, 4, 0.2, 5, 0.4);
  const std::span<const PatientRecord> all(c.records);
  const auto train_set = all.subspan(0, 30);
  const auto val_set = all.subspan(30);
  TrainConfig base;
  base.dims = dims_for(c);
  base.batch_size = 10;
  base.learning_rate = 1e-2;
  base.threads = 1;

  SUBCASE("patience 1 with a metric that never improves stops at epoch 2") {
    TrainConfig cfg = base;
    cfg.patience = 1;
    cfg.max_epochs = 50;
    cfg.validation_override = [](int epoch, const ModelParams&) { return epoch == 1 ? 1.0 : 0.0; };
    const TrainResult r = train(train_set, val_set, cfg);
    CHECK(r.report.best_epoch == 1);
    CHECK(r.report.stop_epoch == 2);
    CHECK(r.report.history.size() == 2);
  }
  SUBCASE("best parameters are returned and stopping respects patience") {
    TrainConfig cfg = base;
    cfg.patience = 3;
    cfg.max_epochs = 12;
    std::vector<ModelParams> seen;
    cfg.validation_override = [&](int epoch, const ModelParams& p) {
      seen.push_back(p);
      return epoch == 4 ? 10.0 : static_cast<double>(epoch % 3);
    };
    const TrainResult r = train(train_set, val_set, cfg);
    CHECK(r.report.best_epoch == 4);
    CHECK(r.report.stop_epoch == 7);
    CHECK(r.report.stop_epoch <= r.report.best_epoch + cfg.patience);
    CHECK(oracle::compare_gradients(r.params.weights, seen[3].weights).max_relative_error == 0.0);
  }
  SUBCASE("tiny separable set: training loss decreases") {
    std::vector<PatientRecord> tiny(c.records.begin(), c.records.begin() + 20);
    for (PatientRecord& r : tiny) {
      r.x.setConstant(*r.y == 1 ? 2.0 : -2.0);
      r.m.setOnes();
    }
    TrainConfig cfg = base;
    cfg.loss.alpha = 0.0;
    cfg.loss.mc_samples = 8;
    cfg.batch_size = 20;
    cfg.max_epochs = 5;
    cfg.patience = 10;
    const TrainResult r = train(tiny, tiny, cfg);
    REQUIRE(r.report.history.size() == 5);
    for (std::size_t e = 1; e < 5; ++e) {
      CHECK(r.report.history[e].train_loss < r.report.history[e - 1].train_loss);
    }
  }
  SUBCASE("fixed seed reproduces the report") {
    TrainConfig cfg = base;
    cfg.max_epochs = 3;
    const TrainResult a = train(train_set, val_set, cfg);
    cfg.threads = 2;
    const TrainResult b = train(train_set, val_set, cfg);
    REQUIRE(a.report.history.size() == b.report.history.size());
    for (std::size_t e = 0; e < a.report.history.size(); ++e) {
      CHECK(a.report.history[e].train_loss == b.report.history[e].train_loss);
      CHECK(a.report.history[e].val_metric == b.report.history[e].val_metric);
    }
    CHECK(a.report.rho == doctest::Approx(b.report.rho));
  }
  SUBCASE("rho comes from the training split") {
    TrainConfig cfg = base;
    cfg.max_epochs = 1;
    std::vector<int> y;
    for (const auto& r : train_set) y.push_back(*r.y);
    CHECK(train(train_set, val_set, cfg).report.rho == compute_rho(y));
  }
  SUBCASE("non-finite loss names epoch and batch") {
    TrainConfig cfg = base;
    cfg.max_epochs = 2;
    ModelParams bad = init_params(cfg.dims, 0);
    bad.weights.predictor.out_b(0) = std::numeric_limits<double>::quiet_NaN();
    cfg.initial = bad;
    try {
      train(train_set, val_set, cfg);
      FAIL("expected NumericError");
    } catch (const NumericError& e) {
      const std::string what = e.what();
      CHECK(what.find("epoch 1") != std::string::npos);
      CHECK(what.find("batch 0") != std::string::npos);
    }
  }
}

}  // TEST_SUITE
