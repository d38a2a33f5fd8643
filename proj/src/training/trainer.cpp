#include "attdmm/training/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>
#include <sstream>

#include "attdmm/evalmetrics/metrics.hpp"
#include "attdmm/numcore/errors.hpp"
#include "attdmm/numcore/parallel.hpp"
#include "attdmm/numcore/random.hpp"
#include "attdmm/scoring/risk.hpp"

namespace attdmm {
namespace {

std::vector<int> labels_of(std::span<const PatientRecord> records, const char* who) {
  std::vector<int> y;
  y.reserve(records.size());
  for (const PatientRecord& r : records) {
    if (!r.y) throw DataError(std::string(who) + ": record " + r.stay_id + " has no label");
    y.push_back(*r.y);
  }
  return y;
}

bool all_finite(const Weights<Tensor>& w) {
  bool ok = true;
  Weights<Tensor>::visit([&ok](std::string_view, const Tensor& t) { ok = ok && t.allFinite(); }, w);
  return ok;
}

}  // namespace

void TrainConfig::validate() const {
  require(loss.alpha >= 0.0, "TrainConfig: alpha must be >= 0");
  require(loss.mc_samples >= 1, "TrainConfig: mc_samples must be >= 1");
  require(learning_rate > 0.0, "TrainConfig: learning_rate must be positive");
  require(batch_size >= 1, "TrainConfig: batch_size must be >= 1");
  require(max_epochs >= 1, "TrainConfig: max_epochs must be >= 1");
  require(patience >= 1, "TrainConfig: patience must be >= 1");
  require(val_mc_samples >= 1, "TrainConfig: val_mc_samples must be >= 1");
  require(var_floor > 0.0, "TrainConfig: var_floor must be positive");
  dims.validate();
}

LossGradient batch_loss_gradient(std::span<const PatientRecord> batch, const ModelParams& params,
                                 const LossConfig& cfg, double rho, std::uint64_t seed, int threads) {
  require(!batch.empty(), "batch_loss_gradient: empty batch");
  const int n = resolve_threads(threads, batch.size());
  std::vector<ad::Tape> tapes(static_cast<std::size_t>(n));
  std::vector<LossGradient> per_record(batch.size());
  parallel_for(batch.size(), n, [&](std::size_t i, int worker) {
    per_record[i] = total_loss_gradient(batch.subspan(i, 1), params, cfg, rho, seed,
                                        tapes[static_cast<std::size_t>(worker)]);
  });
  LossGradient out;
  out.grad = zeros_like(params.weights);
  const double inv_b = 1.0 / static_cast<double>(batch.size());
  for (const LossGradient& g : per_record) {
    out.loss += inv_b * g.loss;
    out.ce += inv_b * g.ce;
    out.elbo += inv_b * g.elbo;
    Weights<Tensor>::visit([inv_b](std::string_view, const Tensor& src, Tensor& dst) {
      dst += inv_b * src;
    }, g.grad, out.grad);
  }
  return out;
}

std::vector<double> predict_records(std::span<const PatientRecord> records, const ModelParams& params,
                                    int n_samples, std::uint64_t seed, int threads) {
  std::vector<double> out(records.size());
  parallel_for(records.size(), threads, [&](std::size_t i, int) {
    out[i] = score_at_time(records[i], records[i].steps(), params, n_samples, seed).mean;
  });
  return out;
}

AdamState adam_init(const Weights<Tensor>& w) { return {zeros_like(w), zeros_like(w), 0}; }

void adam_update(Weights<Tensor>& w, const Weights<Tensor>& grad, AdamState& state, double lr,
                 double beta1, double beta2, double eps) {
  ++state.step;
  const double c1 = 1.0 - std::pow(beta1, state.step);
  const double c2 = 1.0 - std::pow(beta2, state.step);
  Weights<Tensor>::visit(
      [&](std::string_view, Tensor& p, const Tensor& g, Tensor& m, Tensor& v) {
        m = beta1 * m + (1.0 - beta1) * g;
        v = beta2 * v + (1.0 - beta2) * g.cwiseProduct(g);
        p.array() -= lr * (m.array() / c1) / ((v.array() / c2).sqrt() + eps);
      },
      w, grad, state.m, state.v);
}

TrainResult train(std::span<const PatientRecord> train_set, std::span<const PatientRecord> val_set,
                  const TrainConfig& cfg) {
  cfg.validate();
  require(!train_set.empty() && !val_set.empty(), "train: training and validation sets must be non-empty");

  TrainReport report;
  if (cfg.loss.supervised) report.rho = compute_rho(labels_of(train_set, "train"));

  const bool use_auroc = !cfg.validation_override && cfg.stop_metric == StopMetric::ValidationAuroc;
  std::vector<int> val_labels;
  if (use_auroc) {
    val_labels = labels_of(val_set, "train (validation)");
    if (std::count(val_labels.begin(), val_labels.end(), 1) == 0 ||
        std::count(val_labels.begin(), val_labels.end(), 0) == 0) {
      throw DataError("train: validation AUROC needs both classes in the validation set");
    }
  }

  ModelParams params = cfg.initial ? *cfg.initial
                                   : init_params(cfg.dims, cfg.seed, cfg.var_floor, cfg.linear_mode);
  check_shapes(params.weights, params.dims);
  AdamState adam = adam_init(params.weights);
  const std::uint64_t val_seed = derive_seed(cfg.seed, 0x7A11ULL);

  auto validation_metric = [&](int epoch) {
    if (cfg.validation_override) return cfg.validation_override(epoch, params);
    if (use_auroc) {
      const auto scores = predict_records(val_set, params, cfg.val_mc_samples, val_seed, cfg.threads);
      return auroc(scores, val_labels);
    }
    // negated so that higher is better throughout
    std::vector<double> losses(val_set.size());
    LossConfig vcfg = cfg.loss;
    vcfg.mc_samples = cfg.val_mc_samples;
    parallel_for(val_set.size(), cfg.threads, [&](std::size_t i, int) {
      losses[i] = record_loss(val_set[i], params, vcfg, report.rho, val_seed).loss;
    });
    return -std::accumulate(losses.begin(), losses.end(), 0.0) / static_cast<double>(losses.size());
  };

  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), 0);
  std::vector<PatientRecord> batch;
  ModelParams best = params;
  bool have_best = false;

  for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    Rng shuffle_rng(derive_seed(cfg.seed, 0x5EEDULL, static_cast<std::uint64_t>(epoch)));
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    double epoch_loss = 0.0;
    std::size_t seen = 0;
    int batch_index = 0;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
      batch.clear();
      for (std::size_t i = start; i < end; ++i) batch.push_back(train_set[order[i]]);
      const std::uint64_t noise_seed =
          derive_seed(cfg.seed, static_cast<std::uint64_t>(epoch), static_cast<std::uint64_t>(batch_index));
      LossGradient g;
      try {
        g = batch_loss_gradient(batch, params, cfg.loss, report.rho, noise_seed, cfg.threads);
      } catch (const NumericError& e) {
        std::ostringstream os;
        os << "training diverged at epoch " << epoch << ", batch " << batch_index << ": " << e.what();
        throw NumericError(os.str());
      }
      if (!std::isfinite(g.loss) || !all_finite(g.grad)) {
        std::ostringstream os;
        os << "training diverged at epoch " << epoch << ", batch " << batch_index
           << ": non-finite loss or gradient";
        throw NumericError(os.str());
      }
      adam_update(params.weights, g.grad, adam, cfg.learning_rate);
      epoch_loss += g.loss * static_cast<double>(batch.size());
      seen += batch.size();
      ++batch_index;
    }
    epoch_loss /= static_cast<double>(seen);

    const double metric = validation_metric(epoch);
    report.history.push_back({epoch, epoch_loss, metric});
    if (!have_best || metric > report.best_metric) {
      report.best_metric = metric;
      report.best_epoch = epoch;
      best = params;
      have_best = true;
    }
    report.stop_epoch = epoch;
    if (cfg.progress) {
      *cfg.progress << "epoch " << epoch << " train_loss " << epoch_loss << " val_metric " << metric
                    << (report.best_epoch == epoch ? " *" : "") << '\n';
      cfg.progress->flush();
    }
    if (epoch - report.best_epoch >= cfg.patience) break;
  }
  return {std::move(best), std::move(report)};
}

}  // namespace attdmm
