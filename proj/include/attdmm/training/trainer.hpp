#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

#include "attdmm/data/record.hpp"
#include "attdmm/model/params.hpp"
#include "attdmm/training/loss.hpp"

namespace attdmm {

enum class StopMetric { ValidationAuroc, ValidationLoss };

struct TrainConfig {
  LossConfig loss;  // alpha, N_train, supervised
  double learning_rate = 2e-4;
  int batch_size = 128;
  int max_epochs = 200;
  int patience = 20;
  std::uint64_t seed = 0;
  Dims dims;
  double var_floor = 1e-4;
  bool linear_mode = false;
  StopMetric stop_metric = StopMetric::ValidationAuroc;
  int val_mc_samples = 1;
  int threads = 0;  // 0: hardware concurrency
  // Starting point; init_params(dims, seed, ...) when empty.
  std::optional<ModelParams> initial;
  // Replaces the validation metric (higher is better); used by tests.
  std::function<double(int epoch, const ModelParams&)> validation_override;
  std::ostream* progress = nullptr;  // one line per epoch when set

  void validate() const;
};

struct EpochRecord {
  int epoch = 0;
  double train_loss = 0.0;
  double val_metric = 0.0;
};

struct TrainReport {
  std::vector<EpochRecord> history;
  int best_epoch = 0;
  int stop_epoch = 0;
  double best_metric = 0.0;
  double rho = 1.0;
};

struct TrainResult {
  ModelParams params;  // best-validation parameters
  TrainReport report;
};

// Batch mean of record_loss with its gradient. Records are processed in
// parallel but reduced in batch order, so results do not depend on threads.
LossGradient batch_loss_gradient(std::span<const PatientRecord> batch, const ModelParams& params,
                                 const LossConfig& cfg, double rho, std::uint64_t seed, int threads);

// Mean per-path prediction for each record (n_samples paths, full length).
std::vector<double> predict_records(std::span<const PatientRecord> records, const ModelParams& params,
                                    int n_samples, std::uint64_t seed, int threads);

struct AdamState {
  Weights<Tensor> m;
  Weights<Tensor> v;
  int step = 0;
};

AdamState adam_init(const Weights<Tensor>& w);
void adam_update(Weights<Tensor>& w, const Weights<Tensor>& grad, AdamState& state, double lr,
                 double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);

// Adam on shuffled mini-batches with early stopping on the validation metric.
// Throws NumericError naming the epoch and batch if the loss turns non-finite.
TrainResult train(std::span<const PatientRecord> train_set, std::span<const PatientRecord> val_set,
                  const TrainConfig& cfg);

}  // namespace attdmm
