#pragma once

#include <cstdint>
#include <span>

#include "attdmm/data/record.hpp"
#include "attdmm/inference/posterior.hpp"
#include "attdmm/model/params.hpp"
#include "attdmm/numcore/tape.hpp"

namespace attdmm {

// Discharge-to-death ratio #(y=0) / #(y=1). Throws ContractViolation if
// either class is absent.
double compute_rho(std::span<const int> labels);

// -rho*y*ln(yhat) - (1-y)*ln(1-yhat), yhat clamped 1e-12 away from {0, 1}.
double weighted_ce(int y, double yhat, double rho);

struct ElboTerms {
  double elbo = 0.0;
  double recon = 0.0;  // sum over observed cells of log p(x_ti | z_t)
  double kl = 0.0;     // sum_t KL(q_t || p(z_t | z_{t-1}, s)) at the sampled z_{t-1}
};

// Terms for one already-sampled path. Only mask-1 cells of record.x enter recon.
ElboTerms elbo_terms(const PatientRecord& record, const ModelParams& params, const LatentPath& path);

// Average over n_samples posterior paths; sample n uses the stream
// record_noise_seed(seed, record, n).
ElboTerms elbo_estimate(const PatientRecord& record, const ModelParams& params, int n_samples,
                        std::uint64_t seed);

std::uint64_t record_noise_seed(std::uint64_t seed, const PatientRecord& record, int sample);

struct LossConfig {
  double alpha = 0.01;
  int mc_samples = 1;
  // false: labels are ignored and the loss is -alpha * ELBO.
  bool supervised = true;
};

struct RecordLoss {
  double loss = 0.0;
  double ce = 0.0;
  double elbo = 0.0;
  double yhat = 0.0;  // mean of the per-path predictions
};

// Loss of one record: weighted_ce(y, mean_n yhat_n) - alpha * mean_n ELBO_n.
RecordLoss record_loss(const PatientRecord& record, const ModelParams& params,
                       const LossConfig& cfg, double rho, std::uint64_t seed);

// Mean of record_loss over the batch.
double total_loss(std::span<const PatientRecord> batch, const ModelParams& params,
                  const LossConfig& cfg, double rho, std::uint64_t seed);

struct LossGradient {
  double loss = 0.0;
  double ce = 0.0;
  double elbo = 0.0;
  Weights<Tensor> grad;
};

// total_loss together with its exact gradient; the tape is scratch space and
// is reused record by record.
LossGradient total_loss_gradient(std::span<const PatientRecord> batch, const ModelParams& params,
                                 const LossConfig& cfg, double rho, std::uint64_t seed,
                                 ad::Tape& tape);

}  // namespace attdmm
