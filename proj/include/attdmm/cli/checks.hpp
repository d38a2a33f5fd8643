#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "attdmm/data/preprocess.hpp"
#include "attdmm/data/record.hpp"
#include "attdmm/data/synth.hpp"
#include "attdmm/model/params.hpp"
#include "attdmm/oracle/finite_diff.hpp"

namespace attdmm {

struct SyntheticCohort {
  SynthResult synth;
  Normalizer normalizer;  // fitted on every generated stay
  std::vector<PatientRecord> records;
};

SyntheticCohort make_synthetic_cohort(const SynthConfig& cfg);

struct GradcheckOptions {
  std::uint64_t seed = 7;
  int records = 2;
  int steps = 10;
  int features = 5;
  double fd_step = 1e-6;
  double alpha = 0.01;
  int mc_samples = 1;
  Dims dims;  // feature_dim and static_dim are taken from the cohort
};

struct GradcheckResult {
  oracle::GradientComparison comparison;
  std::size_t parameters = 0;
  double loss = 0.0;
};

// Reverse-mode gradient of total_loss against central differences on a
// random model and a small synthetic batch with labels {1, 0, 1, ...}.
GradcheckResult run_gradcheck(const GradcheckOptions& opts);

struct DominanceReport {
  int records = 0;
  int violations = 0;      // elbo > loglik + slack
  double max_excess = 0.0;  // max(elbo - loglik)
  double mean_gap_per_step = 0.0;  // mean over records of (loglik - elbo) / T
  std::vector<double> elbo;
  std::vector<double> loglik;
};

// elbo_estimate(N) against the exact Kalman log-likelihood of the linear-mode
// model, per record.
DominanceReport elbo_dominance(std::span<const PatientRecord> records, const ModelParams& params,
                               int n_samples, std::uint64_t seed, double slack, int threads = 0);

struct SelfcheckOptions {
  std::uint64_t seed = 0;
  int records = 100;
  int steps = 20;
  int features = 6;
  int latent = 4;
  double missing_rate = 0.3;
  int samples = 16;
  double slack = 1e-6;
  int threads = 0;
};

// Linear-mode model at random parameters on an LGSSM-generated cohort.
DominanceReport run_selfcheck(const SelfcheckOptions& opts);

}  // namespace attdmm
