#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "attdmm/data/csv_io.hpp"
#include "attdmm/oracle/kalman.hpp"

namespace attdmm {

// Synthetic cohort drawn from a linear-Gaussian state-space model driven by
// static covariates, with Bernoulli missingness and a logistic readout of the
// last latent state as the label.
struct SynthConfig {
  int records = 1000;
  int latent_dim = 4;
  int feature_dim = 12;
  double spectral_radius = 0.95;
  double process_noise = 0.3;      // stddev of w_t
  double observation_noise = 0.5;  // stddev of v_t
  double static_drive = 1.5;       // scale of B
  double missing_rate = 0.3;       // used for every feature unless missing_rates is set
  std::vector<double> missing_rates;
  double readout_scale = 3.0;  // |u|
  int min_steps = 24;
  int max_steps = 72;
  double prevalence = 0.104;
  std::uint64_t seed = 1;
  // Seed of the observation-noise and missingness streams; defaults to seed.
  std::optional<std::uint64_t> observation_seed;

  void validate() const;
  double missing_rate_of(int feature) const;
};

struct SynthTruth {
  oracle::LGSSM lgssm;
  Vector readout;  // u
  double offset = 0.0;  // b0
};

struct SynthResult {
  RawDataset data;
  SynthTruth truth;
  std::vector<Matrix> latents;  // T x d per stay
};

// Admission categories the generator draws from, in sorted order.
const std::vector<std::string>& synth_admission_types();

// Static covariates as the generator feeds them into B: standardized age,
// the three binaries, one-hot admission type.
Vector synth_static_code(const StaticFeatures& s);

SynthResult synth_generate(const SynthConfig& cfg);

// sigmoid(u . E[z_T | x_{1:T}] + b0) under the generating model.
double bayes_reference_score(const SynthTruth& truth, const RawStay& stay);
std::vector<double> bayes_reference_scores(const SynthTruth& truth, std::span<const RawStay> stays);

// Missing cells of a raw stay as a 0/1 mask (1 = observed).
Matrix observed_mask(const Matrix& values);

}  // namespace attdmm
