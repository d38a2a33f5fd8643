#include "attdmm/inference/posterior.hpp"

#include "attdmm/numcore/random.hpp"

namespace attdmm {

std::vector<Vector> rows_of(const Matrix& a) {
  std::vector<Vector> out;
  out.reserve(static_cast<std::size_t>(a.rows()));
  for (Eigen::Index r = 0; r < a.rows(); ++r) out.emplace_back(a.row(r).transpose());
  return out;
}

std::vector<Vector> draw_noise(int steps, int latent_dim, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<Vector> eps;
  eps.reserve(static_cast<std::size_t>(steps));
  for (int t = 0; t < steps; ++t) eps.push_back(standard_normal(rng, latent_dim));
  return eps;
}

std::vector<Vector> encode_backward(const PatientRecord& record, const PosteriorParams<Tensor>& p) {
  const auto x = rows_of(record.x);
  const auto m = rows_of(record.m);
  return encode_backward<Vector, Tensor>(x, m, p);
}

LatentPath sample_posterior_path(const PatientRecord& record, const ModelParams& params,
                                 std::uint64_t seed) {
  return sample_posterior_path(record, params,
                               draw_noise(record.steps(), params.dims.latent_dim, seed));
}

LatentPath sample_posterior_path(const PatientRecord& record, const ModelParams& params,
                                 std::vector<Vector> eps) {
  require(static_cast<int>(eps.size()) == record.steps(),
          "sample_posterior_path: one noise vector per step required");
  require(record.steps() >= 1, "sample_posterior_path: empty record");
  const auto h = encode_backward(record, params.weights.posterior);
  const Vector z0 = params.weights.z0;
  auto sample = sample_path<Vector, Tensor>(z0, record.s, h, params.weights.posterior,
                                            params.settings, eps);
  return {std::move(sample.z), std::move(sample.q), std::move(eps)};
}

}  // namespace attdmm
