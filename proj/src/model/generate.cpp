#include "attdmm/model/generate.hpp"

#include "attdmm/model/networks.hpp"
#include "attdmm/numcore/errors.hpp"
#include "attdmm/numcore/random.hpp"

namespace attdmm {

GeneratedSequence generate_sequence(const Vector& s, int steps, const ModelParams& params,
                                    std::uint64_t seed) {
  require(steps >= 1, "generate_sequence: steps must be >= 1");
  require(s.size() == params.dims.static_dim, "generate_sequence: static vector length mismatch");
  Rng rng(seed);
  const Weights<Tensor>& w = params.weights;
  GeneratedSequence out{Matrix(steps, params.dims.latent_dim), Matrix(steps, params.dims.feature_dim)};
  Vector z = w.z0;
  for (int t = 0; t < steps; ++t) {
    const auto pz = transition(z, s, w.transition, params.settings);
    z = reparam_sample(pz, standard_normal(rng, params.dims.latent_dim));
    const auto px = emission(z, w.emission, params.settings);
    out.z.row(t) = z.transpose();
    out.x.row(t) = reparam_sample(px, standard_normal(rng, params.dims.feature_dim)).transpose();
  }
  return out;
}

}  // namespace attdmm
