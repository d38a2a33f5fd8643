#pragma once

#include <cstdint>

#include "attdmm/model/params.hpp"

namespace attdmm {

struct GeneratedSequence {
  Matrix z;  // T x latent_dim
  Matrix x;  // T x feature_dim
};

// Ancestral sampling from the generative half of the model, starting at z0.
GeneratedSequence generate_sequence(const Vector& s, int steps, const ModelParams& params,
                                    std::uint64_t seed);

}  // namespace attdmm
