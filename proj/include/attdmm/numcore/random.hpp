#pragma once

#include <cstdint>
#include <random>
#include <string_view>

#include "attdmm/numcore/tensor.hpp"

namespace attdmm {

using Rng = std::mt19937_64;

// Mixes a base seed with stream coordinates (record, sample, purpose, ...) so
// that each draw owns an independent, reproducible noise stream.
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b = 0,
                          std::uint64_t c = 0);

// Stable 64-bit FNV-1a hash, used to key noise streams by record identity.
std::uint64_t stream_id(std::string_view key);

Vector standard_normal(Rng& rng, Eigen::Index n);

}  // namespace attdmm
