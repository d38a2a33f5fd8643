#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace attdmm {

inline constexpr int kDefaultFolds = 5;

// Fold index per record. Positives and negatives are shuffled separately and
// dealt round-robin (negatives continue where positives stopped), so fold
// sizes and per-fold positive counts each differ by at most one.
std::vector<int> stratified_folds(std::span<const int> labels, int k, std::uint64_t seed);

struct FoldSplit {
  std::vector<std::size_t> train;
  std::vector<std::size_t> val;
  std::vector<std::size_t> test;
};

// test = fold f, validation = fold (f + 1) % k, training = the rest.
FoldSplit fold_split(std::span<const int> assignment, int test_fold, int k);

}  // namespace attdmm
