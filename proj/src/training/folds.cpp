#include "attdmm/training/folds.hpp"

#include <algorithm>

#include "attdmm/numcore/errors.hpp"
#include "attdmm/numcore/random.hpp"

namespace attdmm {

std::vector<int> stratified_folds(std::span<const int> labels, int k, std::uint64_t seed) {
  require(k >= 1, "stratified_folds: k must be >= 1");
  if (static_cast<std::size_t>(k) > labels.size()) {
    throw ContractViolation("stratified_folds: more folds than records");
  }
  std::vector<std::size_t> pos, neg;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    require(labels[i] == 0 || labels[i] == 1, "stratified_folds: labels must be 0 or 1");
    (labels[i] == 1 ? pos : neg).push_back(i);
  }
  if (pos.empty() || neg.empty()) throw ContractViolation("stratified_folds: both classes are required");
  Rng rng(derive_seed(seed, 0xF01DULL));
  std::shuffle(pos.begin(), pos.end(), rng);
  std::shuffle(neg.begin(), neg.end(), rng);
  std::vector<int> fold(labels.size(), 0);
  std::size_t slot = 0;
  for (std::size_t i : pos) fold[i] = static_cast<int>(slot++ % static_cast<std::size_t>(k));
  for (std::size_t i : neg) fold[i] = static_cast<int>(slot++ % static_cast<std::size_t>(k));
  return fold;
}

FoldSplit fold_split(std::span<const int> assignment, int test_fold, int k) {
  require(k >= 3, "fold_split: k must be >= 3 (train, validation and test folds)");
  require(test_fold >= 0 && test_fold < k, "fold_split: test fold out of range");
  const int val_fold = (test_fold + 1) % k;
  FoldSplit s;
  for (std::size_t i = 0; i < assignment.size(); ++i) {
    if (assignment[i] == test_fold) {
      s.test.push_back(i);
    } else if (assignment[i] == val_fold) {
      s.val.push_back(i);
    } else {
      s.train.push_back(i);
    }
  }
  return s;
}

}  // namespace attdmm
