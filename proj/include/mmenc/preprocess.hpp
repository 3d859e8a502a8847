#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "mmenc/tensor.hpp"

namespace mmenc {

// Trials recorded in one scan session: one response row per trial and the
// stimulus each trial showed.
struct Session {
  Matrix<float> responses;     // [trials × voxels]
  std::vector<Index> stimulus;  // trial → stimulus index
};

struct ZScoreResult {
  Matrix<float> responses;           // [stimuli × voxels]
  std::vector<Index> repeat_counts;  // trials averaged per stimulus
  std::vector<std::string> warnings;
};

// Standardizes every voxel within each session (population variance, eps
// inside the square root), then averages each stimulus over its repeats.
ZScoreResult zscore_and_average(std::span<const Session> sessions, Index stimuli, double eps = 1e-8);

// k disjoint folds covering 0..n-1 after a seeded shuffle. Fold sizes differ
// by at most one (the first n mod k folds get the extra index); each fold is
// sorted ascending.
std::vector<std::vector<Index>> kfold_split(Index n, Index k, std::uint64_t seed);

struct FoldSplit {
  std::vector<Index> train;
  std::vector<Index> test;
};

// Test = folds[fold]; train = every other fold, ascending.
FoldSplit fold_split(const std::vector<std::vector<Index>>& folds, Index fold);

}  // namespace mmenc
