#include "mmenc/preprocess.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace mmenc {

ZScoreResult zscore_and_average(std::span<const Session> sessions, Index stimuli, double eps) {
  if (sessions.empty()) throw UsageError("zscore_and_average: no sessions");
  if (stimuli < 1) throw UsageError("zscore_and_average: need at least one stimulus");
  const Index voxels = sessions.front().responses.cols();
  ZScoreResult out;
  Eigen::MatrixXd total = Eigen::MatrixXd::Zero(stimuli, voxels);
  out.repeat_counts.assign(static_cast<std::size_t>(stimuli), 0);

  for (std::size_t s = 0; s < sessions.size(); ++s) {
    const auto& sess = sessions[s];
    const Index trials = sess.responses.rows();
    if (trials < 1) throw UsageError("zscore_and_average: session " + std::to_string(s) + " has no trials");
    if (sess.responses.cols() != voxels) throw ShapeError("zscore_and_average: sessions disagree on voxel count");
    if (static_cast<Index>(sess.stimulus.size()) != trials) {
      throw ShapeError("zscore_and_average: session " + std::to_string(s) + " stimulus labels do not match trials");
    }
    Index flat_voxels = 0;
    for (Index v = 0; v < voxels; ++v) {
      double mean = 0.0;
      for (Index t = 0; t < trials; ++t) mean += static_cast<double>(sess.responses(t, v));
      mean /= static_cast<double>(trials);
      double var = 0.0;
      for (Index t = 0; t < trials; ++t) {
        const double d = static_cast<double>(sess.responses(t, v)) - mean;
        var += d * d;
      }
      var /= static_cast<double>(trials);
      if (var <= eps) ++flat_voxels;
      const double inv = 1.0 / std::sqrt(var + eps);
      for (Index t = 0; t < trials; ++t) {
        const Index stim = sess.stimulus[static_cast<std::size_t>(t)];
        total(stim, v) += (static_cast<double>(sess.responses(t, v)) - mean) * inv;
      }
    }
    for (Index t = 0; t < trials; ++t) {
      const Index stim = sess.stimulus[static_cast<std::size_t>(t)];
      if (stim < 0 || stim >= stimuli) {
        throw DataError("zscore_and_average: stimulus index " + std::to_string(stim) + " out of range");
      }
      ++out.repeat_counts[static_cast<std::size_t>(stim)];
    }
    if (flat_voxels > 0) {
      out.warnings.push_back("session " + std::to_string(s) + ": " + std::to_string(flat_voxels) +
                             " voxel(s) with zero variance set to 0");
    }
  }

  out.responses.resize(stimuli, voxels);
  for (Index i = 0; i < stimuli; ++i) {
    const Index reps = out.repeat_counts[static_cast<std::size_t>(i)];
    if (reps == 0) {
      out.warnings.push_back("stimulus " + std::to_string(i) + " has no trials");
      out.responses.row(i).setZero();
    } else {
      out.responses.row(i) = (total.row(i) / static_cast<double>(reps)).cast<float>();
    }
  }
  return out;
}

std::vector<std::vector<Index>> kfold_split(Index n, Index k, std::uint64_t seed) {
  if (k < 2) throw UsageError("kfold_split: k must be >= 2, got " + std::to_string(k));
  if (n < k) throw UsageError("kfold_split: n=" + std::to_string(n) + " is smaller than k=" + std::to_string(k));
  std::vector<Index> order(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = i;
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<std::vector<Index>> folds(static_cast<std::size_t>(k));
  const Index base = n / k, extra = n % k;
  Index at = 0;
  for (Index f = 0; f < k; ++f) {
    const Index size = base + (f < extra ? 1 : 0);
    auto& fold = folds[static_cast<std::size_t>(f)];
    fold.assign(order.begin() + at, order.begin() + at + size);
    std::sort(fold.begin(), fold.end());
    at += size;
  }
  return folds;
}

FoldSplit fold_split(const std::vector<std::vector<Index>>& folds, Index fold) {
  if (fold < 0 || fold >= static_cast<Index>(folds.size())) {
    throw UsageError("fold index " + std::to_string(fold) + " outside 0.." + std::to_string(folds.size() - 1));
  }
  FoldSplit s;
  s.test = folds[static_cast<std::size_t>(fold)];
  for (std::size_t f = 0; f < folds.size(); ++f) {
    if (static_cast<Index>(f) == fold) continue;
    s.train.insert(s.train.end(), folds[f].begin(), folds[f].end());
  }
  std::sort(s.train.begin(), s.train.end());
  if (s.test.empty() || s.train.empty()) throw UsageError("fold " + std::to_string(fold) + " is empty");
  return s;
}

}  // namespace mmenc
