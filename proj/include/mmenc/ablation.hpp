#pragma once

#include <array>
#include <functional>
#include <string>
#include <vector>

#include "mmenc/evaluation.hpp"
#include "mmenc/train.hpp"

namespace mmenc {

// The four arms, all sharing seed and folds:
//   multimodal           clean captions
//   image_only           text branch removed, same epochs
//   image_only_extended  text branch removed, twice the epochs
//   noisy_text           multimodal on token-corrupted captions
enum class Arm { Multimodal, ImageOnly, ImageOnlyExtended, NoisyText };

inline constexpr std::array<Arm, 4> kArms = {Arm::Multimodal, Arm::ImageOnly, Arm::ImageOnlyExtended, Arm::NoisyText};

std::string arm_name(Arm a);

struct AblationConfig {
  ModelConfig model = ModelConfig::desk_scale();  // modality is set per arm
  TrainConfig train;
  double corruption_rate = 0.5;
  std::vector<Index> folds;  // empty: every fold
  std::vector<Arm> arms{kArms.begin(), kArms.end()};
  std::string fingerprint;  // recorded in every report
};

struct ArmRun {
  Arm arm = Arm::Multimodal;
  Index fold = 0;
  std::vector<EvaluationReport> reports;  // LH, RH
  double median_r = 0.0;                  // over every voxel of both hemispheres
  Index best_epoch = -1;
};

// Winner of one fold on "All vertices"; `scope` is "LH", "RH" or "both".
struct SummaryRow {
  Index fold = 0;
  std::string scope;
  std::vector<std::pair<Arm, double>> medians;
  Arm winner = Arm::Multimodal;
};

struct AblationResult {
  std::vector<ArmRun> runs;
  std::vector<ComparisonReport> comparisons;  // every arm against multimodal, per fold and hemisphere
  std::vector<SummaryRow> summary;

  const ArmRun& run(Arm a, Index fold) const;
};

using ArmCallback = std::function<void(Arm, Index fold, const EpochRecord&)>;

AblationResult run_ablation(const Dataset& d, const AblationConfig& config, const ArmCallback& on_epoch = {});

// Test-fold evaluation of one trained model: per-voxel R and both hemisphere reports.
ArmRun evaluate_arm(const ModelParams<float>& params, const ModelConfig& model, const Dataset& d, const FoldSplit& split,
                    Index fold, const std::string& run_id, const std::string& fingerprint);

std::string summary_csv(const AblationResult& r);

}  // namespace mmenc
