#include "mmenc/ablation.hpp"

#include <fmt/format.h>

#include <algorithm>

#include "mmenc/synth.hpp"

namespace mmenc {

std::string arm_name(Arm a) {
  switch (a) {
    case Arm::Multimodal: return "multimodal";
    case Arm::ImageOnly: return "image_only";
    case Arm::ImageOnlyExtended: return "image_only_extended";
    case Arm::NoisyText: return "noisy_text";
  }
  return "unknown";
}

const ArmRun& AblationResult::run(Arm a, Index fold) const {
  for (const auto& r : runs) {
    if (r.arm == a && r.fold == fold) return r;
  }
  throw UsageError("ablation has no " + arm_name(a) + " run for fold " + std::to_string(fold));
}

ArmRun evaluate_arm(const ModelParams<float>& params, const ModelConfig& model, const Dataset& d, const FoldSplit& split,
                    Index fold, const std::string& run_id, const std::string& fingerprint) {
  const auto tokens = tokenize_dataset(d, model);
  const Eigen::VectorXd r = evaluate_rows(params, model, d, tokens, split.test);
  ArmRun run;
  run.fold = fold;
  run.reports = hemisphere_reports(r, d, fold, run_id, fingerprint);
  run.median_r = median(std::vector<double>(r.data(), r.data() + r.size()));
  return run;
}

AblationResult run_ablation(const Dataset& d, const AblationConfig& config, const ArmCallback& on_epoch) {
  config.train.validate();
  const auto folds = kfold_split(d.size(), config.train.folds, config.train.seed);
  std::vector<Index> which = config.folds;
  if (which.empty()) {
    for (Index k = 0; k < config.train.folds; ++k) which.push_back(k);
  }
  const bool needs_noisy = std::find(config.arms.begin(), config.arms.end(), Arm::NoisyText) != config.arms.end();
  const Dataset noisy = needs_noisy ? corrupt_captions(d, config.corruption_rate, config.train.seed) : Dataset{};

  AblationResult result;
  for (Index fold : which) {
    if (fold < 0 || fold >= config.train.folds) {
      throw UsageError("fold " + std::to_string(fold) + " out of range for " + std::to_string(config.train.folds) +
                       " folds");
    }
    const auto split = fold_split(folds, fold);
    for (Arm arm : config.arms) {
      ModelConfig model = config.model;
      TrainConfig train = config.train;
      model.modality = (arm == Arm::ImageOnly || arm == Arm::ImageOnlyExtended) ? Modality::ImageOnly : Modality::Multimodal;
      if (arm == Arm::ImageOnlyExtended) train.epochs *= 2;
      const Dataset& data = arm == Arm::NoisyText ? noisy : d;
      model = model_config_for(data, model);
      EpochCallback cb;
      if (on_epoch) cb = [&](const EpochRecord& rec) { on_epoch(arm, fold, rec); };
      const auto trained = train_model(model, data, split, train, cb);
      auto run = evaluate_arm(trained.params, model, data, split, fold, arm_name(arm), config.fingerprint);
      run.arm = arm;
      run.best_epoch = trained.best_epoch;
      result.runs.push_back(std::move(run));
    }

    const bool has_base = std::find(config.arms.begin(), config.arms.end(), Arm::Multimodal) != config.arms.end();
    if (has_base) {
      const auto& base = result.run(Arm::Multimodal, fold);
      for (Arm arm : config.arms) {
        if (arm == Arm::Multimodal) continue;
        const auto& cand = result.run(arm, fold);
        for (std::size_t h = 0; h < base.reports.size(); ++h) {
          result.comparisons.push_back(compare_runs(base.reports[h], cand.reports[h]));
        }
      }
    }

    for (const char* scope : {"LH", "RH", "both"}) {
      SummaryRow row;
      row.fold = fold;
      row.scope = scope;
      double best = 0.0;
      for (Arm arm : config.arms) {
        const auto& run = result.run(arm, fold);
        double m = run.median_r;
        if (row.scope == "LH") m = run.reports[0].all_vertices();
        if (row.scope == "RH") m = run.reports[1].all_vertices();
        row.medians.emplace_back(arm, m);
        // Ties go to the earlier arm.
        if (row.medians.size() == 1 || m > best) {
          best = m;
          row.winner = arm;
        }
      }
      result.summary.push_back(std::move(row));
    }
  }
  return result;
}

std::string summary_csv(const AblationResult& r) {
  std::string out;
  if (r.summary.empty()) return out;
  out = "fold,scope";
  for (const auto& [arm, m] : r.summary.front().medians) out += "," + arm_name(arm);
  out += ",winner\n";
  for (const auto& row : r.summary) {
    out += fmt::format("{},{}", row.fold, row.scope);
    for (const auto& [arm, m] : row.medians) out += fmt::format(",{}", m);
    out += "," + arm_name(row.winner) + "\n";
  }
  return out;
}

}  // namespace mmenc
