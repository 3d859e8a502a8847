#include <fmt/format.h>

#include <CLI11.hpp>
#include <cstdio>
#include <filesystem>
#include <iostream>

#include "mmenc/ablation.hpp"
#include "mmenc/checkpoint.hpp"
#include "mmenc/config.hpp"
#include "mmenc/evaluation.hpp"
#include "mmenc/synth.hpp"
#include "mmenc/train.hpp"

namespace fs = std::filesystem;
using namespace mmenc;

namespace {

struct Globals {
  std::optional<std::uint64_t> seed;
  fs::path out;
  bool quiet = false;
  std::string command_line;
};

void note(const Globals& g, const std::string& line) {
  if (!g.quiet) std::cerr << line << '\n';
}

io::KeyValues parse_sets(const std::vector<std::string>& sets) {
  io::KeyValues kv;
  for (const auto& s : sets) {
    const auto eq = s.find('=');
    if (eq == std::string::npos || eq == 0) throw UsageError("--set expects key=value, got '" + s + "'");
    kv[s.substr(0, eq)] = s.substr(eq + 1);
  }
  return kv;
}

void require_dir(const fs::path& p, const char* what) {
  if (!fs::is_directory(p)) throw UsageError(std::string(what) + " directory not found: " + p.string());
}

// Settings from the config file, then --set pairs, then dedicated flags.
RunConfig load_run_config(const std::string& file, const std::vector<std::string>& sets, const Globals& g) {
  RunConfig rc;
  if (!file.empty()) rc = run_config_from(io::read_key_values(file), rc);
  rc = run_config_from(parse_sets(sets), rc);
  if (g.seed) rc.train.seed = *g.seed;
  return rc;
}

std::string write_dims_error(const ModelConfig& c, const Dataset& d) {
  return fmt::format(
      "checkpoint expects images {}x{}x{}, vocabulary {}, {} voxels; dataset has images {}x{}x{}, vocabulary {}, {} "
      "voxels",
      c.image_channels, c.image_height, c.image_width, c.vocab_size, c.voxel_count, d.channels, d.height, d.width,
      d.vocab.size(), d.total_voxels());
}

void cmd_synth(const Globals& g, const std::string& spec_file, const std::vector<std::string>& sets) {
  SynthSpec spec;
  if (!spec_file.empty()) spec = synth_spec_from(io::read_key_values(spec_file), spec);
  spec = synth_spec_from(parse_sets(sets), spec);
  if (g.seed) spec.seed = *g.seed;
  spec.validate();
  const std::string started = io::utc_timestamp();
  const Dataset d = generate_synthetic(spec);
  io::StagedDirectory out(g.out);
  auto run = to_key_values(spec);
  run["command"] = g.command_line;
  run["started_at"] = started;
  run["finished_at"] = io::utc_timestamp();
  save_dataset(d, out.path(), run);
  out.commit();
  const std::vector<Index> all = [&] {
    std::vector<Index> v(static_cast<std::size_t>(d.size()));
    for (Index i = 0; i < d.size(); ++i) v[static_cast<std::size_t>(i)] = i;
    return v;
  }();
  const Eigen::VectorXd ceiling = noise_ceiling(d, all);
  note(g, fmt::format("wrote {} samples, {}+{} voxels to {} (median noise ceiling {:.4f})", d.size(), d.voxels_lh,
                      d.voxels_rh, g.out.string(), median(std::vector<double>(ceiling.data(), ceiling.data() + ceiling.size()))));
}

void cmd_train(const Globals& g, const fs::path& data, const std::string& config_file, const std::vector<std::string>& sets,
               const std::optional<std::string>& mode, Index fold, std::optional<Index> epochs) {
  require_dir(data, "dataset");
  RunConfig rc = load_run_config(config_file, sets, g);
  if (mode) rc.model.modality = parse_modality(*mode);
  if (epochs) rc.train.epochs = *epochs;
  rc.train.validate();
  if (fold < 0 || fold >= rc.train.folds) {
    throw UsageError(fmt::format("--fold {} out of range: folds = {}", fold, rc.train.folds));
  }
  const std::string started = io::utc_timestamp();
  const Dataset d = load_dataset(data);
  const ModelConfig model = model_config_for(d, rc.model);
  const auto split = fold_split(kfold_split(d.size(), rc.train.folds, rc.train.seed), fold);
  note(g, fmt::format("training {} model ({} parameters, sequence length {}) on fold {}: {} train / {} test stimuli",
                      to_string(model.modality), parameter_count(model), model.sequence_length(), fold,
                      split.train.size(), split.test.size()));
  const auto result = train_model(model, d, split, rc.train, [&](const EpochRecord& r) {
    note(g, fmt::format("epoch {:3d}  lr {:.3e}  loss {:.5f}  val median R {:.4f}", r.epoch, r.lr, r.train_loss,
                        r.val_median_r));
  });

  io::StagedDirectory out(g.out);
  Checkpoint c;
  c.model = model;
  c.train = rc.train;
  c.epoch = result.best_epoch;
  c.params = result.params;
  c.extra = {{"command", g.command_line},
             {"dataset", fs::absolute(data).string()},
             {"dataset_fingerprint", dataset_fingerprint(data)},
             {"fold", std::to_string(fold)},
             {"mode", to_string(model.modality)},
             {"sequence_length", std::to_string(model.sequence_length())},
             {"best_val_median_r", format_number(result.best_val_median_r)},
             {"trace_file", "trace.csv"},
             {"started_at", started},
             {"finished_at", io::utc_timestamp()}};
  io::write_text(out.path() / "trace.csv", trace_csv(result.trace));
  save_checkpoint(c, out.path());
  out.commit();
  note(g, fmt::format("best epoch {} (val median R {:.4f}); checkpoint in {}", result.best_epoch,
                      result.best_val_median_r, g.out.string()));
}

void cmd_eval(const Globals& g, const fs::path& checkpoint, const fs::path& data, std::optional<Index> fold_flag,
              bool svg) {
  require_dir(checkpoint, "checkpoint");
  require_dir(data, "dataset");
  const std::string started = io::utc_timestamp();
  const Checkpoint c = load_checkpoint(checkpoint);
  const Dataset d = load_dataset(data);
  if (c.model.image_channels != d.channels || c.model.image_height != d.height || c.model.image_width != d.width ||
      c.model.vocab_size != d.vocab.size() || c.model.voxel_count != d.total_voxels()) {
    throw ShapeDisagreementError(write_dims_error(c.model, d));
  }
  Index fold = 0;
  if (fold_flag) {
    fold = *fold_flag;
  } else if (c.extra.count("fold")) {
    fold = std::stoll(c.extra.at("fold"));
  }
  if (fold < 0 || fold >= c.train.folds) throw UsageError(fmt::format("--fold {} out of range: folds = {}", fold, c.train.folds));
  const auto split = fold_split(kfold_split(d.size(), c.train.folds, c.train.seed), fold);
  const std::string fingerprint = dataset_fingerprint(data);
  const std::string params_hash = io::git_blob_hash(encode_params(c.params, c.model));
  const std::string run_id = to_string(c.model.modality) + "-" + params_hash.substr(0, 8);
  const auto run = evaluate_arm(c.params, c.model, d, split, fold, run_id, fingerprint);

  io::StagedDirectory out(g.out);
  for (const auto& rep : run.reports) {
    const std::string h = hemisphere_name(rep.hemisphere);
    io::write_text(out.path() / ("report_" + h + ".csv"), report_csv(std::span<const EvaluationReport>(&rep, 1)));
    io::write_text(out.path() / ("report_" + h + ".json"), report_json(rep));
    if (svg) io::write_text(out.path() / ("report_" + h + ".svg"), report_svg(rep));
    note(g, fmt::format("{} {}: All vertices median R {:.4f}", rep.subject, h, rep.all_vertices()));
  }
  auto kv = to_key_values(c.model, "model.");
  kv.merge(to_key_values(c.train, "train."));
  kv.merge(io::KeyValues{{"command", g.command_line},
                         {"checkpoint", fs::absolute(checkpoint).string()},
                         {"dataset", fs::absolute(data).string()},
                         {"dataset_fingerprint", fingerprint},
                         {"params_hash", params_hash},
                         {"seed", std::to_string(c.train.seed)},
                         {"fold", std::to_string(fold)},
                         {"run_id", run_id},
                         {"started_at", started},
                         {"finished_at", io::utc_timestamp()}});
  io::write_text(out.path() / "manifest.txt", io::format_key_values(kv));
  out.commit();
}

void cmd_ablate(const Globals& g, const fs::path& data, const std::string& config_file, const std::vector<std::string>& sets,
                const std::vector<Index>& folds, double corruption_rate, std::optional<Index> epochs) {
  require_dir(data, "dataset");
  const RunConfig rc = load_run_config(config_file, sets, g);
  const std::string started = io::utc_timestamp();
  const Dataset d = load_dataset(data);
  AblationConfig ac;
  ac.model = rc.model;
  ac.train = rc.train;
  if (epochs) ac.train.epochs = *epochs;
  ac.corruption_rate = corruption_rate;
  ac.folds = folds;
  ac.fingerprint = dataset_fingerprint(data);
  if (!(corruption_rate >= 0.0 && corruption_rate <= 1.0)) throw UsageError("--corruption-rate must lie in [0, 1]");

  const auto result = run_ablation(d, ac, [&](Arm arm, Index fold, const EpochRecord& r) {
    if (r.epoch + 1 == (arm == Arm::ImageOnlyExtended ? 2 : 1) * ac.train.epochs) {
      note(g, fmt::format("fold {} {}: {} epochs, final val median R {:.4f}", fold, arm_name(arm), r.epoch + 1,
                          r.val_median_r));
    }
  });

  io::StagedDirectory out(g.out);
  fs::create_directories(out.path() / "reports");
  fs::create_directories(out.path() / "comparisons");
  for (Arm arm : ac.arms) {
    std::vector<EvaluationReport> reps;
    for (const auto& run : result.runs) {
      if (run.arm == arm) reps.insert(reps.end(), run.reports.begin(), run.reports.end());
    }
    io::write_text(out.path() / "reports" / (arm_name(arm) + ".csv"), report_csv(reps));
    if (arm == Arm::Multimodal) continue;
    std::vector<ComparisonReport> comps;
    for (const auto& c : result.comparisons) {
      if (c.candidate_run == arm_name(arm)) comps.push_back(c);
    }
    io::write_text(out.path() / "comparisons" / (arm_name(arm) + "_vs_multimodal.csv"), comparison_csv(comps));
  }
  io::write_text(out.path() / "summary.csv", summary_csv(result));
  auto kv = to_key_values(ac.model, "model.");
  kv.merge(to_key_values(ac.train, "train."));
  std::string fold_list;
  for (const auto& row : result.summary) {
    if (row.scope == "both") fold_list += (fold_list.empty() ? "" : ",") + std::to_string(row.fold);
  }
  kv.merge(io::KeyValues{{"command", g.command_line},
                         {"dataset", fs::absolute(data).string()},
                         {"dataset_fingerprint", ac.fingerprint},
                         {"seed", std::to_string(ac.train.seed)},
                         {"corruption_rate", format_number(corruption_rate)},
                         {"folds", fold_list},
                         {"started_at", started},
                         {"finished_at", io::utc_timestamp()}});
  io::write_text(out.path() / "manifest.txt", io::format_key_values(kv));
  out.commit();
  for (const auto& row : result.summary) {
    if (row.scope == "both") note(g, fmt::format("fold {}: {} wins All vertices", row.fold, arm_name(row.winner)));
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multimodal fMRI encoding: synthesize data, train, evaluate, ablate"};
  app.require_subcommand(1);
  Globals g;
  for (int i = 0; i < argc; ++i) g.command_line += (i ? " " : "") + std::string(argv[i]);
  app.add_option("--seed", g.seed, "Seed overriding the spec or config value");
  app.add_option("--out", g.out, "Output directory (written atomically)")->required();
  app.add_flag("--quiet", g.quiet, "Suppress progress output");

  std::string spec_file, config_file;
  std::vector<std::string> sets;
  fs::path data, checkpoint;
  std::optional<std::string> mode;
  Index fold = 0;
  std::optional<Index> eval_fold, epochs;
  std::vector<Index> folds;
  bool svg = false;
  double corruption_rate = 0.5;

  auto* synth = app.add_subcommand("synth", "Generate a synthetic dataset")->fallthrough();
  synth->add_option("--spec", spec_file, "Spec file (key=value)")->check(CLI::ExistingFile);
  synth->add_option("--set", sets, "Spec override key=value");

  auto* train = app.add_subcommand("train", "Train one model on one fold")->fallthrough();
  train->add_option("--data", data, "Dataset directory")->required();
  train->add_option("--config", config_file, "Config file (key=value)")->check(CLI::ExistingFile);
  train->add_option("--set", sets, "Config override key=value");
  train->add_option("--mode", mode, "multimodal or image-only");
  train->add_option("--fold", fold, "Held-out fold index");
  train->add_option("--epochs", epochs, "Training epochs");

  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint on its held-out fold")->fallthrough();
  eval->add_option("--checkpoint", checkpoint, "Checkpoint directory")->required();
  eval->add_option("--data", data, "Dataset directory")->required();
  eval->add_option("--fold", eval_fold, "Fold index (default: the checkpoint's)");
  eval->add_flag("--svg", svg, "Also write one bar chart per hemisphere");

  auto* ablate = app.add_subcommand("ablate", "Run the four ablation arms over the folds")->fallthrough();
  ablate->add_option("--data", data, "Dataset directory")->required();
  ablate->add_option("--config", config_file, "Config file (key=value)")->check(CLI::ExistingFile);
  ablate->add_option("--set", sets, "Config override key=value");
  ablate->add_option("--folds", folds, "Folds to run (default: all)")->delimiter(',');
  ablate->add_option("--corruption-rate", corruption_rate, "Token corruption rate of the noisy-text arm");
  ablate->add_option("--epochs", epochs, "Training epochs of the equal-epoch arms");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (*synth) cmd_synth(g, spec_file, sets);
    if (*train) cmd_train(g, data, config_file, sets, mode, fold, epochs);
    if (*eval) cmd_eval(g, checkpoint, data, eval_fold, svg);
    if (*ablate) cmd_ablate(g, data, config_file, sets, folds, corruption_rate, epochs);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
