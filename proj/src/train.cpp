#include "mmenc/train.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

namespace mmenc {

ModelConfig model_config_for(const Dataset& d, ModelConfig base) {
  base.image_channels = d.channels;
  base.image_height = d.height;
  base.image_width = d.width;
  base.vocab_size = d.vocab.size();
  base.voxel_count = d.total_voxels();
  base.validate();
  return base;
}

std::vector<std::vector<Index>> tokenize_dataset(const Dataset& d, const ModelConfig& c) {
  std::vector<std::vector<Index>> out;
  out.reserve(d.samples.size());
  for (const auto& s : d.samples) out.push_back(tokenize_pad(s.selected_caption(), d.vocab, c.text_length));
  return out;
}

namespace {

Batch<float> gather_batch(const Dataset& d, const std::vector<std::vector<Index>>& tokens, std::span<const Index> rows,
                          const ModelConfig& c) {
  std::vector<const Tensor<float>*> images;
  std::vector<const std::vector<Index>*> toks;
  for (Index r : rows) {
    images.push_back(&d.samples.at(static_cast<std::size_t>(r)).image);
    toks.push_back(&tokens.at(static_cast<std::size_t>(r)));
  }
  return make_batch<float>(images, toks, c);
}

}  // namespace

Matrix<float> predict_rows(const ModelParams<float>& params, const ModelConfig& c, const Dataset& d,
                           const std::vector<std::vector<Index>>& tokens, std::span<const Index> rows,
                           Index batch_size) {
  Matrix<float> out(static_cast<Index>(rows.size()), c.voxel_count);
  for (std::size_t at = 0; at < rows.size(); at += static_cast<std::size_t>(batch_size)) {
    const auto chunk = rows.subspan(at, std::min<std::size_t>(static_cast<std::size_t>(batch_size), rows.size() - at));
    out.middleRows(static_cast<Index>(at), static_cast<Index>(chunk.size())) =
        predict(params, c, gather_batch(d, tokens, chunk, c));
  }
  return out;
}

Eigen::VectorXd evaluate_rows(const ModelParams<float>& params, const ModelConfig& c, const Dataset& d,
                              const std::vector<std::vector<Index>>& tokens, std::span<const Index> rows) {
  return pearson_per_voxel(d.responses(rows), predict_rows(params, c, d, tokens, rows));
}

double median(std::vector<double> values) {
  if (values.empty()) throw UsageError("median of an empty set");
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  return n % 2 == 1 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

TrainResult train_model(const ModelConfig& model, const Dataset& d, const FoldSplit& split, const TrainConfig& config,
                  const EpochCallback& on_epoch) {
  config.validate();
  model.validate();
  if (model.voxel_count != d.total_voxels()) {
    throw ShapeError("model voxel_count " + std::to_string(model.voxel_count) + " does not match dataset " +
                     std::to_string(d.total_voxels()));
  }
  if (split.train.size() < 2) throw UsageError("train: training fold needs at least 2 stimuli");

  // Seeded validation hold-out from the training indices.
  std::vector<Index> fit = split.train;
  std::vector<Index> validation;
  {
    std::mt19937_64 rng(config.seed ^ 0x5eedULL);
    std::shuffle(fit.begin(), fit.end(), rng);
    auto hold = static_cast<std::size_t>(std::ceil(config.validation_fraction * static_cast<double>(fit.size())));
    if (hold > 0) hold = std::max<std::size_t>(hold, 2);
    if (hold + 2 > fit.size()) hold = 0;
    validation.assign(fit.end() - static_cast<std::ptrdiff_t>(hold), fit.end());
    fit.resize(fit.size() - hold);
    std::sort(validation.begin(), validation.end());
    std::sort(fit.begin(), fit.end());
  }

  const auto tokens = tokenize_dataset(d, model);
  TrainResult result;
  auto params = init_params<float>(model, config.seed);
  result.params = params;
  OptimizerState<float> state;
  auto grads = zero_params<float>(model);
  std::mt19937_64 shuffle_rng(config.seed + 1);
  double best = -std::numeric_limits<double>::infinity();

  for (Index epoch = 0; epoch < config.epochs; ++epoch) {
    const double lr = lr_at_epoch(epoch, config);
    std::vector<Index> order = fit;
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    // Batches of batch_size; a trailing singleton joins the previous batch.
    std::vector<std::pair<std::size_t, std::size_t>> batches;
    for (std::size_t at = 0; at < order.size(); at += static_cast<std::size_t>(config.batch_size)) {
      batches.emplace_back(at, std::min(order.size(), at + static_cast<std::size_t>(config.batch_size)));
    }
    if (batches.size() > 1 && batches.back().second - batches.back().first < 2) {
      const auto last = batches.back();
      batches.pop_back();
      batches.back().second = last.second;
    }
    double loss_sum = 0.0;
    for (const auto& [begin, end] : batches) {
      const std::span<const Index> rows(order.data() + begin, end - begin);
      const auto batch = gather_batch(d, tokens, rows, model);
      const Matrix<float> truth = d.responses(rows);
      for_each_parameter(grads, model, [](const ParamInfo&, Matrix<float>& g) { g.setZero(); });
      Graph<float> g;
      auto bound = bind(g, params, model, &grads);
      auto out = forward(g, batch, bound, model);
      auto loss = ops::pearson_loss(truth, out.predictions);
      g.backward(loss);
      loss_sum += static_cast<double>(loss.value().item());
      const auto slots = parameter_slots(params, grads, model);
      adamw_step<float>(slots, state, lr, config);
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.lr = lr;
    rec.train_loss = loss_sum / static_cast<double>(batches.size());
    const auto& score_rows = validation.empty() ? fit : validation;
    const Eigen::VectorXd r = evaluate_rows(params, model, d, tokens, score_rows);
    rec.val_median_r = median(std::vector<double>(r.data(), r.data() + r.size()));
    result.trace.push_back(rec);
    // Without a validation share, the final epoch is kept.
    if (validation.empty() || rec.val_median_r > best) {
      best = rec.val_median_r;
      result.params = params;
      result.best_epoch = epoch;
      result.best_val_median_r = rec.val_median_r;
    }
    if (on_epoch) on_epoch(rec);
  }
  return result;
}

std::string trace_csv(const std::vector<EpochRecord>& trace) {
  std::string out = "epoch,lr,train_loss,val_median_R\n";
  for (const auto& r : trace) out += fmt::format("{},{},{},{}\n", r.epoch, r.lr, r.train_loss, r.val_median_r);
  return out;
}

}  // namespace mmenc
