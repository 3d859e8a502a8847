#pragma once

#include <functional>
#include <string>
#include <vector>

#include "mmenc/dataset.hpp"
#include "mmenc/objective.hpp"
#include "mmenc/optim.hpp"
#include "mmenc/preprocess.hpp"

namespace mmenc {

// Copies the dataset-determined fields (image dims, vocabulary, voxel count) into `base`.
ModelConfig model_config_for(const Dataset& d, ModelConfig base);

// Selected caption of every sample, tokenized and padded to the config's text length.
std::vector<std::vector<Index>> tokenize_dataset(const Dataset& d, const ModelConfig& c);

// Predictions for `rows`, [rows × voxel_count], computed in batches without gradients.
Matrix<float> predict_rows(const ModelParams<float>& params, const ModelConfig& c, const Dataset& d,
                           const std::vector<std::vector<Index>>& tokens, std::span<const Index> rows,
                           Index batch_size = 64);

// Per-voxel correlation of the model on `rows`, left hemisphere voxels first.
Eigen::VectorXd evaluate_rows(const ModelParams<float>& params, const ModelConfig& c, const Dataset& d,
                              const std::vector<std::vector<Index>>& tokens, std::span<const Index> rows);

double median(std::vector<double> values);

struct EpochRecord {
  Index epoch = 0;
  double lr = 0.0;
  double train_loss = 0.0;
  double val_median_r = 0.0;
};

struct TrainResult {
  ModelParams<float> params;  // best validation epoch (or the initialization when epochs == 0)
  std::vector<EpochRecord> trace;
  Index best_epoch = -1;
  double best_val_median_r = 0.0;
};

// Called after each epoch; used for progress output.
using EpochCallback = std::function<void(const EpochRecord&)>;

// Trains on split.train, holding back a seeded validation share of it to pick
// the best epoch. Every epoch reshuffles, runs forward → 1 − mean R → backward
// → AdamW with lr_at_epoch. Deterministic for a fixed seed.
TrainResult train_model(const ModelConfig& model, const Dataset& d, const FoldSplit& split, const TrainConfig& config,
                  const EpochCallback& on_epoch = {});

std::string trace_csv(const std::vector<EpochRecord>& trace);

}  // namespace mmenc
