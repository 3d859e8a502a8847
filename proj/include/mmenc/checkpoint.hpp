#pragma once

#include <filesystem>

#include "mmenc/config.hpp"

namespace mmenc {

// Trained model on disk: manifest.txt (key=value config fields, seed, epoch,
// plus caller-supplied run metadata) and params.bin (every parameter as
// little-endian float32, in for_each_parameter order).
struct Checkpoint {
  static constexpr int kVersion = 1;

  ModelConfig model;
  TrainConfig train;
  Index epoch = -1;  // epoch the parameters come from; -1 for an untrained initialization
  ModelParams<float> params;
  io::KeyValues extra;  // additional manifest entries (run metadata)
};

void save_checkpoint(const Checkpoint& c, const std::filesystem::path& dir);
Checkpoint load_checkpoint(const std::filesystem::path& dir);

std::string encode_params(const ModelParams<float>& p, const ModelConfig& c);

}  // namespace mmenc
