#pragma once

#include <string>
#include <string_view>

#include "mmenc/io.hpp"
#include "mmenc/optim.hpp"

namespace mmenc {

// Model and training settings read from one flat key=value file.
struct RunConfig {
  ModelConfig model = ModelConfig::desk_scale();
  TrainConfig train;

  bool operator==(const RunConfig&) const = default;
};

// Keys are looked up as `<prefix><field>`. Unknown keys under the prefix are
// rejected by name; keys outside it are ignored.
ModelConfig model_config_from(const io::KeyValues& kv, ModelConfig base, std::string_view prefix = "");
TrainConfig train_config_from(const io::KeyValues& kv, TrainConfig base, std::string_view prefix = "");
io::KeyValues to_key_values(const ModelConfig& c, std::string_view prefix = "");
io::KeyValues to_key_values(const TrainConfig& c, std::string_view prefix = "");

// Every key must name a model or training field.
RunConfig run_config_from(const io::KeyValues& kv, RunConfig base = {});
io::KeyValues to_key_values(const RunConfig& c);

std::string format_number(double v);

}  // namespace mmenc
