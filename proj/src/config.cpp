#include "mmenc/config.hpp"

#include <fmt/format.h>

#include <functional>
#include <map>
#include <set>

namespace mmenc {

std::string format_number(double v) { return fmt::format("{}", v); }

namespace {

Index parse_index(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const long long x = std::stoll(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return static_cast<Index>(x);
  } catch (const std::logic_error&) {
    throw ConfigError("'" + key + "': expected an integer, got '" + v + "'");
  }
}

double parse_real(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const double x = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return x;
  } catch (const std::logic_error&) {
    throw ConfigError("'" + key + "': expected a number, got '" + v + "'");
  }
}

template <typename T>
using Setters = std::map<std::string, std::function<void(T&, const std::string& key, const std::string&)>>;

const Setters<ModelConfig>& model_setters() {
  static const Setters<ModelConfig> s = [] {
    Setters<ModelConfig> m;
    auto idx = [&m](const char* name, Index ModelConfig::*field) {
      m[name] = [field](ModelConfig& c, const std::string& k, const std::string& v) { c.*field = parse_index(k, v); };
    };
    idx("hidden_size", &ModelConfig::hidden_size);
    idx("depth", &ModelConfig::depth);
    idx("heads", &ModelConfig::heads);
    idx("mlp_size", &ModelConfig::mlp_size);
    idx("patch_size", &ModelConfig::patch_size);
    idx("image_channels", &ModelConfig::image_channels);
    idx("image_height", &ModelConfig::image_height);
    idx("image_width", &ModelConfig::image_width);
    idx("text_length", &ModelConfig::text_length);
    idx("vocab_size", &ModelConfig::vocab_size);
    idx("voxel_count", &ModelConfig::voxel_count);
    idx("reduction_channels", &ModelConfig::reduction_channels);
    idx("reduction_kernel", &ModelConfig::reduction_kernel);
    m["mode"] = [](ModelConfig& c, const std::string&, const std::string& v) { c.modality = parse_modality(v); };
    return m;
  }();
  return s;
}

const Setters<TrainConfig>& train_setters() {
  static const Setters<TrainConfig> s = [] {
    Setters<TrainConfig> m;
    auto real = [&m](const char* name, double TrainConfig::*field) {
      m[name] = [field](TrainConfig& c, const std::string& k, const std::string& v) { c.*field = parse_real(k, v); };
    };
    auto idx = [&m](const char* name, Index TrainConfig::*field) {
      m[name] = [field](TrainConfig& c, const std::string& k, const std::string& v) { c.*field = parse_index(k, v); };
    };
    real("base_lr", &TrainConfig::base_lr);
    real("weight_decay", &TrainConfig::weight_decay);
    real("decay_factor", &TrainConfig::decay_factor);
    idx("decay_interval_epochs", &TrainConfig::decay_interval_epochs);
    idx("epochs", &TrainConfig::epochs);
    idx("batch_size", &TrainConfig::batch_size);
    real("beta1", &TrainConfig::beta1);
    real("beta2", &TrainConfig::beta2);
    real("adam_eps", &TrainConfig::adam_eps);
    m["seed"] = [](TrainConfig& c, const std::string& k, const std::string& v) {
      const Index x = parse_index(k, v);
      if (x < 0) throw ConfigError("'" + k + "': seed must be >= 0");
      c.seed = static_cast<std::uint64_t>(x);
    };
    idx("folds", &TrainConfig::folds);
    real("validation_fraction", &TrainConfig::validation_fraction);
    return m;
  }();
  return s;
}

template <typename T>
T apply(const Setters<T>& setters, const io::KeyValues& kv, T base, std::string_view prefix, const char* what) {
  for (const auto& [key, value] : kv) {
    if (key.compare(0, prefix.size(), prefix) != 0) continue;
    const auto field = key.substr(prefix.size());
    const auto it = setters.find(field);
    if (it == setters.end()) throw ConfigError(std::string("unknown ") + what + " key '" + key + "'");
    it->second(base, key, value);
  }
  return base;
}

}  // namespace

ModelConfig model_config_from(const io::KeyValues& kv, ModelConfig base, std::string_view prefix) {
  return apply(model_setters(), kv, base, prefix, "model");
}

TrainConfig train_config_from(const io::KeyValues& kv, TrainConfig base, std::string_view prefix) {
  return apply(train_setters(), kv, base, prefix, "training");
}

io::KeyValues to_key_values(const ModelConfig& c, std::string_view prefix) {
  const std::string p(prefix);
  return {{p + "hidden_size", std::to_string(c.hidden_size)},
          {p + "depth", std::to_string(c.depth)},
          {p + "heads", std::to_string(c.heads)},
          {p + "mlp_size", std::to_string(c.mlp_size)},
          {p + "patch_size", std::to_string(c.patch_size)},
          {p + "image_channels", std::to_string(c.image_channels)},
          {p + "image_height", std::to_string(c.image_height)},
          {p + "image_width", std::to_string(c.image_width)},
          {p + "text_length", std::to_string(c.text_length)},
          {p + "vocab_size", std::to_string(c.vocab_size)},
          {p + "voxel_count", std::to_string(c.voxel_count)},
          {p + "reduction_channels", std::to_string(c.reduction_channels)},
          {p + "reduction_kernel", std::to_string(c.reduction_kernel)},
          {p + "mode", to_string(c.modality)}};
}

io::KeyValues to_key_values(const TrainConfig& c, std::string_view prefix) {
  const std::string p(prefix);
  return {{p + "base_lr", format_number(c.base_lr)},
          {p + "weight_decay", format_number(c.weight_decay)},
          {p + "decay_factor", format_number(c.decay_factor)},
          {p + "decay_interval_epochs", std::to_string(c.decay_interval_epochs)},
          {p + "epochs", std::to_string(c.epochs)},
          {p + "batch_size", std::to_string(c.batch_size)},
          {p + "beta1", format_number(c.beta1)},
          {p + "beta2", format_number(c.beta2)},
          {p + "adam_eps", format_number(c.adam_eps)},
          {p + "seed", std::to_string(c.seed)},
          {p + "folds", std::to_string(c.folds)},
          {p + "validation_fraction", format_number(c.validation_fraction)}};
}

RunConfig run_config_from(const io::KeyValues& kv, RunConfig base) {
  io::KeyValues model_kv, train_kv;
  for (const auto& [k, v] : kv) {
    if (model_setters().count(k)) {
      model_kv[k] = v;
    } else if (train_setters().count(k)) {
      train_kv[k] = v;
    } else {
      throw ConfigError("unknown config key '" + k + "'");
    }
  }
  base.model = model_config_from(model_kv, base.model);
  base.train = train_config_from(train_kv, base.train);
  return base;
}

io::KeyValues to_key_values(const RunConfig& c) {
  auto kv = to_key_values(c.model);
  kv.merge(to_key_values(c.train));
  return kv;
}

}  // namespace mmenc
