#include "mmenc/checkpoint.hpp"

namespace mmenc {

namespace fs = std::filesystem;

namespace {
constexpr const char* kFormat = "mmenc-checkpoint";
}

std::string encode_params(const ModelParams<float>& p, const ModelConfig& c) {
  std::string out;
  for_each_parameter(p, c, [&](const ParamInfo&, const Matrix<float>& m) {
    out += io::encode_f32(std::span<const float>(m.data(), static_cast<std::size_t>(m.size())));
  });
  return out;
}

void save_checkpoint(const Checkpoint& c, const fs::path& dir) {
  fs::create_directories(dir);
  const std::string blob = encode_params(c.params, c.model);
  io::write_text(dir / "params.bin", blob);
  io::KeyValues kv = c.extra;
  kv.merge(to_key_values(c.model, "model."));
  kv.merge(to_key_values(c.train, "train."));
  kv["format"] = kFormat;
  kv["version"] = std::to_string(Checkpoint::kVersion);
  kv["seed"] = std::to_string(c.train.seed);
  kv["epoch"] = std::to_string(c.epoch);
  kv["params_file"] = "params.bin";
  kv["params_count"] = std::to_string(count_parameters(c.params, c.model));
  kv["params_hash"] = io::git_blob_hash(blob);
  io::write_text(dir / "manifest.txt", io::format_key_values(kv));
}

Checkpoint load_checkpoint(const fs::path& dir) {
  if (!fs::exists(dir / "manifest.txt")) throw FormatError("no checkpoint manifest in " + dir.string());
  const auto kv = io::read_key_values(dir / "manifest.txt");
  const auto get = [&](const std::string& k) -> const std::string& {
    const auto it = kv.find(k);
    if (it == kv.end()) throw FormatError("checkpoint manifest lacks '" + k + "'");
    return it->second;
  };
  if (get("format") != kFormat) throw FormatError("not a checkpoint manifest: " + dir.string());
  if (get("version") != std::to_string(Checkpoint::kVersion)) {
    throw VersionError("checkpoint version " + get("version") + " is not supported (expected " +
                       std::to_string(Checkpoint::kVersion) + ")");
  }
  Checkpoint c;
  c.model = model_config_from(kv, ModelConfig{}, "model.");
  c.train = train_config_from(kv, TrainConfig{}, "train.");
  c.epoch = std::stoll(get("epoch"));
  c.model.validate();
  const Index count = parameter_count(c.model);
  if (std::to_string(count) != get("params_count")) {
    throw ShapeDisagreementError("checkpoint declares " + get("params_count") + " parameters but its config implies " +
                                 std::to_string(count));
  }
  const auto values = io::read_f32(dir / get("params_file"), static_cast<std::size_t>(count));
  c.params = zero_params<float>(c.model);
  std::size_t at = 0;
  for_each_parameter(c.params, c.model, [&](const ParamInfo&, Matrix<float>& m) {
    std::copy(values.begin() + static_cast<std::ptrdiff_t>(at), values.begin() + static_cast<std::ptrdiff_t>(at + m.size()),
              m.data());
    at += static_cast<std::size_t>(m.size());
  });
  for (const auto& [k, v] : kv) {
    if (k.rfind("model.", 0) == 0 || k.rfind("train.", 0) == 0) continue;
    c.extra[k] = v;
  }
  return c;
}

}  // namespace mmenc
