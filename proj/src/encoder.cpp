#include "mmenc/encoder.hpp"

namespace mmenc {

std::string to_string(Modality m) { return m == Modality::Multimodal ? "multimodal" : "image-only"; }

Modality parse_modality(const std::string& text) {
  if (text == "multimodal") return Modality::Multimodal;
  if (text == "image-only" || text == "image_only") return Modality::ImageOnly;
  throw ConfigError("mode must be 'multimodal' or 'image-only', got '" + text + "'");
}

ModelConfig ModelConfig::paper_scale() {
  ModelConfig c;
  c.hidden_size = 768;
  c.depth = 12;
  c.heads = 12;
  c.mlp_size = 3072;
  c.patch_size = 32;
  c.image_channels = 3;
  c.image_height = 224;
  c.image_width = 224;
  c.text_length = 256;
  c.vocab_size = 30522;
  c.voxel_count = 19004 + 20544;
  return c;
}

ModelConfig ModelConfig::desk_scale() { return ModelConfig{}; }

void ModelConfig::validate() const {
  auto positive = [](Index v, const char* name) {
    if (v < 1) throw ConfigError(std::string(name) + " must be >= 1, got " + std::to_string(v));
  };
  positive(hidden_size, "hidden_size");
  if (depth < 0) throw ConfigError("depth must be >= 0, got " + std::to_string(depth));
  positive(heads, "heads");
  positive(mlp_size, "mlp_size");
  positive(patch_size, "patch_size");
  positive(image_channels, "image_channels");
  positive(image_height, "image_height");
  positive(image_width, "image_width");
  positive(text_length, "text_length");
  positive(vocab_size, "vocab_size");
  positive(voxel_count, "voxel_count");
  positive(reduction_channels, "reduction_channels");
  positive(reduction_kernel, "reduction_kernel");
  if (image_height % patch_size != 0 || image_width % patch_size != 0) {
    throw ConfigError("image_height/image_width (" + std::to_string(image_height) + "x" + std::to_string(image_width) +
                      ") must be divisible by patch_size P=" + std::to_string(patch_size));
  }
  if (hidden_size % heads != 0) {
    throw ConfigError("hidden_size " + std::to_string(hidden_size) + " must be divisible by heads " +
                      std::to_string(heads));
  }
  if (reduction_kernel > sequence_length()) {
    throw ConfigError("reduction_kernel " + std::to_string(reduction_kernel) + " exceeds sequence length " +
                      std::to_string(sequence_length()));
  }
}

Index parameter_count(const ModelConfig& c) {
  const Index h = c.hidden_size;
  Index n = c.patch_dim() * h + c.image_tokens() * h + h + h;
  if (c.modality == Modality::Multimodal) n += c.vocab_size * h + c.text_tokens() * h + h + h;
  const Index block = 4 * h * h + 4 * h + 4 * h + 2 * h * c.mlp_size + c.mlp_size + h;
  n += c.depth * block;
  n += h * h;
  n += c.reduction_channels * h * c.reduction_kernel + c.reduction_channels;
  n += c.head_inputs() * c.voxel_count + c.voxel_count;
  return n;
}

}  // namespace mmenc
