#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "mmenc/ops.hpp"

namespace mmenc {

enum class Modality { Multimodal, ImageOnly };

std::string to_string(Modality m);
Modality parse_modality(const std::string& text);

// Architecture hyperparameters. Every parameter shape is a function of these fields.
struct ModelConfig {
  Index hidden_size = 64;
  Index depth = 2;
  Index heads = 4;
  Index mlp_size = 256;
  Index patch_size = 8;
  Index image_channels = 3;
  Index image_height = 32;
  Index image_width = 32;
  Index text_length = 16;
  Index vocab_size = 64;
  Index voxel_count = 100;
  Index reduction_channels = 4;
  Index reduction_kernel = 3;
  Modality modality = Modality::Multimodal;

  // ViT-B/32 backbone over 224×224 images with 256-token captions.
  static ModelConfig paper_scale();
  // Small preset used by tests and CPU runs.
  static ModelConfig desk_scale();

  Index num_patches() const { return (image_height / patch_size) * (image_width / patch_size); }
  Index patch_dim() const { return patch_size * patch_size * image_channels; }
  Index image_tokens() const { return num_patches() + 1; }
  Index text_tokens() const { return text_length + 1; }
  Index sequence_length() const {
    return modality == Modality::Multimodal ? image_tokens() + text_tokens() : image_tokens();
  }
  Index reduced_length() const { return sequence_length() - reduction_kernel + 1; }
  Index head_inputs() const { return reduction_channels * reduced_length(); }

  // Throws ConfigError naming the first offending field.
  void validate() const;

  bool operator==(const ModelConfig&) const = default;
};

template <typename Scalar>
struct BlockParams {
  Matrix<Scalar> ln1_gamma, ln1_beta;
  Matrix<Scalar> query, query_bias, key, key_bias, value, value_bias, output, output_bias;
  Matrix<Scalar> ln2_gamma, ln2_beta;
  Matrix<Scalar> mlp_in, mlp_in_bias, mlp_out, mlp_out_bias;
};

// All learnable arrays. Vectors are stored as 1×n matrices.
template <typename Scalar>
struct ModelParams {
  Matrix<Scalar> patch_projection;  // [P²·C × H]
  Matrix<Scalar> image_positions;   // [(N+1) × H]
  Matrix<Scalar> image_cls;         // [1 × H]
  Matrix<Scalar> word_embedding;    // [|V| × H]
  Matrix<Scalar> text_positions;    // [(L+1) × H]
  Matrix<Scalar> text_cls;          // [1 × H]
  Matrix<Scalar> image_type;        // [1 × H]
  Matrix<Scalar> text_type;         // [1 × H]
  std::vector<BlockParams<Scalar>> blocks;
  Matrix<Scalar> pool;               // [H × H]
  Matrix<Scalar> reduction_kernels;  // [reduction_channels × H × k], stored (channels·H) × k
  Matrix<Scalar> reduction_bias;     // [1 × reduction_channels]
  Matrix<Scalar> head;               // [reduction_channels·(S−k+1) × voxels]
  Matrix<Scalar> head_bias;          // [1 × voxels]
};

enum class Init { Zero, Normal, One };

struct ParamInfo {
  std::string name;
  Shape shape;
  bool decay;  // subject to decoupled weight decay
  Init init;
};

namespace detail {

template <typename Params, typename Fn>
void visit_parameters(Params& p, const ModelConfig& c, Fn&& fn) {
  const Index h = c.hidden_size;
  const bool text = c.modality == Modality::Multimodal;
  fn(ParamInfo{"patch_projection", {c.patch_dim(), h}, true, Init::Normal}, p.patch_projection);
  fn(ParamInfo{"image_positions", {c.image_tokens(), h}, false, Init::Normal}, p.image_positions);
  fn(ParamInfo{"image_cls", {1, h}, true, Init::Normal}, p.image_cls);
  if (text) {
    fn(ParamInfo{"word_embedding", {c.vocab_size, h}, true, Init::Normal}, p.word_embedding);
    fn(ParamInfo{"text_positions", {c.text_tokens(), h}, false, Init::Normal}, p.text_positions);
    fn(ParamInfo{"text_cls", {1, h}, true, Init::Normal}, p.text_cls);
    fn(ParamInfo{"text_type", {1, h}, false, Init::Zero}, p.text_type);
  }
  fn(ParamInfo{"image_type", {1, h}, false, Init::Zero}, p.image_type);
  for (std::size_t i = 0; i < p.blocks.size(); ++i) {
    auto& b = p.blocks[i];
    const std::string pre = "block" + std::to_string(i) + ".";
    fn(ParamInfo{pre + "ln1_gamma", {1, h}, false, Init::One}, b.ln1_gamma);
    fn(ParamInfo{pre + "ln1_beta", {1, h}, false, Init::Zero}, b.ln1_beta);
    fn(ParamInfo{pre + "query", {h, h}, true, Init::Normal}, b.query);
    fn(ParamInfo{pre + "query_bias", {1, h}, false, Init::Zero}, b.query_bias);
    fn(ParamInfo{pre + "key", {h, h}, true, Init::Normal}, b.key);
    fn(ParamInfo{pre + "key_bias", {1, h}, false, Init::Zero}, b.key_bias);
    fn(ParamInfo{pre + "value", {h, h}, true, Init::Normal}, b.value);
    fn(ParamInfo{pre + "value_bias", {1, h}, false, Init::Zero}, b.value_bias);
    fn(ParamInfo{pre + "output", {h, h}, true, Init::Normal}, b.output);
    fn(ParamInfo{pre + "output_bias", {1, h}, false, Init::Zero}, b.output_bias);
    fn(ParamInfo{pre + "ln2_gamma", {1, h}, false, Init::One}, b.ln2_gamma);
    fn(ParamInfo{pre + "ln2_beta", {1, h}, false, Init::Zero}, b.ln2_beta);
    fn(ParamInfo{pre + "mlp_in", {h, c.mlp_size}, true, Init::Normal}, b.mlp_in);
    fn(ParamInfo{pre + "mlp_in_bias", {1, c.mlp_size}, false, Init::Zero}, b.mlp_in_bias);
    fn(ParamInfo{pre + "mlp_out", {c.mlp_size, h}, true, Init::Normal}, b.mlp_out);
    fn(ParamInfo{pre + "mlp_out_bias", {1, h}, false, Init::Zero}, b.mlp_out_bias);
  }
  fn(ParamInfo{"pool", {h, h}, true, Init::Normal}, p.pool);
  fn(ParamInfo{"reduction_kernels", {c.reduction_channels, h, c.reduction_kernel}, true, Init::Normal},
     p.reduction_kernels);
  fn(ParamInfo{"reduction_bias", {1, c.reduction_channels}, false, Init::Zero}, p.reduction_bias);
  fn(ParamInfo{"head", {c.head_inputs(), c.voxel_count}, true, Init::Normal}, p.head);
  fn(ParamInfo{"head_bias", {1, c.voxel_count}, false, Init::Zero}, p.head_bias);
}

inline std::pair<Index, Index> storage_dims(const Shape& s) {
  return {shape_size(s) / s.back(), s.back()};
}

}  // namespace detail

// Calls fn(const ParamInfo&, Matrix&) for every parameter in checkpoint order.
// Text-side parameters are absent in image-only mode.
template <typename Scalar, typename Fn>
void for_each_parameter(ModelParams<Scalar>& p, const ModelConfig& c, Fn&& fn) {
  detail::visit_parameters(p, c, fn);
}

template <typename Scalar, typename Fn>
void for_each_parameter(const ModelParams<Scalar>& p, const ModelConfig& c, Fn&& fn) {
  detail::visit_parameters(p, c, fn);
}

// Every parameter allocated at its shape and zero-filled.
template <typename Scalar>
ModelParams<Scalar> zero_params(const ModelConfig& c) {
  c.validate();
  ModelParams<Scalar> p;
  p.blocks.resize(static_cast<std::size_t>(c.depth));
  for_each_parameter(p, c, [](const ParamInfo& info, Matrix<Scalar>& m) {
    const auto [rows, cols] = detail::storage_dims(info.shape);
    m = Matrix<Scalar>::Zero(rows, cols);
  });
  return p;
}

// Weights and position embeddings ~ Normal(0, 0.02); biases and type
// embeddings zero; layer-norm gains one. Draws happen in checkpoint order.
template <typename Scalar>
ModelParams<Scalar> init_params(const ModelConfig& c, std::uint64_t seed) {
  auto p = zero_params<Scalar>(c);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 0.02);
  for_each_parameter(p, c, [&](const ParamInfo& info, Matrix<Scalar>& m) {
    switch (info.init) {
      case Init::Zero:
        break;
      case Init::One:
        m.setOnes();
        break;
      case Init::Normal:
        for (Index i = 0; i < m.size(); ++i) m.data()[i] = static_cast<Scalar>(normal(rng));
        break;
    }
  });
  return p;
}

template <typename Scalar>
Index count_parameters(const ModelParams<Scalar>& p, const ModelConfig& c) {
  Index total = 0;
  for_each_parameter(p, c, [&](const ParamInfo&, const Matrix<Scalar>& m) { total += m.size(); });
  return total;
}

// Parameter count from the architecture alone.
Index parameter_count(const ModelConfig& c);

template <typename To, typename From>
ModelParams<To> cast_params(const ModelParams<From>& p, const ModelConfig& c) {
  auto out = zero_params<To>(c);
  std::vector<const Matrix<From>*> src;
  for_each_parameter(p, c, [&](const ParamInfo&, const Matrix<From>& m) { src.push_back(&m); });
  std::size_t i = 0;
  for_each_parameter(out, c, [&](const ParamInfo&, Matrix<To>& m) { m = src[i++]->template cast<To>(); });
  return out;
}

// Graph-side view of ModelParams: one leaf per parameter.
template <typename Scalar>
struct BoundBlock {
  Var<Scalar> ln1_gamma, ln1_beta, query, query_bias, key, key_bias, value, value_bias, output, output_bias;
  Var<Scalar> ln2_gamma, ln2_beta, mlp_in, mlp_in_bias, mlp_out, mlp_out_bias;
};

template <typename Scalar>
struct BoundParams {
  Var<Scalar> patch_projection, image_positions, image_cls, word_embedding, text_positions, text_cls, image_type,
      text_type;
  std::vector<BoundBlock<Scalar>> blocks;
  Var<Scalar> pool, reduction_kernels, reduction_bias, head, head_bias;
};

// Records every parameter as a leaf. With `grads` set, backward() adds the
// gradients into the matching arrays of `grads` (which must be shaped like
// `params`); without it the leaves are constants.
template <typename Scalar>
BoundParams<Scalar> bind(Graph<Scalar>& g, const ModelParams<Scalar>& params, const ModelConfig& c,
                         ModelParams<Scalar>* grads = nullptr) {
  std::vector<Matrix<Scalar>*> sinks;
  if (grads != nullptr) {
    for_each_parameter(*grads, c, [&](const ParamInfo&, Matrix<Scalar>& m) { sinks.push_back(&m); });
  }
  std::vector<Var<Scalar>> vars;
  for_each_parameter(params, c, [&](const ParamInfo& info, const Matrix<Scalar>& m) {
    if (grads != nullptr) {
      vars.push_back(g.parameter(m, sinks[vars.size()], info.shape));
    } else {
      vars.push_back(g.constant(Tensor<Scalar>(info.shape, m)));
    }
  });
  BoundParams<Scalar> b;
  std::size_t i = 0;
  auto next = [&]() { return vars[i++]; };
  const bool text = c.modality == Modality::Multimodal;
  b.patch_projection = next();
  b.image_positions = next();
  b.image_cls = next();
  if (text) {
    b.word_embedding = next();
    b.text_positions = next();
    b.text_cls = next();
    b.text_type = next();
  }
  b.image_type = next();
  b.blocks.resize(params.blocks.size());
  for (auto& blk : b.blocks) {
    blk.ln1_gamma = next();
    blk.ln1_beta = next();
    blk.query = next();
    blk.query_bias = next();
    blk.key = next();
    blk.key_bias = next();
    blk.value = next();
    blk.value_bias = next();
    blk.output = next();
    blk.output_bias = next();
    blk.ln2_gamma = next();
    blk.ln2_beta = next();
    blk.mlp_in = next();
    blk.mlp_in_bias = next();
    blk.mlp_out = next();
    blk.mlp_out_bias = next();
  }
  b.pool = next();
  b.reduction_kernels = next();
  b.reduction_bias = next();
  b.head = next();
  b.head_bias = next();
  return b;
}

// Cuts a [C×H×W] image into non-overlapping P×P patches. Patches are ordered
// row-major over the patch grid; each row is the row-major flattening of the
// patch sub-array [C×P×P].
template <typename Scalar>
Matrix<Scalar> patchify(const Tensor<Scalar>& image, Index patch) {
  if (image.rank() != 3) throw ShapeError("patchify: image must be [C x H x W], got " + shape_string(image.shape()));
  const Index ch = image.dim(0), height = image.dim(1), width = image.dim(2);
  if (patch < 1 || height % patch != 0 || width % patch != 0) {
    throw ShapeError("patchify: image " + std::to_string(height) + "x" + std::to_string(width) +
                     " is not divisible by patch size P=" + std::to_string(patch));
  }
  const Index grid_w = width / patch;
  const Index count = (height / patch) * grid_w;
  Matrix<Scalar> out(count, patch * patch * ch);
  const Scalar* src = image.values().data();
  for (Index n = 0; n < count; ++n) {
    const Index py = (n / grid_w) * patch;
    const Index px = (n % grid_w) * patch;
    Index col = 0;
    for (Index c = 0; c < ch; ++c)
      for (Index y = 0; y < patch; ++y)
        for (Index x = 0; x < patch; ++x) out(n, col++) = src[(c * height + py + y) * width + px + x];
  }
  return out;
}

// Model input for a batch of stimuli.
template <typename Scalar>
struct Batch {
  Index size = 0;
  Matrix<Scalar> patches;     // [size·N × P²·C]
  std::vector<Index> tokens;  // size·L ids (unused in image-only mode)
};

template <typename Scalar>
Batch<Scalar> make_batch(std::span<const Tensor<Scalar>* const> images, std::span<const std::vector<Index>* const> tokens,
                         const ModelConfig& c) {
  if (images.empty()) throw UsageError("make_batch: empty batch");
  Batch<Scalar> b;
  b.size = static_cast<Index>(images.size());
  const Index n = c.num_patches();
  b.patches.resize(b.size * n, c.patch_dim());
  for (Index i = 0; i < b.size; ++i) {
    const auto& img = *images[static_cast<std::size_t>(i)];
    if (img.rank() != 3 || img.dim(0) != c.image_channels || img.dim(1) != c.image_height || img.dim(2) != c.image_width) {
      throw ShapeError("image " + shape_string(img.shape()) + " does not match config [" +
                       std::to_string(c.image_channels) + "x" + std::to_string(c.image_height) + "x" +
                       std::to_string(c.image_width) + "]");
    }
    b.patches.middleRows(i * n, n) = patchify(img, c.patch_size);
  }
  if (c.modality == Modality::Multimodal) {
    if (tokens.size() != images.size()) throw UsageError("make_batch: one token list per image required");
    b.tokens.reserve(static_cast<std::size_t>(b.size * c.text_length));
    for (const auto* t : tokens) {
      if (static_cast<Index>(t->size()) != c.text_length) {
        throw ShapeError("token list of length " + std::to_string(t->size()) + " does not match L=" +
                         std::to_string(c.text_length));
      }
      b.tokens.insert(b.tokens.end(), t->begin(), t->end());
    }
  }
  return b;
}

// Rows [image_cls; patches·V] + V^pos for each sample: [batch·(N+1) × H].
template <typename Scalar>
Var<Scalar> embed_image(const Var<Scalar>& patches, const BoundParams<Scalar>& p, const ModelConfig& c, Index batch) {
  const Index n = c.num_patches();
  if (patches.shape().size() != 2 || patches.shape()[1] != c.patch_dim() || patches.shape()[0] != batch * n) {
    throw ShapeError("embed_image: patches " + shape_string(patches.shape()) + " do not match config [" +
                     std::to_string(batch * n) + "x" + std::to_string(c.patch_dim()) + "]");
  }
  auto projected = ops::matmul(patches, p.patch_projection);
  std::vector<Var<Scalar>> rows;
  rows.reserve(static_cast<std::size_t>(2 * batch));
  for (Index b = 0; b < batch; ++b) {
    rows.push_back(p.image_cls);
    rows.push_back(batch == 1 ? projected : ops::slice_rows(projected, b * n, n));
  }
  return ops::add_tiled(ops::concat_rows(rows), p.image_positions);
}

// Rows [text_cls; T[ids]] + T^pos for each sample: [batch·(L+1) × H].
template <typename Scalar>
Var<Scalar> embed_text(std::span<const Index> ids, const BoundParams<Scalar>& p, const ModelConfig& c, Index batch) {
  const Index len = c.text_length;
  if (static_cast<Index>(ids.size()) != batch * len) {
    throw ShapeError("embed_text: " + std::to_string(ids.size()) + " ids for batch " + std::to_string(batch) +
                     " with L=" + std::to_string(len));
  }
  auto words = ops::gather_rows(p.word_embedding, ids);
  std::vector<Var<Scalar>> rows;
  rows.reserve(static_cast<std::size_t>(2 * batch));
  for (Index b = 0; b < batch; ++b) {
    rows.push_back(p.text_cls);
    rows.push_back(batch == 1 ? words : ops::slice_rows(words, b * len, len));
  }
  return ops::add_tiled(ops::concat_rows(rows), p.text_positions);
}

template <typename Scalar>
struct FusedSequence {
  Var<Scalar> z;        // [batch·length × H]
  Index batch = 0;
  Index length = 0;     // tokens per sample
  Index boundary = 0;   // first text row within a sample
};

// Adds modal-type embeddings and concatenates image then text spans per sample.
template <typename Scalar>
FusedSequence<Scalar> fuse(const Var<Scalar>& image, const Var<Scalar>& text, const BoundParams<Scalar>& p, Index batch) {
  if (image.shape().size() != 2 || text.shape().size() != 2 || image.shape()[1] != text.shape()[1]) {
    throw ShapeError("fuse: image " + shape_string(image.shape()) + " and text " + shape_string(text.shape()) +
                     " widths differ");
  }
  if (image.shape()[0] % batch != 0 || text.shape()[0] % batch != 0) {
    throw ShapeError("fuse: row counts not divisible by batch " + std::to_string(batch));
  }
  const Index ni = image.shape()[0] / batch;
  const Index nt = text.shape()[0] / batch;
  auto typed_image = ops::add_row(image, p.image_type);
  auto typed_text = ops::add_row(text, p.text_type);
  if (batch == 1) return {ops::concat_rows<Scalar>({typed_image, typed_text}), 1, ni + nt, ni};
  std::vector<Var<Scalar>> rows;
  rows.reserve(static_cast<std::size_t>(2 * batch));
  for (Index b = 0; b < batch; ++b) {
    rows.push_back(ops::slice_rows(typed_image, b * ni, ni));
    rows.push_back(ops::slice_rows(typed_text, b * nt, nt));
  }
  return {ops::concat_rows(rows), batch, ni + nt, ni};
}

// One pre-norm transformer block: z + MHSA(LN(z)), then + MLP(LN(·)) with gelu.
template <typename Scalar>
Var<Scalar> transformer_block(const Var<Scalar>& z, const BoundBlock<Scalar>& w, Index batch, Index heads) {
  using namespace ops;
  auto h = layer_norm(z, w.ln1_gamma, w.ln1_beta);
  auto q = add_row(matmul(h, w.query), w.query_bias);
  auto k = add_row(matmul(h, w.key), w.key_bias);
  auto v = add_row(matmul(h, w.value), w.value_bias);
  auto attended = add_row(matmul(self_attention(q, k, v, batch, heads), w.output), w.output_bias);
  auto mid = add(z, attended);
  auto h2 = layer_norm(mid, w.ln2_gamma, w.ln2_beta);
  auto m = gelu(add_row(matmul(h2, w.mlp_in), w.mlp_in_bias));
  return add(mid, add_row(matmul(m, w.mlp_out), w.mlp_out_bias));
}

template <typename Scalar>
Var<Scalar> encode(const FusedSequence<Scalar>& seq, const BoundParams<Scalar>& p, const ModelConfig& c) {
  if (seq.z.shape().size() != 2 || seq.z.shape()[1] != c.hidden_size) {
    throw ShapeError("encode: sequence " + shape_string(seq.z.shape()) + " does not have width H=" +
                     std::to_string(c.hidden_size));
  }
  Var<Scalar> z = seq.z;
  for (const auto& blk : p.blocks) z = transformer_block(z, blk, seq.batch, c.heads);
  return z;
}

// p = tanh(z[0] · W_pool) per sample: [batch × H].
template <typename Scalar>
Var<Scalar> pool(const Var<Scalar>& z, const Var<Scalar>& pool_weight, Index batch) {
  if (z.shape().size() != 2 || z.shape()[0] < batch || z.shape()[0] % batch != 0) {
    throw ShapeError("pool: sequence " + shape_string(z.shape()) + " is not divisible into " + std::to_string(batch) +
                     " samples");
  }
  const Index len = z.shape()[0] / batch;
  std::vector<Var<Scalar>> firsts;
  firsts.reserve(static_cast<std::size_t>(batch));
  for (Index b = 0; b < batch; ++b) firsts.push_back(ops::slice_rows(z, b * len, 1));
  auto head = batch == 1 ? firsts.front() : ops::concat_rows(firsts);
  return ops::tanh(ops::matmul(head, pool_weight));
}

// Conv1d along the sequence (channels = H) + relu, flatten, affine to voxels: [batch × voxels].
template <typename Scalar>
Var<Scalar> reduce_and_map(const Var<Scalar>& z, const BoundParams<Scalar>& p, const ModelConfig& c, Index batch) {
  const Index len = c.sequence_length();
  if (z.shape().size() != 2 || z.shape()[1] != c.hidden_size || z.shape()[0] != batch * len) {
    throw ShapeError("reduce_and_map: sequence " + shape_string(z.shape()) + " inconsistent with config [" +
                     std::to_string(batch * len) + "x" + std::to_string(c.hidden_size) + "]");
  }
  std::vector<Var<Scalar>> flat;
  flat.reserve(static_cast<std::size_t>(batch));
  for (Index b = 0; b < batch; ++b) {
    auto sample = batch == 1 ? z : ops::slice_rows(z, b * len, len);
    auto features = ops::relu(ops::conv1d(ops::transpose(sample), p.reduction_kernels, p.reduction_bias, 1));
    flat.push_back(ops::reshape(features, Shape{1, c.head_inputs()}));
  }
  auto stacked = batch == 1 ? flat.front() : ops::concat_rows(flat);
  return ops::add_row(ops::matmul(stacked, p.head), p.head_bias);
}

template <typename Scalar>
struct ForwardResult {
  Var<Scalar> predictions;  // [batch × voxels]
  Var<Scalar> pooled;       // [batch × H]
  FusedSequence<Scalar> sequence;
  Var<Scalar> contextual;   // z^D
};

template <typename Scalar>
ForwardResult<Scalar> forward(Graph<Scalar>& g, const Batch<Scalar>& batch, const BoundParams<Scalar>& p,
                              const ModelConfig& c) {
  if (batch.size < 1) throw UsageError("forward: empty batch");
  auto patches = g.constant(Tensor<Scalar>::from_matrix(batch.patches));
  auto image = embed_image(patches, p, c, batch.size);
  FusedSequence<Scalar> seq;
  if (c.modality == Modality::Multimodal) {
    auto text = embed_text(std::span<const Index>(batch.tokens), p, c, batch.size);
    seq = fuse(image, text, p, batch.size);
  } else {
    seq = {ops::add_row(image, p.image_type), batch.size, c.image_tokens(), c.image_tokens()};
  }
  auto z = encode(seq, p, c);
  auto pooled = pool(z, p.pool, batch.size);
  auto predictions = reduce_and_map(z, p, c, batch.size);
  return {predictions, pooled, seq, z};
}

// Inference without gradients.
template <typename Scalar>
Matrix<Scalar> predict(const ModelParams<Scalar>& params, const ModelConfig& c, const Batch<Scalar>& batch) {
  Graph<Scalar> g;
  auto bound = bind(g, params, c);
  return forward(g, batch, bound, c).predictions.mat();
}

}  // namespace mmenc
