#pragma once

#include <map>
#include <string>

#include "mmenc/encoder.hpp"
#include "mmenc/objective.hpp"
#include "support.hpp"

namespace mmenc::test {

// Random batch of images and token lists matching `c`.
template <typename S>
Batch<S> random_batch(const ModelConfig& c, Index size, Rng& rng) {
  std::vector<Tensor<S>> images;
  std::vector<std::vector<Index>> tokens;
  for (Index b = 0; b < size; ++b) {
    images.push_back(rng.tensor<S>({c.image_channels, c.image_height, c.image_width}));
    std::vector<Index> t;
    for (Index i = 0; i < c.text_length; ++i) t.push_back(rng.integer(0, c.vocab_size - 1));
    tokens.push_back(std::move(t));
  }
  std::vector<const Tensor<S>*> ip;
  std::vector<const std::vector<Index>*> tp;
  for (Index b = 0; b < size; ++b) {
    ip.push_back(&images[static_cast<std::size_t>(b)]);
    tp.push_back(&tokens[static_cast<std::size_t>(b)]);
  }
  return make_batch<S>(ip, tp, c);
}

// Parameters with every entry perturbed, so zero-initialized biases and type
// embeddings also carry signal through the network.
inline ModelParams<double> random_params(const ModelConfig& c, std::uint64_t seed) {
  auto p = cast_params<double>(init_params<float>(c, seed), c);
  Rng rng(seed + 1);
  for_each_parameter(p, c, [&](const ParamInfo& info, Matrix<double>& m) {
    for (Index i = 0; i < m.size(); ++i) m.data()[i] += info.init == Init::One ? rng.normal(0.1) : rng.normal(0.05);
  });
  return p;
}

// Per parameter group: sampled coordinates and how many matched.
inline std::map<std::string, GradReport> model_gradcheck(const ModelConfig& c, Index batch_size, Index coords_per_group,
                                                         std::uint64_t seed, double h, double tol, double floor) {
  Rng rng(seed);
  auto params = random_params(c, seed);
  const auto batch = random_batch<double>(c, batch_size, rng);
  const Matrix<double> truth = rng.matrix<double>(batch_size, c.voxel_count);
  auto loss_of = [&](const ModelParams<double>& p) {
    Graph<double> g;
    auto bound = bind(g, p, c);
    return ops::pearson_loss(truth, forward(g, batch, bound, c).predictions).value().item();
  };
  auto grads = zero_params<double>(c);
  {
    Graph<double> g;
    auto bound = bind(g, params, c, &grads);
    g.backward(ops::pearson_loss(truth, forward(g, batch, bound, c).predictions));
  }
  std::vector<const Matrix<double>*> gl;
  for_each_parameter(grads, c, [&](const ParamInfo&, const Matrix<double>& m) { gl.push_back(&m); });

  std::map<std::string, GradReport> out;
  std::size_t group = 0;
  for_each_parameter(params, c, [&](const ParamInfo& info, Matrix<double>& m) {
    auto& rep = out[info.name];
    const Matrix<double>& an = *gl[group++];
    for (Index s = 0; s < std::min(coords_per_group, m.size()); ++s) {
      const Index j = coords_per_group >= m.size() ? s : rng.integer(0, m.size() - 1);
      const double keep = m.data()[j];
      m.data()[j] = keep + h;
      const double up = loss_of(params);
      m.data()[j] = keep - h;
      const double down = loss_of(params);
      m.data()[j] = keep;
      const double err = relative_error(an.data()[j], (up - down) / (2 * h), floor);
      ++rep.checked;
      if (err <= tol) ++rep.passed;
      rep.max_error = std::max(rep.max_error, err);
    }
  });
  return out;
}

}  // namespace mmenc::test
