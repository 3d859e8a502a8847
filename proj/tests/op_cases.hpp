#pragma once

#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "mmenc/objective.hpp"
#include "support.hpp"

// Random small inputs for every differentiable op, shared by the unit and acceptance gradient checks.
namespace mmenc::test {

template <typename S>
struct Case {
  Builder<S> build;
  std::vector<Tensor<S>> inputs;
};

template <typename S>
using CaseFn = std::function<Case<S>(Rng&)>;

template <typename S>
std::vector<std::pair<std::string, CaseFn<S>>> op_cases() {
  using V = Var<S>;
  std::vector<std::pair<std::string, CaseFn<S>>> cases;
  auto dims = [](Rng& r) { return std::make_pair(r.integer(1, 4), r.integer(1, 5)); };
  cases.emplace_back("matmul", [](Rng& r) {
    const Index m = r.integer(1, 4), k = r.integer(1, 4), n = r.integer(1, 4);
    return Case<S>{[](Graph<S>&, const std::vector<V>& x) { return ops::matmul(x[0], x[1]); },
                   {r.tensor<S>({m, k}), r.tensor<S>({k, n})}};
  });
  cases.emplace_back("add", [dims](Rng& r) {
    const auto [m, n] = dims(r);
    return Case<S>{[](Graph<S>&, const std::vector<V>& x) { return ops::add(x[0], x[1]); },
                   {r.tensor<S>({m, n}), r.tensor<S>({m, n})}};
  });
  cases.emplace_back("sub", [dims](Rng& r) {
    const auto [m, n] = dims(r);
    return Case<S>{[](Graph<S>&, const std::vector<V>& x) { return ops::sub(x[0], x[1]); },
                   {r.tensor<S>({m, n}), r.tensor<S>({m, n})}};
  });
  cases.emplace_back("mul", [dims](Rng& r) {
    const auto [m, n] = dims(r);
    return Case<S>{[](Graph<S>&, const std::vector<V>& x) { return ops::mul(x[0], x[1]); },
                   {r.tensor<S>({m, n}), r.tensor<S>({m, n})}};
  });
  cases.emplace_back("affine", [dims](Rng& r) {
    const auto [m, n] = dims(r);
    const S a = static_cast<S>(r.normal()), b = static_cast<S>(r.normal());
    return Case<S>{[a, b](Graph<S>&, const std::vector<V>& x) { return ops::affine(x[0], a, b); }, {r.tensor<S>({m, n})}};
  });
  cases.emplace_back("add_row", [dims](Rng& r) {
    const auto [m, n] = dims(r);
    return Case<S>{[](Graph<S>&, const std::vector<V>& x) { return ops::add_row(x[0], x[1]); },
                   {r.tensor<S>({m, n}), r.tensor<S>({n})}};
  });
  cases.emplace_back("add_tiled", [dims](Rng& r) {
    const auto [m, n] = dims(r);
    const Index reps = r.integer(1, 3);
    return Case<S>{[](Graph<S>&, const std::vector<V>& x) { return ops::add_tiled(x[0], x[1]); },
                   {r.tensor<S>({m * reps, n}), r.tensor<S>({m, n})}};
  });
  cases.emplace_back("sum", [dims](Rng& r) {
    const auto [m, n] = dims(r);
    return Case<S>{[](Graph<S>&, const std::vector<V>& x) { return ops::sum(x[0]); }, {r.tensor<S>({m, n})}};
  });
  cases.emplace_back("mean", [dims](Rng& r) {
    const auto [m, n] = dims(r);
    return Case<S>{[](Graph<S>&, const std::vector<V>& x) { return ops::mean(x[0]); }, {r.tensor<S>({m, n})}};
  });
  cases.emplace_back("tanh", [dims](Rng& r) {
    const auto [m, n] = dims(r);
    return Case<S>{[](Graph<S>&, const std::vector<V>& x) { return ops::tanh(x[0]); }, {r.tensor<S>({m, n})}};
  });
  cases.emplace_back("gelu", [dims](Rng& r) {
    const auto [m, n] = dims(r);
    return Case<S>{[](Graph<S>&, const std::vector<V>& x) { return ops::gelu(x[0]); }, {r.tensor<S>({m, n})}};
  });
  cases.emplace_back("relu", [dims](Rng& r) {
    const auto [m, n] = dims(r);
    return Case<S>{[](Graph<S>&, const std::vector<V>& x) { return ops::relu(x[0]); },
                   {r.tensor_away_from_zero<S>({m, n}, 0.05)}};
  });
  cases.emplace_back("softmax_lastdim", [dims](Rng& r) {
    const auto [m, n] = dims(r);
    return Case<S>{[](Graph<S>&, const std::vector<V>& x) { return ops::softmax_lastdim(x[0]); }, {r.tensor<S>({m, n})}};
  });
  cases.emplace_back("layer_norm", [](Rng& r) {
    const Index m = r.integer(1, 4), n = r.integer(2, 6);
    return Case<S>{[](Graph<S>&, const std::vector<V>& x) { return ops::layer_norm(x[0], x[1], x[2]); },
                   {r.tensor<S>({m, n}), r.tensor<S>({n}), r.tensor<S>({n})}};
  });
  cases.emplace_back("transpose", [dims](Rng& r) {
    const auto [m, n] = dims(r);
    return Case<S>{[](Graph<S>&, const std::vector<V>& x) { return ops::transpose(x[0]); }, {r.tensor<S>({m, n})}};
  });
  cases.emplace_back("reshape", [dims](Rng& r) {
    const auto [m, n] = dims(r);
    return Case<S>{[m, n](Graph<S>&, const std::vector<V>& x) { return ops::reshape(x[0], Shape{n, m}); },
                   {r.tensor<S>({m, n})}};
  });
  cases.emplace_back("slice_rows", [](Rng& r) {
    const Index m = r.integer(2, 5), n = r.integer(1, 4);
    const Index begin = r.integer(0, m - 1), count = r.integer(1, m - begin);
    return Case<S>{[begin, count](Graph<S>&, const std::vector<V>& x) { return ops::slice_rows(x[0], begin, count); },
                   {r.tensor<S>({m, n})}};
  });
  cases.emplace_back("concat_rows", [](Rng& r) {
    const Index a = r.integer(1, 3), b = r.integer(1, 3), n = r.integer(1, 4);
    return Case<S>{[](Graph<S>&, const std::vector<V>& x) { return ops::concat_rows<S>({x[0], x[1], x[0]}); },
                   {r.tensor<S>({a, n}), r.tensor<S>({b, n})}};
  });
  cases.emplace_back("gather_rows", [](Rng& r) {
    const Index rows = r.integer(2, 6), n = r.integer(1, 4);
    std::vector<Index> ids;
    for (Index i = 0, count = r.integer(1, 7); i < count; ++i) ids.push_back(r.integer(0, rows - 1));
    return Case<S>{[ids](Graph<S>&, const std::vector<V>& x) { return ops::gather_rows(x[0], std::span<const Index>(ids)); },
                   {r.tensor<S>({rows, n})}};
  });
  cases.emplace_back("conv1d", [](Rng& r) {
    const Index c = r.integer(1, 3), len = r.integer(3, 8), k = r.integer(1, 3), o = r.integer(1, 3),
                stride = r.integer(1, 2);
    return Case<S>{[stride](Graph<S>&, const std::vector<V>& x) { return ops::conv1d(x[0], x[1], x[2], stride); },
                   {r.tensor<S>({c, len}), r.tensor<S>({o, c, k}), r.tensor<S>({o})}};
  });
  cases.emplace_back("self_attention", [](Rng& r) {
    const Index batch = r.integer(1, 2), seq = r.integer(1, 4), heads = r.integer(1, 2), dh = r.integer(1, 3);
    const Shape s{batch * seq, heads * dh};
    return Case<S>{[batch, heads](Graph<S>&, const std::vector<V>& x) {
                     return ops::self_attention(x[0], x[1], x[2], batch, heads);
                   },
                   {r.tensor<S>(s), r.tensor<S>(s), r.tensor<S>(s)}};
  });
  cases.emplace_back("pearson_per_voxel", [](Rng& r) {
    const Index t = r.integer(3, 8), v = r.integer(1, 4);
    const Matrix<S> truth = r.matrix<S>(t, v);
    return Case<S>{[truth](Graph<S>&, const std::vector<V>& x) { return ops::pearson_per_voxel(truth, x[0]); },
                   {r.tensor<S>({t, v})}};
  });
  cases.emplace_back("pearson_loss", [](Rng& r) {
    const Index t = r.integer(3, 8), v = r.integer(1, 4);
    const Matrix<S> truth = r.matrix<S>(t, v);
    return Case<S>{[truth](Graph<S>&, const std::vector<V>& x) { return ops::pearson_loss(truth, x[0]); },
                   {r.tensor<S>({t, v})}};
  });
  return cases;
}

}  // namespace mmenc::test
