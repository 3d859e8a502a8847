#include <doctest.h>

#include <cmath>

#include "support.hpp"

using namespace mmenc;
using mmenc::test::Rng;

namespace {

Var<double> var(Graph<double>& g, Shape shape, std::vector<double> values) {
  return g.variable(Tensor<double>::from_values(std::move(shape), values));
}

std::vector<double> flat(const Var<double>& v) { return {v.value().values().begin(), v.value().values().end()}; }

Matrix<double> naive_matmul(const Matrix<double>& a, const Matrix<double>& b) {
  Matrix<double> out = Matrix<double>::Zero(a.rows(), b.cols());
  for (Index i = 0; i < a.rows(); ++i)
    for (Index j = 0; j < b.cols(); ++j)
      for (Index k = 0; k < a.cols(); ++k) out(i, j) += a(i, k) * b(k, j);
  return out;
}

}  // namespace

TEST_CASE("tensor shape and storage agree") {
  Tensor<float> t({2, 3, 4});
  CHECK(t.size() == 24);
  CHECK(t.matrix().rows() == 6);
  CHECK(t.matrix().cols() == 4);
  CHECK_THROWS_AS(Tensor<float>({2, 0}), ShapeError);
  CHECK_THROWS_AS(Tensor<float>::from_values({2, 2}, std::vector<float>{1, 2, 3}), ShapeError);
  CHECK_THROWS_AS(t.reshaped({5, 5}), ShapeError);
  CHECK(t.reshaped({24}).shape() == Shape{24});
}

TEST_CASE("matmul examples") {
  Graph<double> g;
  auto id = var(g, {2, 2}, {1, 0, 0, 1});
  auto b = var(g, {2, 2}, {5, 6, 7, 8});
  CHECK(flat(ops::matmul(id, b)) == std::vector<double>{5, 6, 7, 8});
  auto a = var(g, {2, 2}, {1, 2, 3, 4});
  auto ones = var(g, {2, 1}, {1, 1});
  CHECK(flat(ops::matmul(a, ones)) == std::vector<double>{3, 7});
  auto x = var(g, {2, 3}, {1, 2, 3, 4, 5, 6});
  try {
    ops::matmul(x, x);
    FAIL("expected a shape error");
  } catch (const ShapeError& e) {
    CHECK(std::string(e.what()).find("[2x3]") != std::string::npos);
  }
}

TEST_CASE("matmul agrees with the triple-loop oracle and is associative") {
  Rng rng(7);
  for (int trial = 0; trial < 20; ++trial) {
    const Index m = rng.integer(1, 6), k = rng.integer(1, 6), n = rng.integer(1, 6), p = rng.integer(1, 6);
    Graph<double> g;
    auto a = g.variable(Tensor<double>::from_matrix(rng.matrix<double>(m, k)));
    auto b = g.variable(Tensor<double>::from_matrix(rng.matrix<double>(k, n)));
    auto c = g.variable(Tensor<double>::from_matrix(rng.matrix<double>(n, p)));
    CHECK((ops::matmul(a, b).mat() - naive_matmul(a.mat(), b.mat())).cwiseAbs().maxCoeff() < 1e-12);
    const auto left = ops::matmul(ops::matmul(a, b), c).mat();
    const auto right = ops::matmul(a, ops::matmul(b, c)).mat();
    CHECK((left - right).cwiseAbs().maxCoeff() <= 1e-4 * std::max(1.0, left.cwiseAbs().maxCoeff()));
  }
}

TEST_CASE("softmax examples and laws") {
  Graph<double> g;
  for (double v : flat(ops::softmax_lastdim(var(g, {3}, {0, 0, 0})))) CHECK(v == doctest::Approx(1.0 / 3.0));
  const auto two = flat(ops::softmax_lastdim(var(g, {2}, {2, 0})));
  const double e2 = std::exp(2.0);
  CHECK(two[0] == doctest::Approx(e2 / (e2 + 1)).epsilon(1e-12));
  CHECK(two[1] == doctest::Approx(1 / (e2 + 1)).epsilon(1e-12));

  Rng rng(11);
  for (int trial = 0; trial < 200; ++trial) {
    Graph<float> gf;
    const Index rows = rng.integer(1, 4), cols = rng.integer(1, 9);
    const auto m = rng.matrix<float>(rows, cols, 5.0);
    const float c = static_cast<float>(rng.uniform(-50, 50));
    auto s = ops::softmax_lastdim(gf.constant(Tensor<float>::from_matrix(m))).mat();
    Matrix<float> shifted = m.array() + c;
    auto s2 = ops::softmax_lastdim(gf.constant(Tensor<float>::from_matrix(shifted))).mat();
    for (Index r = 0; r < rows; ++r) {
      CHECK(std::abs(s.row(r).cast<double>().sum() - 1.0) <= 1e-6);
      CHECK(s.row(r).minCoeff() >= 0.0f);
    }
    CHECK((s - s2).cwiseAbs().maxCoeff() <= 1e-6);
  }
  Graph<float> gf;
  auto big = ops::softmax_lastdim(gf.constant(Tensor<float>::from_values({3}, std::vector<float>{1000, 0, -1000}))).mat();
  CHECK(big.allFinite());
  CHECK(big(0, 0) == doctest::Approx(1.0));
}

TEST_CASE("layer_norm examples and laws") {
  Graph<double> g;
  auto one3 = var(g, {3}, {1, 1, 1});
  auto zero3 = var(g, {3}, {0, 0, 0});
  for (double v : flat(ops::layer_norm(var(g, {3}, {5, 5, 5}), one3, zero3))) CHECK(v == 0.0);
  auto one2 = var(g, {2}, {1, 1});
  auto zero2 = var(g, {2}, {0, 0});
  const auto y = flat(ops::layer_norm(var(g, {2}, {1, 3}), one2, zero2));
  // mean 2, population variance 1
  const double expect = 1.0 / std::sqrt(1.0 + 1e-5);
  CHECK(y[0] == doctest::Approx(-expect).epsilon(1e-12));
  CHECK(y[1] == doctest::Approx(expect).epsilon(1e-12));

  Rng rng(3);
  for (int trial = 0; trial < 100; ++trial) {
    Graph<float> gf;
    const Index rows = rng.integer(1, 5), cols = rng.integer(2, 16);
    auto x = gf.constant(Tensor<float>::from_matrix(rng.matrix<float>(rows, cols, 3.0)));
    auto gamma = gf.constant(Tensor<float>::from_matrix(Matrix<float>::Ones(1, cols)));
    auto beta_m = rng.matrix<float>(1, cols);
    const float shift = static_cast<float>(rng.normal());
    beta_m.setConstant(shift);
    auto out = ops::layer_norm(x, gamma, gf.constant(Tensor<float>::from_matrix(beta_m))).mat();
    for (Index r = 0; r < rows; ++r) {
      const double mu = out.row(r).cast<double>().mean();
      CHECK(std::abs(mu - shift) <= 1e-5);
      const auto xr = x.mat().row(r).cast<double>();
      const double in_var = (xr.array() - xr.mean()).square().mean();
      const double var = (out.row(r).cast<double>().array() - mu).square().mean();
      CHECK(var == doctest::Approx(in_var / (in_var + 1e-5)).epsilon(1e-3));
    }
  }
}

TEST_CASE("unary activations") {
  Graph<double> g;
  CHECK(flat(ops::tanh(var(g, {1}, {0})))[0] == 0.0);
  CHECK(flat(ops::relu(var(g, {1}, {-3})))[0] == 0.0);
  CHECK(flat(ops::relu(var(g, {1}, {2.5})))[0] == 2.5);
  // 0.5·(1 + erf(1/√2)) to 20 digits: 0.84134474606854293...
  CHECK(flat(ops::gelu(var(g, {1}, {1.0})))[0] == doctest::Approx(0.8413447460685429).epsilon(1e-15));
  CHECK(flat(ops::gelu(var(g, {1}, {-1.0})))[0] == doctest::Approx(-0.15865525393145707).epsilon(1e-14));
  const auto t = flat(ops::tanh(var(g, {4}, {-30, -2, 2, 30})));
  for (double v : t) CHECK(std::abs(v) <= 1.0);
  CHECK(ops::parse_activation("gelu") == ops::Activation::Gelu);
  CHECK_THROWS_AS(ops::parse_activation("swish"), ConfigError);
}

TEST_CASE("conv1d examples") {
  Graph<double> g;
  auto x = var(g, {4}, {1, 2, 3, 4});
  CHECK(flat(ops::conv1d(x, var(g, {1}, {1}))) == std::vector<double>{1, 2, 3, 4});
  CHECK(flat(ops::conv1d(x, var(g, {2}, {1, 1}))) == std::vector<double>{3, 5, 7});
  CHECK(flat(ops::conv1d(x, var(g, {2}, {1, 1}), 2)) == std::vector<double>{3, 7});
  CHECK_THROWS_AS(ops::conv1d(x, var(g, {5}, {1, 1, 1, 1, 1})), ShapeError);
  CHECK_THROWS_AS(ops::conv1d(x, var(g, {1}, {1}), 0), UsageError);
}

TEST_CASE("conv1d matches a sliding-window oracle") {
  Rng rng(5);
  for (int trial = 0; trial < 30; ++trial) {
    const Index c = rng.integer(1, 4), len = rng.integer(3, 12), k = rng.integer(1, 3), o = rng.integer(1, 3),
                stride = rng.integer(1, 3);
    Graph<double> g;
    auto x = g.variable(Tensor<double>::from_matrix(rng.matrix<double>(c, len)));
    auto kern = g.variable(rng.tensor<double>({o, c, k}));
    auto bias = g.variable(rng.tensor<double>({o}));
    const auto out = ops::conv1d(x, kern, bias, stride).mat();
    const Index out_len = (len - k) / stride + 1;
    REQUIRE(out.rows() == o);
    REQUIRE(out.cols() == out_len);
    const auto kv = kern.value().values();
    for (Index oc = 0; oc < o; ++oc)
      for (Index j = 0; j < out_len; ++j) {
        double acc = bias.value().values()[static_cast<std::size_t>(oc)];
        for (Index ci = 0; ci < c; ++ci)
          for (Index t = 0; t < k; ++t) acc += kv[static_cast<std::size_t>((oc * c + ci) * k + t)] * x.mat()(ci, j * stride + t);
        CHECK(out(oc, j) == doctest::Approx(acc).epsilon(1e-12));
      }
  }
}

TEST_CASE("self_attention matches a hand-unrolled oracle") {
  Rng rng(17);
  const Index batch = 2, seq = 3, heads = 2, width = 4, dh = width / heads;
  Graph<double> g;
  auto q = g.variable(Tensor<double>::from_matrix(rng.matrix<double>(batch * seq, width)));
  auto k = g.variable(Tensor<double>::from_matrix(rng.matrix<double>(batch * seq, width)));
  auto v = g.variable(Tensor<double>::from_matrix(rng.matrix<double>(batch * seq, width)));
  const auto out = ops::self_attention(q, k, v, batch, heads).mat();
  for (Index b = 0; b < batch; ++b)
    for (Index h = 0; h < heads; ++h)
      for (Index i = 0; i < seq; ++i) {
        double scores[seq];
        double total = 0.0;
        for (Index j = 0; j < seq; ++j) {
          double s = 0.0;
          for (Index d = 0; d < dh; ++d) s += q.mat()(b * seq + i, h * dh + d) * k.mat()(b * seq + j, h * dh + d);
          scores[j] = std::exp(s / std::sqrt(static_cast<double>(dh)));
          total += scores[j];
        }
        for (Index d = 0; d < dh; ++d) {
          double acc = 0.0;
          for (Index j = 0; j < seq; ++j) acc += scores[j] / total * v.mat()(b * seq + j, h * dh + d);
          CHECK(out(b * seq + i, h * dh + d) == doctest::Approx(acc).epsilon(1e-12));
        }
      }
  CHECK_THROWS_AS(ops::self_attention(q, k, v, batch, 3), ShapeError);
}

TEST_CASE("structural ops") {
  Graph<double> g;
  auto x = var(g, {2, 3}, {1, 2, 3, 4, 5, 6});
  CHECK(flat(ops::transpose(x)) == std::vector<double>{1, 4, 2, 5, 3, 6});
  CHECK(ops::reshape(x, {3, 2}).shape() == Shape{3, 2});
  CHECK(flat(ops::slice_rows(x, 1, 1)) == std::vector<double>{4, 5, 6});
  CHECK(flat(ops::concat_rows<double>({x, ops::slice_rows(x, 0, 1)})) == std::vector<double>{1, 2, 3, 4, 5, 6, 1, 2, 3});
  const std::vector<Index> ids{1, 0, 1};
  CHECK(flat(ops::gather_rows(x, std::span<const Index>(ids))) == std::vector<double>{4, 5, 6, 1, 2, 3, 4, 5, 6});
  const std::vector<Index> bad{2};
  CHECK_THROWS_AS(ops::gather_rows(x, std::span<const Index>(bad)), DataError);
  CHECK(flat(ops::add_row(x, var(g, {3}, {10, 20, 30}))) == std::vector<double>{11, 22, 33, 14, 25, 36});
  CHECK(flat(ops::add_tiled(var(g, {4, 1}, {1, 2, 3, 4}), var(g, {2, 1}, {10, 20}))) ==
        std::vector<double>{11, 22, 13, 24});
  CHECK(ops::sum(x).value().item() == 21.0);
  CHECK(ops::mean(x).value().item() == 3.5);
  CHECK_THROWS_AS(ops::add(x, ops::transpose(x)), ShapeError);
}

TEST_CASE("backward examples") {
  {
    Graph<double> g;
    auto x = var(g, {2, 2}, {1, -2, 3, 4});
    g.backward(ops::sum(x));
    CHECK(x.grad() == Matrix<double>::Ones(2, 2));
  }
  {
    Graph<double> g;
    auto x = var(g, {1}, {3});
    g.backward(ops::mul(x, x));
    CHECK(x.grad()(0, 0) == 6.0);
  }
  {
    Graph<double> g;
    auto x = var(g, {2}, {1, 2});
    CHECK_THROWS_AS(g.backward(x), UsageError);
  }
  {
    Graph<double> g;
    auto x = var(g, {1}, {3});
    auto loss = ops::mul(x, x);
    g.backward(loss);
    CHECK(g.spent());
    CHECK_THROWS_AS(g.backward(loss), UsageError);
    CHECK_THROWS_AS(g.variable(Tensor<double>()), UsageError);
  }
  {
    // Gradients reach parameter sinks additively; constants receive none.
    Graph<double> g;
    Matrix<double> w = Matrix<double>::Constant(1, 2, 2.0);
    Matrix<double> sink = Matrix<double>::Constant(1, 2, 1.0);
    auto p = g.parameter(w, &sink);
    auto c = g.constant(Tensor<double>::from_values({1, 2}, std::vector<double>{3, 4}));
    g.backward(ops::sum(ops::mul(p, c)));
    CHECK(sink(0, 0) == 4.0);
    CHECK(sink(0, 1) == 5.0);
    CHECK_FALSE(g.requires_grad(c));
  }
}

TEST_CASE("graph is topologically ordered") {
  Rng rng(1);
  Graph<float> g;
  auto a = g.variable(rng.tensor<float>({3, 4}));
  auto b = g.variable(rng.tensor<float>({4, 2}));
  auto out = ops::sum(ops::tanh(ops::matmul(a, b)));
  for (std::size_t id = 0; id < g.size(); ++id) {
    for (auto in : g.inputs_of(Var<float>(&g, id))) CHECK(in < id);
  }
  CHECK(out.id() == g.size() - 1);
}

TEST_CASE("forward results are bit-identical across runs") {
  auto run = [] {
    Rng rng(99);
    Graph<float> g;
    auto x = g.variable(rng.tensor<float>({6, 8}));
    auto w = g.variable(rng.tensor<float>({8, 8}));
    auto gamma = g.variable(rng.tensor<float>({8}));
    auto beta = g.variable(rng.tensor<float>({8}));
    auto h = ops::layer_norm(ops::gelu(ops::matmul(x, w)), gamma, beta);
    auto att = ops::self_attention(h, h, h, 2, 2);
    auto loss = ops::sum(ops::softmax_lastdim(att));
    g.backward(loss);
    return std::make_pair(Matrix<float>(att.mat()), Matrix<float>(w.grad()));
  };
  const auto first = run();
  const auto second = run();
  CHECK(first.first == second.first);
  CHECK(first.second == second.second);
}
