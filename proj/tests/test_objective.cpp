#include <doctest.h>

#include <cmath>

#include "mmenc/objective.hpp"
#include "mmenc/optim.hpp"
#include "support.hpp"

using namespace mmenc;
using mmenc::test::Rng;

namespace {

Eigen::MatrixXd column(std::initializer_list<double> v) {
  Eigen::MatrixXd m(static_cast<Index>(v.size()), 1);
  Index i = 0;
  for (double x : v) m(i++, 0) = x;
  return m;
}

// Textbook formula, written out independently of the library.
double pearson_oracle(const std::vector<double>& g, const std::vector<double>& p) {
  const double n = static_cast<double>(g.size());
  double gm = 0, pm = 0;
  for (std::size_t i = 0; i < g.size(); ++i) {
    gm += g[i] / n;
    pm += p[i] / n;
  }
  double num = 0, gg = 0, pp = 0;
  for (std::size_t i = 0; i < g.size(); ++i) {
    num += (g[i] - gm) * (p[i] - pm);
    gg += (g[i] - gm) * (g[i] - gm);
    pp += (p[i] - pm) * (p[i] - pm);
  }
  return num / std::sqrt(gg * pp + 1e-8);
}

}  // namespace

TEST_CASE("pearson examples") {
  CHECK(pearson_per_voxel(column({1, 2, 3}), column({3, 2, 1}))(0) == doctest::Approx(-1.0).epsilon(1e-8));
  CHECK(pearson_per_voxel(column({1, 2, 3, 4}), column({1, 3, 2, 4}))(0) == doctest::Approx(0.8).epsilon(1e-8));
  CHECK(pearson_oracle({1, 2, 3, 4}, {1, 3, 2, 4}) == doctest::Approx(0.8).epsilon(1e-8));
  CHECK(pearson_per_voxel(column({1, 2, 3}), column({1, 2, 3}))(0) == doctest::Approx(1.0).epsilon(1e-8));
  const double zero = pearson_per_voxel(column({1, 2, 3}), column({5, 5, 5}))(0);
  CHECK(zero == 0.0);
  CHECK_THROWS_AS(pearson_per_voxel(column({1}), column({1})), UsageError);
  CHECK_THROWS_AS(pearson_per_voxel(column({1, 2}), column({1, 2, 3})), ShapeError);
}

TEST_CASE("pearson agrees with the formula oracle and obeys its laws") {
  Rng rng(2024);
  for (int trial = 0; trial < 1000; ++trial) {
    const Index t = rng.integer(2, 12), v = rng.integer(1, 5);
    const Eigen::MatrixXd g = rng.matrix<double>(t, v, rng.uniform(0.1, 5));
    const Eigen::MatrixXd p = rng.matrix<double>(t, v, rng.uniform(0.1, 5));
    const double a = rng.uniform(0.1, 10), b = rng.uniform(-10, 10);
    // The invariance laws hold up to the eps guard, i.e. exactly only while
    // eps is negligible against Sgg·Spp (also after scaling by a).
    const Eigen::MatrixXd gc0 = g.rowwise() - g.colwise().mean();
    const Eigen::MatrixXd pc0 = p.rowwise() - p.colwise().mean();
    const double spread = (gc0.colwise().squaredNorm().array() * pc0.colwise().squaredNorm().array()).minCoeff();
    if (spread * std::min(1.0, a * a) < 1e-2) {
      --trial;
      continue;
    }
    const auto r = pearson_per_voxel(g, p);
    for (Index j = 0; j < v; ++j) {
      std::vector<double> gc(g.col(j).data(), g.col(j).data() + t), pc(t);
      for (Index i = 0; i < t; ++i) pc[static_cast<std::size_t>(i)] = p(i, j);
      CHECK(r(j) == doctest::Approx(pearson_oracle(gc, pc)).epsilon(1e-9));
      CHECK(std::abs(r(j)) <= 1.0 + 1e-6);
    }
    const Eigen::MatrixXd scaled = (a * p).array() + b;
    const Eigen::MatrixXd flipped = (-a * p).array() + b;
    CHECK((pearson_per_voxel(g, scaled) - r).cwiseAbs().maxCoeff() <= 1e-6);
    CHECK((pearson_per_voxel(g, flipped) + r).cwiseAbs().maxCoeff() <= 1e-6);
    CHECK((pearson_per_voxel(p, g) - r).cwiseAbs().maxCoeff() <= 1e-6);
  }
}

TEST_CASE("pearson loss range and extremes") {
  Rng rng(8);
  const Matrix<float> g = rng.matrix<float>(6, 3);
  {
    Graph<float> graph;
    auto loss = ops::pearson_loss(g, graph.constant(Tensor<float>::from_matrix(g)));
    CHECK(loss.value().item() == doctest::Approx(0.0).epsilon(1e-6));
  }
  {
    // Positive affine map per column still gives zero.
    Matrix<float> p = g;
    for (Index j = 0; j < 3; ++j) p.col(j) = p.col(j) * static_cast<float>(j + 1) + Eigen::VectorXf::Constant(6, 2.0f * static_cast<float>(j));
    Graph<float> graph;
    CHECK(ops::pearson_loss(g, graph.constant(Tensor<float>::from_matrix(p))).value().item() ==
          doctest::Approx(0.0).epsilon(1e-5));
  }
  {
    Graph<float> graph;
    Matrix<float> neg = -g;
    CHECK(ops::pearson_loss(g, graph.constant(Tensor<float>::from_matrix(neg))).value().item() ==
          doctest::Approx(2.0).epsilon(1e-6));
  }
  for (int trial = 0; trial < 200; ++trial) {
    Graph<float> graph;
    const Index t = rng.integer(2, 10), v = rng.integer(1, 4);
    auto loss = ops::pearson_loss(rng.matrix<float>(t, v), graph.constant(rng.tensor<float>({t, v})));
    CHECK(loss.value().item() >= -1e-6f);
    CHECK(loss.value().item() <= 2.0f + 1e-6f);
  }
}

TEST_CASE("pearson loss gradient on a random 4x3 case") {
  Rng rng(43);
  const Matrix<double> g = rng.matrix<double>(4, 3);
  const auto p = rng.tensor<double>({4, 3});
  Graph<double> graph;
  auto pv = graph.variable(p);
  graph.backward(ops::pearson_loss(g, pv));
  const double h = 1e-3;
  for (Index i = 0; i < p.size(); ++i) {
    auto up = p, down = p;
    up.values()[static_cast<std::size_t>(i)] += h;
    down.values()[static_cast<std::size_t>(i)] -= h;
    const double fu = 1.0 - pearson_per_voxel(g, up.matrix()).mean();
    const double fd = 1.0 - pearson_per_voxel(g, down.matrix()).mean();
    const double numeric = (fu - fd) / (2 * h);
    CHECK(test::relative_error(pv.grad().data()[i], numeric, 1e-3) < 1e-3);
  }
}

TEST_CASE("lr schedule") {
  TrainConfig c;
  for (Index e = 0; e < 5; ++e) CHECK(lr_at_epoch(e, c) == 1e-4);
  CHECK(lr_at_epoch(5, c) == doctest::Approx(0.8e-4).epsilon(1e-15));
  CHECK(lr_at_epoch(10, c) == doctest::Approx(0.64e-4).epsilon(1e-15));
  for (Index e = 0; e <= 50; ++e) {
    CHECK(lr_at_epoch(e, c) == 1e-4 * std::pow(0.8, static_cast<double>(e / 5)));
    if (e > 0) CHECK(lr_at_epoch(e, c) <= lr_at_epoch(e - 1, c));
  }
}

TEST_CASE("train config defaults and validation") {
  TrainConfig c;
  CHECK(c.base_lr == 1e-4);
  CHECK(c.weight_decay == 1e-2);
  CHECK(c.decay_factor == 0.8);
  CHECK(c.decay_interval_epochs == 5);
  CHECK(c.folds == 5);
  c.validate();
  auto bad = c;
  bad.batch_size = 1;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = c;
  bad.decay_factor = 1.5;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = c;
  bad.decay_factor = 0.0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("adamw examples") {
  TrainConfig c;
  c.weight_decay = 0.0;
  {
    Matrix<double> theta = Matrix<double>::Constant(2, 2, 0.7);
    Matrix<double> grad = Matrix<double>::Zero(2, 2);
    OptimizerState<double> s;
    std::vector<ParamSlot<double>> slots{{&theta, &grad, true}};
    adamw_step<double>(slots, s, 0.1, c);
    CHECK(theta == Matrix<double>::Constant(2, 2, 0.7));
    CHECK(s.step == 1);
  }
  {
    // m = 0.1, v = 0.001; both bias-corrected to 1, so θ′ = 1 − 0.1 · 1 / (1 + 1e-8).
    Matrix<double> theta = Matrix<double>::Constant(1, 1, 1.0);
    Matrix<double> grad = Matrix<double>::Constant(1, 1, 1.0);
    OptimizerState<double> s;
    std::vector<ParamSlot<double>> slots{{&theta, &grad, true}};
    adamw_step<double>(slots, s, 0.1, c);
    CHECK(theta(0, 0) == doctest::Approx(1.0 - 0.1 / (1.0 + 1e-8)).epsilon(1e-14));
  }
  {
    TrainConfig d;
    d.weight_decay = 0.01;
    Matrix<double> theta = Matrix<double>::Constant(1, 3, 2.0);
    Matrix<double> grad = Matrix<double>::Zero(1, 3);
    Matrix<double> bias = Matrix<double>::Constant(1, 3, 2.0);
    OptimizerState<double> s;
    std::vector<ParamSlot<double>> slots{{&theta, &grad, true}, {&bias, &grad, false}};
    adamw_step<double>(slots, s, 0.1, d);
    CHECK(theta(0, 0) == doctest::Approx(2.0 - 0.1 * 0.01 * 2.0).epsilon(1e-15));
    CHECK(bias(0, 0) == 2.0);
  }
  {
    Matrix<double> theta = Matrix<double>::Zero(2, 2);
    Matrix<double> grad = Matrix<double>::Zero(3, 2);
    OptimizerState<double> s;
    std::vector<ParamSlot<double>> slots{{&theta, &grad, true}};
    CHECK_THROWS_AS(adamw_step<double>(slots, s, 0.1, c), ShapeError);
    grad = Matrix<double>::Zero(2, 2);
    CHECK_THROWS_AS(adamw_step<double>(slots, s, 0.0, c), UsageError);
  }
}

TEST_CASE("adamw with zero decay follows a 10-step Adam oracle") {
  TrainConfig c;
  c.weight_decay = 0.0;
  const double lr = 0.05, target = 0.3;
  Matrix<double> theta = Matrix<double>::Constant(1, 1, 1.0);
  Matrix<double> grad(1, 1);
  OptimizerState<double> s;
  std::vector<ParamSlot<double>> slots{{&theta, &grad, true}};

  double x = 1.0, m = 0.0, v = 0.0;
  for (int t = 1; t <= 10; ++t) {
    grad(0, 0) = 2.0 * (theta(0, 0) - target);
    adamw_step<double>(slots, s, lr, c);

    const double gx = 2.0 * (x - target);
    m = 0.9 * m + 0.1 * gx;
    v = 0.999 * v + 0.001 * gx * gx;
    const double mhat = m / (1.0 - std::pow(0.9, t));
    const double vhat = v / (1.0 - std::pow(0.999, t));
    x -= lr * mhat / (std::sqrt(vhat) + 1e-8);
    CHECK(theta(0, 0) == doctest::Approx(x).epsilon(1e-12));
  }
}
