#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <vector>

#include "mmenc/ops.hpp"

namespace mmenc::test {

// Small seeded generator used by the property tests.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  double uniform(double lo = 0.0, double hi = 1.0) { return std::uniform_real_distribution<double>(lo, hi)(engine_); }
  double normal(double sd = 1.0) { return std::normal_distribution<double>(0.0, sd)(engine_); }
  Index integer(Index lo, Index hi) { return std::uniform_int_distribution<Index>(lo, hi)(engine_); }
  std::mt19937_64& engine() { return engine_; }

  template <typename S>
  Matrix<S> matrix(Index rows, Index cols, double sd = 1.0) {
    Matrix<S> m(rows, cols);
    for (Index i = 0; i < m.size(); ++i) m.data()[i] = static_cast<S>(normal(sd));
    return m;
  }

  template <typename S>
  Tensor<S> tensor(Shape shape, double sd = 1.0) {
    Tensor<S> t(shape);
    for (auto& v : t.values()) v = static_cast<S>(normal(sd));
    return t;
  }

  // Values kept at least `gap` away from zero (for ops with a kink there).
  template <typename S>
  Tensor<S> tensor_away_from_zero(Shape shape, double gap) {
    Tensor<S> t(shape);
    for (auto& v : t.values()) {
      double x = normal();
      while (std::abs(x) < gap) x = normal();
      v = static_cast<S>(x);
    }
    return t;
  }

 private:
  std::mt19937_64 engine_;
};

struct GradReport {
  Index checked = 0;
  Index passed = 0;
  double max_error = 0.0;
  double fraction() const { return checked == 0 ? 1.0 : static_cast<double>(passed) / static_cast<double>(checked); }
};

// |analytic − numeric| / max(|analytic|, |numeric|, floor).
inline double relative_error(double analytic, double numeric, double floor) {
  return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), floor});
}

template <typename S>
using Builder = std::function<Var<S>(Graph<S>&, const std::vector<Var<S>>&)>;

// Compares backward() against central differences of
// loss = Σ out ⊙ W (W fixed random weights) for every coordinate of every
// input, or a random subset of `max_coords` coordinates per input.
template <typename S>
GradReport gradcheck(const Builder<S>& build, std::vector<Tensor<S>> inputs, std::uint64_t seed, double h, double tol,
                     double floor, Index max_coords = -1) {
  Rng rng(seed);
  Matrix<S> weights;
  auto loss_of = [&](const std::vector<Tensor<S>>& xs, std::vector<Matrix<S>>* grads) {
    Graph<S> g;
    std::vector<Var<S>> vars;
    for (const auto& x : xs) vars.push_back(g.variable(x));
    auto out = build(g, vars);
    if (weights.size() == 0) weights = rng.template matrix<S>(out.mat().rows(), out.mat().cols());
    if (grads) {
      g.backward(ops::sum(ops::mul(out, g.constant(Tensor<S>(out.shape(), weights)))));
      for (const auto& v : vars) grads->push_back(v.grad());
    }
    // The probe sum itself is taken in double so that only the op's own
    // rounding enters the difference quotient.
    return out.mat().template cast<double>().cwiseProduct(weights.template cast<double>()).sum();
  };
  std::vector<Matrix<S>> analytic;
  loss_of(inputs, &analytic);

  GradReport report;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    const Index n = inputs[i].size();
    std::vector<Index> coords;
    if (max_coords < 0 || max_coords >= n) {
      for (Index j = 0; j < n; ++j) coords.push_back(j);
    } else {
      for (Index j = 0; j < max_coords; ++j) coords.push_back(rng.integer(0, n - 1));
    }
    for (Index j : coords) {
      auto xs = inputs;
      const S original = inputs[i].values()[static_cast<std::size_t>(j)];
      xs[i].values()[static_cast<std::size_t>(j)] = static_cast<S>(original + h);
      const double up = loss_of(xs, nullptr);
      xs[i].values()[static_cast<std::size_t>(j)] = static_cast<S>(original - h);
      const double down = loss_of(xs, nullptr);
      const double numeric = (up - down) / (2.0 * h);
      const double err = relative_error(static_cast<double>(analytic[i].data()[j]), numeric, floor);
      ++report.checked;
      if (err <= tol) ++report.passed;
      report.max_error = std::max(report.max_error, err);
    }
  }
  return report;
}

}  // namespace mmenc::test
