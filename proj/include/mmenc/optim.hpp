#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "mmenc/encoder.hpp"

namespace mmenc {

struct TrainConfig {
  double base_lr = 1e-4;
  double weight_decay = 1e-2;
  double decay_factor = 0.8;
  Index decay_interval_epochs = 5;
  Index epochs = 30;
  Index batch_size = 32;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  std::uint64_t seed = 0;
  Index folds = 5;
  // Share of the training indices held back to pick the best epoch.
  double validation_fraction = 0.1;

  // Throws ConfigError naming the offending field.
  void validate() const;

  bool operator==(const TrainConfig&) const = default;
};

// Step decay: base_lr · decay_factor^floor(epoch / decay_interval_epochs).
double lr_at_epoch(Index epoch, const TrainConfig& config);

template <typename Scalar>
struct ParamSlot {
  Matrix<Scalar>* value;
  const Matrix<Scalar>* grad;
  bool decay;
};

template <typename Scalar>
struct OptimizerState {
  std::vector<Matrix<Scalar>> first;
  std::vector<Matrix<Scalar>> second;
  std::int64_t step = 0;
};

// One AdamW update. Weight decay is decoupled: θ ← θ − lr·wd·θ is applied to
// slots flagged `decay`, separately from the bias-corrected Adam step.
// Moment buffers are created on first use.
template <typename Scalar>
void adamw_step(std::span<const ParamSlot<Scalar>> slots, OptimizerState<Scalar>& state, double lr,
                const TrainConfig& config) {
  if (!(lr > 0.0)) throw UsageError("adamw_step: learning rate must be positive");
  if (state.first.empty()) {
    for (const auto& s : slots) {
      state.first.push_back(Matrix<Scalar>::Zero(s.value->rows(), s.value->cols()));
      state.second.push_back(Matrix<Scalar>::Zero(s.value->rows(), s.value->cols()));
    }
  }
  if (state.first.size() != slots.size()) throw ShapeError("adamw_step: optimizer state has a different slot count");
  for (std::size_t i = 0; i < slots.size(); ++i) {
    const auto& s = slots[i];
    if (s.grad->rows() != s.value->rows() || s.grad->cols() != s.value->cols() ||
        state.first[i].rows() != s.value->rows() || state.first[i].cols() != s.value->cols()) {
      throw ShapeError("adamw_step: slot " + std::to_string(i) + " has mismatched parameter/gradient/moment shapes");
    }
  }
  ++state.step;
  const double b1 = config.beta1, b2 = config.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < slots.size(); ++i) {
    const auto& s = slots[i];
    Scalar* theta = s.value->data();
    const Scalar* grad = s.grad->data();
    Scalar* m = state.first[i].data();
    Scalar* v = state.second[i].data();
    const double shrink = s.decay ? lr * config.weight_decay : 0.0;
    for (Index j = 0; j < s.value->size(); ++j) {
      const double gj = static_cast<double>(grad[j]);
      const double mj = b1 * static_cast<double>(m[j]) + (1.0 - b1) * gj;
      const double vj = b2 * static_cast<double>(v[j]) + (1.0 - b2) * gj * gj;
      m[j] = static_cast<Scalar>(mj);
      v[j] = static_cast<Scalar>(vj);
      double t = static_cast<double>(theta[j]);
      t -= shrink * t;
      t -= lr * (mj / c1) / (std::sqrt(vj / c2) + config.adam_eps);
      theta[j] = static_cast<Scalar>(t);
    }
  }
}

// Slots over a model's parameters and a same-shaped gradient buffer.
template <typename Scalar>
std::vector<ParamSlot<Scalar>> parameter_slots(ModelParams<Scalar>& params, const ModelParams<Scalar>& grads,
                                               const ModelConfig& c) {
  std::vector<const Matrix<Scalar>*> g;
  for_each_parameter(grads, c, [&](const ParamInfo&, const Matrix<Scalar>& m) { g.push_back(&m); });
  std::vector<ParamSlot<Scalar>> slots;
  for_each_parameter(params, c, [&](const ParamInfo& info, Matrix<Scalar>& m) {
    slots.push_back({&m, g[slots.size()], info.decay});
  });
  return slots;
}

}  // namespace mmenc
