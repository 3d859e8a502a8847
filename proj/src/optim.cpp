#include "mmenc/optim.hpp"

namespace mmenc {

void TrainConfig::validate() const {
  if (!(base_lr > 0.0)) throw ConfigError("base_lr must be > 0");
  if (weight_decay < 0.0) throw ConfigError("weight_decay must be >= 0");
  if (!(decay_factor > 0.0 && decay_factor <= 1.0)) throw ConfigError("decay_factor must lie in (0, 1]");
  if (decay_interval_epochs < 1) throw ConfigError("decay_interval_epochs must be >= 1");
  if (epochs < 0) throw ConfigError("epochs must be >= 0");
  if (batch_size < 2) throw ConfigError("batch_size must be >= 2 (correlation needs two stimuli)");
  if (!(beta1 >= 0.0 && beta1 < 1.0)) throw ConfigError("beta1 must lie in [0, 1)");
  if (!(beta2 >= 0.0 && beta2 < 1.0)) throw ConfigError("beta2 must lie in [0, 1)");
  if (!(adam_eps > 0.0)) throw ConfigError("adam_eps must be > 0");
  if (folds < 2) throw ConfigError("folds must be >= 2");
  if (!(validation_fraction >= 0.0 && validation_fraction < 1.0)) {
    throw ConfigError("validation_fraction must lie in [0, 1)");
  }
}

double lr_at_epoch(Index epoch, const TrainConfig& config) {
  if (epoch < 0) throw UsageError("lr_at_epoch: epoch must be >= 0");
  return config.base_lr * std::pow(config.decay_factor, static_cast<double>(epoch / config.decay_interval_epochs));
}

}  // namespace mmenc
