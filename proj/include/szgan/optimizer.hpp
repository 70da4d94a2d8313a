#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <string_view>

#include "szgan/network.hpp"

namespace szgan {

enum class Algorithm { sgd, adam };

std::string_view to_string(Algorithm a);
Algorithm algorithm_from_string(std::string_view name);

struct OptimizerSettings {
  Algorithm algorithm = Algorithm::adam;
  double learning_rate = 2e-4;
  double beta1 = 0.5;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct Moments {
  Eigen::VectorXd weight_m, weight_v;
  Eigen::VectorXd bias_m, bias_v;
};

struct OptimizerState {
  OptimizerSettings settings;
  std::int64_t step = 0;
  std::map<std::string, Moments> moments;

  OptimizerState() = default;
  explicit OptimizerState(OptimizerSettings s) : settings(s) {}
};

/// Applies one update to every trainable layer and clears all gradients. Throws StateError if a
/// trainable layer has no gradient.
void optimizer_step(OptimizerState& state, Parameters& params);

}  // namespace szgan
