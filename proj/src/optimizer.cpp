#include "szgan/optimizer.hpp"

#include <cmath>

namespace szgan {

std::string_view to_string(Algorithm a) { return a == Algorithm::sgd ? "sgd" : "adam"; }

Algorithm algorithm_from_string(std::string_view name) {
  if (name == "sgd") return Algorithm::sgd;
  if (name == "adam") return Algorithm::adam;
  throw ConfigError("unknown optimizer '" + std::string(name) + "'");
}

namespace {

void adam_update(Tensor& t, Eigen::VectorXd& m, Eigen::VectorXd& v, const OptimizerSettings& s, double c1, double c2) {
  if (m.size() != t.size()) {
    m = Eigen::VectorXd::Zero(t.size());
    v = Eigen::VectorXd::Zero(t.size());
  }
  const auto& g = t.grad();
  m = s.beta1 * m + (1.0 - s.beta1) * g;
  v = s.beta2 * v + (1.0 - s.beta2) * g.cwiseAbs2();
  t.data().array() -= s.learning_rate * (m.array() / c1) / ((v.array() / c2).sqrt() + s.epsilon);
}

}  // namespace

void optimizer_step(OptimizerState& state, Parameters& params) {
  for (const auto& [name, lp] : params.layers) {
    if (lp.trainable && (!lp.weight.has_grad() || !lp.bias.has_grad())) {
      throw StateError("optimizer step without gradients for layer '" + name + "'");
    }
  }
  ++state.step;
  const auto& s = state.settings;
  const double c1 = 1.0 - std::pow(s.beta1, double(state.step));
  const double c2 = 1.0 - std::pow(s.beta2, double(state.step));
  for (auto& [name, lp] : params.layers) {
    if (!lp.trainable) continue;
    if (s.algorithm == Algorithm::sgd) {
      lp.weight.data() -= s.learning_rate * lp.weight.grad();
      lp.bias.data() -= s.learning_rate * lp.bias.grad();
    } else {
      auto& mo = state.moments[name];
      adam_update(lp.weight, mo.weight_m, mo.weight_v, s, c1, c2);
      adam_update(lp.bias, mo.bias_m, mo.bias_v, s, c1, c2);
    }
  }
  params.clear_grad();
}

}  // namespace szgan
