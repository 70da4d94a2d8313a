#pragma once

#include <random>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "szgan/network.hpp"

namespace gradcheck {

using namespace szgan;

struct Report {
  int checked = 0;
  double worst = 0.0;
  std::string worst_at;
};

// Loss = sum(output * probe). Analytic gradients from one forward/backward pass are compared with
// central differences on `samples` randomly chosen parameter values (and as many input values).
inline Report run(Sequential net, Parameters params, const Tensor& input, std::uint64_t seed, int samples = 20) {
  Rng pick(seed);
  const std::uint64_t dropout_seed = seed ^ 0x5eedULL;

  auto loss_of = [&](const Tensor& out, const Tensor& probe) {
    double s = 0.0;
    for (Index i = 0; i < out.size(); ++i) s += out[i] * probe[i];
    return s;
  };

  Rng r0(dropout_seed);
  Tensor out = net.forward(params, input, Mode::train, &r0);
  Tensor probe(out.shape());
  std::normal_distribution<double> normal(0.0, 1.0);
  for (Index i = 0; i < probe.size(); ++i) probe[i] = normal(pick);

  params.clear_grad();
  const Tensor input_grad = net.backward(params, probe);

  Tensor x = input;
  auto evaluate = [&]() {
    Rng r(dropout_seed);
    return loss_of(net.forward(params, x, Mode::train, &r), probe);
  };

  Report rep;
  auto record = [&](double analytic, double numeric, const std::string& where) {
    const double err = oracle::relative_error(analytic, numeric);
    ++rep.checked;
    if (err > rep.worst) {
      rep.worst = err;
      rep.worst_at = where;
    }
  };

  std::vector<std::pair<std::string, bool>> slots;  // (layer, is_weight)
  for (const auto& [name, lp] : params.layers) {
    slots.push_back({name, true});
    slots.push_back({name, false});
  }
  if (!slots.empty()) {
    std::uniform_int_distribution<std::size_t> which(0, slots.size() - 1);
    for (int k = 0; k < samples; ++k) {
      const auto& [name, is_weight] = slots[which(pick)];
      LayerParams& lp = params.at(name);
      Tensor& t = is_weight ? lp.weight : lp.bias;
      std::uniform_int_distribution<Index> at(0, t.size() - 1);
      const Index i = at(pick);
      const double analytic = t.grad()[i];
      const double numeric = oracle::central_difference(t[i], evaluate);
      record(analytic, numeric, name + (is_weight ? ".weight[" : ".bias[") + std::to_string(i) + "]");
    }
  }
  std::uniform_int_distribution<Index> at(0, x.size() - 1);
  for (int k = 0; k < samples; ++k) {
    const Index i = at(pick);
    const double numeric = oracle::central_difference(x[i], evaluate);
    record(input_grad[i], numeric, "input[" + std::to_string(i) + "]");
  }
  return rep;
}

inline void randomize(Parameters& params, Rng& rng, double scale = 0.5) {
  std::normal_distribution<double> normal(0.0, scale);
  for (auto& [name, lp] : params.layers) {
    for (Index i = 0; i < lp.weight.size(); ++i) lp.weight[i] = normal(rng);
    for (Index i = 0; i < lp.bias.size(); ++i) lp.bias[i] = normal(rng);
  }
}

inline Tensor random_tensor(Shape shape, Rng& rng, double scale = 1.0) {
  Tensor t(std::move(shape));
  std::normal_distribution<double> normal(0.0, scale);
  for (Index i = 0; i < t.size(); ++i) t[i] = normal(rng);
  return t;
}

// One small network per layer kind, with random extents drawn from `rng`.
inline std::pair<Sequential, Shape> network_for(LayerKind kind, Rng& rng) {
  std::uniform_int_distribution<Index> small(1, 3), side(3, 9), units(2, 7);
  const Index batch = small(rng);
  switch (kind) {
    case LayerKind::dense: {
      const Shape in{units(rng)};
      return {Sequential(in, {LayerSpec::dense("fc", units(rng))}), batched(batch, in)};
    }
    case LayerKind::conv2d: {
      const Shape in{small(rng), side(rng), side(rng)};
      std::uniform_int_distribution<Index> k(1, 5), s(1, 3);
      return {Sequential(in, {LayerSpec::conv2d("conv", small(rng), {k(rng), k(rng)}, {s(rng), s(rng)})}),
              batched(batch, in)};
    }
    case LayerKind::deconv2d: {
      const Shape in{small(rng), small(rng) + 1, small(rng) + 1};
      std::uniform_int_distribution<Index> k(1, 5), s(1, 3);
      return {Sequential(in, {LayerSpec::deconv2d("deconv", small(rng), {k(rng), k(rng)}, {s(rng), s(rng)})}),
              batched(batch, in)};
    }
    case LayerKind::reshape: {
      const Index a = small(rng) + 1, b = small(rng) + 1, c = small(rng);
      const Shape in{a * b * c};
      return {Sequential(in, {LayerSpec::reshape({c, a, b}), LayerSpec::conv2d("conv", 2, {3, 3}, {1, 1})}),
              batched(batch, in)};
    }
    case LayerKind::flatten: {
      const Shape in{small(rng), small(rng) + 1, small(rng) + 1};
      return {Sequential(in, {LayerSpec::flatten(), LayerSpec::dense("fc", 3)}), batched(batch, in)};
    }
    case LayerKind::dropout: {
      const Shape in{units(rng)};
      return {Sequential(in, {LayerSpec::dense("fc", units(rng)), LayerSpec::dropout(0.5)}), batched(batch, in)};
    }
    case LayerKind::leaky_relu: {
      const Shape in{units(rng)};
      return {Sequential(in, {LayerSpec::dense("fc", units(rng)), LayerSpec::leaky_relu(0.2)}), batched(batch, in)};
    }
    default: {
      const Shape in{units(rng)};
      return {Sequential(in, {LayerSpec::dense("fc", units(rng)), LayerSpec::activation(kind)}), batched(batch, in)};
    }
  }
}

inline constexpr LayerKind all_kinds[] = {LayerKind::dense,   LayerKind::conv2d,     LayerKind::deconv2d,
                                          LayerKind::sigmoid, LayerKind::relu,       LayerKind::leaky_relu,
                                          LayerKind::tanh,    LayerKind::softmax,    LayerKind::dropout,
                                          LayerKind::reshape, LayerKind::flatten};

}  // namespace gradcheck
