#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "szgan/layers.hpp"

namespace szgan {

struct LayerParams {
  Tensor weight;
  Tensor bias;
  bool trainable = true;
};

/// Weights and biases keyed by layer name.
struct Parameters {
  std::map<std::string, LayerParams> layers;
  std::uint64_t rng_seed = 0;

  Index count() const;
  LayerParams& at(const std::string& name);
  const LayerParams& at(const std::string& name) const;
  bool contains(const std::string& name) const { return layers.count(name) != 0; }

  void clear_grad();
  void set_trainable(bool trainable);
  bool all_finite() const;

  /// Bitwise equality of every tensor value (gradients and flags ignored).
  bool same_values(const Parameters& other) const;
};

/// Union of two disjoint parameter maps; the seed of `a` is kept.
Parameters merge(const Parameters& a, const Parameters& b);

/// Layers of `p` whose names are in `names`.
Parameters select(const Parameters& p, const std::vector<std::string>& names);

/// Content hash over names, shapes and values.
std::uint64_t fingerprint(const Parameters& p);

struct BackwardOptions {
  bool parameter_grads = true;
  bool input_grad = true;
};

/// A feed-forward stack of layers over batched tensors `[B, ...]`.
///
/// `forward` records the activations needed by `backward`; `infer` is a const, tape-free
/// pass in inference mode. Gradients are accumulated into the `grad` buffers of the
/// trainable tensors in `Parameters`.
class Sequential {
 public:
  Sequential() = default;
  Sequential(Shape input_shape, std::vector<LayerSpec> layers);

  const Shape& input_shape() const noexcept { return shapes_.front(); }
  const Shape& output_shape() const noexcept { return shapes_.back(); }
  const std::vector<LayerSpec>& layers() const noexcept { return layers_; }
  /// Per-sample shapes: entry i is the input of layer i, the last entry the network output.
  const std::vector<Shape>& shapes() const noexcept { return shapes_; }

  Shape weight_shape(std::size_t layer) const;
  Index parameter_count() const;
  std::vector<std::string> parameter_names() const;

  /// Weights ~ N(0, init_std^2), biases zero; one RNG stream per layer name.
  Parameters init_parameters(std::uint64_t seed, double init_std = 0.02) const;
  void check_parameters(const Parameters& params) const;

  Tensor forward(const Parameters& params, const Tensor& batch, Mode mode, Rng* rng = nullptr);
  Tensor infer(const Parameters& params, const Tensor& batch) const;

  /// Back-propagates `upstream` (gradient w.r.t. the last forward output). Returns the gradient
  /// w.r.t. the forward input, or an empty tensor when `options.input_grad` is false.
  Tensor backward(Parameters& params, const Tensor& upstream, BackwardOptions options = {});

  bool has_forward_state() const noexcept { return !tape_.empty(); }
  void clear_state() noexcept;

  /// The first `n_layers` layers as a network of their own.
  Sequential head_layers(std::size_t n_layers) const;

  /// Appends `tail`, whose input shape must equal this network's output shape.
  Sequential then(const Sequential& tail) const;

 private:
  Tensor propagate(const Parameters& params, const Tensor& batch, Mode mode, Rng* rng, bool record);

  std::vector<LayerSpec> layers_;
  std::vector<Shape> shapes_;
  std::vector<Tensor> tape_;
  std::vector<Tensor> masks_;
};

}  // namespace szgan
