#include "szgan/network.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <set>

namespace szgan {

Index Parameters::count() const {
  Index n = 0;
  for (const auto& [name, p] : layers) n += p.weight.size() + p.bias.size();
  return n;
}

LayerParams& Parameters::at(const std::string& name) {
  auto it = layers.find(name);
  if (it == layers.end()) throw StateError("no parameters for layer '" + name + "'");
  return it->second;
}

const LayerParams& Parameters::at(const std::string& name) const {
  auto it = layers.find(name);
  if (it == layers.end()) throw StateError("no parameters for layer '" + name + "'");
  return it->second;
}

void Parameters::clear_grad() {
  for (auto& [name, p] : layers) {
    p.weight.clear_grad();
    p.bias.clear_grad();
  }
}

void Parameters::set_trainable(bool trainable) {
  for (auto& [name, p] : layers) p.trainable = trainable;
}

bool Parameters::all_finite() const {
  return std::all_of(layers.begin(), layers.end(),
                     [](const auto& kv) { return kv.second.weight.all_finite() && kv.second.bias.all_finite(); });
}

bool Parameters::same_values(const Parameters& other) const {
  if (layers.size() != other.layers.size()) return false;
  for (const auto& [name, p] : layers) {
    auto it = other.layers.find(name);
    if (it == other.layers.end()) return false;
    const auto& q = it->second;
    if (p.weight.shape() != q.weight.shape() || p.bias.shape() != q.bias.shape()) return false;
    if (std::memcmp(p.weight.ptr(), q.weight.ptr(), sizeof(double) * std::size_t(p.weight.size())) != 0) return false;
    if (std::memcmp(p.bias.ptr(), q.bias.ptr(), sizeof(double) * std::size_t(p.bias.size())) != 0) return false;
  }
  return true;
}

Parameters merge(const Parameters& a, const Parameters& b) {
  Parameters out = a;
  for (const auto& [name, p] : b.layers) {
    if (!out.layers.emplace(name, p).second) throw ConfigError("duplicate layer name '" + name + "' in merge");
  }
  return out;
}

Parameters select(const Parameters& p, const std::vector<std::string>& names) {
  Parameters out;
  out.rng_seed = p.rng_seed;
  for (const auto& name : names) out.layers.emplace(name, p.at(name));
  return out;
}

std::uint64_t fingerprint(const Parameters& p) {
  std::uint64_t h = fnv1a("szgan-params");
  auto add_tensor = [&h](const Tensor& t) {
    h = fnv1a(shape_string(t.shape()), h);
    h = fnv1a(std::string_view(reinterpret_cast<const char*>(t.ptr()), sizeof(double) * std::size_t(t.size())), h);
  };
  for (const auto& [name, lp] : p.layers) {
    h = fnv1a(name, h);
    add_tensor(lp.weight);
    add_tensor(lp.bias);
  }
  return h;
}

namespace {

Shape infer_output(const LayerSpec& spec, const Shape& in) {
  const std::string label = "layer '" + spec.name + "' (" + std::string(to_string(spec.kind)) + ")";
  switch (spec.kind) {
    case LayerKind::dense:
      if (in.size() != 1) throw DimensionError(label + " expects a flat input, got " + shape_string(in));
      return {spec.outputs};
    case LayerKind::conv2d: {
      if (in.size() != 3) throw DimensionError(label + " expects [C, H, W], got " + shape_string(in));
      const auto g = conv_geometry(in[1], in[2], spec.kernel, spec.stride);
      return {spec.outputs, g.out_h, g.out_w};
    }
    case LayerKind::deconv2d:
      if (in.size() != 3) throw DimensionError(label + " expects [C, H, W], got " + shape_string(in));
      return {spec.outputs, in[1] * spec.stride.h, in[2] * spec.stride.w};
    case LayerKind::reshape:
      if (shape_size(spec.target) != shape_size(in)) {
        throw DimensionError(label + " cannot reshape " + shape_string(in) + " to " + shape_string(spec.target));
      }
      return spec.target;
    case LayerKind::flatten:
      return {shape_size(in)};
    default:
      return in;
  }
}

double sigmoid_scalar(double v) {
  if (v >= 0) return 1.0 / (1.0 + std::exp(-v));
  const double e = std::exp(v);
  return e / (1.0 + e);
}

}  // namespace

Sequential::Sequential(Shape input_shape, std::vector<LayerSpec> layers) : layers_(std::move(layers)) {
  shapes_.push_back(std::move(input_shape));
  std::set<std::string> names;
  for (const auto& spec : layers_) {
    spec.validate();
    if (spec.has_parameters() && !names.insert(spec.name).second) {
      throw ConfigError("duplicate layer name '" + spec.name + "'");
    }
    shapes_.push_back(infer_output(spec, shapes_.back()));
  }
}

Shape Sequential::weight_shape(std::size_t layer) const {
  const auto& spec = layers_.at(layer);
  const Shape& in = shapes_[layer];
  switch (spec.kind) {
    case LayerKind::dense:
      return {spec.outputs, in[0]};
    case LayerKind::conv2d:
      return {spec.outputs, in[0], spec.kernel.h, spec.kernel.w};
    case LayerKind::deconv2d:
      return {in[0], spec.outputs, spec.kernel.h, spec.kernel.w};
    default:
      return {};
  }
}

Index Sequential::parameter_count() const {
  Index n = 0;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    if (layers_[i].has_parameters()) n += shape_size(weight_shape(i)) + layers_[i].outputs;
  }
  return n;
}

std::vector<std::string> Sequential::parameter_names() const {
  std::vector<std::string> names;
  for (const auto& spec : layers_) {
    if (spec.has_parameters()) names.push_back(spec.name);
  }
  return names;
}

Parameters Sequential::init_parameters(std::uint64_t seed, double init_std) const {
  Parameters p;
  p.rng_seed = seed;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    const auto& spec = layers_[i];
    if (!spec.has_parameters()) continue;
    Rng rng(derive_seed(seed, spec.name));
    std::normal_distribution<double> normal(0.0, init_std);
    LayerParams lp{Tensor(weight_shape(i)), Tensor({spec.outputs}), true};
    for (Index k = 0; k < lp.weight.size(); ++k) lp.weight[k] = normal(rng);
    p.layers.emplace(spec.name, std::move(lp));
  }
  return p;
}

void Sequential::check_parameters(const Parameters& params) const {
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    const auto& spec = layers_[i];
    if (!spec.has_parameters()) continue;
    const auto& lp = params.at(spec.name);
    if (lp.weight.shape() != weight_shape(i) || lp.bias.shape() != Shape{spec.outputs}) {
      throw DimensionError("parameters of layer '" + spec.name + "' have shapes " + shape_string(lp.weight.shape()) +
                           "/" + shape_string(lp.bias.shape()) + ", expected " + shape_string(weight_shape(i)));
    }
  }
}

Tensor Sequential::forward(const Parameters& params, const Tensor& batch, Mode mode, Rng* rng) {
  return propagate(params, batch, mode, rng, true);
}

Tensor Sequential::infer(const Parameters& params, const Tensor& batch) const {
  // A tape-free pass never touches mutable state.
  return const_cast<Sequential*>(this)->propagate(params, batch, Mode::infer, nullptr, false);
}

void Sequential::clear_state() noexcept {
  tape_.clear();
  masks_.clear();
}

Sequential Sequential::head_layers(std::size_t n_layers) const {
  if (n_layers > layers_.size()) throw ArgumentError("network has fewer layers than requested");
  return Sequential(input_shape(), std::vector<LayerSpec>(layers_.begin(), layers_.begin() + long(n_layers)));
}

Sequential Sequential::then(const Sequential& tail) const {
  if (tail.input_shape() != output_shape()) {
    throw DimensionError("cannot append a network taking " + shape_string(tail.input_shape()) + " to one producing " +
                         shape_string(output_shape()));
  }
  std::vector<LayerSpec> all = layers_;
  all.insert(all.end(), tail.layers_.begin(), tail.layers_.end());
  return Sequential(input_shape(), std::move(all));
}

Tensor Sequential::propagate(const Parameters& params, const Tensor& batch, Mode mode, Rng* rng, bool record) {
  if (shapes_.empty()) throw StateError("network has no layers");
  if (batch.rank() < 1 || sample_shape(batch.shape()) != input_shape()) {
    throw DimensionError("network input " + shape_string(batch.shape()) + " does not match [B] + " +
                         shape_string(input_shape()));
  }
  const Index n = batch.dim(0);
  if (record) {
    tape_.assign(1, Tensor(batch.shape(), batch.data()));
    masks_.assign(layers_.size(), Tensor());
  }
  Tensor x(batch.shape(), batch.data());
  detail::RowMatrixXd scratch;

  for (std::size_t li = 0; li < layers_.size(); ++li) {
    const auto& spec = layers_[li];
    const Shape& in_shape = shapes_[li];
    const Shape& out_shape = shapes_[li + 1];
    const Index in_size = shape_size(in_shape);
    const Index out_size = shape_size(out_shape);
    Tensor y;

    switch (spec.kind) {
      case LayerKind::dense: {
        const auto& lp = params.at(spec.name);
        y = Tensor(batched(n, out_shape));
        Eigen::Map<const Eigen::MatrixXd> xin(x.ptr(), in_size, n);
        Eigen::Map<Eigen::MatrixXd> yout(y.ptr(), out_size, n);
        yout.noalias() = lp.weight.matrix(out_size, in_size) * xin;
        yout.colwise() += lp.bias.data();
        break;
      }
      case LayerKind::conv2d: {
        const auto& lp = params.at(spec.name);
        const auto g = conv_geometry(in_shape[1], in_shape[2], spec.kernel, spec.stride);
        detail::ConstRowMap w(lp.weight.ptr(), spec.outputs, lp.weight.size() / spec.outputs);
        y = Tensor(batched(n, out_shape));
        for (Index s = 0; s < n; ++s) {
          detail::conv2d(x.ptr() + s * in_size, in_shape[0], g, w, lp.bias.ptr(), y.ptr() + s * out_size, scratch);
        }
        break;
      }
      case LayerKind::deconv2d: {
        const auto& lp = params.at(spec.name);
        const auto g = conv_geometry(out_shape[1], out_shape[2], spec.kernel, spec.stride);
        detail::ConstRowMap w(lp.weight.ptr(), in_shape[0], lp.weight.size() / in_shape[0]);
        y = Tensor(batched(n, out_shape));
        for (Index s = 0; s < n; ++s) {
          detail::deconv2d(x.ptr() + s * in_size, in_shape[0], spec.outputs, g, w, lp.bias.ptr(),
                           y.ptr() + s * out_size, scratch);
        }
        break;
      }
      case LayerKind::sigmoid:
        y = Tensor(x.shape(), x.data().unaryExpr([](double v) { return sigmoid_scalar(v); }));
        break;
      case LayerKind::relu:
        y = Tensor(x.shape(), x.data().cwiseMax(0.0));
        break;
      case LayerKind::leaky_relu: {
        const double leak = spec.leak;
        y = Tensor(x.shape(), x.data().unaryExpr([leak](double v) { return v > 0 ? v : leak * v; }));
        break;
      }
      case LayerKind::tanh:
        y = Tensor(x.shape(), x.data().array().tanh().matrix());
        break;
      case LayerKind::softmax:
        y = softmax(x);
        break;
      case LayerKind::dropout: {
        if (mode == Mode::infer || spec.dropout_rate == 0.0) {
          y = std::move(x);
          break;
        }
        if (rng == nullptr) throw StateError("dropout in train mode needs a random generator");
        std::bernoulli_distribution keep(1.0 - spec.dropout_rate);
        const double scale = 1.0 / (1.0 - spec.dropout_rate);
        Tensor mask(x.shape());
        for (Index k = 0; k < mask.size(); ++k) mask[k] = keep(*rng) ? scale : 0.0;
        y = Tensor(x.shape(), x.data().cwiseProduct(mask.data()));
        if (record) masks_[li] = std::move(mask);
        break;
      }
      case LayerKind::reshape:
      case LayerKind::flatten:
        y = Tensor(batched(n, out_shape), std::move(x.data()));
        break;
    }
    if (record) tape_.push_back(Tensor(y.shape(), y.data()));
    x = std::move(y);
  }
  return x;
}

Tensor Sequential::backward(Parameters& params, const Tensor& upstream, BackwardOptions options) {
  if (tape_.size() != layers_.size() + 1) throw StateError("backward called before forward");
  if (upstream.shape() != tape_.back().shape()) {
    throw DimensionError("upstream gradient " + shape_string(upstream.shape()) + " does not match forward output " +
                         shape_string(tape_.back().shape()));
  }
  const Index n = upstream.dim(0);

  // Below `stop` nothing needs a gradient.
  std::size_t stop = layers_.size();
  if (options.input_grad) {
    stop = 0;
  } else if (options.parameter_grads) {
    for (std::size_t li = 0; li < layers_.size(); ++li) {
      if (layers_[li].has_parameters() && params.at(layers_[li].name).trainable) {
        stop = li;
        break;
      }
    }
  }

  Tensor dy(upstream.shape(), upstream.data());
  detail::RowMatrixXd scratch;
  for (std::size_t li = layers_.size(); li-- > stop;) {
    const auto& spec = layers_[li];
    const Shape& in_shape = shapes_[li];
    const Shape& out_shape = shapes_[li + 1];
    const Index in_size = shape_size(in_shape);
    const Index out_size = shape_size(out_shape);
    const Tensor& x = tape_[li];
    const Tensor& y = tape_[li + 1];
    const bool need_dx = li > stop || options.input_grad;
    Tensor dx;

    switch (spec.kind) {
      case LayerKind::dense: {
        auto& lp = params.at(spec.name);
        Eigen::Map<const Eigen::MatrixXd> xin(x.ptr(), in_size, n);
        Eigen::Map<const Eigen::MatrixXd> grad(dy.ptr(), out_size, n);
        if (options.parameter_grads && lp.trainable) {
          detail::RowMap dw(lp.weight.ensure_grad().data(), out_size, in_size);
          dw.noalias() += grad * xin.transpose();
          lp.bias.ensure_grad() += grad.rowwise().sum();
        }
        if (need_dx) {
          dx = Tensor(x.shape());
          Eigen::Map<Eigen::MatrixXd> gin(dx.ptr(), in_size, n);
          gin.noalias() = lp.weight.matrix(out_size, in_size).transpose() * grad;
        }
        break;
      }
      case LayerKind::conv2d:
      case LayerKind::deconv2d: {
        auto& lp = params.at(spec.name);
        const bool deconv = spec.kind == LayerKind::deconv2d;
        const auto g = deconv ? conv_geometry(out_shape[1], out_shape[2], spec.kernel, spec.stride)
                              : conv_geometry(in_shape[1], in_shape[2], spec.kernel, spec.stride);
        const Index rows = lp.weight.dim(0);
        detail::ConstRowMap w(lp.weight.ptr(), rows, lp.weight.size() / rows);
        const bool want_params = options.parameter_grads && lp.trainable;
        double* db = nullptr;
        std::optional<detail::RowMap> dw;
        if (want_params) {
          dw.emplace(lp.weight.ensure_grad().data(), rows, lp.weight.size() / rows);
          db = lp.bias.ensure_grad().data();
        }
        if (need_dx) dx = Tensor(x.shape());
        for (Index s = 0; s < n; ++s) {
          const double* xs = x.ptr() + s * in_size;
          const double* dys = dy.ptr() + s * out_size;
          double* dxs = need_dx ? dx.ptr() + s * in_size : nullptr;
          detail::RowMap* dwp = dw ? &*dw : nullptr;
          if (deconv) {
            detail::deconv2d_grad(xs, in_shape[0], spec.outputs, g, w, dys, dwp, db, dxs, scratch);
          } else {
            detail::conv2d_grad(xs, in_shape[0], g, w, dys, dwp, db, dxs, scratch);
          }
        }
        break;
      }
      case LayerKind::sigmoid:
        dx = Tensor(x.shape(), dy.data().cwiseProduct((y.data().array() * (1.0 - y.data().array())).matrix()));
        break;
      case LayerKind::relu:
        dx = Tensor(x.shape(), (x.data().array() > 0.0).select(dy.data(), 0.0));
        break;
      case LayerKind::leaky_relu:
        dx = Tensor(x.shape(), (x.data().array() > 0.0).select(dy.data(), spec.leak * dy.data()));
        break;
      case LayerKind::tanh:
        dx = Tensor(x.shape(), dy.data().cwiseProduct((1.0 - y.data().array().square()).matrix()));
        break;
      case LayerKind::softmax: {
        const Index k = out_shape.back();
        dx = Tensor(x.shape());
        for (Index r = 0; r < x.size() / k; ++r) {
          auto s = y.data().segment(r * k, k);
          auto g = dy.data().segment(r * k, k);
          const double dot = s.dot(g);
          dx.data().segment(r * k, k) = s.cwiseProduct((g.array() - dot).matrix());
        }
        break;
      }
      case LayerKind::dropout:
        if (masks_[li].empty()) {
          dx = std::move(dy);
        } else {
          dx = Tensor(x.shape(), dy.data().cwiseProduct(masks_[li].data()));
        }
        break;
      case LayerKind::reshape:
      case LayerKind::flatten:
        dx = Tensor(x.shape(), std::move(dy.data()));
        break;
    }
    dy = std::move(dx);
  }
  clear_state();
  if (!options.input_grad) return Tensor();
  return dy;
}

}  // namespace szgan
