#include "szgan/layers.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <utility>

namespace szgan {

namespace {

constexpr std::array<std::pair<LayerKind, std::string_view>, 11> kKindNames{{
    {LayerKind::dense, "dense"},
    {LayerKind::conv2d, "conv2d"},
    {LayerKind::deconv2d, "deconv2d"},
    {LayerKind::sigmoid, "sigmoid"},
    {LayerKind::relu, "relu"},
    {LayerKind::leaky_relu, "leaky_relu"},
    {LayerKind::tanh, "tanh"},
    {LayerKind::softmax, "softmax"},
    {LayerKind::dropout, "dropout"},
    {LayerKind::reshape, "reshape"},
    {LayerKind::flatten, "flatten"},
}};

void require_rank(const Tensor& t, Index rank, std::string_view what) {
  if (t.rank() != rank) {
    throw DimensionError(std::string(what) + " must have rank " + std::to_string(rank) + ", got " +
                         shape_string(t.shape()));
  }
}

void require_bias(const Tensor& bias, Index n) {
  if (bias.rank() != 1 || bias.dim(0) != n) {
    throw DimensionError("bias shape " + shape_string(bias.shape()) + " does not match " + std::to_string(n) +
                         " outputs");
  }
}

template <typename F>
Tensor map_elements(const Tensor& x, F f) {
  Tensor y(x.shape());
  y.data() = x.data().unaryExpr(f);
  return y;
}

}  // namespace

std::string_view to_string(LayerKind kind) {
  for (const auto& [k, name] : kKindNames) {
    if (k == kind) return name;
  }
  return "unknown";
}

LayerKind layer_kind_from_string(std::string_view name) {
  for (const auto& [k, n] : kKindNames) {
    if (n == name) return k;
  }
  throw ConfigError("unknown layer kind '" + std::string(name) + "'");
}

LayerSpec LayerSpec::dense(std::string name, Index outputs) {
  LayerSpec s;
  s.kind = LayerKind::dense;
  s.name = std::move(name);
  s.outputs = outputs;
  return s;
}

LayerSpec LayerSpec::conv2d(std::string name, Index filters, Extent2 kernel, Extent2 stride) {
  LayerSpec s;
  s.kind = LayerKind::conv2d;
  s.name = std::move(name);
  s.outputs = filters;
  s.kernel = kernel;
  s.stride = stride;
  return s;
}

LayerSpec LayerSpec::deconv2d(std::string name, Index filters, Extent2 kernel, Extent2 stride) {
  LayerSpec s = conv2d(std::move(name), filters, kernel, stride);
  s.kind = LayerKind::deconv2d;
  return s;
}

LayerSpec LayerSpec::activation(LayerKind kind, std::string name) {
  LayerSpec s;
  s.kind = kind;
  s.name = std::move(name);
  return s;
}

LayerSpec LayerSpec::leaky_relu(double leak, std::string name) {
  LayerSpec s = activation(LayerKind::leaky_relu, std::move(name));
  s.leak = leak;
  return s;
}

LayerSpec LayerSpec::dropout(double rate, std::string name) {
  LayerSpec s = activation(LayerKind::dropout, std::move(name));
  s.dropout_rate = rate;
  return s;
}

LayerSpec LayerSpec::reshape(Shape target, std::string name) {
  LayerSpec s = activation(LayerKind::reshape, std::move(name));
  s.target = std::move(target);
  return s;
}

LayerSpec LayerSpec::flatten(std::string name) { return activation(LayerKind::flatten, std::move(name)); }

bool LayerSpec::has_parameters() const noexcept {
  return kind == LayerKind::dense || kind == LayerKind::conv2d || kind == LayerKind::deconv2d;
}

void LayerSpec::validate() const {
  const std::string label = "layer '" + name + "' (" + std::string(to_string(kind)) + ")";
  switch (kind) {
    case LayerKind::dense:
      if (outputs < 1) throw ConfigError(label + " requires a positive output size");
      break;
    case LayerKind::conv2d:
    case LayerKind::deconv2d:
      if (outputs < 1) throw ConfigError(label + " requires a positive filter count");
      if (kernel.h < 1 || kernel.w < 1) throw ConfigError(label + " requires a kernel");
      if (stride.h < 1 || stride.w < 1) throw ConfigError(label + " requires a stride");
      break;
    case LayerKind::dropout:
      if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) throw ArgumentError(label + " rate must lie in [0, 1)");
      break;
    case LayerKind::reshape:
      if (target.empty()) throw ConfigError(label + " requires a target shape");
      break;
    default:
      break;
  }
  if (has_parameters() && name.empty()) throw ConfigError(label + " must be named");
}

ConvGeometry conv_geometry(Index in_h, Index in_w, Extent2 kernel, Extent2 stride) {
  if (in_h < 1 || in_w < 1) throw DimensionError("convolution input must have positive spatial extent");
  if (stride.h < 1 || stride.w < 1) throw ArgumentError("convolution stride must be positive");
  ConvGeometry g;
  g.in_h = in_h;
  g.in_w = in_w;
  g.kernel_h = kernel.h;
  g.kernel_w = kernel.w;
  g.stride_h = stride.h;
  g.stride_w = stride.w;
  g.out_h = (in_h + stride.h - 1) / stride.h;
  g.out_w = (in_w + stride.w - 1) / stride.w;
  g.pad_top = std::max<Index>((g.out_h - 1) * stride.h + kernel.h - in_h, 0) / 2;
  g.pad_left = std::max<Index>((g.out_w - 1) * stride.w + kernel.w - in_w, 0) / 2;
  return g;
}

namespace detail {

void im2col(const double* x, Index channels, const ConvGeometry& g, RowMatrixXd& cols) {
  const Index k = channels * g.kernel_h * g.kernel_w;
  const Index p = g.out_h * g.out_w;
  cols.resize(k, p);
  Index row = 0;
  for (Index c = 0; c < channels; ++c) {
    const double* plane = x + c * g.in_h * g.in_w;
    for (Index ki = 0; ki < g.kernel_h; ++ki) {
      for (Index kj = 0; kj < g.kernel_w; ++kj, ++row) {
        double* dst = cols.data() + row * p;
        for (Index oh = 0; oh < g.out_h; ++oh) {
          const Index ih = oh * g.stride_h + ki - g.pad_top;
          double* out = dst + oh * g.out_w;
          if (ih < 0 || ih >= g.in_h) {
            std::fill(out, out + g.out_w, 0.0);
            continue;
          }
          const double* src = plane + ih * g.in_w;
          for (Index ow = 0; ow < g.out_w; ++ow) {
            const Index iw = ow * g.stride_w + kj - g.pad_left;
            out[ow] = (iw >= 0 && iw < g.in_w) ? src[iw] : 0.0;
          }
        }
      }
    }
  }
}

void col2im(const RowMatrixXd& cols, Index channels, const ConvGeometry& g, double* x) {
  const Index p = g.out_h * g.out_w;
  Index row = 0;
  for (Index c = 0; c < channels; ++c) {
    double* plane = x + c * g.in_h * g.in_w;
    for (Index ki = 0; ki < g.kernel_h; ++ki) {
      for (Index kj = 0; kj < g.kernel_w; ++kj, ++row) {
        const double* src = cols.data() + row * p;
        for (Index oh = 0; oh < g.out_h; ++oh) {
          const Index ih = oh * g.stride_h + ki - g.pad_top;
          if (ih < 0 || ih >= g.in_h) continue;
          double* dst = plane + ih * g.in_w;
          const double* in = src + oh * g.out_w;
          for (Index ow = 0; ow < g.out_w; ++ow) {
            const Index iw = ow * g.stride_w + kj - g.pad_left;
            if (iw >= 0 && iw < g.in_w) dst[iw] += in[ow];
          }
        }
      }
    }
  }
}

void conv2d(const double* x, Index c_in, const ConvGeometry& g, const ConstRowMap& w, const double* b, double* y,
            RowMatrixXd& scratch) {
  im2col(x, c_in, g, scratch);
  const Index p = g.out_h * g.out_w;
  RowMap out(y, w.rows(), p);
  out.noalias() = w * scratch;
  if (b != nullptr) {
    for (Index o = 0; o < w.rows(); ++o) out.row(o).array() += b[o];
  }
}

void conv2d_grad(const double* x, Index c_in, const ConvGeometry& g, const ConstRowMap& w, const double* dy,
                 RowMap* dw, double* db, double* dx, RowMatrixXd& scratch) {
  const Index p = g.out_h * g.out_w;
  ConstRowMap grad_out(dy, w.rows(), p);
  if (db != nullptr) {
    for (Index o = 0; o < w.rows(); ++o) db[o] += grad_out.row(o).sum();
  }
  if (dw != nullptr) {
    im2col(x, c_in, g, scratch);
    dw->noalias() += grad_out * scratch.transpose();
  }
  if (dx != nullptr) {
    scratch.noalias() = w.transpose() * grad_out;
    std::fill(dx, dx + c_in * g.in_h * g.in_w, 0.0);
    col2im(scratch, c_in, g, dx);
  }
}

// For deconvolution `g` describes the convolution being transposed: its input is the deconv
// output [c_out, in_h, in_w] and its output is the deconv input [c_in, out_h, out_w].
void deconv2d(const double* x, Index c_in, Index c_out, const ConvGeometry& g, const ConstRowMap& w, const double* b,
              double* y, RowMatrixXd& scratch) {
  const Index p = g.out_h * g.out_w;
  ConstRowMap in(x, c_in, p);
  scratch.noalias() = w.transpose() * in;
  const Index plane = g.in_h * g.in_w;
  std::fill(y, y + c_out * plane, 0.0);
  col2im(scratch, c_out, g, y);
  if (b != nullptr) {
    for (Index o = 0; o < c_out; ++o) {
      Eigen::Map<Eigen::VectorXd>(y + o * plane, plane).array() += b[o];
    }
  }
}

void deconv2d_grad(const double* x, Index c_in, Index c_out, const ConvGeometry& g, const ConstRowMap& w,
                   const double* dy, RowMap* dw, double* db, double* dx, RowMatrixXd& scratch) {
  const Index p = g.out_h * g.out_w;
  const Index plane = g.in_h * g.in_w;
  if (db != nullptr) {
    for (Index o = 0; o < c_out; ++o) db[o] += Eigen::Map<const Eigen::VectorXd>(dy + o * plane, plane).sum();
  }
  if (dw == nullptr && dx == nullptr) return;
  im2col(dy, c_out, g, scratch);
  if (dw != nullptr) {
    ConstRowMap in(x, c_in, p);
    dw->noalias() += in * scratch.transpose();
  }
  if (dx != nullptr) {
    RowMap grad_in(dx, c_in, p);
    grad_in.noalias() = w * scratch;
  }
}

}  // namespace detail

namespace {

struct ConvShapes {
  Index c_in, c_out;
  ConvGeometry g;
};

ConvShapes check_conv(const Tensor& input, const Tensor& weights, Extent2 stride) {
  require_rank(input, 3, "conv2d input");
  require_rank(weights, 4, "conv2d weights");
  if (weights.dim(1) != input.dim(0)) {
    throw DimensionError("conv2d input " + shape_string(input.shape()) + " does not match weights " +
                         shape_string(weights.shape()));
  }
  return {input.dim(0), weights.dim(0),
          conv_geometry(input.dim(1), input.dim(2), {weights.dim(2), weights.dim(3)}, stride)};
}

ConvShapes check_deconv(const Tensor& input, const Tensor& weights, Extent2 stride) {
  require_rank(input, 3, "deconv2d input");
  require_rank(weights, 4, "deconv2d weights");
  if (weights.dim(0) != input.dim(0)) {
    throw DimensionError("deconv2d input " + shape_string(input.shape()) + " does not match weights " +
                         shape_string(weights.shape()));
  }
  if (stride.h < 1 || stride.w < 1) throw ArgumentError("deconv2d stride must be positive");
  ConvGeometry g = conv_geometry(input.dim(1) * stride.h, input.dim(2) * stride.w, {weights.dim(2), weights.dim(3)},
                                 stride);
  return {input.dim(0), weights.dim(1), g};
}

detail::ConstRowMap weight_matrix(const Tensor& w) { return {w.ptr(), w.dim(0), w.size() / w.dim(0)}; }

}  // namespace

Tensor conv2d_forward(const Tensor& input, const Tensor& weights, const Tensor& bias, Extent2 stride) {
  const auto [c_in, c_out, g] = check_conv(input, weights, stride);
  require_bias(bias, c_out);
  Tensor out({c_out, g.out_h, g.out_w});
  detail::RowMatrixXd scratch;
  detail::conv2d(input.ptr(), c_in, g, weight_matrix(weights), bias.ptr(), out.ptr(), scratch);
  return out;
}

Tensor deconv2d_forward(const Tensor& input, const Tensor& weights, const Tensor& bias, Extent2 stride) {
  const auto [c_in, c_out, g] = check_deconv(input, weights, stride);
  require_bias(bias, c_out);
  Tensor out({c_out, g.in_h, g.in_w});
  detail::RowMatrixXd scratch;
  detail::deconv2d(input.ptr(), c_in, c_out, g, weight_matrix(weights), bias.ptr(), out.ptr(), scratch);
  return out;
}

Tensor dense_forward(const Tensor& input, const Tensor& weights, const Tensor& bias) {
  require_rank(input, 1, "dense input");
  require_rank(weights, 2, "dense weights");
  if (weights.dim(1) != input.dim(0)) {
    throw DimensionError("dense input " + shape_string(input.shape()) + " does not match weights " +
                         shape_string(weights.shape()));
  }
  require_bias(bias, weights.dim(0));
  Tensor out({weights.dim(0)});
  out.data().noalias() = weight_matrix(weights) * input.data();
  out.data() += bias.data();
  return out;
}

Tensor dropout_forward(const Tensor& input, double rate, Mode mode, Rng& rng) {
  if (!(rate >= 0.0 && rate < 1.0)) throw ArgumentError("dropout rate must lie in [0, 1)");
  if (mode == Mode::infer || rate == 0.0) return Tensor(input.shape(), input.data());
  std::bernoulli_distribution keep(1.0 - rate);
  const double scale = 1.0 / (1.0 - rate);
  Tensor out(input.shape());
  for (Index i = 0; i < input.size(); ++i) out[i] = keep(rng) ? input[i] * scale : 0.0;
  return out;
}

Tensor sigmoid(const Tensor& x) {
  return map_elements(x, [](double v) {
    if (v >= 0) return 1.0 / (1.0 + std::exp(-v));
    const double e = std::exp(v);
    return e / (1.0 + e);
  });
}

Tensor relu(const Tensor& x) {
  return map_elements(x, [](double v) { return v > 0 ? v : 0.0; });
}

Tensor leaky_relu(const Tensor& x, double leak) {
  return map_elements(x, [leak](double v) { return v > 0 ? v : leak * v; });
}

Tensor tanh(const Tensor& x) {
  return map_elements(x, [](double v) { return std::tanh(v); });
}

Tensor softmax(const Tensor& x) {
  if (x.rank() < 1) throw DimensionError("softmax needs at least one axis");
  const Index n = x.shape().back();
  Tensor y(x.shape());
  for (Index r = 0; r < x.size() / n; ++r) {
    auto in = x.data().segment(r * n, n);
    auto out = y.data().segment(r * n, n);
    out = (in.array() - in.maxCoeff()).exp();
    out /= out.sum();
  }
  return y;
}

LayerGrads conv2d_backward(const Tensor& input, const Tensor& weights, const Tensor& grad_output, Extent2 stride) {
  const auto [c_in, c_out, g] = check_conv(input, weights, stride);
  if (grad_output.shape() != Shape{c_out, g.out_h, g.out_w}) {
    throw DimensionError("conv2d output gradient " + shape_string(grad_output.shape()) + " has the wrong shape");
  }
  LayerGrads out{Tensor(input.shape()), Tensor(weights.shape()), Tensor({c_out})};
  detail::RowMap dw(out.weights.ptr(), c_out, weights.size() / c_out);
  detail::RowMatrixXd scratch;
  detail::conv2d_grad(input.ptr(), c_in, g, weight_matrix(weights), grad_output.ptr(), &dw, out.bias.ptr(),
                      out.input.ptr(), scratch);
  return out;
}

LayerGrads deconv2d_backward(const Tensor& input, const Tensor& weights, const Tensor& grad_output, Extent2 stride) {
  const auto [c_in, c_out, g] = check_deconv(input, weights, stride);
  if (grad_output.shape() != Shape{c_out, g.in_h, g.in_w}) {
    throw DimensionError("deconv2d output gradient " + shape_string(grad_output.shape()) + " has the wrong shape");
  }
  LayerGrads out{Tensor(input.shape()), Tensor(weights.shape()), Tensor({c_out})};
  detail::RowMap dw(out.weights.ptr(), c_in, weights.size() / c_in);
  detail::RowMatrixXd scratch;
  detail::deconv2d_grad(input.ptr(), c_in, c_out, g, weight_matrix(weights), grad_output.ptr(), &dw, out.bias.ptr(),
                        out.input.ptr(), scratch);
  return out;
}

LayerGrads dense_backward(const Tensor& input, const Tensor& weights, const Tensor& grad_output) {
  require_rank(input, 1, "dense input");
  require_rank(weights, 2, "dense weights");
  if (weights.dim(1) != input.dim(0) || grad_output.shape() != Shape{weights.dim(0)}) {
    throw DimensionError("dense backward shapes do not conform: input " + shape_string(input.shape()) + ", weights " +
                         shape_string(weights.shape()) + ", gradient " + shape_string(grad_output.shape()));
  }
  LayerGrads out{Tensor(input.shape()), Tensor(weights.shape()), Tensor(grad_output.shape(), grad_output.data())};
  out.weights.matrix(weights.dim(0), weights.dim(1)).noalias() = grad_output.data() * input.data().transpose();
  out.input.data().noalias() = weight_matrix(weights).transpose() * grad_output.data();
  return out;
}

}  // namespace szgan
