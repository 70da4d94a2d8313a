#pragma once

#include <string>
#include <string_view>

#include "szgan/random.hpp"
#include "szgan/tensor.hpp"

namespace szgan {

enum class LayerKind { dense, conv2d, deconv2d, sigmoid, relu, leaky_relu, tanh, softmax, dropout, reshape, flatten };

std::string_view to_string(LayerKind kind);
LayerKind layer_kind_from_string(std::string_view name);

struct Extent2 {
  Index h = 1;
  Index w = 1;
  friend bool operator==(const Extent2&, const Extent2&) = default;
};

enum class Mode { train, infer };

/// One layer of a sequential network. `outputs` is the unit count for dense layers and the
/// filter count for conv2d/deconv2d; `target` is the per-sample shape for reshape.
struct LayerSpec {
  LayerKind kind = LayerKind::dense;
  std::string name;
  Index outputs = 0;
  Extent2 kernel{};
  Extent2 stride{};
  double dropout_rate = 0.0;
  double leak = 0.2;
  Shape target{};

  static LayerSpec dense(std::string name, Index outputs);
  static LayerSpec conv2d(std::string name, Index filters, Extent2 kernel, Extent2 stride);
  static LayerSpec deconv2d(std::string name, Index filters, Extent2 kernel, Extent2 stride);
  static LayerSpec activation(LayerKind kind, std::string name = {});
  static LayerSpec leaky_relu(double leak, std::string name = {});
  static LayerSpec dropout(double rate, std::string name = {});
  static LayerSpec reshape(Shape target, std::string name = {});
  static LayerSpec flatten(std::string name = {});

  /// dense, conv2d and deconv2d carry weights and biases.
  bool has_parameters() const noexcept;
  void validate() const;
};

/// Zero-padded strided correlation whose output extent is ceil(input / stride). Padding is split
/// with the smaller half on top/left.
struct ConvGeometry {
  Index in_h = 0, in_w = 0;
  Index out_h = 0, out_w = 0;
  Index kernel_h = 0, kernel_w = 0;
  Index stride_h = 1, stride_w = 1;
  Index pad_top = 0, pad_left = 0;
};

ConvGeometry conv_geometry(Index in_h, Index in_w, Extent2 kernel, Extent2 stride);

/// input [C_in, H, W], weights [C_out, C_in, kh, kw], bias [C_out] -> [C_out, ceil(H/sh), ceil(W/sw)].
Tensor conv2d_forward(const Tensor& input, const Tensor& weights, const Tensor& bias, Extent2 stride);

/// Adjoint of conv2d_forward. input [C_in, H, W], weights [C_in, C_out, kh, kw] (the layout of the
/// convolution it transposes), bias [C_out] -> [C_out, H*sh, W*sw].
Tensor deconv2d_forward(const Tensor& input, const Tensor& weights, const Tensor& bias, Extent2 stride);

/// input [N_in], weights [N_out, N_in], bias [N_out] -> W x + b.
Tensor dense_forward(const Tensor& input, const Tensor& weights, const Tensor& bias);

/// Inverted dropout: in train mode zero each element with probability `rate` and scale survivors
/// by 1/(1-rate). Identity in infer mode.
Tensor dropout_forward(const Tensor& input, double rate, Mode mode, Rng& rng);

Tensor sigmoid(const Tensor& x);
Tensor relu(const Tensor& x);
Tensor leaky_relu(const Tensor& x, double leak);
Tensor tanh(const Tensor& x);
/// Softmax over the last axis.
Tensor softmax(const Tensor& x);

struct LayerGrads {
  Tensor input;
  Tensor weights;
  Tensor bias;
};

LayerGrads conv2d_backward(const Tensor& input, const Tensor& weights, const Tensor& grad_output, Extent2 stride);
LayerGrads deconv2d_backward(const Tensor& input, const Tensor& weights, const Tensor& grad_output, Extent2 stride);
LayerGrads dense_backward(const Tensor& input, const Tensor& weights, const Tensor& grad_output);

namespace detail {

using RowMatrixXd = RowMatrix<double>;
using ConstRowMap = Eigen::Map<const RowMatrixXd>;
using RowMap = Eigen::Map<RowMatrixXd>;

/// cols is (C * kh * kw) x (out_h * out_w).
void im2col(const double* x, Index channels, const ConvGeometry& g, RowMatrixXd& cols);
/// Accumulates cols back onto x (which must be zeroed by the caller when needed).
void col2im(const RowMatrixXd& cols, Index channels, const ConvGeometry& g, double* x);

// Single-sample kernels on raw row-major buffers. `w` is the weight tensor viewed as a matrix
// whose row count is its leading dimension. Gradient outputs accumulate.
void conv2d(const double* x, Index c_in, const ConvGeometry& g, const ConstRowMap& w, const double* b, double* y,
            RowMatrixXd& scratch);
void conv2d_grad(const double* x, Index c_in, const ConvGeometry& g, const ConstRowMap& w, const double* dy,
                 RowMap* dw, double* db, double* dx, RowMatrixXd& scratch);
void deconv2d(const double* x, Index c_in, Index c_out, const ConvGeometry& g, const ConstRowMap& w, const double* b,
              double* y, RowMatrixXd& scratch);
void deconv2d_grad(const double* x, Index c_in, Index c_out, const ConvGeometry& g, const ConstRowMap& w,
                   const double* dy, RowMap* dw, double* db, double* dx, RowMatrixXd& scratch);

}  // namespace detail

}  // namespace szgan
