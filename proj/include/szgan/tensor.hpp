#pragma once

#include <Eigen/Core>

#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "szgan/errors.hpp"

namespace szgan {

using Index = Eigen::Index;
using Shape = std::vector<Index>;

Index shape_size(const Shape& shape);
std::string shape_string(const Shape& shape);

/// Per-sample shape of a batched shape `[B, ...]`.
Shape sample_shape(const Shape& batched);
Shape batched(Index batch, const Shape& sample);

template <typename Scalar>
using RowMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Dense row-major n-d array with an optional gradient buffer of the same shape.
template <typename Scalar>
class BasicTensor {
 public:
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

  BasicTensor() = default;

  explicit BasicTensor(Shape shape) : shape_(std::move(shape)), data_(Vector::Zero(checked_size(shape_))) {}

  BasicTensor(Shape shape, Vector data) : shape_(std::move(shape)), data_(std::move(data)) {
    if (checked_size(shape_) != data_.size()) {
      throw DimensionError("tensor data length " + std::to_string(data_.size()) + " does not match shape " +
                           shape_string(shape_));
    }
  }

  BasicTensor(Shape shape, std::initializer_list<Scalar> values)
      : BasicTensor(std::move(shape), Vector(Eigen::Map<const Vector>(values.begin(), Index(values.size())))) {}

  static BasicTensor constant(Shape shape, Scalar value) {
    BasicTensor t(std::move(shape));
    t.data_.setConstant(value);
    return t;
  }

  const Shape& shape() const noexcept { return shape_; }
  Index rank() const noexcept { return Index(shape_.size()); }
  Index dim(Index axis) const { return shape_.at(std::size_t(axis)); }
  Index size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return shape_.empty(); }

  Vector& data() noexcept { return data_; }
  const Vector& data() const noexcept { return data_; }
  Scalar* ptr() noexcept { return data_.data(); }
  const Scalar* ptr() const noexcept { return data_.data(); }
  std::span<Scalar> values() noexcept { return {data_.data(), std::size_t(data_.size())}; }
  std::span<const Scalar> values() const noexcept { return {data_.data(), std::size_t(data_.size())}; }

  Scalar& operator[](Index i) { return data_[i]; }
  Scalar operator[](Index i) const { return data_[i]; }

  /// Row-major multi-index access, e.g. `t.at({c, h, w})`.
  Scalar& at(std::initializer_list<Index> idx) { return data_[offset(idx)]; }
  Scalar at(std::initializer_list<Index> idx) const { return data_[offset(idx)]; }

  bool has_grad() const noexcept { return grad_.has_value(); }
  Vector& grad() {
    if (!grad_) throw StateError("tensor has no gradient buffer");
    return *grad_;
  }
  const Vector& grad() const {
    if (!grad_) throw StateError("tensor has no gradient buffer");
    return *grad_;
  }
  Vector& ensure_grad() {
    if (!grad_) grad_ = Vector::Zero(data_.size());
    return *grad_;
  }
  void clear_grad() noexcept { grad_.reset(); }

  /// Same data under a new shape of equal size. The gradient is dropped.
  BasicTensor reshaped(Shape shape) const {
    if (checked_size(shape) != size()) {
      throw DimensionError("cannot reshape " + shape_string(shape_) + " to " + shape_string(shape));
    }
    return BasicTensor(std::move(shape), data_);
  }

  /// View of the data as a row-major `rows x cols` matrix.
  Eigen::Map<RowMatrix<Scalar>> matrix(Index rows, Index cols) {
    check_matrix(rows, cols);
    return {data_.data(), rows, cols};
  }
  Eigen::Map<const RowMatrix<Scalar>> matrix(Index rows, Index cols) const {
    check_matrix(rows, cols);
    return {data_.data(), rows, cols};
  }

  bool all_finite() const { return data_.allFinite() && (!grad_ || grad_->allFinite()); }

  friend bool operator==(const BasicTensor& a, const BasicTensor& b) {
    return a.shape_ == b.shape_ && a.data_ == b.data_;
  }

 private:
  static Index checked_size(const Shape& shape) {
    for (Index d : shape) {
      if (d <= 0) throw DimensionError("tensor shape " + shape_string(shape) + " has a non-positive extent");
    }
    return shape_size(shape);
  }

  Index offset(std::initializer_list<Index> idx) const {
    if (Index(idx.size()) != rank()) throw DimensionError("index rank does not match " + shape_string(shape_));
    Index off = 0;
    std::size_t axis = 0;
    for (Index i : idx) {
      if (i < 0 || i >= shape_[axis]) throw DimensionError("index out of range for " + shape_string(shape_));
      off = off * shape_[axis] + i;
      ++axis;
    }
    return off;
  }

  void check_matrix(Index rows, Index cols) const {
    if (rows * cols != size()) {
      throw DimensionError("cannot view " + shape_string(shape_) + " as " + std::to_string(rows) + "x" +
                           std::to_string(cols));
    }
  }

  Shape shape_;
  Vector data_;
  std::optional<Vector> grad_;
};

using Tensor = BasicTensor<double>;

/// Copy of sample `i` of a batched tensor `[B, ...]`.
Tensor slice_sample(const Tensor& batch, Index i);

/// Stack equally-shaped samples into `[B, ...]`.
Tensor stack(std::span<const Tensor> samples);

}  // namespace szgan
