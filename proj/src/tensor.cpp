#include "szgan/tensor.hpp"

#include <sstream>

namespace szgan {

Index shape_size(const Shape& shape) {
  Index n = 1;
  for (Index d : shape) n *= d;
  return n;
}

std::string shape_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ", ";
    os << shape[i];
  }
  os << ']';
  return os.str();
}

Shape sample_shape(const Shape& batched) {
  if (batched.empty()) throw DimensionError("expected a batched shape, got a scalar");
  return Shape(batched.begin() + 1, batched.end());
}

Shape batched(Index batch, const Shape& sample) {
  Shape s;
  s.reserve(sample.size() + 1);
  s.push_back(batch);
  s.insert(s.end(), sample.begin(), sample.end());
  return s;
}

Tensor slice_sample(const Tensor& batch, Index i) {
  if (batch.rank() < 1 || i < 0 || i >= batch.dim(0)) {
    throw DimensionError("sample index " + std::to_string(i) + " out of range for " + shape_string(batch.shape()));
  }
  const Shape s = sample_shape(batch.shape());
  const Index n = shape_size(s);
  return Tensor(s, batch.data().segment(i * n, n));
}

Tensor stack(std::span<const Tensor> samples) {
  if (samples.empty()) throw DimensionError("cannot stack an empty list of tensors");
  const Shape& s = samples.front().shape();
  const Index n = shape_size(s);
  Tensor out(batched(Index(samples.size()), s));
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (samples[i].shape() != s) {
      throw DimensionError("cannot stack " + shape_string(samples[i].shape()) + " with " + shape_string(s));
    }
    out.data().segment(Index(i) * n, n) = samples[i].data();
  }
  return out;
}

}  // namespace szgan
