#include "szgan/loss.hpp"

#include <algorithm>
#include <cmath>

namespace szgan {

double softplus(double x) { return x > 0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }

Loss bce_with_logits(const Tensor& logits, double target) {
  Loss out{0.0, Tensor(logits.shape())};
  const double n = double(logits.size());
  for (Index i = 0; i < logits.size(); ++i) {
    const double z = logits[i];
    // -[t log s(z) + (1 - t) log(1 - s(z))] = t softplus(-z) + (1 - t) softplus(z)
    out.value += target * softplus(-z) + (1.0 - target) * softplus(z);
    const double s = z >= 0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
    out.grad[i] = (s - target) / n;
  }
  out.value /= n;
  return out;
}

Loss cross_entropy(const Tensor& probs, std::span<const int> labels) {
  if (probs.rank() != 2 || probs.dim(0) != Index(labels.size())) {
    throw DimensionError("cross_entropy expects [B, K] probabilities with B labels, got " +
                         shape_string(probs.shape()));
  }
  constexpr double kFloor = 1e-300;
  const Index k = probs.dim(1);
  const double n = double(labels.size());
  Loss out{0.0, Tensor(probs.shape())};
  for (Index r = 0; r < probs.dim(0); ++r) {
    const int y = labels[std::size_t(r)];
    if (y < 0 || y >= k) throw ArgumentError("class label " + std::to_string(y) + " out of range");
    const double p = std::max(probs[r * k + y], kFloor);
    out.value -= std::log(p);
    out.grad[r * k + y] = -1.0 / (p * n);
  }
  out.value /= n;
  return out;
}

}  // namespace szgan
