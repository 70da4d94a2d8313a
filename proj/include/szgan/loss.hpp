#pragma once

#include <span>

#include "szgan/tensor.hpp"

namespace szgan {

struct Loss {
  double value = 0.0;
  Tensor grad;
};

/// log(1 + e^x) without overflow.
double softplus(double x);

/// Mean binary cross-entropy of sigmoid(logits) against a constant target in {0, 1}.
Loss bce_with_logits(const Tensor& logits, double target);

/// Mean cross-entropy of probability rows `[B, K]` against class indices.
Loss cross_entropy(const Tensor& probs, std::span<const int> labels);

}  // namespace szgan
