#pragma once

#include <span>
#include <vector>

#include "semileak/nn/tensor.hpp"

namespace semileak::nn {

// Row-wise softmax of an [n, classes] logit tensor, computed in double.
template <typename T>
std::vector<std::vector<double>> softmax_rows(const Tensor<T>& logits);

// Weighted sum over rows of -log softmax(z_i)[y_i]. When grad is non-null it
// receives d(loss)/d(logits) = w_i * (softmax(z_i) - onehot(y_i)).
// Returns the per-row losses (unweighted).
template <typename T>
std::vector<double> cross_entropy(const Tensor<T>& logits, std::span<const int> labels,
                                  std::span<const double> weights, Tensor<T>* grad);

// Weighted sum over rows of KL(t_i || softmax(z_i)); the targets are
// constants, so the gradient is w_i * (softmax(z_i) - t_i).
// Returns the per-row divergences (unweighted).
template <typename T>
std::vector<double> kl_to_targets(const Tensor<T>& logits,
                                  const std::vector<std::vector<double>>& targets,
                                  std::span<const double> weights, Tensor<T>* grad);

}  // namespace semileak::nn
