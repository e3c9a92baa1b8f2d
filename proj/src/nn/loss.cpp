#include "semileak/nn/loss.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "semileak/core/error.hpp"

namespace semileak::nn {

namespace {

template <typename T>
std::vector<double> log_softmax_row(const T* z, int classes) {
  double mx = z[0];
  for (int k = 1; k < classes; ++k) mx = std::max(mx, static_cast<double>(z[k]));
  double sum = 0.0;
  for (int k = 0; k < classes; ++k) sum += std::exp(static_cast<double>(z[k]) - mx);
  const double lse = mx + std::log(sum);
  std::vector<double> out(static_cast<std::size_t>(classes));
  for (int k = 0; k < classes; ++k) out[static_cast<std::size_t>(k)] = z[k] - lse;
  return out;
}

template <typename T>
void check_rows(const Tensor<T>& logits, std::size_t rows, std::size_t weights) {
  if (static_cast<std::size_t>(logits.n) != rows || weights != rows)
    throw ContractError("loss inputs disagree on batch size (" + std::to_string(logits.n) +
                        " logits, " + std::to_string(rows) + " targets, " +
                        std::to_string(weights) + " weights)");
}

}  // namespace

template <typename T>
std::vector<std::vector<double>> softmax_rows(const Tensor<T>& logits) {
  const int classes = static_cast<int>(logits.sample_size());
  std::vector<std::vector<double>> out(static_cast<std::size_t>(logits.n));
  for (int i = 0; i < logits.n; ++i) {
    auto lp = log_softmax_row(logits.sample(i).data(), classes);
    for (auto& v : lp) v = std::exp(v);
    out[static_cast<std::size_t>(i)] = std::move(lp);
  }
  return out;
}

template <typename T>
std::vector<double> cross_entropy(const Tensor<T>& logits, std::span<const int> labels,
                                  std::span<const double> weights, Tensor<T>* grad) {
  check_rows(logits, labels.size(), weights.size());
  const int classes = static_cast<int>(logits.sample_size());
  if (grad) *grad = Tensor<T>(logits.n, logits.c, logits.h, logits.w);
  std::vector<double> losses(labels.size());
  for (int i = 0; i < logits.n; ++i) {
    const auto ui = static_cast<std::size_t>(i);
    const int y = labels[ui];
    if (y < 0 || y >= classes) throw ContractError("label out of range: " + std::to_string(y));
    const auto lp = log_softmax_row(logits.sample(i).data(), classes);
    losses[ui] = -lp[static_cast<std::size_t>(y)];
    if (grad && weights[ui] != 0.0) {
      auto g = grad->sample(i);
      for (int k = 0; k < classes; ++k) {
        const double p = std::exp(lp[static_cast<std::size_t>(k)]);
        g[static_cast<std::size_t>(k)] = static_cast<T>(weights[ui] * (p - (k == y ? 1.0 : 0.0)));
      }
    }
  }
  return losses;
}

template <typename T>
std::vector<double> kl_to_targets(const Tensor<T>& logits,
                                  const std::vector<std::vector<double>>& targets,
                                  std::span<const double> weights, Tensor<T>* grad) {
  check_rows(logits, targets.size(), weights.size());
  const int classes = static_cast<int>(logits.sample_size());
  if (grad) *grad = Tensor<T>(logits.n, logits.c, logits.h, logits.w);
  std::vector<double> losses(targets.size());
  for (int i = 0; i < logits.n; ++i) {
    const auto ui = static_cast<std::size_t>(i);
    const auto& t = targets[ui];
    if (static_cast<int>(t.size()) != classes) throw ContractError("target width mismatch");
    const auto lp = log_softmax_row(logits.sample(i).data(), classes);
    double kl = 0.0;
    for (int k = 0; k < classes; ++k) {
      const double tk = t[static_cast<std::size_t>(k)];
      if (tk > 0.0) kl += tk * (std::log(tk) - lp[static_cast<std::size_t>(k)]);
    }
    losses[ui] = kl;
    if (grad && weights[ui] != 0.0) {
      auto g = grad->sample(i);
      for (int k = 0; k < classes; ++k) {
        const auto uk = static_cast<std::size_t>(k);
        g[uk] = static_cast<T>(weights[ui] * (std::exp(lp[uk]) - t[uk]));
      }
    }
  }
  return losses;
}

template std::vector<std::vector<double>> softmax_rows(const Tensor<float>&);
template std::vector<std::vector<double>> softmax_rows(const Tensor<double>&);
template std::vector<double> cross_entropy(const Tensor<float>&, std::span<const int>,
                                           std::span<const double>, Tensor<float>*);
template std::vector<double> cross_entropy(const Tensor<double>&, std::span<const int>,
                                           std::span<const double>, Tensor<double>*);
template std::vector<double> kl_to_targets(const Tensor<float>&,
                                           const std::vector<std::vector<double>>&,
                                           std::span<const double>, Tensor<float>*);
template std::vector<double> kl_to_targets(const Tensor<double>&,
                                           const std::vector<std::vector<double>>&,
                                           std::span<const double>, Tensor<double>*);

}  // namespace semileak::nn
