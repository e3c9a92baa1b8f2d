#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "semileak/nn/network.hpp"

namespace semileak::nn {

// SGD with heavy-ball momentum and L2 weight decay:
//   v <- momentum * v + (g + weight_decay * theta);  theta <- theta - lr * v
template <typename T>
class Sgd {
 public:
  Sgd() = default;
  Sgd(double momentum, double weight_decay) : momentum_(momentum), weight_decay_(weight_decay) {}

  void step(Network<T>& net, double lr);

  // Momentum buffers aligned with Network::params(); empty before the first step.
  std::vector<std::vector<T>>& velocity() { return velocity_; }
  const std::vector<std::vector<T>>& velocity() const { return velocity_; }
  double momentum() const { return momentum_; }
  double weight_decay() const { return weight_decay_; }

 private:
  double momentum_ = 0.9;
  double weight_decay_ = 5e-4;
  std::vector<std::vector<T>> velocity_;
};

template <typename T>
class Adam {
 public:
  explicit Adam(double lr = 1e-3, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
      : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}

  void step(Network<T>& net);

 private:
  double lr_, beta1_, beta2_, eps_;
  std::int64_t t_ = 0;
  std::vector<std::vector<double>> m_, v_;
};

// ema <- m * ema + (1 - m) * theta, elementwise. Throws ContractError on a
// length mismatch or m outside [0, 1).
template <typename T>
void ema_update(std::span<T> ema, std::span<const T> theta, double m);

// Network form: parameters follow the moving average, buffers are copied.
template <typename T>
void ema_update(Network<T>& ema, const Network<T>& model, double m);

extern template class Sgd<float>;
extern template class Sgd<double>;
extern template class Adam<float>;
extern template class Adam<double>;

}  // namespace semileak::nn
