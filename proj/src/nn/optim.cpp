#include "semileak/nn/optim.hpp"

#include <cmath>
#include <string>

#include "semileak/core/error.hpp"

namespace semileak::nn {

template <typename T>
void Sgd<T>::step(Network<T>& net, double lr) {
  const auto& params = net.params();
  if (velocity_.empty()) {
    velocity_.resize(params.size());
    for (std::size_t i = 0; i < params.size(); ++i) velocity_[i].assign(params[i]->value.size(), T(0));
  }
  if (velocity_.size() != params.size()) throw ContractError("optimizer state does not match network");
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& p = *params[i];
    auto& v = velocity_[i];
    for (std::size_t k = 0; k < p.value.size(); ++k) {
      const double g = static_cast<double>(p.grad[k]) + weight_decay_ * p.value[k];
      v[k] = static_cast<T>(momentum_ * v[k] + g);
      p.value[k] = static_cast<T>(p.value[k] - lr * v[k]);
    }
  }
}

template <typename T>
void Adam<T>::step(Network<T>& net) {
  const auto& params = net.params();
  if (m_.empty()) {
    m_.resize(params.size());
    v_.resize(params.size());
    for (std::size_t i = 0; i < params.size(); ++i) {
      m_[i].assign(params[i]->value.size(), 0.0);
      v_[i].assign(params[i]->value.size(), 0.0);
    }
  }
  ++t_;
  const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& p = *params[i];
    for (std::size_t k = 0; k < p.value.size(); ++k) {
      const double g = p.grad[k];
      m_[i][k] = beta1_ * m_[i][k] + (1.0 - beta1_) * g;
      v_[i][k] = beta2_ * v_[i][k] + (1.0 - beta2_) * g * g;
      const double mhat = m_[i][k] / bc1;
      const double vhat = v_[i][k] / bc2;
      p.value[k] = static_cast<T>(p.value[k] - lr_ * mhat / (std::sqrt(vhat) + eps_));
    }
  }
}

template <typename T>
void ema_update(std::span<T> ema, std::span<const T> theta, double m) {
  if (ema.size() != theta.size())
    throw ContractError("EMA shape mismatch: " + std::to_string(ema.size()) + " vs " +
                        std::to_string(theta.size()));
  if (!(m >= 0.0 && m < 1.0)) throw ContractError("EMA momentum must lie in [0, 1)");
  for (std::size_t i = 0; i < ema.size(); ++i)
    ema[i] = static_cast<T>(m * ema[i] + (1.0 - m) * theta[i]);
}

template <typename T>
void ema_update(Network<T>& ema, const Network<T>& model, double m) {
  const auto& ep = ema.params();
  const auto mp = model.params();
  const auto& eb = ema.buffers();
  const auto mb = model.buffers();
  if (ep.size() != mp.size() || eb.size() != mb.size())
    throw ContractError("EMA network does not match model");
  for (std::size_t i = 0; i < ep.size(); ++i)
    ema_update<T>(std::span<T>(ep[i]->value), std::span<const T>(mp[i]->value), m);
  for (std::size_t i = 0; i < eb.size(); ++i) {
    if (eb[i]->value.size() != mb[i]->value.size()) throw ContractError("EMA buffer mismatch");
    eb[i]->value = mb[i]->value;
  }
}

template class Sgd<float>;
template class Sgd<double>;
template class Adam<float>;
template class Adam<double>;
template void ema_update(std::span<float>, std::span<const float>, double);
template void ema_update(std::span<double>, std::span<const double>, double);
template void ema_update(Network<float>&, const Network<float>&, double);
template void ema_update(Network<double>&, const Network<double>&, double);

}  // namespace semileak::nn
