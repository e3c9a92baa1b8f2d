#include "semileak/nn/network.hpp"

#include <algorithm>

#include "semileak/core/error.hpp"

namespace semileak::nn {

template <typename T>
Network<T>::Network(Sequential<T> root) : root_(std::move(root)) {
  rebind();
}

template <typename T>
Network<T>::Network(const Network& other) : root_(other.root_) {
  rebind();
}

template <typename T>
Network<T>& Network<T>::operator=(const Network& other) {
  if (this == &other) return *this;
  Network copy(other);
  *this = std::move(copy);
  return *this;
}

template <typename T>
Network<T>::Network(Network&& other) noexcept
    : root_(std::move(other.root_)),
      params_(std::move(other.params_)),
      buffers_(std::move(other.buffers_)) {}

template <typename T>
Network<T>& Network<T>::operator=(Network&& other) noexcept {
  root_ = std::move(other.root_);
  params_ = std::move(other.params_);
  buffers_ = std::move(other.buffers_);
  return *this;
}

template <typename T>
void Network<T>::rebind() {
  params_.clear();
  buffers_.clear();
  root_.collect(params_, buffers_);
}

template <typename T>
std::vector<const Param<T>*> Network<T>::params() const {
  return {params_.begin(), params_.end()};
}

template <typename T>
std::vector<const Param<T>*> Network<T>::buffers() const {
  return {buffers_.begin(), buffers_.end()};
}

template <typename T>
void Network<T>::zero_grad() {
  for (auto* p : params_) std::fill(p->grad.begin(), p->grad.end(), T(0));
}

template <typename T>
std::size_t Network<T>::parameter_count() const {
  std::size_t n = 0;
  for (const auto* p : params_) n += p->value.size();
  return n;
}

template <typename T>
std::vector<T> Network<T>::flat_state() const {
  std::vector<T> out;
  for (const auto* p : params_) out.insert(out.end(), p->value.begin(), p->value.end());
  for (const auto* b : buffers_) out.insert(out.end(), b->value.begin(), b->value.end());
  return out;
}

template <typename T>
void Network<T>::load_flat_state(std::span<const T> state) {
  std::size_t need = 0;
  for (const auto* p : params_) need += p->value.size();
  for (const auto* b : buffers_) need += b->value.size();
  if (state.size() != need)
    throw ContractError("flat state has " + std::to_string(state.size()) +
                        " values, network needs " + std::to_string(need));
  std::size_t off = 0;
  for (auto* p : params_) {
    std::copy_n(state.begin() + static_cast<std::ptrdiff_t>(off), p->value.size(), p->value.begin());
    off += p->value.size();
  }
  for (auto* b : buffers_) {
    std::copy_n(state.begin() + static_cast<std::ptrdiff_t>(off), b->value.size(), b->value.begin());
    off += b->value.size();
  }
}

template <typename T>
std::vector<T> Network<T>::flat_grads() const {
  std::vector<T> out;
  for (const auto* p : params_) out.insert(out.end(), p->grad.begin(), p->grad.end());
  return out;
}

template <typename T>
void Network<T>::zero_output_layer() {
  if (params_.size() < 2) throw ContractError("network has no output layer");
  for (auto it = params_.end() - 2; it != params_.end(); ++it)
    std::fill((*it)->value.begin(), (*it)->value.end(), T(0));
}

template class Network<float>;
template class Network<double>;

}  // namespace semileak::nn
