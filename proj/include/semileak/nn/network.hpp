#pragma once

#include <span>
#include <vector>

#include "semileak/nn/layers.hpp"

namespace semileak::nn {

// Owns a layer stack plus flat views of its parameters and buffers.
// Copying deep-copies all layers.
template <typename T>
class Network {
 public:
  Network() = default;
  explicit Network(Sequential<T> root);
  Network(const Network& other);
  Network& operator=(const Network& other);
  Network(Network&& other) noexcept;
  Network& operator=(Network&& other) noexcept;

  Tensor<T> infer(const Tensor<T>& x) const { return root_.infer(x); }
  Tensor<T> forward(const Tensor<T>& x, StatMode mode, Tape<T>* tape) {
    return root_.forward(x, mode, tape);
  }
  Tensor<T> backward(const Tensor<T>& grad, const Tape<T>& tape) {
    return root_.backward(grad, tape);
  }

  const std::vector<Param<T>*>& params() { return params_; }
  std::vector<const Param<T>*> params() const;
  const std::vector<Param<T>*>& buffers() { return buffers_; }
  std::vector<const Param<T>*> buffers() const;

  void zero_grad();
  std::size_t parameter_count() const;

  // Parameters, then buffers, concatenated in collection order.
  std::vector<T> flat_state() const;
  void load_flat_state(std::span<const T> state);
  std::vector<T> flat_grads() const;

  // Zeroes the final layer's weight and bias, making every output uniform.
  void zero_output_layer();

 private:
  void rebind();

  Sequential<T> root_;
  std::vector<Param<T>*> params_;
  std::vector<Param<T>*> buffers_;
};

extern template class Network<float>;
extern template class Network<double>;

}  // namespace semileak::nn
