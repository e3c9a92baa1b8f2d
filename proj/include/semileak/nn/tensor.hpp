#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace semileak::nn {

// Dense NCHW batch. Fully connected activations use h = w = 1.
template <typename T>
struct Tensor {
  int n = 0;
  int c = 0;
  int h = 1;
  int w = 1;
  std::vector<T> data;

  Tensor() = default;
  Tensor(int n_, int c_, int h_, int w_, T fill = T(0))
      : n(n_), c(c_), h(h_), w(w_),
        data(static_cast<std::size_t>(n_) * c_ * h_ * w_, fill) {}

  std::size_t size() const { return data.size(); }
  std::size_t sample_size() const { return static_cast<std::size_t>(c) * h * w; }
  std::size_t plane() const { return static_cast<std::size_t>(h) * w; }

  std::span<T> sample(int i) {
    return {data.data() + static_cast<std::size_t>(i) * sample_size(), sample_size()};
  }
  std::span<const T> sample(int i) const {
    return {data.data() + static_cast<std::size_t>(i) * sample_size(), sample_size()};
  }

  bool same_shape(const Tensor& o) const { return n == o.n && c == o.c && h == o.h && w == o.w; }
  std::string shape_string() const {
    return "[" + std::to_string(n) + "," + std::to_string(c) + "," + std::to_string(h) + "," +
           std::to_string(w) + "]";
  }
};

// A named array owned by a layer: a trainable parameter (grad sized like
// value) or a non-trainable buffer such as batch-norm running statistics
// (grad empty).
template <typename T>
struct Param {
  std::string name;
  std::vector<int> shape;
  std::vector<T> value;
  std::vector<T> grad;

  bool trainable() const { return !value.empty() && grad.size() == value.size(); }
};

}  // namespace semileak::nn
