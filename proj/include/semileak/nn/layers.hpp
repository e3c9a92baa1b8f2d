#pragma once

#include <memory>
#include <string>
#include <vector>

#include "semileak/core/rng.hpp"
#include "semileak/nn/tensor.hpp"

namespace semileak::nn {

// Values a layer keeps from a training forward pass for its backward pass.
// How a training-time forward pass treats normalization statistics.
enum class StatMode {
  update,   // batch statistics, running statistics updated
  frozen,   // batch statistics, running statistics untouched
  running,  // running statistics as constants, so samples do not interact
};

template <typename T>
struct Tape {
  Tensor<T> saved;
  std::vector<T> aux;
  StatMode mode = StatMode::update;
  std::vector<Tape> children;
};


template <typename T>
class Layer {
 public:
  virtual ~Layer() = default;

  // Inference: running statistics, no tape. Safe to call concurrently.
  virtual Tensor<T> infer(const Tensor<T>& x) const = 0;

  // Training-mode forward. With a tape, records what backward needs.
  virtual Tensor<T> forward(const Tensor<T>& x, StatMode mode, Tape<T>* tape) = 0;

  // Accumulates parameter gradients and returns the input gradient.
  virtual Tensor<T> backward(const Tensor<T>& grad_out, const Tape<T>& tape) = 0;

  virtual void collect(std::vector<Param<T>*>& params, std::vector<Param<T>*>& buffers) {
    (void)params;
    (void)buffers;
  }

  virtual std::unique_ptr<Layer> clone() const = 0;
};

template <typename T>
using LayerPtr = std::unique_ptr<Layer<T>>;

// 2-D convolution (cross-correlation) via im2col and one GEMM per batch.
template <typename T>
class Conv2d final : public Layer<T> {
 public:
  Conv2d(std::string name, int in_ch, int out_ch, int kernel, int stride, int pad, bool bias);

  Tensor<T> infer(const Tensor<T>& x) const override;
  Tensor<T> forward(const Tensor<T>& x, StatMode mode, Tape<T>* tape) override;
  Tensor<T> backward(const Tensor<T>& grad_out, const Tape<T>& tape) override;
  void collect(std::vector<Param<T>*>& params, std::vector<Param<T>*>& buffers) override;
  LayerPtr<T> clone() const override { return std::make_unique<Conv2d>(*this); }

  // Kaiming-normal weights (fan_out), zero bias.
  void init(Rng& rng, double gain = 2.0);

  Param<T>& weight() { return weight_; }

  // A first layer fed with data has no use for its input gradient;
  // backward then returns an empty tensor.
  void set_input_grad(bool on) { input_grad_ = on; }

 private:
  Tensor<T> run(const Tensor<T>& x, std::vector<T>* cols_out) const;

  int in_ch_, out_ch_, kernel_, stride_, pad_;
  bool has_bias_;
  bool input_grad_ = true;
  Param<T> weight_;  // [out, in * k * k]
  Param<T> bias_;
};

template <typename T>
class Linear final : public Layer<T> {
 public:
  Linear(std::string name, int in_features, int out_features);

  Tensor<T> infer(const Tensor<T>& x) const override;
  Tensor<T> forward(const Tensor<T>& x, StatMode mode, Tape<T>* tape) override;
  Tensor<T> backward(const Tensor<T>& grad_out, const Tape<T>& tape) override;
  void collect(std::vector<Param<T>*>& params, std::vector<Param<T>*>& buffers) override;
  LayerPtr<T> clone() const override { return std::make_unique<Linear>(*this); }

  // Xavier-normal weights, zero bias.
  void init(Rng& rng);

  Param<T>& weight() { return weight_; }
  Param<T>& bias() { return bias_; }

 private:
  int in_, out_;
  Param<T> weight_;  // [out, in]
  Param<T> bias_;
};

// max(x, slope * x); slope 0 is a plain rectifier.
template <typename T>
class LeakyRelu final : public Layer<T> {
 public:
  explicit LeakyRelu(T slope = T(0)) : slope_(slope) {}
  Tensor<T> infer(const Tensor<T>& x) const override;
  Tensor<T> forward(const Tensor<T>& x, StatMode mode, Tape<T>* tape) override;
  Tensor<T> backward(const Tensor<T>& grad_out, const Tape<T>& tape) override;
  LayerPtr<T> clone() const override { return std::make_unique<LeakyRelu>(*this); }

 private:
  T slope_;
};

template <typename T>
class BatchNorm2d final : public Layer<T> {
 public:
  BatchNorm2d(std::string name, int channels, T momentum = T(0.001), T eps = T(0.001));

  Tensor<T> infer(const Tensor<T>& x) const override;
  Tensor<T> forward(const Tensor<T>& x, StatMode mode, Tape<T>* tape) override;
  Tensor<T> backward(const Tensor<T>& grad_out, const Tape<T>& tape) override;
  void collect(std::vector<Param<T>*>& params, std::vector<Param<T>*>& buffers) override;
  LayerPtr<T> clone() const override { return std::make_unique<BatchNorm2d>(*this); }

 private:
  int channels_;
  T momentum_, eps_;
  Param<T> gamma_, beta_;
  Param<T> running_mean_, running_var_;
};

template <typename T>
class GlobalAvgPool final : public Layer<T> {
 public:
  Tensor<T> infer(const Tensor<T>& x) const override;
  Tensor<T> forward(const Tensor<T>& x, StatMode mode, Tape<T>* tape) override;
  Tensor<T> backward(const Tensor<T>& grad_out, const Tape<T>& tape) override;
  LayerPtr<T> clone() const override { return std::make_unique<GlobalAvgPool>(*this); }
};

template <typename T>
class Sequential final : public Layer<T> {
 public:
  Sequential() = default;
  Sequential(const Sequential& other);
  Sequential& operator=(const Sequential&) = delete;
  Sequential(Sequential&&) noexcept = default;
  Sequential& operator=(Sequential&&) noexcept = default;

  void add(LayerPtr<T> layer) { layers_.push_back(std::move(layer)); }
  std::size_t size() const { return layers_.size(); }
  Layer<T>& at(std::size_t i) { return *layers_[i]; }

  Tensor<T> infer(const Tensor<T>& x) const override;
  Tensor<T> forward(const Tensor<T>& x, StatMode mode, Tape<T>* tape) override;
  Tensor<T> backward(const Tensor<T>& grad_out, const Tape<T>& tape) override;
  void collect(std::vector<Param<T>*>& params, std::vector<Param<T>*>& buffers) override;
  LayerPtr<T> clone() const override { return std::make_unique<Sequential>(*this); }

 private:
  std::vector<LayerPtr<T>> layers_;
};

// Pre-activation wide-residual basic block:
//   o = act(bn1(x)); y = conv2(act(bn2(conv1(o)))); out = y + shortcut
// where shortcut is x when shapes match and a strided 1x1 conv of o otherwise.
template <typename T>
class WideBasicBlock final : public Layer<T> {
 public:
  WideBasicBlock(const std::string& name, int in_ch, int out_ch, int stride, T slope, Rng& rng);

  Tensor<T> infer(const Tensor<T>& x) const override;
  Tensor<T> forward(const Tensor<T>& x, StatMode mode, Tape<T>* tape) override;
  Tensor<T> backward(const Tensor<T>& grad_out, const Tape<T>& tape) override;
  void collect(std::vector<Param<T>*>& params, std::vector<Param<T>*>& buffers) override;
  LayerPtr<T> clone() const override { return std::make_unique<WideBasicBlock>(*this); }

 private:
  bool equal_io_;
  BatchNorm2d<T> bn1_;
  LeakyRelu<T> act1_;
  Conv2d<T> conv1_;
  BatchNorm2d<T> bn2_;
  LeakyRelu<T> act2_;
  Conv2d<T> conv2_;
  std::unique_ptr<Conv2d<T>> shortcut_;

 public:
  WideBasicBlock(const WideBasicBlock& other);
};

extern template class Conv2d<float>;
extern template class Conv2d<double>;
extern template class Linear<float>;
extern template class Linear<double>;
extern template class LeakyRelu<float>;
extern template class LeakyRelu<double>;
extern template class BatchNorm2d<float>;
extern template class BatchNorm2d<double>;
extern template class GlobalAvgPool<float>;
extern template class GlobalAvgPool<double>;
extern template class Sequential<float>;
extern template class Sequential<double>;
extern template class WideBasicBlock<float>;
extern template class WideBasicBlock<double>;

}  // namespace semileak::nn
