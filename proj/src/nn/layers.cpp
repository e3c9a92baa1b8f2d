#include "semileak/nn/layers.hpp"

#include <cmath>

#include <Eigen/Dense>

#include "semileak/core/error.hpp"

namespace semileak::nn {

namespace {

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using ColMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::ColMajor>;
template <typename T>
using RowMap = Eigen::Map<RowMat<T>>;
template <typename T>
using ConstRowMap = Eigen::Map<const RowMat<T>>;
template <typename T>
using ColMap = Eigen::Map<ColMat<T>>;
template <typename T>
using ConstColMap = Eigen::Map<const ColMat<T>>;

template <typename T>
Param<T> make_param(std::string name, std::vector<int> shape, bool trainable) {
  std::size_t count = 1;
  for (int d : shape) count *= static_cast<std::size_t>(d);
  Param<T> p;
  p.name = std::move(name);
  p.shape = std::move(shape);
  p.value.assign(count, T(0));
  if (trainable) p.grad.assign(count, T(0));
  return p;
}

void require(bool ok, const std::string& msg) {
  if (!ok) throw ContractError(msg);
}

}  // namespace

// ---------------------------------------------------------------- Conv2d

template <typename T>
Conv2d<T>::Conv2d(std::string name, int in_ch, int out_ch, int kernel, int stride, int pad,
                  bool bias)
    : in_ch_(in_ch), out_ch_(out_ch), kernel_(kernel), stride_(stride), pad_(pad),
      has_bias_(bias),
      weight_(make_param<T>(name + ".weight", {out_ch, in_ch * kernel * kernel}, true)) {
  if (bias) bias_ = make_param<T>(name + ".bias", {out_ch}, true);
}

template <typename T>
void Conv2d<T>::init(Rng& rng, double gain) {
  const double fan_out = static_cast<double>(out_ch_) * kernel_ * kernel_;
  const double std = std::sqrt(gain / fan_out);
  for (auto& v : weight_.value) v = static_cast<T>(std * rng.normal());
  for (auto& v : bias_.value) v = T(0);
}

// Output columns ox whose input column ox*stride - pad + kx lies in [0, w).
inline void valid_range(int wo, int w, int stride, int pad, int kx, int& lo, int& hi) {
  lo = 0;
  while (lo < wo && lo * stride - pad + kx < 0) ++lo;
  hi = wo;
  while (hi > lo && (hi - 1) * stride - pad + kx >= w) --hi;
}

// Column matrix layout: one row per (channel, ky, kx) tap, one column per
// (sample, output pixel).
template <typename T>
Tensor<T> Conv2d<T>::run(const Tensor<T>& x, std::vector<T>* cols_out) const {
  require(x.c == in_ch_, "conv expects " + std::to_string(in_ch_) + " channels, got " +
                             x.shape_string());
  const int ho = (x.h + 2 * pad_ - kernel_) / stride_ + 1;
  const int wo = (x.w + 2 * pad_ - kernel_) / stride_ + 1;
  require(ho > 0 && wo > 0, "conv input too small: " + x.shape_string());
  const int ckk = in_ch_ * kernel_ * kernel_;
  const std::size_t hw = static_cast<std::size_t>(ho) * wo;
  const std::size_t cols_n = static_cast<std::size_t>(x.n) * hw;

  std::vector<T> cols(static_cast<std::size_t>(ckk) * cols_n);
  for (int ci = 0; ci < in_ch_; ++ci)
    for (int ky = 0; ky < kernel_; ++ky)
      for (int kx = 0; kx < kernel_; ++kx) {
        const std::size_t row = (static_cast<std::size_t>(ci) * kernel_ + ky) * kernel_ + kx;
        int lo, hi;
        valid_range(wo, x.w, stride_, pad_, kx, lo, hi);
        for (int n = 0; n < x.n; ++n) {
          const T* src = x.data.data() + (static_cast<std::size_t>(n) * x.c + ci) * x.plane();
          T* dst = cols.data() + row * cols_n + n * hw;
          for (int oy = 0; oy < ho; ++oy, dst += wo) {
            const int iy = oy * stride_ - pad_ + ky;
            if (iy < 0 || iy >= x.h) {
              std::fill(dst, dst + wo, T(0));
              continue;
            }
            const std::ptrdiff_t base = static_cast<std::ptrdiff_t>(iy) * x.w - pad_ + kx;
            for (int ox = 0; ox < lo; ++ox) dst[ox] = T(0);
            for (int ox = lo; ox < hi; ++ox) dst[ox] = src[base + ox * stride_];
            for (int ox = hi; ox < wo; ++ox) dst[ox] = T(0);
          }
        }
      }

  ConstRowMap<T> c(cols.data(), ckk, static_cast<Eigen::Index>(cols_n));
  ConstRowMap<T> wmat(weight_.value.data(), out_ch_, ckk);
  RowMat<T> r(out_ch_, static_cast<Eigen::Index>(cols_n));
  r.noalias() = wmat * c;

  Tensor<T> y(x.n, out_ch_, ho, wo);
  for (int n = 0; n < x.n; ++n)
    for (int o = 0; o < out_ch_; ++o) {
      const T* row = r.data() + static_cast<std::size_t>(o) * cols_n + n * hw;
      T* dst = y.data.data() + (static_cast<std::size_t>(n) * out_ch_ + o) * hw;
      const T b = has_bias_ ? bias_.value[static_cast<std::size_t>(o)] : T(0);
      for (std::size_t p = 0; p < hw; ++p) dst[p] = row[p] + b;
    }
  if (cols_out) *cols_out = std::move(cols);
  return y;
}

template <typename T>
Tensor<T> Conv2d<T>::infer(const Tensor<T>& x) const {
  return run(x, nullptr);
}

template <typename T>
Tensor<T> Conv2d<T>::forward(const Tensor<T>& x, StatMode, Tape<T>* tape) {
  if (!tape) return run(x, nullptr);
  tape->saved = Tensor<T>(x.n, x.c, x.h, x.w);
  tape->saved.data.clear();
  return run(x, &tape->aux);
}

template <typename T>
Tensor<T> Conv2d<T>::backward(const Tensor<T>& g, const Tape<T>& tape) {
  const auto& in = tape.saved;
  const int ckk = in_ch_ * kernel_ * kernel_;
  const std::size_t hw = g.plane();
  const std::size_t cols_n = static_cast<std::size_t>(g.n) * hw;
  require(g.c == out_ch_ && tape.aux.size() == static_cast<std::size_t>(ckk) * cols_n,
          "conv backward shape mismatch");

  RowMat<T> d(out_ch_, static_cast<Eigen::Index>(cols_n));
  for (int n = 0; n < g.n; ++n)
    for (int o = 0; o < out_ch_; ++o) {
      const T* src = g.data.data() + (static_cast<std::size_t>(n) * out_ch_ + o) * hw;
      std::copy(src, src + hw, d.data() + static_cast<std::size_t>(o) * cols_n + n * hw);
    }

  ConstRowMap<T> c(tape.aux.data(), ckk, static_cast<Eigen::Index>(cols_n));
  RowMap<T> dw(weight_.grad.data(), out_ch_, ckk);
  dw.noalias() += d * c.transpose();
  if (has_bias_) {
    for (int o = 0; o < out_ch_; ++o) bias_.grad[static_cast<std::size_t>(o)] += d.row(o).sum();
  }
  if (!input_grad_) return {};

  ConstRowMap<T> wmat(weight_.value.data(), out_ch_, ckk);
  RowMat<T> dc(ckk, static_cast<Eigen::Index>(cols_n));
  dc.noalias() = wmat.transpose() * d;

  Tensor<T> dx(in.n, in.c, in.h, in.w);
  const int ho = g.h, wo = g.w;
  for (int ci = 0; ci < in_ch_; ++ci)
    for (int ky = 0; ky < kernel_; ++ky)
      for (int kx = 0; kx < kernel_; ++kx) {
        const std::size_t row = (static_cast<std::size_t>(ci) * kernel_ + ky) * kernel_ + kx;
        int lo, hi;
        valid_range(wo, in.w, stride_, pad_, kx, lo, hi);
        for (int n = 0; n < g.n; ++n) {
          T* dst = dx.data.data() + (static_cast<std::size_t>(n) * in.c + ci) * dx.plane();
          const T* src = dc.data() + row * cols_n + n * hw;
          for (int oy = 0; oy < ho; ++oy, src += wo) {
            const int iy = oy * stride_ - pad_ + ky;
            if (iy < 0 || iy >= in.h) continue;
            const std::ptrdiff_t base = static_cast<std::ptrdiff_t>(iy) * in.w - pad_ + kx;
            for (int ox = lo; ox < hi; ++ox) dst[base + ox * stride_] += src[ox];
          }
        }
      }
  return dx;
}

template <typename T>
void Conv2d<T>::collect(std::vector<Param<T>*>& params, std::vector<Param<T>*>&) {
  params.push_back(&weight_);
  if (has_bias_) params.push_back(&bias_);
}

// ---------------------------------------------------------------- Linear

template <typename T>
Linear<T>::Linear(std::string name, int in_features, int out_features)
    : in_(in_features), out_(out_features),
      weight_(make_param<T>(name + ".weight", {out_features, in_features}, true)),
      bias_(make_param<T>(name + ".bias", {out_features}, true)) {}

template <typename T>
void Linear<T>::init(Rng& rng) {
  const double std = std::sqrt(2.0 / (in_ + out_));
  for (auto& v : weight_.value) v = static_cast<T>(std * rng.normal());
  for (auto& v : bias_.value) v = T(0);
}

template <typename T>
Tensor<T> Linear<T>::infer(const Tensor<T>& x) const {
  require(static_cast<int>(x.sample_size()) == in_,
          "linear expects " + std::to_string(in_) + " features, got " + x.shape_string());
  ConstRowMap<T> xm(x.data.data(), x.n, in_);
  ConstRowMap<T> wm(weight_.value.data(), out_, in_);
  Tensor<T> y(x.n, out_, 1, 1);
  RowMap<T> ym(y.data.data(), x.n, out_);
  ym.noalias() = xm * wm.transpose();
  for (int i = 0; i < x.n; ++i)
    for (int o = 0; o < out_; ++o) ym(i, o) += bias_.value[static_cast<std::size_t>(o)];
  return y;
}

template <typename T>
Tensor<T> Linear<T>::forward(const Tensor<T>& x, StatMode, Tape<T>* tape) {
  if (tape) tape->saved = x;
  return infer(x);
}

template <typename T>
Tensor<T> Linear<T>::backward(const Tensor<T>& g, const Tape<T>& tape) {
  const auto& x = tape.saved;
  ConstRowMap<T> gm(g.data.data(), g.n, out_);
  ConstRowMap<T> xm(x.data.data(), x.n, in_);
  RowMap<T> dw(weight_.grad.data(), out_, in_);
  dw.noalias() += gm.transpose() * xm;
  for (int o = 0; o < out_; ++o) bias_.grad[static_cast<std::size_t>(o)] += gm.col(o).sum();
  Tensor<T> dx(x.n, x.c, x.h, x.w);
  RowMap<T> dxm(dx.data.data(), x.n, in_);
  ConstRowMap<T> wm(weight_.value.data(), out_, in_);
  dxm.noalias() = gm * wm;
  return dx;
}

template <typename T>
void Linear<T>::collect(std::vector<Param<T>*>& params, std::vector<Param<T>*>&) {
  params.push_back(&weight_);
  params.push_back(&bias_);
}

// ---------------------------------------------------------------- LeakyRelu

template <typename T>
Tensor<T> LeakyRelu<T>::infer(const Tensor<T>& x) const {
  Tensor<T> y = x;
  for (auto& v : y.data)
    if (v < T(0)) v *= slope_;
  return y;
}

template <typename T>
Tensor<T> LeakyRelu<T>::forward(const Tensor<T>& x, StatMode, Tape<T>* tape) {
  if (tape) tape->saved = x;
  return infer(x);
}

template <typename T>
Tensor<T> LeakyRelu<T>::backward(const Tensor<T>& g, const Tape<T>& tape) {
  Tensor<T> dx = g;
  for (std::size_t i = 0; i < dx.size(); ++i)
    if (!(tape.saved.data[i] > T(0))) dx.data[i] *= slope_;
  return dx;
}

// ---------------------------------------------------------------- BatchNorm2d

template <typename T>
BatchNorm2d<T>::BatchNorm2d(std::string name, int channels, T momentum, T eps)
    : channels_(channels), momentum_(momentum), eps_(eps),
      gamma_(make_param<T>(name + ".gamma", {channels}, true)),
      beta_(make_param<T>(name + ".beta", {channels}, true)),
      running_mean_(make_param<T>(name + ".running_mean", {channels}, false)),
      running_var_(make_param<T>(name + ".running_var", {channels}, false)) {
  std::fill(gamma_.value.begin(), gamma_.value.end(), T(1));
  std::fill(running_var_.value.begin(), running_var_.value.end(), T(1));
}

template <typename T>
Tensor<T> BatchNorm2d<T>::infer(const Tensor<T>& x) const {
  require(x.c == channels_, "batch norm channel mismatch: " + x.shape_string());
  Tensor<T> y = x;
  const std::size_t plane = x.plane();
  for (int n = 0; n < x.n; ++n)
    for (int c = 0; c < channels_; ++c) {
      const auto ci = static_cast<std::size_t>(c);
      const T scale = gamma_.value[ci] / std::sqrt(running_var_.value[ci] + eps_);
      const T shift = beta_.value[ci] - running_mean_.value[ci] * scale;
      T* p = y.data.data() + (static_cast<std::size_t>(n) * channels_ + c) * plane;
      for (std::size_t i = 0; i < plane; ++i) p[i] = p[i] * scale + shift;
    }
  return y;
}

template <typename T>
Tensor<T> BatchNorm2d<T>::forward(const Tensor<T>& x, StatMode mode, Tape<T>* tape) {
  require(x.c == channels_, "batch norm channel mismatch: " + x.shape_string());
  const std::size_t plane = x.plane();
  const double count = static_cast<double>(x.n) * static_cast<double>(plane);
  Tensor<T> xhat(x.n, x.c, x.h, x.w);
  std::vector<T> inv_std(static_cast<std::size_t>(channels_));
  Tensor<T> y(x.n, x.c, x.h, x.w);
  for (int c = 0; c < channels_; ++c) {
    const auto ci = static_cast<std::size_t>(c);
    double mean = 0.0;
    for (int n = 0; n < x.n; ++n) {
      const T* p = x.data.data() + (static_cast<std::size_t>(n) * channels_ + c) * plane;
      for (std::size_t i = 0; i < plane; ++i) mean += p[i];
    }
    mean /= count;
    double var = 0.0;
    for (int n = 0; n < x.n; ++n) {
      const T* p = x.data.data() + (static_cast<std::size_t>(n) * channels_ + c) * plane;
      for (std::size_t i = 0; i < plane; ++i) var += (p[i] - mean) * (p[i] - mean);
    }
    var /= count;
    const double batch_mean = mean, batch_var = var;
    if (mode == StatMode::running) {
      mean = running_mean_.value[ci];
      var = running_var_.value[ci];
    }
    const T istd = static_cast<T>(1.0 / std::sqrt(var + eps_));
    inv_std[ci] = istd;
    for (int n = 0; n < x.n; ++n) {
      const std::size_t off = (static_cast<std::size_t>(n) * channels_ + c) * plane;
      for (std::size_t i = 0; i < plane; ++i) {
        const T h = static_cast<T>((x.data[off + i] - mean) * istd);
        xhat.data[off + i] = h;
        y.data[off + i] = gamma_.value[ci] * h + beta_.value[ci];
      }
    }
    if (mode == StatMode::update) {
      const double unbiased = count > 1 ? batch_var * count / (count - 1) : batch_var;
      running_mean_.value[ci] =
          static_cast<T>((1 - momentum_) * running_mean_.value[ci] + momentum_ * batch_mean);
      running_var_.value[ci] =
          static_cast<T>((1 - momentum_) * running_var_.value[ci] + momentum_ * unbiased);
    }
  }
  if (tape) {
    tape->saved = std::move(xhat);
    tape->aux = std::move(inv_std);
    tape->mode = mode;
  }
  return y;
}

template <typename T>
Tensor<T> BatchNorm2d<T>::backward(const Tensor<T>& g, const Tape<T>& tape) {
  const auto& xhat = tape.saved;
  const std::size_t plane = g.plane();
  const double count = static_cast<double>(g.n) * static_cast<double>(plane);
  Tensor<T> dx(g.n, g.c, g.h, g.w);
  for (int c = 0; c < channels_; ++c) {
    const auto ci = static_cast<std::size_t>(c);
    double dgamma = 0.0, dbeta = 0.0;
    for (int n = 0; n < g.n; ++n) {
      const std::size_t off = (static_cast<std::size_t>(n) * channels_ + c) * plane;
      for (std::size_t i = 0; i < plane; ++i) {
        dgamma += g.data[off + i] * xhat.data[off + i];
        dbeta += g.data[off + i];
      }
    }
    gamma_.grad[ci] += static_cast<T>(dgamma);
    beta_.grad[ci] += static_cast<T>(dbeta);
    if (tape.mode == StatMode::running) {
      // Constant statistics: each element scales independently.
      const double k = gamma_.value[ci] * tape.aux[ci];
      for (int n = 0; n < g.n; ++n) {
        const std::size_t off = (static_cast<std::size_t>(n) * channels_ + c) * plane;
        for (std::size_t i = 0; i < plane; ++i)
          dx.data[off + i] = static_cast<T>(k * g.data[off + i]);
      }
      continue;
    }
    const double k = gamma_.value[ci] * tape.aux[ci] / count;
    for (int n = 0; n < g.n; ++n) {
      const std::size_t off = (static_cast<std::size_t>(n) * channels_ + c) * plane;
      for (std::size_t i = 0; i < plane; ++i)
        dx.data[off + i] = static_cast<T>(
            k * (count * g.data[off + i] - dbeta - xhat.data[off + i] * dgamma));
    }
  }
  return dx;
}

template <typename T>
void BatchNorm2d<T>::collect(std::vector<Param<T>*>& params, std::vector<Param<T>*>& buffers) {
  params.push_back(&gamma_);
  params.push_back(&beta_);
  buffers.push_back(&running_mean_);
  buffers.push_back(&running_var_);
}

// ---------------------------------------------------------------- GlobalAvgPool

template <typename T>
Tensor<T> GlobalAvgPool<T>::infer(const Tensor<T>& x) const {
  Tensor<T> y(x.n, x.c, 1, 1);
  const std::size_t plane = x.plane();
  for (std::size_t i = 0; i < y.size(); ++i) {
    const T* p = x.data.data() + i * plane;
    double acc = 0.0;
    for (std::size_t k = 0; k < plane; ++k) acc += p[k];
    y.data[i] = static_cast<T>(acc / static_cast<double>(plane));
  }
  return y;
}

template <typename T>
Tensor<T> GlobalAvgPool<T>::forward(const Tensor<T>& x, StatMode, Tape<T>* tape) {
  if (tape) {
    tape->saved = Tensor<T>(x.n, x.c, x.h, x.w);
    tape->saved.data.clear();
  }
  return infer(x);
}

template <typename T>
Tensor<T> GlobalAvgPool<T>::backward(const Tensor<T>& g, const Tape<T>& tape) {
  const auto& s = tape.saved;
  Tensor<T> dx(s.n, s.c, s.h, s.w);
  const std::size_t plane = dx.plane();
  const T scale = T(1) / static_cast<T>(plane);
  for (std::size_t i = 0; i < g.size(); ++i) {
    T* p = dx.data.data() + i * plane;
    const T v = g.data[i] * scale;
    for (std::size_t k = 0; k < plane; ++k) p[k] = v;
  }
  return dx;
}

// ---------------------------------------------------------------- Sequential

template <typename T>
Sequential<T>::Sequential(const Sequential& other) {
  layers_.reserve(other.layers_.size());
  for (const auto& l : other.layers_) layers_.push_back(l->clone());
}

template <typename T>
Tensor<T> Sequential<T>::infer(const Tensor<T>& x) const {
  Tensor<T> h = x;
  for (const auto& l : layers_) h = l->infer(h);
  return h;
}

template <typename T>
Tensor<T> Sequential<T>::forward(const Tensor<T>& x, StatMode mode, Tape<T>* tape) {
  if (tape) tape->children.assign(layers_.size(), Tape<T>{});
  Tensor<T> h = x;
  for (std::size_t i = 0; i < layers_.size(); ++i)
    h = layers_[i]->forward(h, mode, tape ? &tape->children[i] : nullptr);
  return h;
}

template <typename T>
Tensor<T> Sequential<T>::backward(const Tensor<T>& g, const Tape<T>& tape) {
  require(tape.children.size() == layers_.size(), "backward without a recorded forward pass");
  Tensor<T> h = g;
  for (std::size_t i = layers_.size(); i-- > 0;) h = layers_[i]->backward(h, tape.children[i]);
  return h;
}

template <typename T>
void Sequential<T>::collect(std::vector<Param<T>*>& params, std::vector<Param<T>*>& buffers) {
  for (auto& l : layers_) l->collect(params, buffers);
}

// ---------------------------------------------------------------- WideBasicBlock

template <typename T>
WideBasicBlock<T>::WideBasicBlock(const std::string& name, int in_ch, int out_ch, int stride,
                                  T slope, Rng& rng)
    : equal_io_(in_ch == out_ch && stride == 1),
      bn1_(name + ".bn1", in_ch),
      act1_(slope),
      conv1_(name + ".conv1", in_ch, out_ch, 3, stride, 1, false),
      bn2_(name + ".bn2", out_ch),
      act2_(slope),
      conv2_(name + ".conv2", out_ch, out_ch, 3, 1, 1, false) {
  const double gain = 2.0 / (1.0 + static_cast<double>(slope) * slope);
  conv1_.init(rng, gain);
  conv2_.init(rng, gain);
  if (!equal_io_) {
    shortcut_ = std::make_unique<Conv2d<T>>(name + ".shortcut", in_ch, out_ch, 1, stride, 0, false);
    shortcut_->init(rng, gain);
  }
}

template <typename T>
WideBasicBlock<T>::WideBasicBlock(const WideBasicBlock& other)
    : equal_io_(other.equal_io_), bn1_(other.bn1_), act1_(other.act1_), conv1_(other.conv1_),
      bn2_(other.bn2_), act2_(other.act2_), conv2_(other.conv2_),
      shortcut_(other.shortcut_ ? std::make_unique<Conv2d<T>>(*other.shortcut_) : nullptr) {}

template <typename T>
Tensor<T> WideBasicBlock<T>::infer(const Tensor<T>& x) const {
  const Tensor<T> o = act1_.infer(bn1_.infer(x));
  Tensor<T> y = conv2_.infer(act2_.infer(bn2_.infer(conv1_.infer(o))));
  const Tensor<T> sc = equal_io_ ? x : shortcut_->infer(o);
  for (std::size_t i = 0; i < y.size(); ++i) y.data[i] += sc.data[i];
  return y;
}

template <typename T>
Tensor<T> WideBasicBlock<T>::forward(const Tensor<T>& x, StatMode mode, Tape<T>* tape) {
  Tape<T>* t = nullptr;
  if (tape) {
    tape->children.assign(7, Tape<T>{});
    t = tape->children.data();
  }
  auto at = [t](int i) { return t ? t + i : nullptr; };
  const Tensor<T> o = act1_.forward(bn1_.forward(x, mode, at(0)), mode, at(1));
  Tensor<T> y = conv1_.forward(o, mode, at(2));
  y = act2_.forward(bn2_.forward(y, mode, at(3)), mode, at(4));
  y = conv2_.forward(y, mode, at(5));
  const Tensor<T> sc = equal_io_ ? x : shortcut_->forward(o, mode, at(6));
  for (std::size_t i = 0; i < y.size(); ++i) y.data[i] += sc.data[i];
  return y;
}

template <typename T>
Tensor<T> WideBasicBlock<T>::backward(const Tensor<T>& g, const Tape<T>& tape) {
  require(tape.children.size() == 7, "backward without a recorded forward pass");
  const auto& t = tape.children;
  Tensor<T> h = conv2_.backward(g, t[5]);
  h = bn2_.backward(act2_.backward(h, t[4]), t[3]);
  Tensor<T> go = conv1_.backward(h, t[2]);
  if (!equal_io_) {
    const Tensor<T> gs = shortcut_->backward(g, t[6]);
    for (std::size_t i = 0; i < go.size(); ++i) go.data[i] += gs.data[i];
  }
  Tensor<T> gx = bn1_.backward(act1_.backward(go, t[1]), t[0]);
  if (equal_io_)
    for (std::size_t i = 0; i < gx.size(); ++i) gx.data[i] += g.data[i];
  return gx;
}

template <typename T>
void WideBasicBlock<T>::collect(std::vector<Param<T>*>& params, std::vector<Param<T>*>& buffers) {
  bn1_.collect(params, buffers);
  conv1_.collect(params, buffers);
  bn2_.collect(params, buffers);
  conv2_.collect(params, buffers);
  if (shortcut_) shortcut_->collect(params, buffers);
}

template class Conv2d<float>;
template class Conv2d<double>;
template class Linear<float>;
template class Linear<double>;
template class LeakyRelu<float>;
template class LeakyRelu<double>;
template class BatchNorm2d<float>;
template class BatchNorm2d<double>;
template class GlobalAvgPool<float>;
template class GlobalAvgPool<double>;
template class Sequential<float>;
template class Sequential<double>;
template class WideBasicBlock<float>;
template class WideBasicBlock<double>;

}  // namespace semileak::nn
