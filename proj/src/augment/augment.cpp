#include "semileak/augment/augment.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "semileak/core/error.hpp"

namespace semileak::augment {

AugmentationSpec AugmentationSpec::weak() { return AugmentationSpec{}; }

AugmentationSpec AugmentationSpec::strong(int aug_level) {
  if (aug_level == 0) return weak();
  AugmentationSpec s;
  s.kind = AugKind::strong;
  s.rand_n = aug_level;
  s.aug_level = aug_level;
  return s;
}

void AugmentationSpec::validate() const {
  if (pad != kCropPadding) throw ContractError("crop padding must be 4");
  if (rand_n < 0) throw ContractError("rand_n must be >= 0");
  if (rand_m < 0.0 || rand_m > kMaxMagnitude) throw ContractError("rand_m must lie in [0, 30]");
  if (aug_level < 0 || aug_level > 4) throw ContractError("aug_level must be in 0..4");
  if (kind == AugKind::weak && rand_n != 0) throw ContractError("weak spec takes no transforms");
}

WeakParams draw_weak_params(Rng& rng, int pad) {
  WeakParams p;
  p.dx = static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(2 * pad + 1)));
  p.dy = static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(2 * pad + 1)));
  p.flip = rng.bernoulli(0.5);
  return p;
}

namespace {

int reflect(int i, int n) {
  // Mirror without repeating the edge pixel: -1 -> 1, n -> n-2.
  if (n == 1) return 0;
  while (i < 0 || i >= n) {
    if (i < 0) i = -i;
    if (i >= n) i = 2 * (n - 1) - i;
  }
  return i;
}

float clamp01(double v) { return static_cast<float>(std::clamp(v, 0.0, 1.0)); }

int to_level(float v) {
  return static_cast<int>(std::lround(std::clamp(static_cast<double>(v), 0.0, 1.0) * 255.0));
}

// Inverse-maps every output pixel through `src` (output coordinates relative
// to the image centre) and samples the nearest input pixel.
template <typename Map>
Image resample(const Image& img, Map src) {
  Image out(img.channels, img.height, img.width);
  const double cx = (img.width - 1) / 2.0;
  const double cy = (img.height - 1) / 2.0;
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      const auto [sx, sy] = src(x - cx, y - cy);
      const long ix = std::lround(sx + cx);
      const long iy = std::lround(sy + cy);
      const bool inside = ix >= 0 && ix < img.width && iy >= 0 && iy < img.height;
      for (int c = 0; c < img.channels; ++c)
        out.at(c, y, x) = inside ? img.at(c, static_cast<int>(iy), static_cast<int>(ix))
                                 : kFillValue;
    }
  }
  return out;
}

std::vector<float> luminance(const Image& img) {
  std::vector<float> gray(img.plane());
  if (img.channels < 3) {
    std::copy_n(img.data.begin(), img.plane(), gray.begin());
    return gray;
  }
  const std::size_t plane = img.plane();
  for (std::size_t i = 0; i < plane; ++i)
    gray[i] = static_cast<float>(0.299 * img.data[i] + 0.587 * img.data[plane + i] +
                                 0.114 * img.data[2 * plane + i]);
  return gray;
}

// out = degenerate + factor * (img - degenerate), per channel plane.
Image blend(const Image& img, const std::vector<float>& degenerate_plane, double factor) {
  Image out = img;
  const std::size_t plane = img.plane();
  for (int c = 0; c < img.channels; ++c)
    for (std::size_t i = 0; i < plane; ++i) {
      const double d = degenerate_plane[i];
      auto& v = out.data[c * plane + i];
      v = clamp01(d + factor * (v - d));
    }
  return out;
}

Image autocontrast(const Image& img) {
  Image out = img;
  const std::size_t plane = img.plane();
  for (int c = 0; c < img.channels; ++c) {
    auto first = out.data.begin() + static_cast<std::ptrdiff_t>(c * plane);
    auto last = first + static_cast<std::ptrdiff_t>(plane);
    const auto [lo_it, hi_it] = std::minmax_element(first, last);
    const float lo = *lo_it, hi = *hi_it;
    if (hi <= lo) continue;
    for (auto it = first; it != last; ++it) *it = clamp01((*it - lo) / (hi - lo));
  }
  return out;
}

// Histogram equalization on 8-bit levels, per channel.
Image equalize(const Image& img) {
  Image out = img;
  const std::size_t plane = img.plane();
  for (int c = 0; c < img.channels; ++c) {
    std::array<long, 256> hist{};
    for (std::size_t i = 0; i < plane; ++i) ++hist[static_cast<std::size_t>(to_level(img.data[c * plane + i]))];
    long total = 0, last_nonzero = 0;
    int nonzero = 0;
    for (long h : hist) {
      if (h == 0) continue;
      total += h;
      last_nonzero = h;
      ++nonzero;
    }
    if (nonzero <= 1) continue;
    const long step = (total - last_nonzero) / 255;
    if (step == 0) continue;
    std::array<int, 256> lut{};
    long n = step / 2;
    for (std::size_t i = 0; i < 256; ++i) {
      lut[i] = static_cast<int>(std::min<long>(255, n / step));
      n += hist[i];
    }
    for (std::size_t i = 0; i < plane; ++i) {
      auto& v = out.data[c * plane + i];
      v = static_cast<float>(lut[static_cast<std::size_t>(to_level(v))]) / 255.0f;
    }
  }
  return out;
}

Image sharpness(const Image& img, double factor) {
  // Smoothing kernel [[1,1,1],[1,5,1],[1,1,1]] / 13; border pixels unchanged.
  Image smooth = img;
  for (int c = 0; c < img.channels; ++c)
    for (int y = 1; y + 1 < img.height; ++y)
      for (int x = 1; x + 1 < img.width; ++x) {
        double acc = 4.0 * img.at(c, y, x);
        for (int dy = -1; dy <= 1; ++dy)
          for (int dx = -1; dx <= 1; ++dx) acc += img.at(c, y + dy, x + dx);
        smooth.at(c, y, x) = static_cast<float>(acc / 13.0);
      }
  Image out = img;
  for (std::size_t i = 0; i < out.size(); ++i)
    out.data[i] = clamp01(smooth.data[i] + factor * (img.data[i] - smooth.data[i]));
  return out;
}

}  // namespace

Image apply_weak(const Image& img, const WeakParams& params, int pad) {
  if (params.dx < 0 || params.dx > 2 * pad || params.dy < 0 || params.dy > 2 * pad)
    throw ContractError("crop offset outside the padded frame");
  Image out(img.channels, img.height, img.width);
  for (int c = 0; c < img.channels; ++c)
    for (int y = 0; y < img.height; ++y) {
      const int sy = reflect(y + params.dy - pad, img.height);
      for (int x = 0; x < img.width; ++x) {
        const int ox = params.flip ? img.width - 1 - x : x;
        const int sx = reflect(x + params.dx - pad, img.width);
        out.at(c, y, ox) = img.at(c, sy, sx);
      }
    }
  return out;
}

Image weak_augment(const Image& img, Rng& rng) {
  return apply_weak(img, draw_weak_params(rng));
}

std::string_view to_string(TransformOp op) {
  switch (op) {
    case TransformOp::identity: return "identity";
    case TransformOp::autocontrast: return "autocontrast";
    case TransformOp::equalize: return "equalize";
    case TransformOp::rotate: return "rotate";
    case TransformOp::solarize: return "solarize";
    case TransformOp::posterize: return "posterize";
    case TransformOp::contrast: return "contrast";
    case TransformOp::brightness: return "brightness";
    case TransformOp::color: return "color";
    case TransformOp::sharpness: return "sharpness";
    case TransformOp::shear_x: return "shear_x";
    case TransformOp::shear_y: return "shear_y";
    case TransformOp::translate_x: return "translate_x";
    case TransformOp::translate_y: return "translate_y";
  }
  return "identity";
}

Image apply_transform(const Image& img, TransformOp op, double magnitude, bool negate) {
  const double level = std::clamp(magnitude, 0.0, kMaxMagnitude) / kMaxMagnitude;
  const double sign = negate ? -1.0 : 1.0;
  const double enhance = 1.0 + sign * 0.9 * level;
  switch (op) {
    case TransformOp::identity: return img;
    case TransformOp::autocontrast: return autocontrast(img);
    case TransformOp::equalize: return equalize(img);
    case TransformOp::rotate: {
      const double rad = sign * 30.0 * level * std::numbers::pi / 180.0;
      const double c = std::cos(rad), s = std::sin(rad);
      return resample(img, [c, s](double x, double y) {
        return std::pair{c * x + s * y, -s * x + c * y};
      });
    }
    case TransformOp::solarize: {
      const double threshold = 1.0 - level;
      Image out = img;
      for (auto& v : out.data)
        if (v >= threshold) v = clamp01(1.0 - v);
      return out;
    }
    case TransformOp::posterize: {
      const int bits = 8 - static_cast<int>(std::lround(4.0 * level));
      const int mask = ~((1 << (8 - bits)) - 1) & 0xff;
      Image out = img;
      for (auto& v : out.data) v = static_cast<float>(to_level(v) & mask) / 255.0f;
      return out;
    }
    case TransformOp::contrast: {
      const auto gray = luminance(img);
      double mean = 0.0;
      for (float g : gray) mean += g;
      mean /= static_cast<double>(gray.size());
      return blend(img, std::vector<float>(gray.size(), static_cast<float>(mean)), enhance);
    }
    case TransformOp::brightness:
      return blend(img, std::vector<float>(img.plane(), 0.0f), enhance);
    case TransformOp::color: return blend(img, luminance(img), enhance);
    case TransformOp::sharpness: return sharpness(img, enhance);
    case TransformOp::shear_x: {
      const double k = sign * 0.3 * level;
      return resample(img, [k](double x, double y) { return std::pair{x + k * y, y}; });
    }
    case TransformOp::shear_y: {
      const double k = sign * 0.3 * level;
      return resample(img, [k](double x, double y) { return std::pair{x, y + k * x}; });
    }
    case TransformOp::translate_x: {
      const double t = std::round(sign * 0.3 * level * img.width);
      return resample(img, [t](double x, double y) { return std::pair{x - t, y}; });
    }
    case TransformOp::translate_y: {
      const double t = std::round(sign * 0.3 * level * img.height);
      return resample(img, [t](double x, double y) { return std::pair{x, y - t}; });
    }
  }
  return img;
}

Image strong_augment(const Image& img, Rng& rng, int aug_level,
                     std::span<const TransformOp> pool, double magnitude) {
  if (aug_level < 0 || aug_level > 4)
    throw ContractError("unknown aug_level " + std::to_string(aug_level));
  if (pool.empty()) throw ContractError("transform pool is empty");
  Image out = weak_augment(img, rng);
  for (int i = 0; i < aug_level; ++i) {
    const auto op = pool[static_cast<std::size_t>(rng.uniform_int(pool.size()))];
    const bool negate = rng.bernoulli(0.5);
    out = apply_transform(out, op, magnitude, negate);
  }
  return out;
}

Image augment(const Image& img, const AugmentationSpec& spec, Rng& rng) {
  spec.validate();
  if (spec.kind == AugKind::weak) return weak_augment(img, rng);
  return strong_augment(img, rng, spec.rand_n, kDefaultPool, spec.rand_m);
}

}  // namespace semileak::augment
