#pragma once

#include <array>
#include <span>
#include <string_view>

#include "semileak/core/image.hpp"
#include "semileak/core/rng.hpp"

namespace semileak::augment {

inline constexpr int kCropPadding = 4;
inline constexpr double kDefaultMagnitude = 10.0;
inline constexpr double kMaxMagnitude = 30.0;
inline constexpr float kFillValue = 0.5f;

enum class AugKind { weak, strong };

// Parameters of an augmentation pipeline. rand_n is the number of
// transforms stacked on top of the weak crop/flip (equal to aug_level for
// strong pipelines); rand_m is the global magnitude on a 0..30 scale.
struct AugmentationSpec {
  AugKind kind = AugKind::weak;
  int rand_n = 0;
  double rand_m = kDefaultMagnitude;
  int aug_level = 0;
  int pad = kCropPadding;

  static AugmentationSpec weak();
  // aug_level 0 degenerates to the weak spec.
  static AugmentationSpec strong(int aug_level);

  // Throws ContractError on out-of-range fields.
  void validate() const;
};

// Crop offsets are in [0, 2*pad] inside the padded frame; (pad, pad) is the
// zero shift.
struct WeakParams {
  int dx = kCropPadding;
  int dy = kCropPadding;
  bool flip = false;
};

WeakParams draw_weak_params(Rng& rng, int pad = kCropPadding);

// Reflect-pads by `pad`, crops at (dx, dy), then optionally mirrors columns.
Image apply_weak(const Image& img, const WeakParams& params, int pad = kCropPadding);

Image weak_augment(const Image& img, Rng& rng);

enum class TransformOp {
  identity,
  autocontrast,
  equalize,
  rotate,
  solarize,
  posterize,
  contrast,
  brightness,
  color,
  sharpness,
  shear_x,
  shear_y,
  translate_x,
  translate_y,
};

inline constexpr std::array<TransformOp, 14> kDefaultPool = {
    TransformOp::identity,   TransformOp::autocontrast, TransformOp::equalize,
    TransformOp::rotate,     TransformOp::solarize,     TransformOp::posterize,
    TransformOp::contrast,   TransformOp::brightness,   TransformOp::color,
    TransformOp::sharpness,  TransformOp::shear_x,      TransformOp::shear_y,
    TransformOp::translate_x, TransformOp::translate_y};

std::string_view to_string(TransformOp op);

// Applies one transform at `magnitude` (0..30). `negate` flips the direction
// of signed transforms (rotation, shear, translation, enhancement factors);
// unsigned transforms ignore it. Output is clamped to [0, 1].
Image apply_transform(const Image& img, TransformOp op, double magnitude, bool negate);

// Weak crop/flip followed by aug_level transforms drawn uniformly (with
// replacement) from `pool`. aug_level must be in 0..4.
Image strong_augment(const Image& img, Rng& rng, int aug_level,
                     std::span<const TransformOp> pool = kDefaultPool,
                     double magnitude = kDefaultMagnitude);

// Dispatches on spec.kind.
Image augment(const Image& img, const AugmentationSpec& spec, Rng& rng);

}  // namespace semileak::augment
