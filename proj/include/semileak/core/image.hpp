#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace semileak {

// Planar (channel-major) image with values in [0, 1].
struct Image {
  int channels = 0;
  int height = 0;
  int width = 0;
  std::vector<float> data;

  Image() = default;
  Image(int c, int h, int w, float fill = 0.0f)
      : channels(c), height(h), width(w),
        data(static_cast<std::size_t>(c) * h * w, fill) {}

  std::size_t size() const { return data.size(); }
  std::size_t plane() const { return static_cast<std::size_t>(height) * width; }

  float& at(int c, int y, int x) {
    return data[(static_cast<std::size_t>(c) * height + y) * width + x];
  }
  float at(int c, int y, int x) const {
    return data[(static_cast<std::size_t>(c) * height + y) * width + x];
  }

  bool same_shape(const Image& other) const {
    return channels == other.channels && height == other.height &&
           width == other.width;
  }

  bool operator==(const Image&) const = default;
};

struct ImageSample {
  std::int64_t id = 0;
  Image image;
  std::optional<int> label;
};

using SampleStore = std::vector<ImageSample>;

// Validates pixel range/finiteness and label range. Throws DataError.
void validate_sample(const ImageSample& sample, int class_count);

// Number of distinct classes, i.e. max label + 1 over labeled samples.
int infer_class_count(std::span<const ImageSample> samples);

}  // namespace semileak
