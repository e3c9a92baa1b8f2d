#include "semileak/core/dataset.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <iterator>
#include <string>

#include "semileak/core/error.hpp"
#include "semileak/core/rng.hpp"

namespace semileak {

void validate_sample(const ImageSample& sample, int class_count) {
  const auto& img = sample.image;
  if (img.size() != static_cast<std::size_t>(img.channels) * img.height * img.width)
    throw DataError("sample " + std::to_string(sample.id) + ": pixel buffer size mismatch");
  for (float v : img.data) {
    if (!std::isfinite(v) || v < 0.0f || v > 1.0f)
      throw DataError("sample " + std::to_string(sample.id) + ": pixel outside [0,1]");
  }
  if (sample.label && (*sample.label < 0 || *sample.label >= class_count))
    throw DataError("sample " + std::to_string(sample.id) + ": label " +
                    std::to_string(*sample.label) + " outside [0," +
                    std::to_string(class_count) + ")");
}

int infer_class_count(std::span<const ImageSample> samples) {
  int max_label = -1;
  for (const auto& s : samples)
    if (s.label) max_label = std::max(max_label, *s.label);
  return max_label + 1;
}

SampleStore load_cifar_binary(const std::filesystem::path& path, std::int64_t first_id) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open CIFAR batch " + path.string());
  const std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                         std::istreambuf_iterator<char>());
  const std::size_t full = bytes.size() / kCifarRecordBytes;
  if (bytes.size() % kCifarRecordBytes != 0) {
    throw DataError("truncated CIFAR record at byte offset " +
                    std::to_string(full * kCifarRecordBytes) + " in " + path.string() +
                    " (" + std::to_string(bytes.size() - full * kCifarRecordBytes) +
                    " of " + std::to_string(kCifarRecordBytes) + " bytes)");
  }
  SampleStore out;
  out.reserve(full);
  for (std::size_t r = 0; r < full; ++r) {
    const unsigned char* rec = bytes.data() + r * kCifarRecordBytes;
    ImageSample s;
    s.id = first_id + static_cast<std::int64_t>(r);
    s.label = static_cast<int>(rec[0]);
    s.image = Image(kCifarChannels, kCifarSide, kCifarSide);
    for (std::size_t i = 0; i < 3072; ++i)
      s.image.data[i] = static_cast<float>(rec[1 + i]) / 255.0f;
    out.push_back(std::move(s));
  }
  return out;
}

SampleStore load_cifar_batches(std::span<const std::filesystem::path> paths) {
  SampleStore all;
  for (const auto& p : paths) {
    auto part = load_cifar_binary(p, static_cast<std::int64_t>(all.size()));
    std::move(part.begin(), part.end(), std::back_inserter(all));
  }
  return all;
}

namespace {

// Membership test for each shape in local coordinates scaled to [-1, 1].
bool inside_shape(int shape, double u, double v) {
  switch (shape) {
    case 0: return u * u + v * v <= 1.0;
    case 1: return std::abs(u) <= 0.8 && std::abs(v) <= 0.8;
    case 2: return v <= 0.8 && v >= -0.9 && std::abs(u) <= (v + 0.9) / 1.7 * 0.95;
    case 3:
      return (std::abs(u) <= 0.3 && std::abs(v) <= 0.95) ||
             (std::abs(v) <= 0.3 && std::abs(u) <= 0.95);
    case 4: {
      const double r = std::sqrt(u * u + v * v);
      return r >= 0.55 && r <= 1.0;
    }
    case 5: return std::abs(u) + std::abs(v) <= 1.0;
    case 6:
      return std::abs(u) <= 0.9 && std::abs(v) <= 0.9 &&
             static_cast<int>(std::floor((v + 0.9) / 0.36)) % 2 == 0;
    case 7:
      return std::abs(u) <= 0.9 && std::abs(v) <= 0.9 &&
             (std::abs(u - v) <= 0.35 || std::abs(u + v) <= 0.35);
    default: return false;
  }
}

// Wide enough that prototype colours of neighbouring classes overlap.
constexpr double kColourJitter = 0.6;

Image draw_sample(int shape, Rng& rng) {
  constexpr int side = kCifarSide;
  Image img(kCifarChannels, side, side);

  double base[3];
  for (double& b : base) b = rng.uniform(0.2, 0.8);
  const double grad_angle = rng.uniform(0.0, 6.283185307179586);
  const double grad_amp = rng.uniform(0.0, 0.1);
  const double gx = std::cos(grad_angle) * grad_amp / side;
  const double gy = std::sin(grad_angle) * grad_amp / side;
  for (int c = 0; c < 3; ++c)
    for (int y = 0; y < side; ++y)
      for (int x = 0; x < side; ++x)
        img.at(c, y, x) = static_cast<float>(base[c] + gx * (x - side / 2) + gy * (y - side / 2));

  // Clutter rectangles.
  const int clutter = static_cast<int>(rng.uniform_int(3));
  for (int k = 0; k < clutter; ++k) {
    const int w = static_cast<int>(rng.uniform_range(2, 3));
    const int h = static_cast<int>(rng.uniform_range(2, 3));
    const int x0 = static_cast<int>(rng.uniform_range(0, side - w));
    const int y0 = static_cast<int>(rng.uniform_range(0, side - h));
    double col[3];
    for (double& v : col) v = rng.uniform(0.0, 1.0);
    for (int c = 0; c < 3; ++c)
      for (int y = y0; y < y0 + h; ++y)
        for (int x = x0; x < x0 + w; ++x) img.at(c, y, x) = static_cast<float>(col[c]);
  }

  // Each class has a prototype fill colour; samples scatter around it.
  static constexpr double kPrototype[kSyntheticShapeCount][3] = {
      {0.9, 0.2, 0.2}, {0.2, 0.8, 0.2}, {0.2, 0.3, 0.9}, {0.9, 0.8, 0.2},
      {0.8, 0.2, 0.8}, {0.2, 0.8, 0.8}, {0.95, 0.95, 0.95}, {0.1, 0.1, 0.1}};
  double col[3];
  for (int c = 0; c < 3; ++c)
    col[c] = std::clamp(kPrototype[shape][c] + rng.uniform(-kColourJitter, kColourJitter), 0.0, 1.0);
  const double cx = rng.uniform(12.0, 20.0);
  const double cy = rng.uniform(12.0, 20.0);
  const double radius = rng.uniform(8.0, 12.0);
  const double theta = rng.uniform(-0.15, 0.15);
  const double ct = std::cos(theta), st = std::sin(theta);
  for (int y = 0; y < side; ++y) {
    for (int x = 0; x < side; ++x) {
      const double dx = (x + 0.5 - cx) / radius;
      const double dy = (y + 0.5 - cy) / radius;
      const double u = ct * dx + st * dy;
      const double v = -st * dx + ct * dy;
      if (inside_shape(shape, u, v))
        for (int c = 0; c < 3; ++c) img.at(c, y, x) = static_cast<float>(col[c]);
    }
  }

  const double noise = rng.uniform(0.02, 0.06);
  for (float& p : img.data) {
    const double v = std::clamp(p + noise * rng.normal(), 0.0, 1.0);
    // Quantize to 8-bit levels like real image data.
    p = static_cast<float>(std::round(v * 255.0) / 255.0);
  }
  return img;
}

}  // namespace

SampleStore make_synthetic_dataset(int n, int class_count, std::uint64_t seed) {
  if (class_count < 1 || class_count > kSyntheticShapeCount)
    throw ContractError("synthetic dataset supports 1.." +
                        std::to_string(kSyntheticShapeCount) + " classes, got " +
                        std::to_string(class_count));
  if (n < class_count)
    throw ContractError("synthetic dataset needs n >= class_count");
  SampleStore out;
  out.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    Rng rng = Rng::derive(seed, "synthetic", {static_cast<std::uint64_t>(i)});
    ImageSample s;
    s.id = i;
    s.label = i % class_count;
    s.image = draw_sample(*s.label, rng);
    out.push_back(std::move(s));
  }
  return out;
}

std::uint64_t dataset_checksum(std::span<const ImageSample> samples) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto feed = [&h](std::uint64_t v) { h = mix64(h ^ v); };
  for (const auto& s : samples) {
    feed(static_cast<std::uint64_t>(s.id));
    feed(s.label ? static_cast<std::uint64_t>(*s.label) : ~0ULL);
    for (float p : s.image.data) feed(std::bit_cast<std::uint32_t>(p));
  }
  return h;
}

}  // namespace semileak
