#pragma once

#include <cstdint>
#include <filesystem>
#include <span>

#include "semileak/core/image.hpp"

namespace semileak {

inline constexpr int kCifarSide = 32;
inline constexpr int kCifarChannels = 3;
inline constexpr std::size_t kCifarRecordBytes = 1 + 3072;

// Reads a CIFAR-10 binary batch: records of one label byte followed by
// 3072 pixel bytes (1024 R, 1024 G, 1024 B, each row-major). Pixels are
// scaled by 1/255 and ids are assigned by file order starting at first_id.
// A truncated trailing record raises DataError naming its byte offset.
SampleStore load_cifar_binary(const std::filesystem::path& path,
                              std::int64_t first_id = 0);

// Concatenates several batch files, keeping ids dense across files.
SampleStore load_cifar_batches(std::span<const std::filesystem::path> paths);

// Largest class count make_synthetic_dataset supports.
inline constexpr int kSyntheticShapeCount = 8;

// Procedural 32x32x3 colored-shape images. Sample i gets label i % classes,
// so classes are balanced (the first n % classes classes get one extra).
// Each image has a shaded background, small clutter rectangles and a class
// shape filled with a heavily jittered class colour, plus pixel noise.
SampleStore make_synthetic_dataset(int n, int class_count, std::uint64_t seed);

// Order-sensitive checksum over ids, labels and pixel bit patterns.
std::uint64_t dataset_checksum(std::span<const ImageSample> samples);

}  // namespace semileak
