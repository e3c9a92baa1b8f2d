#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"

namespace semileak::nn {

struct NamedArray {
  std::string name;
  std::vector<std::int64_t> shape;
  std::vector<float> values;
};

// Self-describing binary container used for checkpoints and attack models.
//
// Layout (all integers little-endian):
//   "SEMILEAK"                      8-byte magic
//   u32 version
//   u64 header length, header JSON  {"meta": ..., "arrays": [{name, shape, count}]}
//   f32 values of every array, in header order
//   u64 FNV-1a checksum of header and value bytes
struct ArrayFile {
  nlohmann::json meta = nlohmann::json::object();
  std::vector<NamedArray> arrays;

  const NamedArray* find(const std::string& name) const;
  // Throws DataError when the array is missing.
  const NamedArray& at(const std::string& name) const;
};

inline constexpr std::uint32_t kArrayFileVersion = 1;

void write_array_file(const std::filesystem::path& path, const ArrayFile& file);

// Throws DataError on bad magic, version mismatch, truncation or checksum
// failure.
ArrayFile read_array_file(const std::filesystem::path& path);

}  // namespace semileak::nn
