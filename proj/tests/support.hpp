#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "semileak/core/image.hpp"
#include "semileak/core/membership.hpp"
#include "semileak/core/rng.hpp"

namespace semileak::test {

// Fresh empty directory under the system temp dir, unique per name.
inline std::filesystem::path scratch_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("semileak_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

// Random point on the probability simplex, optionally with exact zeros.
inline Posterior random_posterior(Rng& rng, int classes, bool allow_zeros = false) {
  Posterior p(static_cast<std::size_t>(classes));
  double sum = 0.0;
  for (auto& v : p) {
    v = allow_zeros && rng.bernoulli(0.2) ? 0.0 : -std::log(1.0 - rng.uniform());
    sum += v;
  }
  if (sum == 0.0) {
    p[0] = 1.0;
    return p;
  }
  for (auto& v : p) v /= sum;
  return p;
}

inline Image random_image(Rng& rng, int c = 3, int h = 32, int w = 32) {
  Image img(c, h, w);
  for (auto& v : img.data) v = static_cast<float>(rng.uniform());
  return img;
}

}  // namespace semileak::test
