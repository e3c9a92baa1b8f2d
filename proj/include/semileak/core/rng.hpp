#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>
#include <span>
#include <string_view>
#include <utility>

namespace semileak {

// Deterministic random stream.
//
// The engine is std::mt19937_64, whose output sequence is fixed by the
// standard. The value mappings (uniform ints, reals, normals) are written out
// here because the std:: distributions are implementation-defined and would
// break cross-platform reproducibility.
//
// Streams are never shared: every consumer derives its own stream from the
// run seed, a stream name and integer keys (sample id, step, view index...).
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  // Stream keyed by (seed, name, keys...). Different names or keys give
  // statistically independent streams.
  static Rng derive(std::uint64_t seed, std::string_view name,
                    std::initializer_list<std::uint64_t> keys = {});

  std::uint64_t next_u64() { return engine_(); }

  // Uniform integer in [0, n). n must be > 0.
  std::uint64_t uniform_int(std::uint64_t n);

  // Uniform integer in [lo, hi] inclusive.
  std::int64_t uniform_range(std::int64_t lo, std::int64_t hi);

  // Uniform double in [0, 1) with 53 bits of resolution.
  double uniform();

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Standard normal via Box-Muller. No cached spare, so the stream position
  // depends only on the number of calls.
  double normal();

  bool bernoulli(double p) { return uniform() < p; }

  template <typename T>
  void shuffle(std::span<T> values) {
    for (std::size_t i = values.size(); i > 1; --i) {
      const auto j = static_cast<std::size_t>(uniform_int(i));
      std::swap(values[i - 1], values[j]);
    }
  }

  bool operator==(const Rng& other) const { return engine_ == other.engine_; }

 private:
  std::mt19937_64 engine_;
};

// 64-bit finalizer used to combine seeds and keys.
std::uint64_t mix64(std::uint64_t x);

// Seed of a named pipeline stage ("split", "target", "shadow", "attack",
// "defense") derived from the run seed.
std::uint64_t stage_seed(std::uint64_t seed, std::string_view stage);

// FNV-1a over a string, used to turn stream names into keys.
std::uint64_t hash_name(std::string_view name);

}  // namespace semileak
