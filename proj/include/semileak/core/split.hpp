#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "json.hpp"

#include "semileak/core/image.hpp"

namespace semileak {

// The four disjoint partitions of a dataset. target_train and shadow_train
// each carry a labeled mask aligned with their id lists; the shadow mask lets
// the shadow model reproduce the target's semi-supervised setup.
struct SplitBundle {
  std::vector<std::int64_t> target_train;
  std::vector<bool> labeled_mask;
  std::vector<std::int64_t> target_test;
  std::vector<std::int64_t> shadow_train;
  std::vector<bool> shadow_labeled_mask;
  std::vector<std::int64_t> shadow_test;
  int class_count = 0;

  std::vector<std::int64_t> labeled_ids() const;
  std::vector<std::int64_t> unlabeled_ids() const;
  std::vector<std::int64_t> shadow_labeled_ids() const;
  std::vector<std::int64_t> shadow_unlabeled_ids() const;

  bool operator==(const SplitBundle&) const = default;
};

// Random four-way split with stratified labeled selection inside
// target_train and shadow_train. Remainder samples (n mod 4) go to
// target_train first, then target_test, then shadow_train.
//
// Throws ContractError on bad arguments and DataError when some class has
// too few samples in a training quarter to supply its labeled share.
SplitBundle split_dataset(std::span<const ImageSample> samples, int labeled_count,
                          std::uint64_t seed);

// Checks every SplitBundle invariant against the sample store; throws
// DataError describing the first violation.
void validate_bundle(const SplitBundle& bundle, std::span<const ImageSample> samples,
                     int labeled_count);

void to_json(nlohmann::json& j, const SplitBundle& b);
void from_json(const nlohmann::json& j, SplitBundle& b);

}  // namespace semileak
