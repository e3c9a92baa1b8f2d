#include "semileak/core/split.hpp"

#include <algorithm>
#include <numeric>
#include <string>
#include <unordered_map>
#include <unordered_set>

#include "semileak/core/error.hpp"
#include "semileak/core/rng.hpp"

namespace semileak {

namespace {

std::vector<std::int64_t> select(const std::vector<std::int64_t>& ids,
                                 const std::vector<bool>& mask, bool want) {
  std::vector<std::int64_t> out;
  for (std::size_t i = 0; i < ids.size(); ++i)
    if (mask[i] == want) out.push_back(ids[i]);
  return out;
}

// Picks labeled_count ids from part with per-class counts differing by at
// most one. The classes receiving the extra sample are chosen at random.
std::vector<bool> stratified_mask(const std::vector<std::int64_t>& part,
                                  const std::unordered_map<std::int64_t, int>& label_of,
                                  int labeled_count, int class_count, Rng rng,
                                  std::string_view part_name) {
  std::vector<std::vector<std::size_t>> by_class(static_cast<std::size_t>(class_count));
  for (std::size_t i = 0; i < part.size(); ++i)
    by_class[static_cast<std::size_t>(label_of.at(part[i]))].push_back(i);

  std::vector<int> quota(static_cast<std::size_t>(class_count), labeled_count / class_count);
  std::vector<int> order(static_cast<std::size_t>(class_count));
  std::iota(order.begin(), order.end(), 0);
  rng.shuffle(std::span<int>(order));
  for (int r = 0; r < labeled_count % class_count; ++r)
    ++quota[static_cast<std::size_t>(order[static_cast<std::size_t>(r)])];

  std::vector<bool> mask(part.size(), false);
  for (int c = 0; c < class_count; ++c) {
    auto& members = by_class[static_cast<std::size_t>(c)];
    const int need = quota[static_cast<std::size_t>(c)];
    if (static_cast<int>(members.size()) < need)
      throw DataError("class " + std::to_string(c) + " has " +
                      std::to_string(members.size()) + " samples in " +
                      std::string(part_name) + " but " + std::to_string(need) +
                      " labeled samples are required");
    rng.shuffle(std::span<std::size_t>(members));
    for (int k = 0; k < need; ++k) mask[members[static_cast<std::size_t>(k)]] = true;
  }
  return mask;
}

}  // namespace

std::vector<std::int64_t> SplitBundle::labeled_ids() const {
  return select(target_train, labeled_mask, true);
}
std::vector<std::int64_t> SplitBundle::unlabeled_ids() const {
  return select(target_train, labeled_mask, false);
}
std::vector<std::int64_t> SplitBundle::shadow_labeled_ids() const {
  return select(shadow_train, shadow_labeled_mask, true);
}
std::vector<std::int64_t> SplitBundle::shadow_unlabeled_ids() const {
  return select(shadow_train, shadow_labeled_mask, false);
}

SplitBundle split_dataset(std::span<const ImageSample> samples, int labeled_count,
                          std::uint64_t seed) {
  const std::size_t n = samples.size();
  if (n < 4) throw ContractError("split_dataset needs at least 4 samples");
  if (labeled_count < 1 || static_cast<std::size_t>(labeled_count) > n / 4)
    throw ContractError("labeled count " + std::to_string(labeled_count) +
                        " outside [1, " + std::to_string(n / 4) + "]");

  std::unordered_map<std::int64_t, int> label_of;
  for (const auto& s : samples) {
    if (!s.label) throw DataError("sample " + std::to_string(s.id) + " has no label");
    if (!label_of.emplace(s.id, *s.label).second)
      throw DataError("duplicate sample id " + std::to_string(s.id));
  }
  const int class_count = infer_class_count(samples);
  if (labeled_count < class_count)
    throw DataError("labeled count " + std::to_string(labeled_count) +
                    " cannot cover " + std::to_string(class_count) + " classes");

  std::vector<std::int64_t> ids;
  ids.reserve(n);
  for (const auto& s : samples) ids.push_back(s.id);
  Rng rng = Rng::derive(seed, "split");
  rng.shuffle(std::span<std::int64_t>(ids));

  std::vector<std::int64_t>* parts[4];
  SplitBundle b;
  b.class_count = class_count;
  parts[0] = &b.target_train;
  parts[1] = &b.target_test;
  parts[2] = &b.shadow_train;
  parts[3] = &b.shadow_test;
  std::size_t offset = 0;
  for (std::size_t p = 0; p < 4; ++p) {
    const std::size_t size = n / 4 + (p < n % 4 ? 1 : 0);
    parts[p]->assign(ids.begin() + static_cast<std::ptrdiff_t>(offset),
                     ids.begin() + static_cast<std::ptrdiff_t>(offset + size));
    std::sort(parts[p]->begin(), parts[p]->end());
    offset += size;
  }

  b.labeled_mask = stratified_mask(b.target_train, label_of, labeled_count, class_count,
                                   Rng::derive(seed, "split-labeled", {0}), "target_train");
  b.shadow_labeled_mask =
      stratified_mask(b.shadow_train, label_of, labeled_count, class_count,
                      Rng::derive(seed, "split-labeled", {1}), "shadow_train");
  return b;
}

void validate_bundle(const SplitBundle& b, std::span<const ImageSample> samples,
                     int labeled_count) {
  const std::vector<const std::vector<std::int64_t>*> parts = {
      &b.target_train, &b.target_test, &b.shadow_train, &b.shadow_test};
  std::unordered_set<std::int64_t> seen;
  std::size_t lo = SIZE_MAX, hi = 0;
  for (const auto* part : parts) {
    lo = std::min(lo, part->size());
    hi = std::max(hi, part->size());
    for (auto id : *part)
      if (!seen.insert(id).second)
        throw DataError("sample id " + std::to_string(id) + " appears in two partitions");
  }
  if (hi - lo > 1) throw DataError("partition sizes differ by more than one");
  if (seen.size() != samples.size()) throw DataError("partitions do not cover the dataset");
  std::unordered_map<std::int64_t, int> label_of;
  for (const auto& s : samples) {
    if (!seen.count(s.id)) throw DataError("sample " + std::to_string(s.id) + " not assigned");
    label_of[s.id] = s.label.value_or(-1);
  }

  auto check_mask = [&](const std::vector<std::int64_t>& ids, const std::vector<bool>& mask,
                        const char* name) {
    if (mask.size() != ids.size())
      throw DataError(std::string(name) + " labeled mask length mismatch");
    std::vector<int> per_class(static_cast<std::size_t>(b.class_count), 0);
    int total = 0;
    for (std::size_t i = 0; i < ids.size(); ++i) {
      if (!mask[i]) continue;
      ++total;
      const int label = label_of.at(ids[i]);
      if (label < 0 || label >= b.class_count)
        throw DataError(std::string(name) + " labeled sample without a valid label");
      ++per_class[static_cast<std::size_t>(label)];
    }
    if (total != labeled_count)
      throw DataError(std::string(name) + " has " + std::to_string(total) +
                      " labeled samples, expected " + std::to_string(labeled_count));
    for (int c = 0; c < b.class_count; ++c)
      if (per_class[static_cast<std::size_t>(c)] == 0)
        throw DataError(std::string(name) + " has no labeled sample of class " +
                        std::to_string(c));
  };
  check_mask(b.target_train, b.labeled_mask, "target_train");
  check_mask(b.shadow_train, b.shadow_labeled_mask, "shadow_train");
}

void to_json(nlohmann::json& j, const SplitBundle& b) {
  j = nlohmann::json{{"class_count", b.class_count},
                     {"target_train", b.target_train},
                     {"labeled_mask", b.labeled_mask},
                     {"target_test", b.target_test},
                     {"shadow_train", b.shadow_train},
                     {"shadow_labeled_mask", b.shadow_labeled_mask},
                     {"shadow_test", b.shadow_test}};
}

void from_json(const nlohmann::json& j, SplitBundle& b) {
  try {
    j.at("class_count").get_to(b.class_count);
    j.at("target_train").get_to(b.target_train);
    j.at("labeled_mask").get_to(b.labeled_mask);
    j.at("target_test").get_to(b.target_test);
    j.at("shadow_train").get_to(b.shadow_train);
    j.at("shadow_labeled_mask").get_to(b.shadow_labeled_mask);
    j.at("shadow_test").get_to(b.shadow_test);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed split manifest: ") + e.what());
  }
}

}  // namespace semileak
