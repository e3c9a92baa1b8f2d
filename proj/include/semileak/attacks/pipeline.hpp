#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

#include "semileak/attacks/attacks.hpp"
#include "semileak/core/config.hpp"
#include "semileak/core/dataset.hpp"
#include "semileak/core/membership.hpp"
#include "semileak/core/split.hpp"
#include "semileak/ssl/ssl.hpp"

namespace semileak::attacks {

// Samples under attack with their ground truth, in a fixed order: the
// role's training ids (members) followed by its test ids (nonmembers).
struct AttackSet {
  std::vector<std::int64_t> ids;
  std::vector<Subset> subsets;
  std::vector<int> labels;  // class labels

  std::size_t size() const { return ids.size(); }
  bool is_member(std::size_t i) const { return subsets[i] != Subset::nonmember; }
};

// Throws DataError when a sample has no class label.
AttackSet attack_set(const SplitBundle& bundle, const SampleStore& store, ssl::Role role);

struct AttackConfig {
  std::vector<AttackKind> kinds{std::begin(kAllAttacks), std::end(kAllAttacks)};
  int views = 10;
  SimFn sim = SimFn::js;
  int aug_level = 2;
  bool per_class_thresholds = true;  // for conf and ment; corr and ent stay global
  AttackTrainOptions nn;
  std::uint64_t view_seed = 0;

  bool wants(AttackKind k) const;
  // Throws ConfigError on an empty attack list, views < 1 or a bad aug level.
  void validate() const;
};

// Attack settings of a run. Both seeds derive from attack_seed.
AttackConfig attack_config_from(const ExperimentConfig& config, std::uint64_t attack_seed);

// What the attacks read from one queried model over one attack set:
// posteriors of the clean images, and the A_DA features when requested.
struct FeatureTable {
  std::vector<Posterior> posteriors;
  std::vector<std::vector<double>> da;
};

// Views for sample id are drawn from Rng::derive(view_seed, "da-views", {id}),
// so every checkpoint and defense sees the same augmented images.
FeatureTable extract_features(const QueryFn& query, const AttackSet& set,
                              const SampleStore& store, const AttackConfig& config);

// Attack input for sample i: sorted posterior (nn), similarity vector (da),
// or the single raw metric value (threshold attacks).
std::vector<double> attack_feature(AttackKind kind, const FeatureTable& table,
                                   const AttackSet& set, std::size_t i);

// An attack calibrated on the shadow model.
struct CalibratedAttack {
  AttackKind kind = AttackKind::conf;
  std::optional<ThresholdRule> rule;
  std::optional<AttackModel> model;

  // One score per sample of set; larger means member.
  std::vector<double> score(const FeatureTable& table, const AttackSet& set) const;
};

// Learns the threshold or trains the attack model on shadow features.
// Throws PrerequisiteError when the shadow table lacks what the attack needs.
CalibratedAttack calibrate(AttackKind kind, const FeatureTable& shadow,
                           const AttackSet& shadow_set, const AttackConfig& config);

// Scores every sample of the target set exactly once.
std::vector<MembershipRecord> run_attack(const CalibratedAttack& attack,
                                         const FeatureTable& target, const AttackSet& target_set);

// JSONL, one line per sample: {"id", "subset", "values", "label"} where label
// is the membership bit.
void write_feature_dump(const std::filesystem::path& path, AttackKind kind,
                        const FeatureTable& table, const AttackSet& set);

}  // namespace semileak::attacks
