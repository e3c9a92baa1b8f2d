#include "semileak/attacks/pipeline.hpp"

#include <algorithm>
#include <sstream>
#include <string>

#include "semileak/core/error.hpp"
#include "semileak/core/io.hpp"
#include "semileak/core/parallel.hpp"

namespace semileak::attacks {

AttackSet attack_set(const SplitBundle& bundle, const SampleStore& store, ssl::Role role) {
  const bool target = role == ssl::Role::target;
  const auto& train = target ? bundle.target_train : bundle.shadow_train;
  const auto& mask = target ? bundle.labeled_mask : bundle.shadow_labeled_mask;
  const auto& test = target ? bundle.target_test : bundle.shadow_test;
  if (mask.size() != train.size()) throw DataError("labeled mask does not match the training ids");
  AttackSet set;
  auto add = [&](std::int64_t id, Subset subset) {
    const auto& s = ssl::sample_at(store, id);
    if (!s.label) throw DataError("sample " + std::to_string(id) + " has no class label");
    set.ids.push_back(id);
    set.subsets.push_back(subset);
    set.labels.push_back(*s.label);
  };
  for (std::size_t i = 0; i < train.size(); ++i)
    add(train[i], mask[i] ? Subset::labeled_member : Subset::unlabeled_member);
  for (auto id : test) add(id, Subset::nonmember);
  return set;
}

bool AttackConfig::wants(AttackKind k) const {
  return std::find(kinds.begin(), kinds.end(), k) != kinds.end();
}

void AttackConfig::validate() const {
  if (kinds.empty()) throw ConfigError("no attacks selected");
  if (views < 1) throw ConfigError("views must be >= 1, got " + std::to_string(views));
  if (aug_level < 0 || aug_level > 4)
    throw ConfigError("attack aug_level must be in 0..4, got " + std::to_string(aug_level));
}

AttackConfig attack_config_from(const ExperimentConfig& config, std::uint64_t attack_seed) {
  AttackConfig a;
  a.views = config.K;
  a.sim = config.sim_fn;
  a.aug_level = config.effective_attack_aug_level();
  a.per_class_thresholds = config.per_class_thresholds;
  a.nn.epochs = config.attack_epochs;
  a.nn.batch_size = config.attack_batch;
  a.nn.lr = config.attack_lr;
  a.nn.seed = stage_seed(attack_seed, "attack-model");
  a.view_seed = stage_seed(attack_seed, "attack-views");
  return a;
}

FeatureTable extract_features(const QueryFn& query, const AttackSet& set,
                              const SampleStore& store, const AttackConfig& config) {
  config.validate();
  FeatureTable t;
  std::vector<Image> images;
  images.reserve(set.size());
  for (auto id : set.ids) images.push_back(ssl::sample_at(store, id).image);
  t.posteriors = query(images);
  if (t.posteriors.size() != images.size())
    throw ContractError("model returned the wrong number of posteriors");
  if (!config.wants(AttackKind::da)) return t;

  // Samples are grouped so each query carries several samples' views.
  constexpr std::size_t kGroup = 16;
  const auto k = static_cast<std::size_t>(config.views);
  t.da.resize(set.size());
  const std::size_t groups = (set.size() + kGroup - 1) / kGroup;
  parallel_for(groups, [&](std::size_t g) {
    const std::size_t begin = g * kGroup;
    const std::size_t end = std::min(set.size(), begin + kGroup);
    std::vector<Image> views;
    views.reserve((end - begin) * 2 * k);
    for (std::size_t i = begin; i < end; ++i) {
      Rng rng = Rng::derive(config.view_seed, "da-views",
                            {static_cast<std::uint64_t>(set.ids[i])});
      auto v = da_views(images[i], config.views, config.aug_level, rng);
      std::move(v.begin(), v.end(), std::back_inserter(views));
    }
    const auto post = query(views);
    if (post.size() != views.size())
      throw ContractError("model returned the wrong number of posteriors");
    for (std::size_t i = begin; i < end; ++i) {
      const std::span<const Posterior> all(post.data() + (i - begin) * 2 * k, 2 * k);
      try {
        t.da[i] = da_features_from_posteriors(all.subspan(0, k), all.subspan(k, k), config.sim);
      } catch (const DataError& e) {
        throw DataError("sample " + std::to_string(set.ids[i]) + ": " + e.what());
      }
    }
  });
  return t;
}

std::vector<double> attack_feature(AttackKind kind, const FeatureTable& table,
                                   const AttackSet& set, std::size_t i) {
  switch (kind) {
    case AttackKind::nn: return sorted_posterior_feature(table.posteriors.at(i));
    case AttackKind::da:
      if (table.da.size() != set.size()) throw PrerequisiteError("A_DA features were not extracted");
      return table.da[i];
    default: return {metric_value(kind, table.posteriors.at(i), set.labels.at(i))};
  }
}

namespace {

std::vector<std::vector<double>> feature_rows(AttackKind kind, const FeatureTable& table,
                                              const AttackSet& set) {
  if (table.posteriors.size() != set.size())
    throw PrerequisiteError("feature table does not cover the attack set");
  std::vector<std::vector<double>> rows(set.size());
  for (std::size_t i = 0; i < set.size(); ++i) rows[i] = attack_feature(kind, table, set, i);
  return rows;
}

bool is_model_attack(AttackKind k) { return k == AttackKind::nn || k == AttackKind::da; }

}  // namespace

CalibratedAttack calibrate(AttackKind kind, const FeatureTable& shadow,
                           const AttackSet& shadow_set, const AttackConfig& config) {
  const auto rows = feature_rows(kind, shadow, shadow_set);
  CalibratedAttack a;
  a.kind = kind;
  if (is_model_attack(kind)) {
    std::vector<int> labels(shadow_set.size());
    for (std::size_t i = 0; i < labels.size(); ++i) labels[i] = shadow_set.is_member(i) ? 1 : 0;
    a.model = train_attack_nn(rows, labels, config.nn);
    return a;
  }
  std::vector<double> ms, ns;
  std::vector<int> ml, nl;
  for (std::size_t i = 0; i < shadow_set.size(); ++i) {
    auto& scores = shadow_set.is_member(i) ? ms : ns;
    auto& labels = shadow_set.is_member(i) ? ml : nl;
    scores.push_back(rows[i][0]);
    labels.push_back(shadow_set.labels[i]);
  }
  const bool per_class = config.per_class_thresholds &&
                         (kind == AttackKind::conf || kind == AttackKind::mentr);
  int classes = 0;
  for (const auto& p : shadow.posteriors) classes = std::max(classes, static_cast<int>(p.size()));
  a.rule = learn_threshold(ms, ml, ns, nl, member_direction(kind), per_class, classes);
  return a;
}

std::vector<double> CalibratedAttack::score(const FeatureTable& table,
                                            const AttackSet& set) const {
  const auto rows = feature_rows(kind, table, set);
  if (model) return model->member_probability(rows);
  if (!rule) throw PrerequisiteError("attack " + std::string(to_string(kind)) + " is not calibrated");
  std::vector<double> out(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) out[i] = rule->margin(rows[i][0], set.labels[i]);
  return out;
}

std::vector<MembershipRecord> run_attack(const CalibratedAttack& attack,
                                         const FeatureTable& target,
                                         const AttackSet& target_set) {
  const auto scores = attack.score(target, target_set);
  std::vector<MembershipRecord> records(target_set.size());
  for (std::size_t i = 0; i < records.size(); ++i) {
    records[i].sample_id = target_set.ids[i];
    records[i].subset = target_set.subsets[i];
    records[i].is_member = target_set.is_member(i);
    records[i].score = scores[i];
  }
  return records;
}

void write_feature_dump(const std::filesystem::path& path, AttackKind kind,
                        const FeatureTable& table, const AttackSet& set) {
  const auto rows = feature_rows(kind, table, set);
  std::ostringstream out;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const nlohmann::json line = {{"id", set.ids[i]},
                                 {"subset", to_string(set.subsets[i])},
                                 {"values", rows[i]},
                                 {"label", set.is_member(i) ? 1 : 0}};
    out << line.dump() << '\n';
  }
  write_text_atomic(path, out.str());
}

}  // namespace semileak::attacks
