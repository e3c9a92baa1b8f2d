#include "semileak/defenses/defenses.hpp"

#include <algorithm>
#include <numeric>
#include <string>

#include "semileak/core/error.hpp"

namespace semileak::defenses {

namespace {

constexpr std::pair<DefenseKind, std::string_view> kNames[] = {
    {DefenseKind::none, "none"},
    {DefenseKind::early_stop, "early_stop"},
    {DefenseKind::topk, "topk"},
    {DefenseKind::stacking, "stacking"},
    {DefenseKind::dpsgd, "dpsgd"}};

}  // namespace

std::string_view to_string(DefenseKind k) {
  for (const auto& [kind, name] : kNames)
    if (kind == k) return name;
  return "none";
}

DefenseKind defense_from_string(std::string_view s) {
  for (const auto& [kind, name] : kNames)
    if (name == s) return kind;
  throw ConfigError("unknown defense '" + std::string(s) +
                    "' (expected none, early_stop, topk, stacking or dpsgd)");
}

void DefenseConfig::validate(int class_count, std::int64_t total_steps) const {
  switch (kind) {
    case DefenseKind::early_stop:
      if (!stop_step) throw ConfigError("early_stop needs a stop step");
      if (*stop_step < 0 || *stop_step > total_steps)
        throw ConfigError("stop_step must be in 0.." + std::to_string(total_steps));
      break;
    case DefenseKind::topk:
      if (k < 1 || k > class_count)
        throw ConfigError("k must be in 1.." + std::to_string(class_count) + ", got " +
                          std::to_string(k));
      break;
    case DefenseKind::stacking:
      if (stacking_widen.size() < 2) throw ConfigError("stacking needs at least two members");
      for (int w : stacking_widen)
        if (w < 1) throw ConfigError("stacking widen factors must be >= 1");
      break;
    case DefenseKind::dpsgd: dp.validate(); break;
    case DefenseKind::none: break;
  }
}

Posterior topk_filter(const Posterior& p, int k) {
  if (k < 1 || static_cast<std::size_t>(k) > p.size())
    throw ContractError("top-k needs 1 <= k <= " + std::to_string(p.size()) + ", got " +
                        std::to_string(k));
  std::vector<std::size_t> order(p.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return p[a] > p[b]; });
  Posterior out(p.size(), 0.0);
  for (std::size_t i = 0; i < static_cast<std::size_t>(k); ++i) out[order[i]] = p[order[i]];
  return out;
}

Posterior stacked_predict(std::span<const Posterior> members) {
  if (members.size() < 2) throw ContractError("stacking needs at least two members");
  const std::size_t c = members.front().size();
  Posterior out(c, 0.0);
  for (const auto& m : members) {
    if (m.size() != c) throw ContractError("stacked models disagree on the class count");
    for (std::size_t i = 0; i < c; ++i) out[i] += m[i];
  }
  for (auto& v : out) v /= static_cast<double>(members.size());
  return out;
}

Posterior stacked_predict(std::span<const attacks::QueryFn> models, const Image& x) {
  std::vector<Posterior> members;
  for (const auto& m : models) members.push_back(m(std::span(&x, 1)).at(0));
  return stacked_predict(members);
}

attacks::QueryFn topk_query(attacks::QueryFn inner, int k) {
  return [inner = std::move(inner), k](std::span<const Image> images) {
    auto post = inner(images);
    for (auto& p : post) p = topk_filter(p, k);
    return post;
  };
}

attacks::QueryFn stacked_query(std::vector<attacks::QueryFn> members) {
  if (members.size() < 2) throw ContractError("stacking needs at least two members");
  return [members = std::move(members)](std::span<const Image> images) {
    std::vector<std::vector<Posterior>> outs;
    for (const auto& m : members) outs.push_back(m(images));
    std::vector<Posterior> result(images.size());
    std::vector<Posterior> row(members.size());
    for (std::size_t i = 0; i < images.size(); ++i) {
      for (std::size_t m = 0; m < members.size(); ++m) row[m] = outs[m].at(i);
      result[i] = stacked_predict(row);
    }
    return result;
  };
}

std::int64_t early_stop_checkpoint(std::span<const std::int64_t> steps, std::int64_t stop_step) {
  std::optional<std::int64_t> best;
  for (auto s : steps)
    if (s <= stop_step && (!best || s > *best)) best = s;
  if (!best)
    throw PrerequisiteError("no checkpoint at or before step " + std::to_string(stop_step));
  return *best;
}

eval::StepReport early_stop_eval(std::span<const std::int64_t> steps, std::int64_t stop_step,
                                 const eval::CheckpointLoader& loader,
                                 const attacks::AttackSet& target_set,
                                 const attacks::AttackSet& shadow_set, const SampleStore& store,
                                 const eval::EvalOptions& options) {
  const std::int64_t step = early_stop_checkpoint(steps, stop_step);
  const auto [target, shadow] = loader(step);
  return eval::evaluate_checkpoint(step, target, shadow, target_set, shadow_set, store, options)
      .report;
}

std::vector<DefenseRow> defense_rows(std::string_view defense, const eval::StepReport& report) {
  std::vector<DefenseRow> rows;
  for (const auto& a : report.aucs) {
    DefenseRow r;
    r.defense = std::string(defense);
    r.attack = a.kind;
    r.test_acc = report.test_acc;
    r.auc_overall = a.overall;
    r.auc_labeled = a.labeled;
    r.auc_unlabeled = a.unlabeled;
    rows.push_back(std::move(r));
  }
  return rows;
}

void to_json(nlohmann::json& j, const DefenseRow& r) {
  auto opt = [](const std::optional<double>& v) {
    return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
  };
  j = {{"defense", r.defense},
       {"attack", attacks::to_string(r.attack)},
       {"test_acc", r.test_acc},
       {"auc_overall", r.auc_overall},
       {"auc_labeled", opt(r.auc_labeled)},
       {"auc_unlabeled", opt(r.auc_unlabeled)}};
}

}  // namespace semileak::defenses
