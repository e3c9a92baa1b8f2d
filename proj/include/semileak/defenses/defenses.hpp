#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "semileak/attacks/attacks.hpp"
#include "semileak/defenses/dpsgd.hpp"
#include "semileak/eval/eval.hpp"

namespace semileak::defenses {

enum class DefenseKind { none, early_stop, topk, stacking, dpsgd };

std::string_view to_string(DefenseKind k);
DefenseKind defense_from_string(std::string_view s);  // throws ConfigError

struct DefenseConfig {
  DefenseKind kind = DefenseKind::none;
  std::optional<std::int64_t> stop_step;  // required for early_stop
  int k = 1;                              // topk
  std::vector<int> stacking_widen{1, 2, 4, 8};
  DpSgdOptions dp;

  // Throws ConfigError when a field is out of range for this kind.
  void validate(int class_count, std::int64_t total_steps) const;
};

// Keeps the k largest entries in place and zeros the rest, without
// renormalizing. Ties at the k-th value go to the lowest class index.
// Throws ContractError unless 1 <= k <= p.size().
Posterior topk_filter(const Posterior& p, int k);

// Elementwise mean of the member posteriors. Throws ContractError with fewer
// than two members or mismatched class counts.
Posterior stacked_predict(std::span<const Posterior> members);
// Mean posterior of several models on one input.
Posterior stacked_predict(std::span<const attacks::QueryFn> models, const Image& x);

// Query paths seen by an attacker of a defended model.
attacks::QueryFn topk_query(attacks::QueryFn inner, int k);
attacks::QueryFn stacked_query(std::vector<attacks::QueryFn> members);

// Latest checkpoint step <= stop_step. Throws PrerequisiteError when none
// qualifies.
std::int64_t early_stop_checkpoint(std::span<const std::int64_t> steps, std::int64_t stop_step);

// Utility and attack AUCs at the early-stop checkpoint.
eval::StepReport early_stop_eval(std::span<const std::int64_t> steps, std::int64_t stop_step,
                                 const eval::CheckpointLoader& loader,
                                 const attacks::AttackSet& target_set,
                                 const attacks::AttackSet& shadow_set, const SampleStore& store,
                                 const eval::EvalOptions& options);

// One row per attack of a defended evaluation.
struct DefenseRow {
  std::string defense;
  attacks::AttackKind attack = attacks::AttackKind::da;
  double test_acc = 0.0;
  double auc_overall = 0.5;
  std::optional<double> auc_labeled;
  std::optional<double> auc_unlabeled;
};

std::vector<DefenseRow> defense_rows(std::string_view defense, const eval::StepReport& report);
void to_json(nlohmann::json& j, const DefenseRow& r);

}  // namespace semileak::defenses
