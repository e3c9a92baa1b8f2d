#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "semileak/attacks/pipeline.hpp"
#include "semileak/core/membership.hpp"

namespace semileak::eval {

// Probability that a random member outscores a random nonmember, ties
// counted as one half (Mann-Whitney with average ranks). labels are
// membership bits. Throws ContractError unless both classes are present.
double auc(std::span<const double> scores, std::span<const int> labels);
double auc(std::span<const MembershipRecord> records);

// AUC of one member subset against all nonmembers. Throws ContractError for
// Subset::nonmember or when either side is empty.
double subset_auc(std::span<const MembershipRecord> records, Subset subset);

// Fraction of argmax predictions equal to labels.
double accuracy(std::span<const Posterior> posteriors, std::span<const int> labels);

// Training accuracy minus testing accuracy.
double overfit_gap(const nn::Network<float>& model, const SampleStore& store,
                   std::span<const std::int64_t> train_ids, std::span<const std::int64_t> test_ids);

// Base-2 Jensen-Shannon divergence between the histograms of prediction
// entropies of the two sets, with `bins` equal-width bins over [0, ln C].
// Throws ContractError on empty sets or bins < 2.
double js_entropy_distance(std::span<const Posterior> members,
                           std::span<const Posterior> nonmembers, int bins);

struct AttackAuc {
  attacks::AttackKind kind = attacks::AttackKind::da;
  double overall = 0.5;
  std::optional<double> labeled;    // absent when the set has no such members
  std::optional<double> unlabeled;
};

struct StepReport {
  std::int64_t step = 0;
  double train_acc = 0.0;
  double test_acc = 0.0;
  double overfit_gap = 0.0;
  double js_entropy_distance = 0.0;
  std::vector<AttackAuc> aucs;

  const AttackAuc* find(attacks::AttackKind kind) const;
};

void to_json(nlohmann::json& j, const AttackAuc& a);
void to_json(nlohmann::json& j, const StepReport& r);
void from_json(const nlohmann::json& j, AttackAuc& a);
void from_json(const nlohmann::json& j, StepReport& r);

AttackAuc summarize(attacks::AttackKind kind, std::span<const MembershipRecord> records);

// Everything measured at one checkpoint.
struct CheckpointEval {
  StepReport report;
  std::map<attacks::AttackKind, std::vector<MembershipRecord>> records;
  std::map<attacks::AttackKind, attacks::CalibratedAttack> calibrated;
  attacks::FeatureTable target_features;
};

struct EvalOptions {
  attacks::AttackConfig attack;
  int entropy_bins = 50;
};

// Calibrates every configured attack on the shadow query and scores the
// target set. Accuracies and the entropy distance come from the target
// query's clean posteriors, so a defense wrapping the query is measured as
// deployed.
CheckpointEval evaluate_checkpoint(std::int64_t step, const attacks::QueryFn& target,
                                   const attacks::QueryFn& shadow,
                                   const attacks::AttackSet& target_set,
                                   const attacks::AttackSet& shadow_set,
                                   const SampleStore& store, const EvalOptions& options);

// Target and shadow queries for a checkpoint step.
using CheckpointLoader =
    std::function<std::pair<attacks::QueryFn, attacks::QueryFn>(std::int64_t step)>;

// One report per step, with the same attack configuration (and attack-model
// seed) at every checkpoint. Throws ContractError on an empty step list.
std::vector<StepReport> step_sweep(std::span<const std::int64_t> steps,
                                   const CheckpointLoader& loader,
                                   const attacks::AttackSet& target_set,
                                   const attacks::AttackSet& shadow_set, const SampleStore& store,
                                   const EvalOptions& options);

// ---------------------------------------------------------------- output

// Columns: step, train_acc, test_acc, overfit_gap, js_entropy_distance, then
// auc_<attack>, auc_<attack>_labeled, auc_<attack>_unlabeled per attack.
// Missing values are empty cells; no rows gives a header-only file.
std::string step_csv(std::span<const StepReport> reports,
                     std::span<const attacks::AttackKind> kinds);

struct Series {
  std::string name;
  std::vector<double> x;
  std::vector<double> y;
};

// Standalone SVG line chart. The axes span the data extrema (a degenerate
// range is widened by one unit around the value); the root element carries
// the ranges as data-x-min/data-x-max/data-y-min/data-y-max attributes.
std::string line_chart_svg(const std::string& title, const std::string& x_label,
                           const std::string& y_label, std::span<const Series> series);

// Fixed-precision number formatting shared by the CSV and chart writers.
std::string format_number(double v);

}  // namespace semileak::eval
