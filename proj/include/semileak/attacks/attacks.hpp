#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "semileak/core/config.hpp"
#include "semileak/core/image.hpp"
#include "semileak/core/membership.hpp"
#include "semileak/core/rng.hpp"
#include "semileak/nn/network.hpp"

namespace semileak::attacks {

enum class AttackKind { nn, corr, conf, entropy, mentr, da };

inline constexpr AttackKind kAllAttacks[] = {AttackKind::nn,      AttackKind::corr,
                                             AttackKind::conf,    AttackKind::entropy,
                                             AttackKind::mentr,   AttackKind::da};

// Short names used on the command line and in reports: nn, corr, conf, ent,
// ment, da.
std::string_view to_string(AttackKind k);
AttackKind attack_from_string(std::string_view s);
// Comma-separated list; "all" expands to every attack. Throws ConfigError.
std::vector<AttackKind> parse_attack_list(std::string_view s);

// ---------------------------------------------------------------- features

// Posterior entries in descending order.
std::vector<double> sorted_posterior_feature(const Posterior& p);

// 1 when the argmax (ties to the lowest index) equals y.
int metric_corr(const Posterior& p, int y);
double metric_conf(const Posterior& p, int y);
// Shannon entropy in nats, 0 ln 0 = 0.
double metric_entropy(const Posterior& p);
// -(1 - p_y) ln p_y - sum_{i != y} p_i ln(1 - p_i), probabilities clamped
// to [1e-12, 1 - 1e-12] inside the logs.
double metric_mentr(const Posterior& p, int y);

// Raw metric of a threshold attack (corr, conf, entropy, mentr).
double metric_value(AttackKind k, const Posterior& p, int y);

// ---------------------------------------------------------------- thresholds

enum class Direction {
  greater_equal,  // member when value >= threshold
  less_equal,     // member when value <= threshold
};

// Direction in which each threshold attack's metric points to membership.
Direction member_direction(AttackKind k);

struct ThresholdRule {
  Direction direction = Direction::greater_equal;
  bool per_class = false;
  double global = 0.0;
  std::vector<double> thresholds;  // per class; empty for a global rule

  double threshold_for(int label) const;
  // Signed distance from the threshold, oriented so larger means member.
  double margin(double value, int label) const;
};

void to_json(nlohmann::json& j, const ThresholdRule& r);

// Mean of true-positive and true-negative rates of "member when value
// passes threshold".
double balanced_accuracy(std::span<const double> members, std::span<const double> nonmembers,
                         double threshold, Direction direction);

// Best threshold over the observed values and the midpoints between
// consecutive distinct values; ties go to the smallest candidate.
// Throws ContractError when either set is empty.
ThresholdRule learn_threshold(std::span<const double> member_scores,
                              std::span<const double> nonmember_scores, Direction direction);

// Per-class variant: one threshold per ground-truth class, falling back to
// the global threshold for classes missing members or nonmembers.
ThresholdRule learn_threshold(std::span<const double> member_scores,
                              std::span<const int> member_labels,
                              std::span<const double> nonmember_scores,
                              std::span<const int> nonmember_labels, Direction direction,
                              bool per_class, int class_count);

// ---------------------------------------------------------------- A_DA

// js: Jensen-Shannon divergence in bits (clamped to [0, 1]);
// cosine: 1 - cosine similarity (0 when both vectors are zero, 1 when only
//   one is); correlation: 1 - Pearson correlation, 0 when either vector is
//   constant; euclidean: L2 distance.
// Throws ContractError on a length mismatch.
double distance(SimFn fn, std::span<const double> p, std::span<const double> q);

// K weak views followed by K strong views (at aug_level) of x, drawn from rng.
std::vector<Image> da_views(const Image& x, int K, int aug_level, Rng& rng);

// The 3K^2 similarity feature from the posteriors of K weak and K strong
// views: sorted w-w block, then sorted s-s block, then sorted w-s block, each
// over all K x K ordered pairs and in descending order. A NaN distance
// raises DataError naming the pair.
std::vector<double> da_features_from_posteriors(std::span<const Posterior> weak,
                                                std::span<const Posterior> strong, SimFn fn);

// Querying interface of a model under attack. Any defense wrapping the
// model's outputs sits behind this.
using QueryFn = std::function<std::vector<Posterior>(std::span<const Image>)>;

QueryFn model_query(const nn::Network<float>& model);

std::vector<double> da_features(const QueryFn& model, const Image& x, int K, SimFn fn,
                                int aug_level, Rng& rng);

// ---------------------------------------------------------------- attack model

struct AttackTrainOptions {
  int epochs = 100;
  int batch_size = 256;
  double lr = 1e-3;
  std::uint64_t seed = 0;
};

// Standardizing MLP (input_dim -> 64 -> 32 -> 2). Inputs are shifted and
// scaled by the statistics of its training set.
struct AttackModel {
  nn::Network<float> net;
  std::vector<double> mean;
  std::vector<double> scale;

  int input_dim() const { return static_cast<int>(mean.size()); }
  // Probability of the member class for each row.
  std::vector<double> member_probability(const std::vector<std::vector<double>>& rows) const;
};

// Adam on mean cross-entropy; shuffling is derived from options.seed.
// Throws ContractError when only one label is present or rows are ragged.
AttackModel train_attack_nn(const std::vector<std::vector<double>>& features,
                            const std::vector<int>& labels, const AttackTrainOptions& options);

void save_attack_model(const AttackModel& model, const std::filesystem::path& path);
AttackModel load_attack_model(const std::filesystem::path& path);

}  // namespace semileak::attacks
