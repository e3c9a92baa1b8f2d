#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "semileak/core/config.hpp"
#include "semileak/core/image.hpp"
#include "semileak/core/membership.hpp"
#include "semileak/core/split.hpp"
#include "semileak/defenses/dpsgd.hpp"
#include "semileak/models/train_state.hpp"

namespace semileak::ssl {

// Argmax class when max(p) >= tau (inclusive), otherwise nothing.
std::optional<int> pseudo_label(const Posterior& p, double tau);

// p_i^(1/T) / sum_j p_j^(1/T), computed in log space. Throws ContractError
// when T <= 0.
Posterior sharpen(const Posterior& p, double temperature);

// Per-class learning status over the unlabeled pool. Each pool entry holds
// the class it was last confidently predicted as, or -1 if it never was.
class FlexState {
 public:
  FlexState() = default;
  FlexState(std::size_t pool_size, int class_count);

  std::size_t pool_size() const { return status_.size(); }
  int class_count() const { return class_count_; }

  // sigma_c: pool entries whose confident pseudo label is c.
  std::vector<std::int64_t> sigma() const;
  std::int64_t unconfident() const;

  // beta_c = sigma_c / max(max_c' sigma_c', unconfident), 0 when both are 0.
  std::vector<double> beta() const;
  // tau_c = tau * beta_c.
  std::vector<double> thresholds(double tau) const;

  void record(std::size_t pool_index, int label);
  const std::vector<int>& status() const { return status_; }

  nn::NamedArray to_array() const;
  static FlexState from_array(const nn::NamedArray& a, int class_count);

  bool operator==(const FlexState&) const = default;

 private:
  std::vector<int> status_;
  int class_count_ = 0;
};

std::vector<double> flex_beta(std::span<const std::int64_t> sigma, std::int64_t unconfident);

// One training step's inputs. Unlabeled entries carry their position in the
// unlabeled pool (for FlexMatch bookkeeping) and both views.
struct SSLBatch {
  std::vector<Image> labeled;
  std::vector<int> labels;
  std::vector<Image> unlabeled_weak;
  std::vector<Image> unlabeled_strong;
  std::vector<std::size_t> unlabeled_index;
};

struct StepOptions {
  double lr = 0.03;
  double tau = 0.95;
  double lambda_u = 1.0;
  double temperature = 0.4;  // UDA sharpening
  double ema_momentum = 0.999;
  std::optional<defenses::DpSgdOptions> dpsgd;
};

struct StepMetrics {
  std::int64_t step = 0;  // the step index that was executed
  double lr = 0.0;
  double loss_labeled = 0.0;
  double loss_unlabeled = 0.0;
  double mask_rate = 0.0;
  std::optional<double> train_acc;
  std::optional<double> test_acc;
  std::vector<double> class_thresholds;  // FlexMatch only
};

nlohmann::json to_json_line(const StepMetrics& m);

// Each step consumes one batch: forward/backward, SGD update, EMA update,
// and increments state.step. Empty labeled batches raise ContractError.
StepMetrics supervised_step(models::TrainState& state, const SSLBatch& batch,
                            const StepOptions& opts);
StepMetrics fixmatch_step(models::TrainState& state, const SSLBatch& batch,
                          const StepOptions& opts);
StepMetrics uda_step(models::TrainState& state, const SSLBatch& batch, const StepOptions& opts);
StepMetrics flexmatch_step(models::TrainState& state, FlexState& flex, const SSLBatch& batch,
                           const StepOptions& opts);

enum class Role { target, shadow };
std::string_view to_string(Role r);

// The training and test ids a role trains and evaluates on.
struct RoleData {
  std::vector<std::int64_t> labeled;
  std::vector<std::int64_t> unlabeled;
  std::vector<std::int64_t> train;  // labeled and unlabeled together
  std::vector<std::int64_t> test;
};
RoleData role_data(const SplitBundle& bundle, Role role, bool label_everything);

// Draws the batch for `step` from deterministic, stateless streams: the
// labeled and unlabeled pools are each walked in per-epoch permutations, and
// every view is generated from a stream keyed by (step, position).
SSLBatch make_batch(const SampleStore& store, const RoleData& data, std::uint64_t seed,
                    std::int64_t step, int batch_size, int uratio, int aug_level,
                    bool with_unlabeled);

struct TrainerOptions {
  std::optional<double> tau_override;  // bypasses config validation of tau
  std::optional<defenses::DpSgdOptions> dpsgd;
  bool evaluate_accuracy = true;       // train/test accuracy at checkpoints
  std::optional<models::TrainState> resume;
  std::function<void(const models::TrainState&, const StepMetrics*)> on_checkpoint;
  std::function<void(const StepMetrics&)> on_step;
};

// Training seed of a role: the model initialization and every batch stream
// derive from it.
std::uint64_t role_seed(std::uint64_t run_seed, Role role);

// Runs the configured method until total_steps. Checkpoints are emitted at
// step 0, every checkpoint interval and at the final step.
models::TrainState train(const ExperimentConfig& config, const SplitBundle& bundle,
                         const SampleStore& store, Role role,
                         const TrainerOptions& options = {});

// Accuracy of the EMA model on the given ids.
double accuracy(const nn::Network<float>& model, const SampleStore& store,
                std::span<const std::int64_t> ids);

// Looks up a sample by its dense id. Throws DataError on a gap.
const ImageSample& sample_at(const SampleStore& store, std::int64_t id);

}  // namespace semileak::ssl
