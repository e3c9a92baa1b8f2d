#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace semileak {

enum class SslMethod { supervised, fixmatch, flexmatch, uda };
enum class SimFn { js, cosine, correlation, euclidean };
enum class ModelFamily { wrn28, tinycnn };

std::string_view to_string(SslMethod m);
std::string_view to_string(SimFn s);
std::string_view to_string(ModelFamily f);
SslMethod ssl_method_from_string(std::string_view s);
SimFn sim_fn_from_string(std::string_view s);
ModelFamily model_family_from_string(std::string_view s);

// Confidence threshold used when a config does not set one:
// 0.8 for UDA, 0.95 otherwise.
double default_tau(SslMethod m);

struct DataSource {
  enum class Kind { synthetic, cifar };
  Kind kind = Kind::synthetic;
  int synthetic_n = 2000;
  int synthetic_classes = 4;
  std::uint64_t synthetic_seed = 0;
  std::vector<std::string> cifar_paths;

  bool operator==(const DataSource&) const = default;
};

// Run configuration. The first block mirrors the experiment parameters of
// the audited setup; the rest are the knobs needed to run it at any scale.
struct ExperimentConfig {
  SslMethod ssl_method = SslMethod::fixmatch;
  int L = 500;                       // labeled samples in target_train
  double tau = 0.95;                 // pseudo-label confidence threshold
  int uratio = 7;                    // unlabeled : labeled batch ratio
  std::int64_t total_steps = 100 * 1024;
  double lr0 = 0.03;
  double ema_momentum = 0.999;
  int widen_factor = 2;
  int K = 10;                        // augmented views per attack query
  SimFn sim_fn = SimFn::js;
  int aug_level = 2;
  std::uint64_t seed = 0;

  ModelFamily family = ModelFamily::tinycnn;
  int base_channels = 8;             // tinycnn first-layer width before widening
  int batch_size = 64;               // labeled batch size
  double lambda_u = 1.0;
  double uda_temperature = 0.4;
  double sgd_momentum = 0.9;
  double weight_decay = 5e-4;
  std::int64_t checkpoint_every = 0; // 0: every total_steps / 20 steps
  bool supervised_full_train = true; // supervised runs label all of target_train

  int attack_epochs = 100;
  int attack_batch = 256;
  double attack_lr = 1e-3;
  int attack_aug_level = -1;         // -1: same as aug_level
  int entropy_bins = 50;
  bool per_class_thresholds = true;  // for the confidence and modified-entropy attacks

  double dp_clip_norm = 1.0;
  double dp_noise_scale = 1e-5;
  std::vector<int> stacking_widen{1, 2, 4, 8};

  DataSource data;

  // Throws ConfigError when an invariant is violated.
  void validate() const;

  std::int64_t checkpoint_interval() const;
  int effective_attack_aug_level() const {
    return attack_aug_level < 0 ? aug_level : attack_aug_level;
  }

  bool operator==(const ExperimentConfig&) const = default;
};

void to_json(nlohmann::json& j, const ExperimentConfig& c);
// Missing keys keep their defaults; a missing "tau" takes default_tau of the
// method. Unknown keys raise ConfigError so typos do not pass silently.
void from_json(const nlohmann::json& j, ExperimentConfig& c);

ExperimentConfig load_config(const std::filesystem::path& path);

}  // namespace semileak
