#include "semileak/core/config.hpp"

#include <set>
#include <string>

#include "semileak/core/error.hpp"
#include "semileak/core/io.hpp"

namespace semileak {

std::string_view to_string(SslMethod m) {
  switch (m) {
    case SslMethod::supervised: return "supervised";
    case SslMethod::fixmatch: return "fixmatch";
    case SslMethod::flexmatch: return "flexmatch";
    case SslMethod::uda: return "uda";
  }
  return "fixmatch";
}

std::string_view to_string(SimFn s) {
  switch (s) {
    case SimFn::js: return "js";
    case SimFn::cosine: return "cosine";
    case SimFn::correlation: return "correlation";
    case SimFn::euclidean: return "euclidean";
  }
  return "js";
}

std::string_view to_string(ModelFamily f) {
  return f == ModelFamily::wrn28 ? "wrn28" : "tinycnn";
}

SslMethod ssl_method_from_string(std::string_view s) {
  if (s == "supervised") return SslMethod::supervised;
  if (s == "fixmatch") return SslMethod::fixmatch;
  if (s == "flexmatch") return SslMethod::flexmatch;
  if (s == "uda") return SslMethod::uda;
  throw ConfigError("unknown ssl_method: " + std::string(s));
}

SimFn sim_fn_from_string(std::string_view s) {
  if (s == "js") return SimFn::js;
  if (s == "cosine") return SimFn::cosine;
  if (s == "correlation") return SimFn::correlation;
  if (s == "euclidean") return SimFn::euclidean;
  throw ConfigError("unknown sim_fn: " + std::string(s));
}

ModelFamily model_family_from_string(std::string_view s) {
  if (s == "wrn28") return ModelFamily::wrn28;
  if (s == "tinycnn") return ModelFamily::tinycnn;
  throw ConfigError("unknown model family: " + std::string(s));
}

double default_tau(SslMethod m) { return m == SslMethod::uda ? 0.8 : 0.95; }

void ExperimentConfig::validate() const {
  auto fail = [](const std::string& msg) { throw ConfigError("invalid config: " + msg); };
  if (!(tau > 0.0 && tau <= 1.0)) fail("tau must lie in (0, 1]");
  if (K < 1) fail("K must be >= 1");
  if (uratio < 1) fail("uratio must be >= 1");
  if (total_steps < 0) fail("total_steps must be >= 0");
  if (L < 1) fail("L must be >= 1");
  if (!(lr0 > 0.0)) fail("lr0 must be > 0");
  if (!(ema_momentum >= 0.0 && ema_momentum < 1.0)) fail("ema_momentum must lie in [0, 1)");
  if (aug_level < 0 || aug_level > 4) fail("aug_level must be in 0..4");
  if (attack_aug_level < -1 || attack_aug_level > 4) fail("attack_aug_level must be in -1..4");
  if (widen_factor != 1 && widen_factor != 2 && widen_factor != 4 && widen_factor != 8)
    fail("widen_factor must be one of 1, 2, 4, 8");
  if (base_channels < 1) fail("base_channels must be >= 1");
  if (batch_size < 1) fail("batch_size must be >= 1");
  if (lambda_u < 0.0) fail("lambda_u must be >= 0");
  if (!(uda_temperature > 0.0)) fail("uda_temperature must be > 0");
  if (sgd_momentum < 0.0 || sgd_momentum >= 1.0) fail("sgd_momentum must lie in [0, 1)");
  if (weight_decay < 0.0) fail("weight_decay must be >= 0");
  if (checkpoint_every < 0) fail("checkpoint_every must be >= 0");
  if (attack_epochs < 1 || attack_batch < 1 || !(attack_lr > 0.0))
    fail("attack training parameters must be positive");
  if (entropy_bins < 2) fail("entropy_bins must be >= 2");
  if (!(dp_clip_norm > 0.0)) fail("dp_clip_norm must be > 0");
  if (!(dp_noise_scale >= 0.0)) fail("dp_noise_scale must be >= 0");
  if (stacking_widen.size() < 2) fail("stacking_widen needs at least two widen factors");
  for (int w : stacking_widen)
    if (w != 1 && w != 2 && w != 4 && w != 8) fail("stacking_widen entries must be 1, 2, 4 or 8");
  if (data.kind == DataSource::Kind::synthetic) {
    if (data.synthetic_classes < 2) fail("synthetic dataset needs >= 2 classes");
    if (data.synthetic_n < 4 * data.synthetic_classes) fail("synthetic dataset too small");
  } else if (data.cifar_paths.empty()) {
    fail("cifar data source needs at least one path");
  }
}

std::int64_t ExperimentConfig::checkpoint_interval() const {
  if (checkpoint_every > 0) return checkpoint_every;
  return std::max<std::int64_t>(1, total_steps / 20);
}

void to_json(nlohmann::json& j, const ExperimentConfig& c) {
  nlohmann::json data;
  if (c.data.kind == DataSource::Kind::synthetic) {
    data = {{"source", "synthetic"},
            {"n", c.data.synthetic_n},
            {"classes", c.data.synthetic_classes},
            {"seed", c.data.synthetic_seed}};
  } else {
    data = {{"source", "cifar"}, {"paths", c.data.cifar_paths}};
  }
  j = nlohmann::json{{"ssl_method", to_string(c.ssl_method)},
                     {"L", c.L},
                     {"tau", c.tau},
                     {"uratio", c.uratio},
                     {"total_steps", c.total_steps},
                     {"lr0", c.lr0},
                     {"ema_momentum", c.ema_momentum},
                     {"widen_factor", c.widen_factor},
                     {"K", c.K},
                     {"sim_fn", to_string(c.sim_fn)},
                     {"aug_level", c.aug_level},
                     {"seed", c.seed},
                     {"family", to_string(c.family)},
                     {"base_channels", c.base_channels},
                     {"batch_size", c.batch_size},
                     {"lambda_u", c.lambda_u},
                     {"uda_temperature", c.uda_temperature},
                     {"sgd_momentum", c.sgd_momentum},
                     {"weight_decay", c.weight_decay},
                     {"checkpoint_every", c.checkpoint_every},
                     {"supervised_full_train", c.supervised_full_train},
                     {"attack_epochs", c.attack_epochs},
                     {"attack_batch", c.attack_batch},
                     {"attack_lr", c.attack_lr},
                     {"attack_aug_level", c.attack_aug_level},
                     {"entropy_bins", c.entropy_bins},
                     {"per_class_thresholds", c.per_class_thresholds},
                     {"dp_clip_norm", c.dp_clip_norm},
                     {"dp_noise_scale", c.dp_noise_scale},
                     {"stacking_widen", c.stacking_widen},
                     {"data", data}};
}

void from_json(const nlohmann::json& j, ExperimentConfig& c) {
  static const std::set<std::string> known = {
      "ssl_method", "L", "tau", "uratio", "total_steps", "lr0", "ema_momentum",
      "widen_factor", "K", "sim_fn", "aug_level", "seed", "family", "base_channels",
      "batch_size", "lambda_u", "uda_temperature", "sgd_momentum", "weight_decay",
      "checkpoint_every", "supervised_full_train", "attack_epochs", "attack_batch",
      "attack_lr", "attack_aug_level", "entropy_bins", "per_class_thresholds", "dp_clip_norm",
      "dp_noise_scale", "stacking_widen", "data"};
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  for (const auto& [key, _] : j.items())
    if (!known.count(key)) throw ConfigError("unknown config key: " + key);

  try {
    if (j.contains("ssl_method"))
      c.ssl_method = ssl_method_from_string(j["ssl_method"].get<std::string>());
    c.tau = j.contains("tau") ? j["tau"].get<double>() : default_tau(c.ssl_method);
    auto get = [&j](const char* key, auto& field) {
      if (j.contains(key)) j.at(key).get_to(field);
    };
    get("L", c.L);
    get("uratio", c.uratio);
    get("total_steps", c.total_steps);
    get("lr0", c.lr0);
    get("ema_momentum", c.ema_momentum);
    get("widen_factor", c.widen_factor);
    get("K", c.K);
    if (j.contains("sim_fn")) c.sim_fn = sim_fn_from_string(j["sim_fn"].get<std::string>());
    get("aug_level", c.aug_level);
    get("seed", c.seed);
    if (j.contains("family")) c.family = model_family_from_string(j["family"].get<std::string>());
    get("base_channels", c.base_channels);
    get("batch_size", c.batch_size);
    get("lambda_u", c.lambda_u);
    get("uda_temperature", c.uda_temperature);
    get("sgd_momentum", c.sgd_momentum);
    get("weight_decay", c.weight_decay);
    get("checkpoint_every", c.checkpoint_every);
    get("supervised_full_train", c.supervised_full_train);
    get("attack_epochs", c.attack_epochs);
    get("attack_batch", c.attack_batch);
    get("attack_lr", c.attack_lr);
    get("attack_aug_level", c.attack_aug_level);
    get("entropy_bins", c.entropy_bins);
    get("per_class_thresholds", c.per_class_thresholds);
    get("dp_clip_norm", c.dp_clip_norm);
    get("dp_noise_scale", c.dp_noise_scale);
    get("stacking_widen", c.stacking_widen);
    if (j.contains("data")) {
      const auto& d = j["data"];
      const auto source = d.value("source", std::string("synthetic"));
      if (source == "synthetic") {
        c.data.kind = DataSource::Kind::synthetic;
        c.data.synthetic_n = d.value("n", c.data.synthetic_n);
        c.data.synthetic_classes = d.value("classes", c.data.synthetic_classes);
        c.data.synthetic_seed = d.value("seed", c.data.synthetic_seed);
      } else if (source == "cifar") {
        c.data.kind = DataSource::Kind::cifar;
        d.at("paths").get_to(c.data.cifar_paths);
      } else {
        throw ConfigError("unknown data source: " + source);
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed config: ") + e.what());
  }
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_text(path));
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("config " + path.string() + " is not valid JSON: " + e.what());
  } catch (const DataError& e) {
    throw ConfigError(e.what());
  }
  ExperimentConfig c = j.get<ExperimentConfig>();
  c.validate();
  return c;
}

}  // namespace semileak
