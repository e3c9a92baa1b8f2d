#include <algorithm>
#include <chrono>
#include <cstdio>
#include <iostream>
#include <memory>
#include <sstream>

#include "CLI11.hpp"
#include "semileak/attacks/pipeline.hpp"
#include "semileak/cli/cli.hpp"
#include "semileak/core/dataset.hpp"
#include "semileak/core/error.hpp"
#include "semileak/core/io.hpp"
#include "semileak/core/split.hpp"
#include "semileak/defenses/defenses.hpp"
#include "semileak/eval/eval.hpp"
#include "semileak/models/train_state.hpp"

namespace semileak::cli {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

constexpr const char* kManifest = "manifest.json";
constexpr const char* kTimings = "timings.json";

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::string step_name(std::int64_t step) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "step_%08lld", static_cast<long long>(step));
  return buf;
}

std::string compact(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", v);
  return buf;
}

SampleStore build_store(const ExperimentConfig& c) {
  if (c.data.kind == DataSource::Kind::synthetic)
    return make_synthetic_dataset(c.data.synthetic_n, c.data.synthetic_classes,
                                  c.data.synthetic_seed);
  std::vector<fs::path> paths(c.data.cifar_paths.begin(), c.data.cifar_paths.end());
  return load_cifar_batches(paths);
}

// Wall-clock seconds per stage, kept out of the manifest so manifests stay
// byte-identical across runs.
void record_timing(const fs::path& out, const std::string& stage, double seconds) {
  json t = json::object();
  if (fs::exists(out / kTimings)) {
    try {
      t = read_json(out / kTimings);
    } catch (const DataError&) {
      t = json::object();
    }
  }
  t[stage] = seconds;
  write_json_atomic(out / kTimings, t);
}

class StageTimer {
 public:
  StageTimer(fs::path out, std::string stage)
      : out_(std::move(out)), stage_(std::move(stage)), start_(std::chrono::steady_clock::now()) {}
  void finish() {
    const auto d = std::chrono::steady_clock::now() - start_;
    record_timing(out_, stage_, std::chrono::duration<double>(d).count());
  }

 private:
  fs::path out_;
  std::string stage_;
  std::chrono::steady_clock::time_point start_;
};

// An output directory with its manifest.
class Run {
 public:
  fs::path out;
  json manifest;
  ExperimentConfig config;

  static Run open(const Options& o) {
    Run r;
    r.out = o.out;
    if (!fs::exists(o.out / kManifest))
      throw PrerequisiteError("no run in " + o.out.string() + "; run 'semileak prepare' first");
    r.manifest = read_json(o.out / kManifest);
    try {
      r.config = r.manifest.at("config").get<ExperimentConfig>();
    } catch (const json::exception& e) {
      throw DataError(std::string("manifest config is malformed: ") + e.what());
    }
    if (o.config) {
      ExperimentConfig given = load_config(*o.config);
      if (o.seed) given.seed = *o.seed;
      if (!(given == r.config))
        throw ConfigError("--config differs from the configuration this run was prepared with");
    } else if (o.seed && *o.seed != r.config.seed) {
      throw ConfigError("--seed differs from the seed this run was prepared with");
    }
    return r;
  }

  void save() const { write_json_atomic(out / kManifest, manifest); }

  bool done(const std::string& stage) const {
    return manifest.contains("stages") && manifest["stages"].value(stage, false);
  }

  void require(const std::string& stage) const {
    if (!done(stage)) {
      std::string command = stage;
      if (stage == "train_target") command = "train target";
      if (stage == "train_shadow") command = "train shadow";
      throw PrerequisiteError("stage '" + stage + "' has not completed; run 'semileak " +
                              command + "' first");
    }
  }

  void mark(const std::string& stage) {
    manifest["stages"][stage] = true;
    save();
  }

  SampleStore store() const {
    SampleStore s = build_store(config);
    const auto expected = manifest.at("dataset").at("checksum").get<std::string>();
    if (hex64(dataset_checksum(s)) != expected)
      throw DataError("dataset no longer matches the one this run was prepared with");
    return s;
  }

  SplitBundle bundle(const SampleStore& store) const {
    const auto rel = manifest.at("artifacts").at("split").get<std::string>();
    SplitBundle b;
    try {
      b = read_json(out / rel).get<SplitBundle>();
    } catch (const json::exception& e) {
      throw DataError("split file is malformed: " + std::string(e.what()));
    }
    validate_bundle(b, store, config.L);
    return b;
  }

  std::string rel(const fs::path& p) const { return p.lexically_relative(out).generic_string(); }

  models::ClassifierSpec spec(const SplitBundle& b) const {
    return models::classifier_spec_from(config, b.class_count);
  }
};

// Query function owning its network.
attacks::QueryFn owned_query(std::shared_ptr<nn::Network<float>> net) {
  return [net](std::span<const Image> images) { return models::predict_posteriors(*net, images); };
}

std::shared_ptr<nn::Network<float>> load_ema(const fs::path& path,
                                             const models::ClassifierSpec& spec) {
  auto state = models::checkpoint_load(path, spec);
  return std::make_shared<nn::Network<float>>(std::move(state.ema));
}

struct CheckpointRef {
  std::int64_t step = 0;
  std::string path;
};

std::vector<CheckpointRef> checkpoints(const Run& run, ssl::Role role) {
  std::vector<CheckpointRef> out;
  const auto& all = run.manifest["artifacts"];
  if (!all.contains("checkpoints") || !all["checkpoints"].contains(std::string(to_string(role))))
    return out;
  for (const auto& e : all["checkpoints"][std::string(to_string(role))])
    out.push_back({e.at("step").get<std::int64_t>(), e.at("path").get<std::string>()});
  return out;
}

// Checkpoint steps present for both roles, in order.
std::vector<std::int64_t> paired_steps(const Run& run) {
  const auto t = checkpoints(run, ssl::Role::target);
  const auto s = checkpoints(run, ssl::Role::shadow);
  if (t.size() != s.size())
    throw DataError("target and shadow checkpoint series differ in length");
  std::vector<std::int64_t> steps;
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (t[i].step != s[i].step) throw DataError("target and shadow checkpoint steps differ");
    steps.push_back(t[i].step);
  }
  if (steps.empty()) throw PrerequisiteError("no checkpoints recorded; run 'semileak train' first");
  return steps;
}

std::string checkpoint_path(const Run& run, ssl::Role role, std::int64_t step) {
  for (const auto& c : checkpoints(run, role))
    if (c.step == step) return c.path;
  throw DataError("no " + std::string(to_string(role)) + " checkpoint at step " +
                  std::to_string(step));
}

// Attack settings of the run with command-line overrides applied.
attacks::AttackConfig attack_settings(const Run& run, const Options& o) {
  ExperimentConfig c = run.config;
  if (o.views) c.K = *o.views;
  if (o.sim) c.sim_fn = sim_fn_from_string(*o.sim);
  if (o.aug_level) c.attack_aug_level = *o.aug_level;
  c.validate();
  auto a = attacks::attack_config_from(c, stage_seed(c.seed, "attack"));
  a.kinds = attacks::parse_attack_list(o.attacks);
  a.validate();
  return a;
}

std::string attack_tag(const attacks::AttackConfig& a) {
  return "k" + std::to_string(a.views) + "_" + std::string(to_string(a.sim)) + "_aug" +
         std::to_string(a.aug_level);
}

std::string format_score(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string records_csv(const std::vector<MembershipRecord>& records) {
  std::ostringstream out;
  out << "id,subset,is_member,score\n";
  for (const auto& r : records)
    out << r.sample_id << ',' << to_string(r.subset) << ',' << (r.is_member ? 1 : 0) << ','
        << format_score(r.score) << '\n';
  return out.str();
}

std::string final_auc_csv(const eval::StepReport& r) {
  std::ostringstream out;
  out << "attack,auc_overall,auc_labeled,auc_unlabeled\n";
  for (const auto& a : r.aucs)
    out << attacks::to_string(a.kind) << ',' << eval::format_number(a.overall) << ','
        << (a.labeled ? eval::format_number(*a.labeled) : "") << ','
        << (a.unlabeled ? eval::format_number(*a.unlabeled) : "") << '\n';
  return out.str();
}

eval::EvalOptions eval_options(const Run& run, const attacks::AttackConfig& a) {
  eval::EvalOptions e;
  e.attack = a;
  e.entropy_bins = run.config.entropy_bins;
  return e;
}

// Trains one role under `config`, keeping only the final checkpoint.
std::shared_ptr<nn::Network<float>> train_final(const ExperimentConfig& config,
                                                const SplitBundle& bundle,
                                                const SampleStore& store, ssl::Role role,
                                                const std::optional<defenses::DpSgdOptions>& dp,
                                                const fs::path& path) {
  ssl::TrainerOptions opts;
  opts.evaluate_accuracy = false;
  opts.dpsgd = dp;
  const auto state = ssl::train(config, bundle, store, role, opts);
  fs::create_directories(path.parent_path());
  models::checkpoint_save(state, path);
  return std::make_shared<nn::Network<float>>(state.ema);
}

}  // namespace

// ---------------------------------------------------------------- stages

void cmd_prepare(const Options& o) {
  StageTimer timer(o.out, "prepare");
  ExperimentConfig config = o.config ? load_config(*o.config) : ExperimentConfig{};
  if (o.seed) config.seed = *o.seed;
  config.validate();
  fs::create_directories(o.out);
  // Preparing an existing run again keeps its later stages.
  json m = json::object();
  if (fs::exists(o.out / kManifest)) {
    m = read_json(o.out / kManifest);
    if (m.contains("config") && m["config"] != json(config))
      throw ConfigError("output directory " + o.out.string() +
                        " already holds a run with a different configuration");
  }

  const SampleStore store = build_store(config);
  SplitBundle bundle;
  try {
    bundle = split_dataset(store, config.L, stage_seed(config.seed, "split"));
  } catch (const ContractError& e) {
    throw ConfigError(e.what());
  }
  write_json_atomic(o.out / "split.json", bundle);

  m["run_id"] = hex64(mix64(hash_name(json(config).dump())));
  m["config"] = config;
  m["dataset"] = {{"samples", store.size()},
                  {"classes", bundle.class_count},
                  {"checksum", hex64(dataset_checksum(store))}};
  m["split"] = {{"target_train", bundle.target_train.size()},
                {"target_test", bundle.target_test.size()},
                {"shadow_train", bundle.shadow_train.size()},
                {"shadow_test", bundle.shadow_test.size()},
                {"labeled", bundle.labeled_ids().size()}};
  m["artifacts"]["split"] = "split.json";
  for (const char* s : {"prepare", "train_target", "train_shadow", "attack", "defend", "report"})
    if (!m["stages"].contains(s)) m["stages"][s] = false;
  m["stages"]["prepare"] = true;
  write_json_atomic(o.out / kManifest, m);
  timer.finish();
}

void cmd_train(const Options& o, ssl::Role role) {
  Run run = Run::open(o);
  run.require("prepare");
  const std::string role_name(to_string(role));
  const std::string stage = "train_" + role_name;
  StageTimer timer(run.out, stage);
  const SampleStore store = run.store();
  const SplitBundle bundle = run.bundle(store);
  const auto spec = run.spec(bundle);

  const fs::path dir = run.out / "checkpoints" / role_name;
  const fs::path log_path = run.out / "logs" / (role_name + ".jsonl");
  fs::create_directories(dir);
  fs::create_directories(log_path.parent_path());

  ssl::TrainerOptions opts;
  json list = json::array();
  std::vector<std::string> log_lines;
  const auto existing = checkpoints(run, role);
  if (!run.done(stage) && !existing.empty()) {
    // An interrupted run resumes from its last checkpoint.
    opts.resume = models::checkpoint_load(run.out / existing.back().path, spec);
    for (const auto& c : existing) list.push_back({{"step", c.step}, {"path", c.path}});
    if (fs::exists(log_path)) {
      std::istringstream in(read_text(log_path));
      for (std::string line; std::getline(in, line);) {
        if (line.empty()) continue;
        const auto j = json::parse(line, nullptr, false);
        if (!j.is_discarded() && j.value("step", std::int64_t{-1}) <= existing.back().step)
          log_lines.push_back(line);
      }
    }
  }

  opts.on_checkpoint = [&](const models::TrainState& state, const ssl::StepMetrics* m) {
    const fs::path path = dir / (step_name(state.step) + ".ckpt");
    models::checkpoint_save(state, path);
    list.push_back({{"step", state.step}, {"path", run.rel(path)}});
    log_lines.push_back(ssl::to_json_line(*m).dump());
    std::string text;
    for (const auto& l : log_lines) text += l + "\n";
    write_text_atomic(log_path, text);
    run.manifest["artifacts"]["checkpoints"][role_name] = list;
    run.manifest["artifacts"]["logs"][role_name] = run.rel(log_path);
    run.save();
  };
  ssl::train(run.config, bundle, store, role, opts);
  run.mark(stage);
  timer.finish();
}

void cmd_attack(const Options& o) {
  Run run = Run::open(o);
  run.require("train_target");
  run.require("train_shadow");
  StageTimer timer(run.out, "attack");
  const auto settings = attack_settings(run, o);
  const SampleStore store = run.store();
  const SplitBundle bundle = run.bundle(store);
  const auto spec = run.spec(bundle);
  const auto steps = paired_steps(run);
  const auto target_set = attacks::attack_set(bundle, store, ssl::Role::target);
  const auto shadow_set = attacks::attack_set(bundle, store, ssl::Role::shadow);
  const auto options = eval_options(run, settings);

  const std::string tag = attack_tag(settings);
  const fs::path dir = run.out / "attacks" / tag;
  fs::create_directories(dir);

  std::vector<eval::StepReport> sweep;
  eval::CheckpointEval last;
  for (auto step : steps) {
    auto target = load_ema(run.out / checkpoint_path(run, ssl::Role::target, step), spec);
    auto shadow = load_ema(run.out / checkpoint_path(run, ssl::Role::shadow, step), spec);
    auto result = eval::evaluate_checkpoint(step, owned_query(target), owned_query(shadow),
                                            target_set, shadow_set, store, options);
    sweep.push_back(result.report);
    if (step == steps.back()) last = std::move(result);
  }

  json files;
  write_text_atomic(dir / "sweep.csv", eval::step_csv(sweep, settings.kinds));
  files["sweep"] = run.rel(dir / "sweep.csv");
  write_text_atomic(dir / "auc.csv", final_auc_csv(last.report));
  files["auc"] = run.rel(dir / "auc.csv");
  json thresholds = json::object();
  for (auto kind : settings.kinds) {
    const std::string name(attacks::to_string(kind));
    const fs::path features = dir / ("features_" + name + ".jsonl");
    attacks::write_feature_dump(features, kind, last.target_features, target_set);
    files["features"][name] = run.rel(features);
    const fs::path records = dir / ("records_" + name + ".csv");
    write_text_atomic(records, records_csv(last.records.at(kind)));
    files["records"][name] = run.rel(records);
    const auto& cal = last.calibrated.at(kind);
    if (cal.model) {
      const fs::path model = dir / ("model_" + name + ".ckpt");
      attacks::save_attack_model(*cal.model, model);
      files["attack_models"][name] = run.rel(model);
    }
    if (cal.rule) thresholds[name] = *cal.rule;
  }
  if (!thresholds.empty()) {
    write_json_atomic(dir / "thresholds.json", thresholds);
    files["thresholds"] = run.rel(dir / "thresholds.json");
  }

  json names = json::array();
  for (auto k : settings.kinds) names.push_back(attacks::to_string(k));
  run.manifest["attack_runs"][tag] = {{"views", settings.views},
                                      {"sim", to_string(settings.sim)},
                                      {"aug_level", settings.aug_level},
                                      {"attacks", names},
                                      {"final_step", steps.back()},
                                      {"final", last.report.aucs},
                                      {"sweep", sweep},
                                      {"artifacts", files}};
  run.mark("attack");
  timer.finish();
}

void cmd_defend(const Options& o) {
  Run run = Run::open(o);
  run.require("prepare");
  StageTimer timer(run.out, "defend");
  defenses::DefenseConfig d;
  d.kind = defenses::defense_from_string(o.defense);
  d.stop_step = o.stop_step;
  if (o.k) d.k = *o.k;
  d.stacking_widen = run.config.stacking_widen;
  d.dp.clip_norm = run.config.dp_clip_norm;
  d.dp.noise_scale = run.config.dp_noise_scale;

  const auto settings = attack_settings(run, o);
  const SampleStore store = run.store();
  const SplitBundle bundle = run.bundle(store);
  d.validate(bundle.class_count, run.config.total_steps);
  const auto spec = run.spec(bundle);
  const auto target_set = attacks::attack_set(bundle, store, ssl::Role::target);
  const auto shadow_set = attacks::attack_set(bundle, store, ssl::Role::shadow);
  const auto options = eval_options(run, settings);
  const fs::path dir = run.out / "defenses";

  auto trained_pair = [&](std::int64_t step) {
    auto t = load_ema(run.out / checkpoint_path(run, ssl::Role::target, step), spec);
    auto s = load_ema(run.out / checkpoint_path(run, ssl::Role::shadow, step), spec);
    return std::pair<attacks::QueryFn, attacks::QueryFn>(owned_query(t), owned_query(s));
  };
  auto require_training = [&] {
    run.require("train_target");
    run.require("train_shadow");
  };

  // Defense randomness (stacking members, noisy training) has its own stream.
  ExperimentConfig defended = run.config;
  defended.seed = stage_seed(run.config.seed, "defense");

  std::string label;
  json artifacts = json::array();
  eval::StepReport report;
  switch (d.kind) {
    case defenses::DefenseKind::none: {
      require_training();
      label = "none";
      const auto steps = paired_steps(run);
      const auto [t, s] = trained_pair(steps.back());
      report = eval::evaluate_checkpoint(steps.back(), t, s, target_set, shadow_set, store, options)
                   .report;
      break;
    }
    case defenses::DefenseKind::early_stop: {
      require_training();
      label = "early_stop_" + std::to_string(*d.stop_step);
      const auto steps = paired_steps(run);
      report = defenses::early_stop_eval(steps, *d.stop_step, trained_pair, target_set,
                                         shadow_set, store, options);
      break;
    }
    case defenses::DefenseKind::topk: {
      require_training();
      label = "topk_" + std::to_string(d.k);
      const auto steps = paired_steps(run);
      const auto [t, s] = trained_pair(steps.back());
      // The attacker's shadow is served through the same filter.
      report = eval::evaluate_checkpoint(steps.back(), defenses::topk_query(t, d.k),
                                         defenses::topk_query(s, d.k), target_set, shadow_set,
                                         store, options)
                   .report;
      break;
    }
    case defenses::DefenseKind::stacking: {
      label = "stacking";
      for (int w : d.stacking_widen) label += "_" + std::to_string(w);
      std::vector<attacks::QueryFn> targets, shadows;
      for (int w : d.stacking_widen) {
        ExperimentConfig member = defended;
        member.widen_factor = w;
        for (auto role : {ssl::Role::target, ssl::Role::shadow}) {
          const fs::path path =
              dir / label / ("w" + std::to_string(w) + "_" + std::string(to_string(role)) + ".ckpt");
          auto net = train_final(member, bundle, store, role, std::nullopt, path);
          (role == ssl::Role::target ? targets : shadows).push_back(owned_query(net));
          artifacts.push_back(run.rel(path));
        }
      }
      report = eval::evaluate_checkpoint(defended.total_steps,
                                         defenses::stacked_query(targets),
                                         defenses::stacked_query(shadows), target_set, shadow_set,
                                         store, options)
                   .report;
      break;
    }
    case defenses::DefenseKind::dpsgd: {
      label = "dpsgd_clip" + compact(d.dp.clip_norm) + "_noise" + compact(d.dp.noise_scale);
      std::vector<attacks::QueryFn> q;
      for (auto role : {ssl::Role::target, ssl::Role::shadow}) {
        const fs::path path = dir / label / (std::string(to_string(role)) + ".ckpt");
        q.push_back(owned_query(train_final(defended, bundle, store, role, d.dp, path)));
        artifacts.push_back(run.rel(path));
      }
      report = eval::evaluate_checkpoint(defended.total_steps, q[0], q[1], target_set,
                                         shadow_set, store, options)
                   .report;
      break;
    }
  }

  json rows = run.manifest.contains("defenses") ? run.manifest["defenses"] : json::array();
  json kept = json::array();
  for (const auto& r : rows)
    if (r.value("defense", std::string()) != label) kept.push_back(r);
  for (const auto& r : defenses::defense_rows(label, report)) {
    json j = r;
    j["step"] = report.step;
    kept.push_back(j);
  }
  run.manifest["defenses"] = kept;
  if (!artifacts.empty()) run.manifest["artifacts"]["defenses"][label] = artifacts;
  run.mark("defend");
  timer.finish();
}

void cmd_report(const Options& o) {
  Run run = Run::open(o);
  run.require("prepare");
  StageTimer timer(run.out, "report");
  const fs::path dir = run.out / "reports";
  fs::create_directories(dir);
  json files = json::array();
  auto emit = [&](const std::string& name, const std::string& text) {
    write_text_atomic(dir / name, text);
    files.push_back(run.rel(dir / name));
  };

  const json runs = run.manifest.contains("attack_runs") ? run.manifest["attack_runs"]
                                                          : json::object();
  Options defaults = o;
  defaults.views.reset();
  defaults.sim.reset();
  defaults.aug_level.reset();
  defaults.attacks = "all";
  const std::string default_tag = attack_tag(attack_settings(run, defaults));

  auto kinds_of = [](const json& r) {
    std::vector<attacks::AttackKind> kinds;
    for (const auto& n : r.at("attacks")) kinds.push_back(attacks::attack_from_string(n.get<std::string>()));
    return kinds;
  };
  auto charts = [&](const std::string& prefix, const std::vector<eval::StepReport>& sweep,
                    const std::vector<attacks::AttackKind>& kinds) {
    std::vector<double> steps;
    for (const auto& r : sweep) steps.push_back(static_cast<double>(r.step));
    std::vector<eval::Series> auc_series;
    for (auto k : kinds) {
      eval::Series s{std::string(attacks::to_string(k)), steps, {}};
      for (const auto& r : sweep) {
        const auto* a = r.find(k);
        s.y.push_back(a ? a->overall : std::nan(""));
      }
      auc_series.push_back(std::move(s));
    }
    emit(prefix + "_auc.svg", eval::line_chart_svg("Attack AUC by training step", "step",
                                                   "AUC", auc_series));
    eval::Series gap{"overfit_gap", steps, {}}, js{"js_entropy_distance", steps, {}};
    for (const auto& r : sweep) {
      gap.y.push_back(r.overfit_gap);
      js.y.push_back(r.js_entropy_distance);
    }
    emit(prefix + "_overfit.svg",
         eval::line_chart_svg("Overfitting gap by training step", "step", "train - test accuracy",
                              std::vector<eval::Series>{gap}));
    emit(prefix + "_js.svg",
         eval::line_chart_svg("Entropy JS divergence by training step", "step",
                              "JS divergence (bits)", std::vector<eval::Series>{js}));
  };

  // Main sweep: the run's own attack settings; header-only without one.
  {
    std::vector<eval::StepReport> sweep;
    std::vector<attacks::AttackKind> kinds(std::begin(attacks::kAllAttacks),
                                           std::end(attacks::kAllAttacks));
    if (runs.contains(default_tag)) {
      sweep = runs[default_tag].at("sweep").get<std::vector<eval::StepReport>>();
      kinds = kinds_of(runs[default_tag]);
    }
    emit("sweep.csv", eval::step_csv(sweep, kinds));
    charts("sweep", sweep, kinds);
  }
  for (const auto& [tag, r] : runs.items()) {
    if (tag == default_tag) continue;
    const auto sweep = r.at("sweep").get<std::vector<eval::StepReport>>();
    emit("sweep_" + tag + ".csv", eval::step_csv(sweep, kinds_of(r)));
  }

  std::ostringstream ablation;
  ablation << "views,sim,aug_level,attack,auc_overall,auc_labeled,auc_unlabeled\n";
  auto cell = [](const json& v) { return v.is_null() ? std::string() : eval::format_number(v.get<double>()); };
  for (const auto& [tag, r] : runs.items())
    for (const auto& a : r.at("final"))
      ablation << r.at("views").get<int>() << ',' << r.at("sim").get<std::string>() << ','
               << r.at("aug_level").get<int>() << ',' << a.at("attack").get<std::string>() << ','
               << cell(a.at("auc_overall")) << ',' << cell(a.at("auc_labeled")) << ','
               << cell(a.at("auc_unlabeled")) << '\n';
  emit("ablation.csv", ablation.str());

  std::ostringstream def;
  def << "defense,attack,step,test_acc,auc_overall,auc_labeled,auc_unlabeled\n";
  if (run.manifest.contains("defenses"))
    for (const auto& r : run.manifest["defenses"])
      def << r.at("defense").get<std::string>() << ',' << r.at("attack").get<std::string>() << ','
          << r.at("step").get<std::int64_t>() << ',' << cell(r.at("test_acc")) << ','
          << cell(r.at("auc_overall")) << ',' << cell(r.at("auc_labeled")) << ','
          << cell(r.at("auc_unlabeled")) << '\n';
  emit("defenses.csv", def.str());

  run.manifest["artifacts"]["reports"] = files;
  run.mark("report");
  timer.finish();
}

void cmd_run(const Options& o) {
  cmd_prepare(o);
  Options later = o;
  later.config.reset();
  later.seed.reset();
  cmd_train(later, ssl::Role::target);
  cmd_train(later, ssl::Role::shadow);
  cmd_attack(later);
  cmd_report(later);
}

// ---------------------------------------------------------------- main

int main(int argc, char** argv) {
  CLI::App app{"Semi-supervised training and membership-inference auditing"};
  app.require_subcommand(1);
  Options o;
  std::string role;

  auto common = [&o](CLI::App* sub) {
    sub->add_option("--out", o.out, "Run directory")->required();
    sub->add_option("--config", o.config, "Experiment configuration (JSON)");
    sub->add_option("--seed", o.seed, "Run seed");
    sub->add_option("--attacks", o.attacks, "Comma-separated attacks or 'all'");
    sub->add_option("--defense", o.defense, "none, early_stop, topk, stacking or dpsgd");
    sub->add_option("--stop-step", o.stop_step, "Early-stopping step");
    sub->add_option("--k", o.k, "Posteriors kept by the top-k defense");
    sub->add_option("--views", o.views, "Augmented views per attack query");
    sub->add_option("--sim", o.sim, "Similarity: js, cosine, correlation or euclidean")
        ->check(CLI::IsMember({"js", "cosine", "correlation", "euclidean"}));
    sub->add_option("--aug-level", o.aug_level, "Attack augmentation level")
        ->check(CLI::Range(0, 4));
  };
  auto* prepare = app.add_subcommand("prepare", "Split the dataset");
  auto* train = app.add_subcommand("train", "Train the target or shadow model");
  train->add_option("role", role, "target or shadow")
      ->required()
      ->check(CLI::IsMember({"target", "shadow"}));
  auto* attack = app.add_subcommand("attack", "Run membership-inference attacks");
  auto* defend = app.add_subcommand("defend", "Evaluate a defense");
  auto* report = app.add_subcommand("report", "Write CSV and SVG reports");
  auto* run = app.add_subcommand("run", "prepare, train both roles, attack and report");
  for (auto* sub : {prepare, train, attack, defend, report, run}) common(sub);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }

  try {
    if (prepare->parsed()) cmd_prepare(o);
    if (train->parsed()) cmd_train(o, role == "target" ? ssl::Role::target : ssl::Role::shadow);
    if (attack->parsed()) cmd_attack(o);
    if (defend->parsed()) cmd_defend(o);
    if (report->parsed()) cmd_report(o);
    if (run->parsed()) cmd_run(o);
  } catch (const ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const ContractError& e) {
    std::cerr << "invalid argument: " << e.what() << '\n';
    return kExitConfig;
  } catch (const PrerequisiteError& e) {
    std::cerr << "missing prerequisite: " << e.what() << '\n';
    return kExitPrerequisite;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kExitData;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitFailure;
  }
  return kExitOk;
}

}  // namespace semileak::cli
