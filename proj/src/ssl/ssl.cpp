#include "semileak/ssl/ssl.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "semileak/augment/augment.hpp"
#include "semileak/core/error.hpp"
#include "semileak/core/parallel.hpp"
#include "semileak/models/schedule.hpp"
#include "semileak/nn/loss.hpp"

namespace semileak::ssl {

std::optional<int> pseudo_label(const Posterior& p, double tau) {
  if (p.empty()) return std::nullopt;
  const int c = argmax(p);
  if (p[static_cast<std::size_t>(c)] >= tau) return c;
  return std::nullopt;
}

Posterior sharpen(const Posterior& p, double temperature) {
  if (!(temperature > 0.0)) throw ContractError("sharpening temperature must be > 0");
  Posterior out(p.size(), 0.0);
  double mx = -INFINITY;
  std::vector<double> logs(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) {
    logs[i] = p[i] > 0.0 ? std::log(p[i]) / temperature : -INFINITY;
    mx = std::max(mx, logs[i]);
  }
  if (!std::isfinite(mx)) return out;
  double sum = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    out[i] = std::exp(logs[i] - mx);
    sum += out[i];
  }
  for (auto& v : out) v /= sum;
  return out;
}

// ---------------------------------------------------------------- FlexState

FlexState::FlexState(std::size_t pool_size, int class_count)
    : status_(pool_size, -1), class_count_(class_count) {
  if (class_count < 1) throw ContractError("FlexState needs at least one class");
}

std::vector<std::int64_t> FlexState::sigma() const {
  std::vector<std::int64_t> s(static_cast<std::size_t>(class_count_), 0);
  for (int v : status_)
    if (v >= 0) ++s[static_cast<std::size_t>(v)];
  return s;
}

std::int64_t FlexState::unconfident() const {
  return std::count(status_.begin(), status_.end(), -1);
}

std::vector<double> flex_beta(std::span<const std::int64_t> sigma, std::int64_t unconfident) {
  std::int64_t denom = unconfident;
  for (auto s : sigma) denom = std::max(denom, s);
  std::vector<double> beta(sigma.size(), 0.0);
  if (denom == 0) return beta;
  for (std::size_t c = 0; c < sigma.size(); ++c)
    beta[c] = static_cast<double>(sigma[c]) / static_cast<double>(denom);
  return beta;
}

std::vector<double> FlexState::beta() const {
  const auto s = sigma();
  return flex_beta(s, unconfident());
}

std::vector<double> FlexState::thresholds(double tau) const {
  auto b = beta();
  for (auto& v : b) v *= tau;
  return b;
}

void FlexState::record(std::size_t pool_index, int label) {
  if (pool_index >= status_.size() || label < 0 || label >= class_count_)
    throw ContractError("FlexState record out of range");
  status_[pool_index] = label;
}

nn::NamedArray FlexState::to_array() const {
  nn::NamedArray a;
  a.name = "flex/status";
  a.shape = {static_cast<std::int64_t>(status_.size())};
  a.values.assign(status_.begin(), status_.end());
  return a;
}

FlexState FlexState::from_array(const nn::NamedArray& a, int class_count) {
  FlexState f(a.values.size(), class_count);
  for (std::size_t i = 0; i < a.values.size(); ++i) {
    const int v = static_cast<int>(a.values[i]);
    if (v < -1 || v >= class_count) throw DataError("FlexMatch status entry out of range");
    f.status_[i] = v;
  }
  return f;
}

nlohmann::json to_json_line(const StepMetrics& m) {
  nlohmann::json j = {{"step", m.step},
                      {"lr", m.lr},
                      {"loss_labeled", m.loss_labeled},
                      {"loss_unlabeled", m.loss_unlabeled},
                      {"mask_rate", m.mask_rate}};
  if (m.train_acc) j["train_acc"] = *m.train_acc;
  if (m.test_acc) j["test_acc"] = *m.test_acc;
  if (!m.class_thresholds.empty()) j["class_thresholds"] = m.class_thresholds;
  return j;
}

// ---------------------------------------------------------------- steps

namespace {

enum class Method { supervised, fixmatch, flexmatch, uda };

// What the unlabeled half of a step trains on: per-sample weights (zero when
// masked) and either hard labels or soft targets.
struct UnlabeledPlan {
  std::vector<double> weights;
  std::vector<int> labels;
  std::vector<Posterior> targets;
  bool soft = false;
  double mask_rate = 0.0;

  bool active() const {
    return std::any_of(weights.begin(), weights.end(), [](double w) { return w != 0.0; });
  }
};

UnlabeledPlan plan_unlabeled(models::TrainState& s, const SSLBatch& b, const StepOptions& o,
                             Method method, FlexState* flex, StepMetrics& metrics) {
  UnlabeledPlan plan;
  const std::size_t u = b.unlabeled_weak.size();
  plan.weights.assign(u, 0.0);
  if (method == Method::supervised || u == 0) return plan;
  if (b.unlabeled_strong.size() != u || b.unlabeled_index.size() != u)
    throw ContractError("unlabeled weak/strong views disagree in count");

  const auto weak = nn::softmax_rows(
      s.model.forward(models::images_to_tensor<float>(b.unlabeled_weak), nn::StatMode::frozen,
                      nullptr));
  const double w = o.lambda_u / static_cast<double>(u);
  plan.soft = method == Method::uda;
  plan.labels.assign(u, 0);
  if (plan.soft) plan.targets.resize(u);

  std::vector<double> class_tau;
  std::vector<double> beta;
  if (method == Method::flexmatch) {
    beta = flex->beta();
    class_tau = flex->thresholds(o.tau);
    metrics.class_thresholds = class_tau;
  }

  std::size_t kept = 0;
  for (std::size_t i = 0; i < u; ++i) {
    const Posterior& p = weak[i];
    const int c = argmax(p);
    const double conf = p[static_cast<std::size_t>(c)];
    bool keep = false;
    switch (method) {
      case Method::fixmatch:
      case Method::uda:
        keep = pseudo_label(p, o.tau).has_value();
        break;
      case Method::flexmatch: {
        const auto cu = static_cast<std::size_t>(c);
        keep = beta[cu] > 0.0 && conf >= class_tau[cu];
        break;
      }
      case Method::supervised:
        break;
    }
    plan.labels[i] = c;
    if (plan.soft) plan.targets[i] = sharpen(p, o.temperature);
    if (keep) {
      plan.weights[i] = w;
      ++kept;
    }
  }
  if (method == Method::flexmatch)
    for (std::size_t i = 0; i < u; ++i)
      if (auto c = pseudo_label(weak[i], o.tau)) flex->record(b.unlabeled_index[i], *c);
  plan.mask_rate = static_cast<double>(kept) / static_cast<double>(u);
  return plan;
}

// Mean per-sample gradient through the clip-and-noise mechanism. Each row's
// gradient is scaled by the row count so the unclipped, noise-free mean
// equals the ordinary batch gradient. Normalization layers see their running
// statistics during the per-sample passes so that no sample's gradient
// depends on another; one batch pass beforehand keeps those statistics
// current.
void dp_gradients(models::TrainState& s, const SSLBatch& b, const UnlabeledPlan& plan,
                  const std::vector<double>& labeled_w, const defenses::DpSgdOptions& dp,
                  StepMetrics& metrics) {
  if (!s.model.buffers().empty()) {
    s.model.forward(models::images_to_tensor<float>(b.labeled), nn::StatMode::update, nullptr);
    if (plan.active())
      s.model.forward(models::images_to_tensor<float>(b.unlabeled_strong), nn::StatMode::update,
                      nullptr);
  }
  const std::size_t rows = b.labeled.size() + plan.weights.size();
  const double scale = static_cast<double>(rows);
  std::vector<std::vector<double>> grads;
  grads.reserve(rows);
  const std::size_t dim = s.model.parameter_count();
  double loss_l = 0.0, loss_u = 0.0;

  auto one = [&](const Image& img, double weight, const int* label, const Posterior* target,
                 double loss_factor, double& loss_acc) {
    s.model.zero_grad();
    nn::Tape<float> tape;
    const auto logits = s.model.forward(models::images_to_tensor<float>(std::span(&img, 1)),
                                        nn::StatMode::running, &tape);
    const std::vector<double> w = {weight * scale};
    nn::Tensor<float> g;
    std::vector<double> loss;
    if (target)
      loss = nn::kl_to_targets(logits, {*target}, w, &g);
    else
      loss = nn::cross_entropy(logits, std::span(label, 1), w, &g);
    loss_acc += loss_factor * loss[0];
    std::vector<double> flat(dim, 0.0);
    if (weight != 0.0) {
      s.model.backward(g, tape);
      const auto fg = s.model.flat_grads();
      std::copy(fg.begin(), fg.end(), flat.begin());
    }
    grads.push_back(std::move(flat));
  };

  for (std::size_t i = 0; i < b.labeled.size(); ++i)
    one(b.labeled[i], labeled_w[i], &b.labels[i], nullptr, labeled_w[i], loss_l);
  for (std::size_t i = 0; i < plan.weights.size(); ++i) {
    if (plan.weights[i] == 0.0) {
      grads.emplace_back(dim, 0.0);
      continue;
    }
    one(b.unlabeled_strong[i], plan.weights[i], &plan.labels[i],
        plan.soft ? &plan.targets[i] : nullptr,
        1.0 / static_cast<double>(plan.weights.size()), loss_u);
  }

  Rng rng = Rng::derive(s.seed, "dpsgd-noise", {static_cast<std::uint64_t>(s.step)});
  const auto agg = defenses::dpsgd_update(grads, dp.clip_norm, dp.noise_scale, rng);
  std::size_t off = 0;
  for (auto* p : s.model.params())
    for (auto& g : p->grad) g = static_cast<float>(agg[off++]);
  metrics.loss_labeled = loss_l;
  metrics.loss_unlabeled = loss_u;
}

StepMetrics run_step(models::TrainState& s, const SSLBatch& b, const StepOptions& o,
                     Method method, FlexState* flex) {
  if (b.labeled.empty()) throw ContractError("training step needs a nonempty labeled batch");
  if (b.labels.size() != b.labeled.size())
    throw ContractError("labeled batch has " + std::to_string(b.labeled.size()) +
                        " images but " + std::to_string(b.labels.size()) + " labels");
  if (method == Method::uda && !(o.temperature > 0.0))
    throw ContractError("sharpening temperature must be > 0");

  StepMetrics metrics;
  metrics.step = s.step;
  metrics.lr = o.lr;

  const UnlabeledPlan plan = plan_unlabeled(s, b, o, method, flex, metrics);
  metrics.mask_rate = plan.mask_rate;
  const std::vector<double> labeled_w(b.labeled.size(),
                                      1.0 / static_cast<double>(b.labeled.size()));

  if (o.dpsgd) {
    dp_gradients(s, b, plan, labeled_w, *o.dpsgd, metrics);
  } else {
    s.model.zero_grad();
    {
      nn::Tape<float> tape;
      const auto logits = s.model.forward(models::images_to_tensor<float>(b.labeled),
                                          nn::StatMode::update, &tape);
      nn::Tensor<float> g;
      const auto losses = nn::cross_entropy(logits, b.labels, labeled_w, &g);
      metrics.loss_labeled =
          std::accumulate(losses.begin(), losses.end(), 0.0) / static_cast<double>(losses.size());
      s.model.backward(g, tape);
    }
    if (plan.active()) {
      nn::Tape<float> tape;
      const auto logits = s.model.forward(models::images_to_tensor<float>(b.unlabeled_strong),
                                          nn::StatMode::update, &tape);
      nn::Tensor<float> g;
      const auto losses = plan.soft ? nn::kl_to_targets(logits, plan.targets, plan.weights, &g)
                                    : nn::cross_entropy(logits, plan.labels, plan.weights, &g);
      double sum = 0.0;
      for (std::size_t i = 0; i < losses.size(); ++i)
        if (plan.weights[i] != 0.0) sum += losses[i];
      metrics.loss_unlabeled = sum / static_cast<double>(losses.size());
      s.model.backward(g, tape);
    }
  }

  s.optimizer.step(s.model, o.lr);
  nn::ema_update(s.ema, s.model, o.ema_momentum);
  ++s.step;
  return metrics;
}

}  // namespace

StepMetrics supervised_step(models::TrainState& state, const SSLBatch& batch,
                            const StepOptions& opts) {
  return run_step(state, batch, opts, Method::supervised, nullptr);
}

StepMetrics fixmatch_step(models::TrainState& state, const SSLBatch& batch,
                          const StepOptions& opts) {
  return run_step(state, batch, opts, Method::fixmatch, nullptr);
}

StepMetrics uda_step(models::TrainState& state, const SSLBatch& batch, const StepOptions& opts) {
  return run_step(state, batch, opts, Method::uda, nullptr);
}

StepMetrics flexmatch_step(models::TrainState& state, FlexState& flex, const SSLBatch& batch,
                           const StepOptions& opts) {
  return run_step(state, batch, opts, Method::flexmatch, &flex);
}

// ---------------------------------------------------------------- data

std::string_view to_string(Role r) { return r == Role::target ? "target" : "shadow"; }

RoleData role_data(const SplitBundle& bundle, Role role, bool label_everything) {
  RoleData d;
  if (role == Role::target) {
    d.train = bundle.target_train;
    d.test = bundle.target_test;
    d.labeled = label_everything ? bundle.target_train : bundle.labeled_ids();
    if (!label_everything) d.unlabeled = bundle.unlabeled_ids();
  } else {
    d.train = bundle.shadow_train;
    d.test = bundle.shadow_test;
    d.labeled = label_everything ? bundle.shadow_train : bundle.shadow_labeled_ids();
    if (!label_everything) d.unlabeled = bundle.shadow_unlabeled_ids();
  }
  return d;
}

const ImageSample& sample_at(const SampleStore& store, std::int64_t id) {
  if (id < 0 || static_cast<std::size_t>(id) >= store.size() ||
      store[static_cast<std::size_t>(id)].id != id)
    throw DataError("sample id " + std::to_string(id) + " not found in the sample store");
  return store[static_cast<std::size_t>(id)];
}

namespace {

// Pool position of the sample drawn at global stream position `pos`: pools
// are walked in a fresh permutation per epoch.
std::size_t draw_position(std::uint64_t seed, std::string_view stream, std::size_t pool,
                          std::uint64_t pos, std::vector<std::size_t>& perm,
                          std::uint64_t& perm_epoch) {
  const std::uint64_t epoch = pos / pool;
  if (perm.size() != pool || perm_epoch != epoch) {
    perm.resize(pool);
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    Rng rng = Rng::derive(seed, stream, {epoch});
    rng.shuffle(std::span<std::size_t>(perm));
    perm_epoch = epoch;
  }
  return perm[pos % pool];
}

}  // namespace

SSLBatch make_batch(const SampleStore& store, const RoleData& data, std::uint64_t seed,
                    std::int64_t step, int batch_size, int uratio, int aug_level,
                    bool with_unlabeled) {
  if (data.labeled.empty()) throw ContractError("no labeled samples to train on");
  if (batch_size < 1 || uratio < 1) throw ContractError("batch size and uratio must be >= 1");
  const auto ustep = static_cast<std::uint64_t>(step);
  SSLBatch b;
  const auto nb = static_cast<std::size_t>(batch_size);
  std::vector<std::int64_t> labeled_ids(nb);
  std::vector<std::size_t> perm;
  std::uint64_t perm_epoch = UINT64_MAX;
  for (std::size_t j = 0; j < nb; ++j) {
    const auto pos = draw_position(seed, "labeled-order", data.labeled.size(),
                                   ustep * nb + j, perm, perm_epoch);
    labeled_ids[j] = data.labeled[pos];
  }
  b.labeled.resize(nb);
  b.labels.resize(nb);
  parallel_for(nb, [&](std::size_t j) {
    const auto& s = sample_at(store, labeled_ids[j]);
    if (!s.label) throw DataError("labeled sample " + std::to_string(s.id) + " has no label");
    Rng rng = Rng::derive(seed, "labeled-view", {ustep, j});
    b.labeled[j] = augment::weak_augment(s.image, rng);
    b.labels[j] = *s.label;
  });

  if (!with_unlabeled || data.unlabeled.empty()) return b;
  const std::size_t nu = nb * static_cast<std::size_t>(uratio);
  b.unlabeled_index.resize(nu);
  perm.clear();
  perm_epoch = UINT64_MAX;
  for (std::size_t j = 0; j < nu; ++j)
    b.unlabeled_index[j] = draw_position(seed, "unlabeled-order", data.unlabeled.size(),
                                         ustep * nu + j, perm, perm_epoch);
  b.unlabeled_weak.resize(nu);
  b.unlabeled_strong.resize(nu);
  parallel_for(nu, [&](std::size_t j) {
    const auto& s = sample_at(store, data.unlabeled[b.unlabeled_index[j]]);
    Rng weak = Rng::derive(seed, "unlabeled-weak", {ustep, j});
    b.unlabeled_weak[j] = augment::weak_augment(s.image, weak);
    Rng strong = Rng::derive(seed, "unlabeled-strong", {ustep, j});
    b.unlabeled_strong[j] = augment::strong_augment(s.image, strong, aug_level);
  });
  return b;
}

// ---------------------------------------------------------------- train

std::uint64_t role_seed(std::uint64_t run_seed, Role role) {
  return stage_seed(run_seed, to_string(role));
}

double accuracy(const nn::Network<float>& model, const SampleStore& store,
                std::span<const std::int64_t> ids) {
  if (ids.empty()) throw ContractError("accuracy over an empty id set");
  std::vector<Image> images;
  images.reserve(ids.size());
  for (auto id : ids) images.push_back(sample_at(store, id).image);
  const auto post = models::predict_posteriors(model, images);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    const auto& label = sample_at(store, ids[i]).label;
    if (label && argmax(post[i]) == *label) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(ids.size());
}

models::TrainState train(const ExperimentConfig& config, const SplitBundle& bundle,
                         const SampleStore& store, Role role, const TrainerOptions& options) {
  config.validate();
  if (options.dpsgd) options.dpsgd->validate();
  const double tau = options.tau_override.value_or(config.tau);
  const bool full = config.ssl_method == SslMethod::supervised && config.supervised_full_train;
  const RoleData data = role_data(bundle, role, full);
  const std::uint64_t seed = role_seed(config.seed, role);
  const auto spec = models::classifier_spec_from(config, bundle.class_count);

  models::TrainState state;
  const bool resumed = options.resume.has_value();
  if (resumed) {
    state = *options.resume;
    if (!(state.spec == spec) || state.seed != seed || state.total_steps != config.total_steps)
      throw ConfigError("checkpoint does not belong to this configuration and role");
  } else {
    state = models::make_train_state(spec, config.total_steps, seed, config.sgd_momentum,
                                     config.weight_decay);
  }

  FlexState flex;
  if (config.ssl_method == SslMethod::flexmatch) {
    if (const auto* a = state.extra("flex/status"))
      flex = FlexState::from_array(*a, bundle.class_count);
    else
      flex = FlexState(data.unlabeled.size(), bundle.class_count);
    if (flex.pool_size() != data.unlabeled.size())
      throw DataError("FlexMatch state does not match the unlabeled pool");
  }

  enable_flush_to_zero();
  auto emit = [&](const StepMetrics* last) {
    if (config.ssl_method == SslMethod::flexmatch) state.set_extra(flex.to_array());
    if (!options.on_checkpoint) return;
    StepMetrics m = last ? *last : StepMetrics{};
    if (!last) m.step = state.step;
    if (options.evaluate_accuracy) {
      m.train_acc = accuracy(state.ema, store, data.train);
      m.test_acc = accuracy(state.ema, store, data.test);
    }
    options.on_checkpoint(state, &m);
  };
  if (!resumed && state.step == 0) emit(nullptr);

  const std::int64_t interval = config.checkpoint_interval();
  const bool with_unlabeled = config.ssl_method != SslMethod::supervised;
  StepOptions opts;
  opts.tau = tau;
  opts.lambda_u = config.lambda_u;
  opts.temperature = config.uda_temperature;
  opts.ema_momentum = config.ema_momentum;
  opts.dpsgd = options.dpsgd;

  while (state.step < config.total_steps) {
    const auto batch = make_batch(store, data, seed, state.step, config.batch_size,
                                  config.uratio, config.aug_level, with_unlabeled);
    opts.lr = models::cosine_lr(state.step, config.total_steps, config.lr0);
    StepMetrics m;
    switch (config.ssl_method) {
      case SslMethod::supervised: m = supervised_step(state, batch, opts); break;
      case SslMethod::fixmatch: m = fixmatch_step(state, batch, opts); break;
      case SslMethod::flexmatch: m = flexmatch_step(state, flex, batch, opts); break;
      case SslMethod::uda: m = uda_step(state, batch, opts); break;
    }
    if (options.on_step) options.on_step(m);
    if (state.step % interval == 0 || state.step == config.total_steps) emit(&m);
  }
  if (config.ssl_method == SslMethod::flexmatch) state.set_extra(flex.to_array());
  return state;
}

}  // namespace semileak::ssl
