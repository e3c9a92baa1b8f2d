#include "semileak/attacks/attacks.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "semileak/augment/augment.hpp"
#include "semileak/core/error.hpp"
#include "semileak/models/classifier.hpp"
#include "semileak/models/train_state.hpp"
#include "semileak/nn/loss.hpp"
#include "semileak/nn/optim.hpp"

namespace semileak::attacks {

std::string_view to_string(AttackKind k) {
  switch (k) {
    case AttackKind::nn: return "nn";
    case AttackKind::corr: return "corr";
    case AttackKind::conf: return "conf";
    case AttackKind::entropy: return "ent";
    case AttackKind::mentr: return "ment";
    case AttackKind::da: return "da";
  }
  return "?";
}

AttackKind attack_from_string(std::string_view s) {
  for (auto k : kAllAttacks)
    if (to_string(k) == s) return k;
  throw ConfigError("unknown attack '" + std::string(s) + "' (expected nn, corr, conf, ent, ment, da)");
}

std::vector<AttackKind> parse_attack_list(std::string_view s) {
  if (s == "all") return {std::begin(kAllAttacks), std::end(kAllAttacks)};
  std::vector<AttackKind> out;
  std::size_t start = 0;
  while (start <= s.size()) {
    const auto end = std::min(s.find(',', start), s.size());
    const auto item = s.substr(start, end - start);
    if (!item.empty()) {
      const auto k = attack_from_string(item);
      if (std::find(out.begin(), out.end(), k) == out.end()) out.push_back(k);
    }
    start = end + 1;
  }
  if (out.empty()) throw ConfigError("empty attack list");
  return out;
}

// ---------------------------------------------------------------- metrics

std::vector<double> sorted_posterior_feature(const Posterior& p) {
  std::vector<double> out(p.begin(), p.end());
  std::sort(out.begin(), out.end(), std::greater<>());
  return out;
}

namespace {

void check_label(const Posterior& p, int y) {
  if (y < 0 || static_cast<std::size_t>(y) >= p.size())
    throw ContractError("label " + std::to_string(y) + " outside a posterior of length " +
                        std::to_string(p.size()));
}

double clamp_prob(double v) { return std::clamp(v, 1e-12, 1.0 - 1e-12); }

}  // namespace

int metric_corr(const Posterior& p, int y) {
  check_label(p, y);
  return argmax(p) == y ? 1 : 0;
}

double metric_conf(const Posterior& p, int y) {
  check_label(p, y);
  return p[static_cast<std::size_t>(y)];
}

double metric_entropy(const Posterior& p) {
  double h = 0.0;
  for (double v : p)
    if (v > 0.0) h -= v * std::log(v);
  return h;
}

double metric_mentr(const Posterior& p, int y) {
  check_label(p, y);
  double m = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double v = p[i];
    if (static_cast<int>(i) == y)
      m -= (1.0 - v) * std::log(clamp_prob(v));
    else
      m -= v * std::log(clamp_prob(1.0 - v));
  }
  return m;
}

double metric_value(AttackKind k, const Posterior& p, int y) {
  switch (k) {
    case AttackKind::corr: return metric_corr(p, y);
    case AttackKind::conf: return metric_conf(p, y);
    case AttackKind::entropy: return metric_entropy(p);
    case AttackKind::mentr: return metric_mentr(p, y);
    default: throw ContractError("attack " + std::string(to_string(k)) + " has no scalar metric");
  }
}

// ---------------------------------------------------------------- thresholds

Direction member_direction(AttackKind k) {
  switch (k) {
    case AttackKind::entropy:
    case AttackKind::mentr: return Direction::less_equal;
    default: return Direction::greater_equal;
  }
}

double ThresholdRule::threshold_for(int label) const {
  if (per_class && label >= 0 && static_cast<std::size_t>(label) < thresholds.size())
    return thresholds[static_cast<std::size_t>(label)];
  return global;
}

double ThresholdRule::margin(double value, int label) const {
  const double t = threshold_for(label);
  return direction == Direction::greater_equal ? value - t : t - value;
}

void to_json(nlohmann::json& j, const ThresholdRule& r) {
  j = nlohmann::json{{"direction", r.direction == Direction::greater_equal ? ">=" : "<="},
                     {"per_class", r.per_class},
                     {"global", r.global},
                     {"thresholds", r.thresholds}};
}

double balanced_accuracy(std::span<const double> members, std::span<const double> nonmembers,
                         double threshold, Direction direction) {
  if (members.empty() || nonmembers.empty())
    throw ContractError("balanced accuracy needs members and nonmembers");
  auto passes = [&](double v) {
    return direction == Direction::greater_equal ? v >= threshold : v <= threshold;
  };
  const auto tp = std::count_if(members.begin(), members.end(), passes);
  const auto fp = std::count_if(nonmembers.begin(), nonmembers.end(), passes);
  const double tpr = static_cast<double>(tp) / static_cast<double>(members.size());
  const double tnr = 1.0 - static_cast<double>(fp) / static_cast<double>(nonmembers.size());
  return 0.5 * (tpr + tnr);
}

ThresholdRule learn_threshold(std::span<const double> member_scores,
                              std::span<const double> nonmember_scores, Direction direction) {
  if (member_scores.empty() || nonmember_scores.empty())
    throw ContractError("threshold learning needs member and nonmember scores");
  std::vector<double> mem(member_scores.begin(), member_scores.end());
  std::vector<double> non(nonmember_scores.begin(), nonmember_scores.end());
  std::sort(mem.begin(), mem.end());
  std::sort(non.begin(), non.end());
  std::vector<double> values = mem;
  values.insert(values.end(), non.begin(), non.end());
  std::sort(values.begin(), values.end());
  values.erase(std::unique(values.begin(), values.end()), values.end());
  std::vector<double> candidates;
  candidates.reserve(2 * values.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i > 0) candidates.push_back(0.5 * (values[i - 1] + values[i]));
    candidates.push_back(values[i]);
  }

  // Counts of values passing threshold t in a sorted vector.
  auto passing = [direction](const std::vector<double>& sorted, double t) {
    if (direction == Direction::greater_equal)
      return static_cast<double>(sorted.end() - std::lower_bound(sorted.begin(), sorted.end(), t));
    return static_cast<double>(std::upper_bound(sorted.begin(), sorted.end(), t) - sorted.begin());
  };
  const double m = static_cast<double>(mem.size());
  const double n = static_cast<double>(non.size());
  double best = -1.0;
  double best_t = candidates.front();
  for (double t : candidates) {
    const double acc = 0.5 * (passing(mem, t) / m + 1.0 - passing(non, t) / n);
    if (acc > best) {
      best = acc;
      best_t = t;
    }
  }
  ThresholdRule rule;
  rule.direction = direction;
  rule.global = best_t;
  return rule;
}

ThresholdRule learn_threshold(std::span<const double> member_scores,
                              std::span<const int> member_labels,
                              std::span<const double> nonmember_scores,
                              std::span<const int> nonmember_labels, Direction direction,
                              bool per_class, int class_count) {
  if (member_scores.size() != member_labels.size() ||
      nonmember_scores.size() != nonmember_labels.size())
    throw ContractError("scores and labels differ in length");
  ThresholdRule rule = learn_threshold(member_scores, nonmember_scores, direction);
  if (!per_class) return rule;
  rule.per_class = true;
  rule.thresholds.assign(static_cast<std::size_t>(class_count), rule.global);
  for (int c = 0; c < class_count; ++c) {
    std::vector<double> mem, non;
    for (std::size_t i = 0; i < member_scores.size(); ++i)
      if (member_labels[i] == c) mem.push_back(member_scores[i]);
    for (std::size_t i = 0; i < nonmember_scores.size(); ++i)
      if (nonmember_labels[i] == c) non.push_back(nonmember_scores[i]);
    if (mem.empty() || non.empty()) continue;
    rule.thresholds[static_cast<std::size_t>(c)] = learn_threshold(mem, non, direction).global;
  }
  return rule;
}

// ---------------------------------------------------------------- distances

double distance(SimFn fn, std::span<const double> p, std::span<const double> q) {
  if (p.size() != q.size())
    throw ContractError("distance between vectors of length " + std::to_string(p.size()) +
                        " and " + std::to_string(q.size()));
  const std::size_t n = p.size();
  switch (fn) {
    case SimFn::js: {
      double d = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        const double m = 0.5 * (p[i] + q[i]);
        if (p[i] > 0.0) d += 0.5 * p[i] * std::log2(p[i] / m);
        if (q[i] > 0.0) d += 0.5 * q[i] * std::log2(q[i] / m);
      }
      if (std::isnan(d)) return d;
      return std::clamp(d, 0.0, 1.0);
    }
    case SimFn::cosine: {
      double dot = 0.0, pp = 0.0, qq = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        dot += p[i] * q[i];
        pp += p[i] * p[i];
        qq += q[i] * q[i];
      }
      if (pp == 0.0 && qq == 0.0) return 0.0;
      if (pp == 0.0 || qq == 0.0) return 1.0;
      return std::clamp(1.0 - dot / std::sqrt(pp * qq), 0.0, 2.0);
    }
    case SimFn::correlation: {
      auto constant = [](std::span<const double> v) {
        return std::all_of(v.begin(), v.end(), [&](double x) { return x == v.front(); });
      };
      if (n == 0 || constant(p) || constant(q)) return 0.0;
      const double mp = std::accumulate(p.begin(), p.end(), 0.0) / static_cast<double>(n);
      const double mq = std::accumulate(q.begin(), q.end(), 0.0) / static_cast<double>(n);
      double dot = 0.0, pp = 0.0, qq = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        dot += (p[i] - mp) * (q[i] - mq);
        pp += (p[i] - mp) * (p[i] - mp);
        qq += (q[i] - mq) * (q[i] - mq);
      }
      if (pp == 0.0 || qq == 0.0) return 0.0;
      return std::clamp(1.0 - dot / std::sqrt(pp * qq), 0.0, 2.0);
    }
    case SimFn::euclidean: {
      double s = 0.0;
      for (std::size_t i = 0; i < n; ++i) s += (p[i] - q[i]) * (p[i] - q[i]);
      return std::sqrt(s);
    }
  }
  return 0.0;
}

// ---------------------------------------------------------------- A_DA

std::vector<Image> da_views(const Image& x, int K, int aug_level, Rng& rng) {
  if (K < 1) throw ContractError("view count K must be >= 1");
  std::vector<Image> views;
  views.reserve(static_cast<std::size_t>(2 * K));
  for (int k = 0; k < K; ++k) views.push_back(augment::weak_augment(x, rng));
  for (int k = 0; k < K; ++k) views.push_back(augment::strong_augment(x, rng, aug_level));
  return views;
}

std::vector<double> da_features_from_posteriors(std::span<const Posterior> weak,
                                                std::span<const Posterior> strong, SimFn fn) {
  if (weak.empty() || weak.size() != strong.size())
    throw ContractError("A_DA needs K >= 1 weak and K strong posteriors");
  const std::size_t K = weak.size();
  std::vector<double> out;
  out.reserve(3 * K * K);
  auto block = [&](std::span<const Posterior> a, std::span<const Posterior> b, const char* an,
                   const char* bn) {
    std::vector<double> vals;
    vals.reserve(K * K);
    for (std::size_t i = 0; i < K; ++i)
      for (std::size_t j = 0; j < K; ++j) {
        const double d = distance(fn, a[i], b[j]);
        if (std::isnan(d))
          throw DataError("NaN distance between " + std::string(an) + " view " +
                          std::to_string(i) + " and " + bn + " view " + std::to_string(j));
        vals.push_back(d);
      }
    std::sort(vals.begin(), vals.end(), std::greater<>());
    out.insert(out.end(), vals.begin(), vals.end());
  };
  block(weak, weak, "weak", "weak");
  block(strong, strong, "strong", "strong");
  block(weak, strong, "weak", "strong");
  return out;
}

QueryFn model_query(const nn::Network<float>& model) {
  const nn::Network<float>* net = &model;
  return [net](std::span<const Image> images) { return models::predict_posteriors(*net, images); };
}

std::vector<double> da_features(const QueryFn& model, const Image& x, int K, SimFn fn,
                                int aug_level, Rng& rng) {
  const auto views = da_views(x, K, aug_level, rng);
  const auto post = model(views);
  if (post.size() != views.size()) throw ContractError("model returned the wrong number of posteriors");
  const auto k = static_cast<std::size_t>(K);
  return da_features_from_posteriors(std::span(post).subspan(0, k), std::span(post).subspan(k, k),
                                     fn);
}

// ---------------------------------------------------------------- attack model

namespace {

nn::Tensor<float> standardized(const AttackModel& m, const std::vector<std::vector<double>>& rows,
                               std::span<const std::size_t> order) {
  const int dim = m.input_dim();
  nn::Tensor<float> t(static_cast<int>(order.size()), dim, 1, 1);
  for (std::size_t r = 0; r < order.size(); ++r) {
    const auto& row = rows[order[r]];
    if (static_cast<int>(row.size()) != dim)
      throw ContractError("attack feature of length " + std::to_string(row.size()) +
                          ", expected " + std::to_string(dim));
    for (int d = 0; d < dim; ++d) {
      const auto ud = static_cast<std::size_t>(d);
      t.data[r * static_cast<std::size_t>(dim) + ud] =
          static_cast<float>((row[ud] - m.mean[ud]) / m.scale[ud]);
    }
  }
  return t;
}

}  // namespace

std::vector<double> AttackModel::member_probability(
    const std::vector<std::vector<double>>& rows) const {
  std::vector<double> out;
  out.reserve(rows.size());
  constexpr std::size_t kChunk = 1024;
  for (std::size_t begin = 0; begin < rows.size(); begin += kChunk) {
    const std::size_t end = std::min(rows.size(), begin + kChunk);
    std::vector<std::size_t> order(end - begin);
    std::iota(order.begin(), order.end(), begin);
    const auto probs = nn::softmax_rows(net.infer(standardized(*this, rows, order)));
    for (const auto& p : probs) out.push_back(p[1]);
  }
  return out;
}

AttackModel train_attack_nn(const std::vector<std::vector<double>>& features,
                            const std::vector<int>& labels, const AttackTrainOptions& options) {
  if (features.empty() || features.size() != labels.size())
    throw ContractError("attack training needs one label per feature row");
  const bool has0 = std::find(labels.begin(), labels.end(), 0) != labels.end();
  const bool has1 = std::find(labels.begin(), labels.end(), 1) != labels.end();
  if (!has0 || !has1) throw ContractError("attack training needs both members and nonmembers");
  if (std::any_of(labels.begin(), labels.end(), [](int l) { return l != 0 && l != 1; }))
    throw ContractError("attack labels must be 0 or 1");
  if (options.epochs < 1 || options.batch_size < 1 || !(options.lr > 0.0))
    throw ContractError("attack training options out of range");
  const std::size_t dim = features.front().size();
  if (dim == 0) throw ContractError("attack features are empty");
  for (const auto& row : features)
    if (row.size() != dim) throw ContractError("attack feature rows differ in length");

  AttackModel model;
  model.mean.assign(dim, 0.0);
  model.scale.assign(dim, 0.0);
  const double n = static_cast<double>(features.size());
  for (const auto& row : features)
    for (std::size_t d = 0; d < dim; ++d) model.mean[d] += row[d];
  for (auto& v : model.mean) v /= n;
  for (const auto& row : features)
    for (std::size_t d = 0; d < dim; ++d)
      model.scale[d] += (row[d] - model.mean[d]) * (row[d] - model.mean[d]);
  for (auto& v : model.scale) {
    v = std::sqrt(v / n);
    if (v < 1e-12) v = 1.0;
  }
  model.net = models::build_attack_mlp<float>({static_cast<int>(dim)}, options.seed);

  nn::Adam<float> adam(options.lr);
  std::vector<std::size_t> order(features.size());
  const auto batch = static_cast<std::size_t>(options.batch_size);
  for (int epoch = 0; epoch < options.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng = Rng::derive(options.seed, "attack-shuffle", {static_cast<std::uint64_t>(epoch)});
    rng.shuffle(std::span<std::size_t>(order));
    for (std::size_t begin = 0; begin < order.size(); begin += batch) {
      const auto idx = std::span<const std::size_t>(order).subspan(
          begin, std::min(batch, order.size() - begin));
      const auto x = standardized(model, features, idx);
      std::vector<int> y(idx.size());
      for (std::size_t i = 0; i < idx.size(); ++i) y[i] = labels[idx[i]];
      const std::vector<double> w(idx.size(), 1.0 / static_cast<double>(idx.size()));
      model.net.zero_grad();
      nn::Tape<float> tape;
      const auto logits = model.net.forward(x, nn::StatMode::update, &tape);
      nn::Tensor<float> g;
      nn::cross_entropy(logits, y, w, &g);
      model.net.backward(g, tape);
      adam.step(model.net);
    }
  }
  return model;
}

void save_attack_model(const AttackModel& model, const std::filesystem::path& path) {
  const nlohmann::json meta = {{"kind", "attack_mlp"},
                               {"input_dim", model.input_dim()},
                               {"mean", model.mean},
                               {"scale", model.scale}};
  models::save_network(model.net, meta, path);
}

AttackModel load_attack_model(const std::filesystem::path& path) {
  const auto file = nn::read_array_file(path);
  AttackModel model;
  try {
    if (file.meta.at("kind") != "attack_mlp")
      throw DataError(path.string() + " is not an attack model");
    const int dim = file.meta.at("input_dim").get<int>();
    model.mean = file.meta.at("mean").get<std::vector<double>>();
    model.scale = file.meta.at("scale").get<std::vector<double>>();
    if (static_cast<int>(model.mean.size()) != dim || model.scale.size() != model.mean.size())
      throw DataError("attack model statistics do not match its input size");
    model.net = models::build_attack_mlp<float>({dim}, 0);
  } catch (const nlohmann::json::exception& e) {
    throw DataError("attack model metadata malformed in " + path.string() + ": " + e.what());
  }
  models::load_network(model.net, path);
  return model;
}

}  // namespace semileak::attacks
