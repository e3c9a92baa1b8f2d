#include "semileak/eval/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>

#include "semileak/attacks/attacks.hpp"
#include "semileak/core/error.hpp"
#include "semileak/ssl/ssl.hpp"

namespace semileak::eval {

double auc(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size()) throw ContractError("auc: scores and labels differ in length");
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  double member_rank_sum = 0.0;
  std::size_t members = 0;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) ++j;
    // Ranks i+1 .. j share their average.
    const double rank = 0.5 * static_cast<double>(i + 1 + j);
    for (std::size_t t = i; t < j; ++t)
      if (labels[order[t]] != 0) {
        member_rank_sum += rank;
        ++members;
      }
    i = j;
  }
  const std::size_t nonmembers = scores.size() - members;
  if (members == 0 || nonmembers == 0)
    throw ContractError("auc needs both members and nonmembers");
  const double m = static_cast<double>(members);
  const double u = member_rank_sum - m * (m + 1.0) / 2.0;
  return u / (m * static_cast<double>(nonmembers));
}

double auc(std::span<const MembershipRecord> records) {
  std::vector<double> scores;
  std::vector<int> labels;
  for (const auto& r : records) {
    scores.push_back(r.score);
    labels.push_back(r.is_member ? 1 : 0);
  }
  return auc(scores, labels);
}

double subset_auc(std::span<const MembershipRecord> records, Subset subset) {
  if (subset == Subset::nonmember) throw ContractError("subset_auc needs a member subset");
  std::vector<double> scores;
  std::vector<int> labels;
  std::size_t chosen = 0;
  for (const auto& r : records) {
    if (r.subset == subset) {
      ++chosen;
    } else if (r.subset != Subset::nonmember) {
      continue;
    }
    scores.push_back(r.score);
    labels.push_back(r.subset == subset ? 1 : 0);
  }
  if (chosen == 0)
    throw ContractError("no " + std::string(to_string(subset)) + " records");
  return auc(scores, labels);
}

double accuracy(std::span<const Posterior> posteriors, std::span<const int> labels) {
  if (posteriors.size() != labels.size() || posteriors.empty())
    throw ContractError("accuracy needs matching nonempty posteriors and labels");
  std::size_t correct = 0;
  for (std::size_t i = 0; i < labels.size(); ++i)
    if (argmax(posteriors[i]) == labels[i]) ++correct;
  return static_cast<double>(correct) / static_cast<double>(labels.size());
}

double overfit_gap(const nn::Network<float>& model, const SampleStore& store,
                   std::span<const std::int64_t> train_ids,
                   std::span<const std::int64_t> test_ids) {
  return ssl::accuracy(model, store, train_ids) - ssl::accuracy(model, store, test_ids);
}

namespace {

std::vector<double> entropy_histogram(std::span<const Posterior> set, int bins, double top) {
  std::vector<double> h(static_cast<std::size_t>(bins), 0.0);
  for (const auto& p : set) {
    const double e = attacks::metric_entropy(p);
    const double pos = top > 0.0 ? e / top * bins : 0.0;
    const int b = std::clamp(static_cast<int>(std::floor(pos)), 0, bins - 1);
    h[static_cast<std::size_t>(b)] += 1.0;
  }
  for (auto& v : h) v /= static_cast<double>(set.size());
  return h;
}

}  // namespace

double js_entropy_distance(std::span<const Posterior> members,
                           std::span<const Posterior> nonmembers, int bins) {
  if (members.empty() || nonmembers.empty())
    throw ContractError("js_entropy_distance needs nonempty member and nonmember sets");
  if (bins < 2) throw ContractError("js_entropy_distance needs at least 2 bins");
  std::size_t classes = 0;
  for (const auto& p : members) classes = std::max(classes, p.size());
  for (const auto& p : nonmembers) classes = std::max(classes, p.size());
  const double top = std::log(static_cast<double>(classes));
  const auto hm = entropy_histogram(members, bins, top);
  const auto hn = entropy_histogram(nonmembers, bins, top);
  return attacks::distance(SimFn::js, hm, hn);
}

const AttackAuc* StepReport::find(attacks::AttackKind kind) const {
  for (const auto& a : aucs)
    if (a.kind == kind) return &a;
  return nullptr;
}

void to_json(nlohmann::json& j, const AttackAuc& a) {
  j = {{"attack", attacks::to_string(a.kind)},
       {"auc_overall", a.overall},
       {"auc_labeled", a.labeled ? nlohmann::json(*a.labeled) : nlohmann::json(nullptr)},
       {"auc_unlabeled", a.unlabeled ? nlohmann::json(*a.unlabeled) : nlohmann::json(nullptr)}};
}

void to_json(nlohmann::json& j, const StepReport& r) {
  j = {{"step", r.step},
       {"train_acc", r.train_acc},
       {"test_acc", r.test_acc},
       {"overfit_gap", r.overfit_gap},
       {"js_entropy_distance", r.js_entropy_distance},
       {"attacks", r.aucs}};
}

void from_json(const nlohmann::json& j, AttackAuc& a) {
  a.kind = attacks::attack_from_string(j.at("attack").get<std::string>());
  a.overall = j.at("auc_overall").get<double>();
  auto opt = [&j](const char* key) -> std::optional<double> {
    if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
    return j.at(key).get<double>();
  };
  a.labeled = opt("auc_labeled");
  a.unlabeled = opt("auc_unlabeled");
}

void from_json(const nlohmann::json& j, StepReport& r) {
  j.at("step").get_to(r.step);
  j.at("train_acc").get_to(r.train_acc);
  j.at("test_acc").get_to(r.test_acc);
  j.at("overfit_gap").get_to(r.overfit_gap);
  j.at("js_entropy_distance").get_to(r.js_entropy_distance);
  j.at("attacks").get_to(r.aucs);
}

AttackAuc summarize(attacks::AttackKind kind, std::span<const MembershipRecord> records) {
  AttackAuc a;
  a.kind = kind;
  a.overall = auc(records);
  auto has = [&](Subset s) {
    return std::any_of(records.begin(), records.end(),
                       [s](const MembershipRecord& r) { return r.subset == s; });
  };
  if (has(Subset::labeled_member)) a.labeled = subset_auc(records, Subset::labeled_member);
  if (has(Subset::unlabeled_member)) a.unlabeled = subset_auc(records, Subset::unlabeled_member);
  return a;
}

CheckpointEval evaluate_checkpoint(std::int64_t step, const attacks::QueryFn& target,
                                   const attacks::QueryFn& shadow,
                                   const attacks::AttackSet& target_set,
                                   const attacks::AttackSet& shadow_set,
                                   const SampleStore& store, const EvalOptions& options) {
  CheckpointEval out;
  out.report.step = step;
  out.target_features = attacks::extract_features(target, target_set, store, options.attack);
  const auto& post = out.target_features.posteriors;

  std::vector<Posterior> members, nonmembers;
  std::vector<int> member_labels, nonmember_labels;
  for (std::size_t i = 0; i < target_set.size(); ++i) {
    (target_set.is_member(i) ? members : nonmembers).push_back(post[i]);
    (target_set.is_member(i) ? member_labels : nonmember_labels).push_back(target_set.labels[i]);
  }
  out.report.train_acc = accuracy(members, member_labels);
  out.report.test_acc = accuracy(nonmembers, nonmember_labels);
  out.report.overfit_gap = out.report.train_acc - out.report.test_acc;
  out.report.js_entropy_distance = js_entropy_distance(members, nonmembers, options.entropy_bins);

  const auto shadow_features = attacks::extract_features(shadow, shadow_set, store, options.attack);
  for (auto kind : options.attack.kinds) {
    const auto calibrated = attacks::calibrate(kind, shadow_features, shadow_set, options.attack);
    auto records = attacks::run_attack(calibrated, out.target_features, target_set);
    out.report.aucs.push_back(summarize(kind, records));
    out.records.emplace(kind, std::move(records));
    out.calibrated.emplace(kind, calibrated);
  }
  return out;
}

std::vector<StepReport> step_sweep(std::span<const std::int64_t> steps,
                                   const CheckpointLoader& loader,
                                   const attacks::AttackSet& target_set,
                                   const attacks::AttackSet& shadow_set, const SampleStore& store,
                                   const EvalOptions& options) {
  if (steps.empty()) throw ContractError("step_sweep needs at least one checkpoint");
  std::vector<StepReport> reports;
  for (auto step : steps) {
    const auto [target, shadow] = loader(step);
    reports.push_back(
        evaluate_checkpoint(step, target, shadow, target_set, shadow_set, store, options).report);
  }
  return reports;
}

// ---------------------------------------------------------------- output

std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  std::string s = buf;
  if (s == "-0.000000") s = "0.000000";
  return s;
}

std::string step_csv(std::span<const StepReport> reports,
                     std::span<const attacks::AttackKind> kinds) {
  std::ostringstream out;
  out << "step,train_acc,test_acc,overfit_gap,js_entropy_distance";
  for (auto k : kinds) {
    const std::string n(attacks::to_string(k));
    out << ",auc_" << n << ",auc_" << n << "_labeled,auc_" << n << "_unlabeled";
  }
  out << '\n';
  auto cell = [](const std::optional<double>& v) { return v ? format_number(*v) : std::string(); };
  for (const auto& r : reports) {
    out << r.step << ',' << format_number(r.train_acc) << ',' << format_number(r.test_acc) << ','
        << format_number(r.overfit_gap) << ',' << format_number(r.js_entropy_distance);
    for (auto k : kinds) {
      const AttackAuc* a = r.find(k);
      if (!a) {
        out << ",,,";
        continue;
      }
      out << ',' << format_number(a->overall) << ',' << cell(a->labeled) << ','
          << cell(a->unlabeled);
    }
    out << '\n';
  }
  return out.str();
}

namespace {

std::string escape_xml(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

std::pair<double, double> extent(std::span<const Series> series, bool x) {
  double lo = INFINITY, hi = -INFINITY;
  for (const auto& s : series)
    for (double v : x ? s.x : s.y)
      if (std::isfinite(v)) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
      }
  if (!std::isfinite(lo)) return {0.0, 1.0};
  if (lo == hi) return {lo - 1.0, hi + 1.0};
  return {lo, hi};
}

}  // namespace

std::string line_chart_svg(const std::string& title, const std::string& x_label,
                           const std::string& y_label, std::span<const Series> series) {
  constexpr double kWidth = 640, kHeight = 400;
  constexpr double kLeft = 70, kRight = 150, kTop = 40, kBottom = 50;
  static constexpr const char* kColours[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e",
                                             "#9467bd", "#8c564b", "#e377c2", "#7f7f7f"};
  const auto [x0, x1] = extent(series, true);
  const auto [y0, y1] = extent(series, false);
  const double pw = kWidth - kLeft - kRight, ph = kHeight - kTop - kBottom;
  auto px = [&](double x) { return kLeft + (x - x0) / (x1 - x0) * pw; };
  auto py = [&](double y) { return kTop + (1.0 - (y - y0) / (y1 - y0)) * ph; };
  auto f = format_number;

  std::ostringstream o;
  o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\"" << kHeight
    << "\" data-x-min=\"" << f(x0) << "\" data-x-max=\"" << f(x1) << "\" data-y-min=\"" << f(y0)
    << "\" data-y-max=\"" << f(y1) << "\">\n";
  o << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  o << "<text x=\"" << kWidth / 2 << "\" y=\"24\" text-anchor=\"middle\" font-size=\"16\">"
    << escape_xml(title) << "</text>\n";
  o << "<rect x=\"" << kLeft << "\" y=\"" << kTop << "\" width=\"" << pw << "\" height=\"" << ph
    << "\" fill=\"none\" stroke=\"black\"/>\n";
  constexpr int kTicks = 4;
  for (int t = 0; t <= kTicks; ++t) {
    const double xv = x0 + (x1 - x0) * t / kTicks;
    const double yv = y0 + (y1 - y0) * t / kTicks;
    o << "<text x=\"" << f(px(xv)) << "\" y=\"" << kHeight - kBottom + 18
      << "\" text-anchor=\"middle\" font-size=\"11\">" << f(xv) << "</text>\n";
    o << "<text x=\"" << kLeft - 6 << "\" y=\"" << f(py(yv) + 4)
      << "\" text-anchor=\"end\" font-size=\"11\">" << f(yv) << "</text>\n";
  }
  o << "<text x=\"" << kLeft + pw / 2 << "\" y=\"" << kHeight - 10
    << "\" text-anchor=\"middle\" font-size=\"13\">" << escape_xml(x_label) << "</text>\n";
  o << "<text x=\"16\" y=\"" << kTop + ph / 2 << "\" text-anchor=\"middle\" font-size=\"13\" "
    << "transform=\"rotate(-90 16 " << kTop + ph / 2 << ")\">" << escape_xml(y_label)
    << "</text>\n";
  for (std::size_t s = 0; s < series.size(); ++s) {
    const char* colour = kColours[s % std::size(kColours)];
    o << "<polyline fill=\"none\" stroke=\"" << colour << "\" stroke-width=\"2\" points=\"";
    for (std::size_t i = 0; i < series[s].x.size() && i < series[s].y.size(); ++i) {
      if (!std::isfinite(series[s].y[i])) continue;
      o << (i ? " " : "") << f(px(series[s].x[i])) << ',' << f(py(series[s].y[i]));
    }
    o << "\"/>\n";
    const double ly = kTop + 14 + 18 * static_cast<double>(s);
    o << "<line x1=\"" << kWidth - kRight + 10 << "\" y1=\"" << ly - 4 << "\" x2=\""
      << kWidth - kRight + 30 << "\" y2=\"" << ly - 4 << "\" stroke=\"" << colour
      << "\" stroke-width=\"2\"/>\n";
    o << "<text x=\"" << kWidth - kRight + 36 << "\" y=\"" << ly << "\" font-size=\"12\">"
      << escape_xml(series[s].name) << "</text>\n";
  }
  o << "</svg>\n";
  return o.str();
}

}  // namespace semileak::eval
