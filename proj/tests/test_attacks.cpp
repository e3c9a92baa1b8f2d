#include <algorithm>
#include <cmath>
#include <numeric>

#include "doctest.h"
#include "semileak/attacks/attacks.hpp"
#include "semileak/attacks/pipeline.hpp"
#include "semileak/core/dataset.hpp"
#include "semileak/core/error.hpp"
#include "semileak/core/split.hpp"
#include "semileak/eval/eval.hpp"
#include "semileak/models/classifier.hpp"
#include "support.hpp"

using namespace semileak;
using namespace semileak::attacks;

namespace {

double kl2(std::span<const double> p, std::span<const double> q) {
  double s = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i)
    if (p[i] > 0.0) s += p[i] * std::log2(p[i] / q[i]);
  return s;
}

double js_oracle(std::span<const double> p, std::span<const double> q) {
  std::vector<double> m(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) m[i] = 0.5 * (p[i] + q[i]);
  return 0.5 * kl2(p, m) + 0.5 * kl2(q, m);
}

// Brute-force balanced accuracy maximum over every candidate threshold.
double best_balanced_accuracy(const std::vector<double>& mem, const std::vector<double>& non,
                              Direction dir) {
  std::vector<double> cand(mem);
  cand.insert(cand.end(), non.begin(), non.end());
  const auto values = cand;
  for (double a : values)
    for (double b : values) cand.push_back(0.5 * (a + b));
  double best = 0.0;
  for (double t : cand) {
    double tp = 0, tn = 0;
    for (double v : mem) tp += dir == Direction::greater_equal ? v >= t : v <= t;
    for (double v : non) tn += dir == Direction::greater_equal ? v < t : v > t;
    best = std::max(best, 0.5 * (tp / mem.size() + tn / non.size()));
  }
  return best;
}

QueryFn constant_query(Posterior p) {
  return [p](std::span<const Image> xs) { return std::vector<Posterior>(xs.size(), p); };
}

}  // namespace

TEST_CASE("attack names") {
  for (auto k : kAllAttacks) CHECK(attack_from_string(to_string(k)) == k);
  CHECK(parse_attack_list("all").size() == 6);
  CHECK(parse_attack_list("da,conf") == std::vector<AttackKind>{AttackKind::da, AttackKind::conf});
  CHECK_THROWS_AS(parse_attack_list("da,bogus"), ConfigError);
  CHECK_THROWS_AS(parse_attack_list(""), ConfigError);
}

TEST_CASE("sorted posterior feature") {
  CHECK(sorted_posterior_feature({0.1, 0.7, 0.2}) == std::vector<double>{0.7, 0.2, 0.1});
  CHECK(sorted_posterior_feature({0.25, 0.25, 0.25, 0.25}) ==
        std::vector<double>{0.25, 0.25, 0.25, 0.25});
  Rng rng(1);
  for (int i = 0; i < 50; ++i) {
    auto p = test::random_posterior(rng, 5);
    auto q = p;
    rng.shuffle(std::span<double>(q));
    CHECK(sorted_posterior_feature(p) == sorted_posterior_feature(q));
  }
}

TEST_CASE("metric examples") {
  CHECK(metric_corr({0.9, 0.1}, 0) == 1);
  CHECK(metric_corr({0.9, 0.1}, 1) == 0);
  CHECK(metric_corr({0.5, 0.5}, 0) == 1);
  CHECK(metric_corr({0.5, 0.5}, 1) == 0);
  CHECK(metric_conf({0.9, 0.1}, 0) == 0.9);
  CHECK(metric_conf({0.0, 1.0}, 1) == 1.0);
  CHECK(metric_conf({0.25, 0.75}, 0) == 0.25);
  CHECK(metric_entropy({0.0, 1.0, 0.0}) == 0.0);
  CHECK(metric_entropy({0.25, 0.25, 0.25, 0.25}) == doctest::Approx(std::log(4.0)).epsilon(1e-12));
  CHECK(metric_entropy({0.5, 0.25, 0.25}) == doctest::Approx(1.5 * std::log(2.0)).epsilon(1e-12));
  CHECK(metric_mentr({0.0, 1.0}, 1) == doctest::Approx(0.0).epsilon(1e-9));
  CHECK(std::abs(metric_mentr({0.0, 1.0}, 1)) < 1e-9);
  CHECK(metric_mentr({0.5, 0.5}, 0) == doctest::Approx(std::log(2.0)).epsilon(1e-12));
  // The clamp bounds the value as p_y reaches 0.
  CHECK(metric_mentr({1.0, 0.0}, 1) == doctest::Approx(-std::log(1e-12) * 2).epsilon(1e-4));
  CHECK(metric_mentr({1e-3, 1 - 1e-3}, 0) > metric_mentr({0.1, 0.9}, 0));
}

TEST_CASE("threshold learning examples") {
  using D = Direction;
  const std::vector<double> m1{0.9, 0.8}, n1{0.1, 0.2};
  const auto r1 = learn_threshold(m1, n1, D::greater_equal);
  CHECK(r1.global > 0.2);
  CHECK(r1.global <= 0.8);
  CHECK(balanced_accuracy(m1, n1, r1.global, D::greater_equal) == 1.0);

  const std::vector<double> same{0.3, 0.5, 0.7};
  const auto r2 = learn_threshold(same, same, D::greater_equal);
  CHECK(balanced_accuracy(same, same, r2.global, D::greater_equal) == doctest::Approx(0.5));

  const std::vector<double> m3{0.9, 0.4}, n3{0.5, 0.1};
  const auto r3 = learn_threshold(m3, n3, D::greater_equal);
  CHECK(balanced_accuracy(m3, n3, r3.global, D::greater_equal) == 0.75);
  CHECK(best_balanced_accuracy(m3, n3, D::greater_equal) == 0.75);

  const std::vector<double> empty;
  CHECK_THROWS_AS(learn_threshold(empty, n3, D::greater_equal), ContractError);
}

TEST_CASE("per-class thresholds fall back to the global rule") {
  const std::vector<double> mem{0.9, 0.8, 0.6};
  const std::vector<int> ml{0, 0, 1};
  const std::vector<double> non{0.2, 0.7};
  const std::vector<int> nl{0, 0};
  const auto rule = learn_threshold(mem, ml, non, nl, Direction::greater_equal, true, 3);
  REQUIRE(rule.thresholds.size() == 3);
  CHECK(rule.thresholds[1] == rule.global);
  CHECK(rule.thresholds[2] == rule.global);
  CHECK(rule.thresholds[0] > 0.7);
  CHECK(rule.margin(0.9, 0) > 0.0);
  CHECK(rule.margin(0.2, 0) < 0.0);
}

TEST_CASE("threshold learning reaches the exhaustive optimum") {
  Rng rng(2);
  for (int trial = 0; trial < 200; ++trial) {
    const auto nm = 1 + rng.uniform_int(25), nn = 1 + rng.uniform_int(25);
    std::vector<double> mem, non;
    for (std::uint64_t i = 0; i < nm; ++i) mem.push_back(std::round(rng.uniform() * 20) / 20);
    for (std::uint64_t i = 0; i < nn; ++i) non.push_back(std::round(rng.uniform() * 20) / 20);
    for (auto dir : {Direction::greater_equal, Direction::less_equal}) {
      const auto rule = learn_threshold(mem, non, dir);
      CHECK(balanced_accuracy(mem, non, rule.global, dir) ==
            doctest::Approx(best_balanced_accuracy(mem, non, dir)).epsilon(1e-12));
    }
  }
}

TEST_CASE("distance functions") {
  const std::vector<double> a{1, 0}, b{0, 1}, u{0.5, 0.5};
  CHECK(distance(SimFn::js, a, b) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(distance(SimFn::js, a, u) == doctest::Approx(0.31128).epsilon(1e-4));
  CHECK(distance(SimFn::js, a, u) == doctest::Approx(js_oracle(a, u)).epsilon(1e-12));
  CHECK(distance(SimFn::correlation, u, a) == 0.0);
  CHECK(distance(SimFn::cosine, a, b) == doctest::Approx(1.0));
  CHECK(distance(SimFn::euclidean, a, b) == doctest::Approx(std::sqrt(2.0)));
  const std::vector<double> three{1, 0, 0};
  CHECK_THROWS_AS(distance(SimFn::js, a, three), ContractError);

  Rng rng(3);
  for (int i = 0; i < 300; ++i) {
    const int c = 2 + static_cast<int>(rng.uniform_int(8));
    const auto p = test::random_posterior(rng, c, true);
    const auto q = test::random_posterior(rng, c, true);
    for (auto fn : {SimFn::js, SimFn::cosine, SimFn::correlation, SimFn::euclidean}) {
      const double d = distance(fn, p, q);
      REQUIRE(d >= -1e-12);
      REQUIRE(d == doctest::Approx(distance(fn, q, p)).epsilon(1e-12));
      REQUIRE(std::abs(distance(fn, p, p)) < 1e-9);
    }
    REQUIRE(distance(SimFn::js, p, q) <= 1.0);
  }
}

TEST_CASE("similarity features from posteriors") {
  const std::vector<Posterior> w{{1, 0}, {0.5, 0.5}}, s{{1, 0}, {0, 1}};
  const auto f = da_features_from_posteriors(w, s, SimFn::js);
  REQUIRE(f.size() == 12);
  const double j = js_oracle(std::vector<double>{1, 0}, std::vector<double>{0.5, 0.5});
  const std::vector<double> expect{j, j, 0, 0, 1, 1, 0, 0, 1, j, j, 0};
  for (std::size_t i = 0; i < 12; ++i) CHECK(f[i] == doctest::Approx(expect[i]).epsilon(1e-9));

  const std::vector<Posterior> w1{{0.7, 0.3}}, s1{{0.2, 0.8}};
  const auto k1 = da_features_from_posteriors(w1, s1, SimFn::js);
  REQUIRE(k1.size() == 3);
  CHECK(k1[0] == 0.0);
  CHECK(k1[1] == 0.0);
  CHECK(k1[2] > 0.0);

  Rng rng(4);
  for (int K : {1, 2, 5, 10}) {
    std::vector<Posterior> wv, sv;
    for (int i = 0; i < K; ++i) {
      wv.push_back(test::random_posterior(rng, 4));
      sv.push_back(test::random_posterior(rng, 4));
    }
    for (auto fn : {SimFn::js, SimFn::cosine, SimFn::correlation, SimFn::euclidean}) {
      const auto g = da_features_from_posteriors(wv, sv, fn);
      REQUIRE(g.size() == static_cast<std::size_t>(3 * K * K));
      const auto kk = static_cast<std::ptrdiff_t>(K * K);
      for (int b = 0; b < 3; ++b)
        CHECK(std::is_sorted(g.begin() + b * kk, g.begin() + (b + 1) * kk, std::greater<>()));
      // w-w and s-s blocks end with at least K zeros (the diagonal).
      for (int b = 0; b < 2; ++b)
        for (int i = 0; i < K; ++i) CHECK(std::abs(g[static_cast<std::size_t>((b + 1) * kk - 1 - i)]) < 1e-12);
      // Consistent class relabeling leaves the features unchanged.
      auto pw = wv, ps = sv;
      for (auto* set : {&pw, &ps})
        for (auto& p : *set) std::rotate(p.begin(), p.begin() + 1, p.end());
      const auto h = da_features_from_posteriors(pw, ps, fn);
      for (std::size_t i = 0; i < g.size(); ++i) CHECK(h[i] == doctest::Approx(g[i]).epsilon(1e-9));
    }
  }
  const std::vector<Posterior> nan_w{{std::nan(""), 0.5}};
  CHECK_THROWS_AS(da_features_from_posteriors(nan_w, nan_w, SimFn::euclidean), DataError);
}

TEST_CASE("similarity features of a constant model are zero") {
  Rng rng(5);
  const auto img = test::random_image(rng);
  const auto query = constant_query({0.6, 0.3, 0.1});
  for (int K : {1, 3}) {
    const auto f = da_features(query, img, K, SimFn::js, 2, rng);
    CHECK(f.size() == static_cast<std::size_t>(3 * K * K));
    for (double v : f) CHECK(v == 0.0);
  }
  const auto views = da_views(img, 3, 2, rng);
  CHECK(views.size() == 6);
}

TEST_CASE("attack model on separable features") {
  Rng rng(6);
  std::vector<std::vector<double>> x;
  std::vector<int> y;
  for (int i = 0; i < 400; ++i) {
    const int label = i % 2;
    const double a = rng.uniform(-1, 1), b = rng.uniform(0.2, 1.0) * (label ? 1 : -1);
    x.push_back({a, a + b});
    y.push_back(label);
  }
  // The line x1 - x0 = 0 separates the classes exactly.
  for (std::size_t i = 0; i < x.size(); ++i) REQUIRE(((x[i][1] - x[i][0]) > 0) == (y[i] == 1));
  AttackTrainOptions opts;
  opts.seed = 1;
  const auto model = train_attack_nn(x, y, opts);
  const auto prob = model.member_probability(x);
  int correct = 0;
  for (std::size_t i = 0; i < x.size(); ++i) correct += (prob[i] >= 0.5) == (y[i] == 1);
  CHECK(correct / 400.0 >= 0.99);

  const auto again = train_attack_nn(x, y, opts);
  CHECK(again.net.flat_state() == model.net.flat_state());

  const auto dir = test::scratch_dir("attack_model");
  save_attack_model(model, dir / "m.ckpt");
  const auto loaded = load_attack_model(dir / "m.ckpt");
  CHECK(loaded.member_probability(x) == prob);

  const std::vector<int> one_class(x.size(), 1);
  CHECK_THROWS_AS(train_attack_nn(x, one_class, opts), ContractError);
}

TEST_CASE("attack model on random labels stays near chance") {
  double total = 0.0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    Rng rng(100 + seed);
    std::vector<std::vector<double>> x, hx;
    std::vector<int> y, hy;
    for (int i = 0; i < 400; ++i) {
      std::vector<double> row(4);
      for (auto& v : row) v = rng.normal();
      (i < 200 ? x : hx).push_back(row);
      (i < 200 ? y : hy).push_back(i % 2);
    }
    AttackTrainOptions opts;
    opts.seed = seed;
    opts.epochs = 30;
    const auto model = train_attack_nn(x, y, opts);
    const auto p = model.member_probability(hx);
    total += eval::auc(p, hy);
  }
  const double mean = total / 10;
  CHECK(mean >= 0.4);
  CHECK(mean <= 0.6);
}

TEST_CASE("attack pipeline on a constant model gives chance AUC") {
  const auto store = make_synthetic_dataset(80, 4, 0);
  const auto bundle = split_dataset(store, 8, 0);
  const auto tset = attack_set(bundle, store, ssl::Role::target);
  const auto sset = attack_set(bundle, store, ssl::Role::shadow);
  CHECK(tset.size() == bundle.target_train.size() + bundle.target_test.size());
  CHECK(tset.ids.front() == bundle.target_train.front());
  std::size_t labeled = 0;
  for (auto s : tset.subsets) labeled += s == Subset::labeled_member;
  CHECK(labeled == 8);

  AttackConfig config;
  config.views = 2;
  config.nn.epochs = 5;
  const auto query = constant_query({0.4, 0.3, 0.2, 0.1});
  const auto shadow = extract_features(query, sset, store, config);
  const auto target = extract_features(query, tset, store, config);
  CHECK(target.da.size() == tset.size());
  CHECK(target.da[0].size() == 12);
  for (auto kind : kAllAttacks) {
    if (kind == AttackKind::corr || kind == AttackKind::conf || kind == AttackKind::mentr) {
      // Class-dependent metrics still carry label information; check shape only.
      const auto records = run_attack(calibrate(kind, shadow, sset, config), target, tset);
      CHECK(records.size() == tset.size());
      continue;
    }
    const auto records = run_attack(calibrate(kind, shadow, sset, config), target, tset);
    REQUIRE(records.size() == tset.size());
    CHECK(eval::auc(records) == doctest::Approx(0.5));
    for (std::size_t i = 0; i < records.size(); ++i) {
      CHECK(records[i].sample_id == tset.ids[i]);
      CHECK(records[i].is_member == tset.is_member(i));
    }
  }
}

TEST_CASE("correctness attack separates a perfectly memorizing model") {
  const auto store = make_synthetic_dataset(80, 4, 0);
  const auto bundle = split_dataset(store, 8, 0);
  const auto tset = attack_set(bundle, store, ssl::Role::target);
  const auto sset = attack_set(bundle, store, ssl::Role::shadow);
  // Posteriors keyed by set position: correct for members, wrong otherwise.
  auto table_for = [](const AttackSet& set) {
    FeatureTable t;
    for (std::size_t i = 0; i < set.size(); ++i) {
      Posterior p(4, 0.0);
      const int y = set.labels[i];
      p[static_cast<std::size_t>(set.is_member(i) ? y : (y + 1) % 4)] = 1.0;
      t.posteriors.push_back(p);
    }
    return t;
  };
  AttackConfig config;
  config.kinds = {AttackKind::corr};
  const auto attack = calibrate(AttackKind::corr, table_for(sset), sset, config);
  CHECK(eval::auc(run_attack(attack, table_for(tset), tset)) == 1.0);

  FeatureTable missing = table_for(sset);
  CHECK_THROWS_AS(calibrate(AttackKind::da, missing, sset, config), PrerequisiteError);
}

TEST_CASE("threshold attack scores are monotone in the metric") {
  Rng rng(9);
  AttackSet set;
  FeatureTable table;
  for (int i = 0; i < 60; ++i) {
    set.ids.push_back(i);
    set.subsets.push_back(i < 30 ? Subset::unlabeled_member : Subset::nonmember);
    set.labels.push_back(0);
    table.posteriors.push_back(test::random_posterior(rng, 3));
  }
  AttackConfig config;
  config.per_class_thresholds = false;
  for (auto kind : {AttackKind::conf, AttackKind::entropy, AttackKind::mentr}) {
    const auto records = run_attack(calibrate(kind, table, set, config), table, set);
    std::vector<double> raw;
    std::vector<int> labels;
    for (std::size_t i = 0; i < set.size(); ++i) {
      const double v = metric_value(kind, table.posteriors[i], 0);
      raw.push_back(member_direction(kind) == Direction::greater_equal ? v : -v);
      labels.push_back(set.is_member(i));
    }
    CHECK(eval::auc(records) == doctest::Approx(eval::auc(raw, labels)).epsilon(1e-12));
  }
}
