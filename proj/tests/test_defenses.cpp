#include <cmath>
#include <limits>

#include "doctest.h"
#include "semileak/core/error.hpp"
#include "semileak/defenses/defenses.hpp"
#include "semileak/defenses/dpsgd.hpp"
#include "support.hpp"

using namespace semileak;
using namespace semileak::defenses;

namespace {

double norm(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

}  // namespace

TEST_CASE("defense names and config validation") {
  for (auto k : {DefenseKind::none, DefenseKind::early_stop, DefenseKind::topk,
                 DefenseKind::stacking, DefenseKind::dpsgd})
    CHECK(defense_from_string(to_string(k)) == k);
  CHECK_THROWS_AS(defense_from_string("memguard"), ConfigError);

  DefenseConfig c;
  c.kind = DefenseKind::topk;
  c.k = 4;
  CHECK_NOTHROW(c.validate(4, 100));
  c.k = 5;
  CHECK_THROWS_AS(c.validate(4, 100), ConfigError);
  c.k = 0;
  CHECK_THROWS_AS(c.validate(4, 100), ConfigError);

  DefenseConfig es;
  es.kind = DefenseKind::early_stop;
  CHECK_THROWS_AS(es.validate(4, 100), ConfigError);
  es.stop_step = 101;
  CHECK_THROWS_AS(es.validate(4, 100), ConfigError);
  es.stop_step = 100;
  CHECK_NOTHROW(es.validate(4, 100));

  DefenseConfig st;
  st.kind = DefenseKind::stacking;
  st.stacking_widen = {1};
  CHECK_THROWS_AS(st.validate(4, 100), ConfigError);

  DefenseConfig dp;
  dp.kind = DefenseKind::dpsgd;
  dp.dp.clip_norm = 0.0;
  CHECK_THROWS_AS(dp.validate(4, 100), ConfigError);
}

TEST_CASE("top-k filter") {
  CHECK(topk_filter({0.7, 0.2, 0.1}, 1) == Posterior{0.7, 0, 0});
  CHECK(topk_filter({0.7, 0.2, 0.1}, 3) == Posterior{0.7, 0.2, 0.1});
  CHECK(topk_filter({0.4, 0.4, 0.2}, 1) == Posterior{0.4, 0, 0});
  CHECK(topk_filter({0.2, 0.4, 0.4}, 2) == Posterior{0, 0.4, 0.4});
  CHECK_THROWS_AS(topk_filter({0.5, 0.5}, 3), ContractError);
  CHECK_THROWS_AS(topk_filter({0.5, 0.5}, 0), ContractError);

  Rng rng(1);
  for (int i = 0; i < 200; ++i) {
    const auto p = test::random_posterior(rng, 6, true);
    const int k = 1 + static_cast<int>(rng.uniform_int(6));
    const auto q = topk_filter(p, k);
    CHECK(topk_filter(q, k) == q);
    int kept = 0;
    for (std::size_t j = 0; j < p.size(); ++j) {
      CHECK(q[j] <= p[j]);
      kept += q[j] != 0.0;
    }
    CHECK(kept <= k);
    CHECK(topk_filter(p, 6) == p);
  }
}

TEST_CASE("stacked prediction is the member mean") {
  const std::vector<Posterior> two{{1, 0}, {0, 1}};
  CHECK(stacked_predict(two) == Posterior{0.5, 0.5});
  const std::vector<Posterior> same{{0.3, 0.7}, {0.3, 0.7}};
  CHECK(stacked_predict(same)[0] == doctest::Approx(0.3).epsilon(1e-12));
  const std::vector<Posterior> three{{0.6, 0.4}, {0.3, 0.7}, {0.9, 0.1}};
  const auto m = stacked_predict(three);
  CHECK(m[0] == doctest::Approx(0.6).epsilon(1e-12));
  CHECK(m[1] == doctest::Approx(0.4).epsilon(1e-12));
  const std::vector<Posterior> mismatch{{0.5, 0.5}, {0.2, 0.3, 0.5}};
  CHECK_THROWS_AS(stacked_predict(mismatch), ContractError);
  const std::vector<Posterior> single{{1.0}};
  CHECK_THROWS_AS(stacked_predict(single), ContractError);

  Rng rng(2);
  for (int i = 0; i < 100; ++i) {
    std::vector<Posterior> members;
    const int n = 2 + static_cast<int>(rng.uniform_int(4));
    for (int k = 0; k < n; ++k) members.push_back(test::random_posterior(rng, 5));
    const auto s = stacked_predict(members);
    CHECK(is_valid_posterior(s, 1e-12));
    for (std::size_t c = 0; c < 5; ++c) {
      double lo = 1, hi = 0, sum = 0;
      for (const auto& p : members) lo = std::min(lo, p[c]), hi = std::max(hi, p[c]), sum += p[c];
      CHECK(s[c] >= lo - 1e-15);
      CHECK(s[c] <= hi + 1e-15);
      CHECK(std::abs(s[c] - sum / n) <= 1e-9);
    }
  }
}

TEST_CASE("defended query paths") {
  const attacks::QueryFn a = [](std::span<const Image> xs) {
    return std::vector<Posterior>(xs.size(), Posterior{0.6, 0.3, 0.1});
  };
  const attacks::QueryFn b = [](std::span<const Image> xs) {
    return std::vector<Posterior>(xs.size(), Posterior{0.2, 0.2, 0.6});
  };
  const std::vector<Image> xs(2, Image(3, 4, 4));
  const auto top = topk_query(a, 1)(xs);
  CHECK(top.size() == 2);
  CHECK(top[1] == Posterior{0.6, 0, 0});
  const auto stacked = stacked_query({a, b})(xs);
  CHECK(stacked[0][2] == doctest::Approx(0.35));
  const std::vector<attacks::QueryFn> models{a, b};
  CHECK(stacked_predict(models, xs[0]) == stacked[0]);
}

TEST_CASE("dpsgd update") {
  Rng rng(3);
  const std::vector<std::vector<double>> small{{0.1, 0.2}, {0.3, -0.1}};
  const auto plain = dpsgd_update(small, 1.0, 0.0, rng);
  CHECK(plain[0] == doctest::Approx(0.2).epsilon(1e-12));
  CHECK(plain[1] == doctest::Approx(0.05).epsilon(1e-12));

  const std::vector<std::vector<double>> big{{6.0, 8.0}};
  const auto clipped = dpsgd_update(big, 1.0, 0.0, rng);
  CHECK(norm(clipped) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(clipped[0] == doctest::Approx(0.6).epsilon(1e-12));

  const double inf = std::numeric_limits<double>::infinity();
  for (int i = 0; i < 100; ++i) {
    std::vector<std::vector<double>> batch(1 + rng.uniform_int(16), std::vector<double>(7));
    for (auto& g : batch)
      for (auto& v : g) v = rng.normal() * 5;
    const double clip = rng.uniform(0.1, 3.0);
    CHECK(norm(dpsgd_update(batch, clip, 0.0, rng)) <= clip * (1 + 1e-12));
    std::vector<double> mean(7, 0.0);
    for (const auto& g : batch)
      for (std::size_t j = 0; j < 7; ++j) mean[j] += g[j] / static_cast<double>(batch.size());
    const auto unclipped = dpsgd_update(batch, inf, 0.0, rng);
    for (std::size_t j = 0; j < 7; ++j) CHECK(unclipped[j] == doctest::Approx(mean[j]).epsilon(1e-12));
  }

  // Noise: standard deviation noise_scale * clip / batch per coordinate.
  const std::vector<std::vector<double>> zeros(4, std::vector<double>(20000, 0.0));
  const auto noisy = dpsgd_update(zeros, 2.0, 0.5, rng);
  double sq = 0.0;
  for (double v : noisy) sq += v * v;
  CHECK(std::sqrt(sq / 20000) == doctest::Approx(0.5 * 2.0 / 4).epsilon(0.03));

  const std::vector<std::vector<double>> empty;
  CHECK_THROWS_AS(dpsgd_update(empty, 1.0, 0.0, rng), ContractError);
  const std::vector<std::vector<double>> ragged{{1.0}, {1.0, 2.0}};
  CHECK_THROWS_AS(dpsgd_update(ragged, 1.0, 0.0, rng), ContractError);
}

TEST_CASE("early stop checkpoint selection") {
  const std::vector<std::int64_t> steps{0, 10, 20, 30};
  CHECK(early_stop_checkpoint(steps, 30) == 30);
  CHECK(early_stop_checkpoint(steps, 25) == 20);
  CHECK(early_stop_checkpoint(steps, 0) == 0);
  const std::vector<std::int64_t> late{10, 20};
  CHECK_THROWS_AS(early_stop_checkpoint(late, 5), PrerequisiteError);
}

TEST_CASE("defense rows") {
  eval::StepReport r;
  r.test_acc = 0.7;
  r.aucs = {{attacks::AttackKind::da, 0.6, 0.8, 0.55}, {attacks::AttackKind::conf, 0.5, {}, {}}};
  const auto rows = defense_rows("topk_1", r);
  REQUIRE(rows.size() == 2);
  CHECK(rows[0].defense == "topk_1");
  CHECK(rows[0].test_acc == 0.7);
  CHECK(rows[0].auc_labeled == 0.8);
  nlohmann::json j = rows[1];
  CHECK(j.at("auc_labeled").is_null());
  CHECK(j.at("defense") == "topk_1");
}
