#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>

#include "doctest.h"
#include "semileak/core/error.hpp"
#include "semileak/models/classifier.hpp"
#include "semileak/models/schedule.hpp"
#include "semileak/models/train_state.hpp"
#include "semileak/nn/loss.hpp"
#include "semileak/nn/optim.hpp"
#include "support.hpp"

using namespace semileak;
using namespace semileak::models;

namespace {

ClassifierSpec small_spec() {
  ClassifierSpec s;
  s.class_count = 3;
  s.base_channels = 2;
  s.widen_factor = 1;
  s.image_side = 8;
  return s;
}

template <typename T>
nn::Tensor<T> random_batch(Rng& rng, int n, int c, int side) {
  nn::Tensor<T> x(n, c, side, side);
  for (auto& v : x.data) v = static_cast<T>(rng.uniform());
  return x;
}

// Worst relative error between backprop and central differences of the
// mean cross-entropy over every parameter.
double worst_gradient_error(nn::Network<double>& net, const nn::Tensor<double>& x,
                            const std::vector<int>& y, nn::StatMode mode) {
  const std::vector<double> w(y.size(), 1.0 / static_cast<double>(y.size()));
  auto loss = [&] {
    auto copy = net;  // update mode would otherwise drift the running stats
    const auto z = copy.forward(x, mode, nullptr);
    const auto l = nn::cross_entropy<double>(z, y, w, nullptr);
    double t = 0.0;
    for (std::size_t i = 0; i < l.size(); ++i) t += w[i] * l[i];
    return t;
  };
  auto copy = net;
  copy.zero_grad();
  nn::Tape<double> tape;
  const auto z = copy.forward(x, mode, &tape);
  nn::Tensor<double> g;
  nn::cross_entropy<double>(z, y, w, &g);
  copy.backward(g, tape);
  const auto analytic = copy.flat_grads();

  double worst = 0.0;
  std::size_t k = 0;
  for (auto* p : net.params()) {
    for (std::size_t i = 0; i < p->value.size(); ++i, ++k) {
      const double orig = p->value[i];
      const double h = 1e-6;
      p->value[i] = orig + h;
      const double up = loss();
      p->value[i] = orig - h;
      const double down = loss();
      p->value[i] = orig;
      const double fd = (up - down) / (2 * h);
      const double an = analytic[k];
      // The floor keeps roundoff on exactly-zero gradients (biases before
      // batch norm) from counting as relative error.
      const double denom = std::max(1e-3, std::abs(fd) + std::abs(an));
      worst = std::max(worst, std::abs(fd - an) / denom);
    }
  }
  return worst;
}

}  // namespace

TEST_CASE("cosine learning rate schedule") {
  CHECK(cosine_lr(0, 100, 0.03) == 0.03);
  CHECK(cosine_lr(100, 100, 0.03) == doctest::Approx(0.0).epsilon(1e-15));
  CHECK(std::abs(cosine_lr(100, 100, 0.03)) < 1e-15);
  CHECK(cosine_lr(50, 100, 0.03) == doctest::Approx(0.03 * std::sqrt(2.0) / 2.0).epsilon(1e-12));
  CHECK(cosine_lr(50, 100, 0.03) == doctest::Approx(0.0212132).epsilon(1e-6));
  double prev = cosine_lr(0, 1000, 1.0);
  for (int k = 1; k <= 1000; ++k) {
    const double r = cosine_lr(k, 1000, 1.0);
    REQUIRE(r <= prev);
    REQUIRE(r >= 0.0);
    prev = r;
  }
  CHECK_THROWS_AS(cosine_lr(101, 100, 0.03), ContractError);
  CHECK_THROWS_AS(cosine_lr(-1, 100, 0.03), ContractError);
}

TEST_CASE("ema update") {
  std::vector<float> ema{1.0f, 2.0f}, theta{3.0f, 5.0f};
  nn::ema_update<float>(ema, theta, 0.0);
  CHECK(ema == theta);
  nn::ema_update<float>(ema, theta, 0.999);
  CHECK(ema == theta);

  std::vector<double> e{0.0}, t{1.0};
  for (int i = 0; i < 1000; ++i) nn::ema_update<double>(e, t, 0.999);
  // Geometric series: 1 - m^n.
  CHECK(e[0] == doctest::Approx(1.0 - std::pow(0.999, 1000)).epsilon(1e-12));
  CHECK(e[0] == doctest::Approx(0.6323).epsilon(1e-3));

  std::vector<double> short_theta{1.0, 2.0};
  CHECK_THROWS_AS(nn::ema_update<double>(e, short_theta, 0.5), ContractError);
}

TEST_CASE("network ema update keeps shapes") {
  const auto spec = small_spec();
  auto a = build_classifier<float>(spec, 1);
  const auto b = build_classifier<float>(spec, 2);
  const auto before = a.flat_state().size();
  nn::ema_update(a, b, 0.5);
  CHECK(a.flat_state().size() == before);
  CHECK(a.parameter_count() == b.parameter_count());
}

TEST_CASE("posteriors of an untrained classifier") {
  auto spec = small_spec();
  auto net = build_classifier<float>(spec, 0);
  net.zero_output_layer();
  Rng rng(1);
  std::vector<Image> batch;
  for (int i = 0; i < 5; ++i) batch.push_back(test::random_image(rng, 3, 8, 8));
  batch.push_back(batch[1]);
  const auto post = predict_posteriors(net, batch);
  REQUIRE(post.size() == 6);
  for (const auto& p : post) {
    CHECK(is_valid_posterior(p));
    for (double v : p) CHECK(v == doctest::Approx(1.0 / 3.0).epsilon(1e-9));
  }

  auto trained = build_classifier<float>(spec, 0);
  const auto q = predict_posteriors(trained, batch);
  for (const auto& p : q) CHECK(is_valid_posterior(p));
  for (std::size_t c = 0; c < 3; ++c) CHECK(q[1][c] == doctest::Approx(q[5][c]).epsilon(1e-6));
  const std::vector<Image> mixed{batch[0], Image(3, 9, 9)};
  CHECK_THROWS_AS(predict_posteriors(trained, mixed), ContractError);
}

TEST_CASE("classifier families") {
  ClassifierSpec tiny = small_spec();
  CHECK_NOTHROW(tiny.validate());
  auto wrn = tiny;
  wrn.family = ModelFamily::wrn28;
  auto net = build_classifier<float>(wrn, 0);
  Rng rng(2);
  const auto post = predict_posteriors(net, std::vector<Image>{test::random_image(rng, 3, 8, 8)});
  CHECK(post[0].size() == 3);
  auto bad = tiny;
  bad.widen_factor = 3;
  CHECK_THROWS(bad.validate());
  const auto mlp = build_attack_mlp<float>(AttackMLPSpec{30}, 0);
  CHECK(mlp.parameter_count() == 30 * 64 + 64 + 64 * 32 + 32 + 32 * 2 + 2);
}

TEST_CASE("analytic gradients match finite differences") {
  const auto spec = small_spec();
  auto net = build_classifier<double>(spec, 3);
  REQUIRE(net.parameter_count() <= 1000);
  Rng rng(5);
  const auto x = random_batch<double>(rng, 4, 3, 8);
  const std::vector<int> y{0, 1, 2, 1};
  CHECK(worst_gradient_error(net, x, y, nn::StatMode::frozen) <= 1e-4);
  CHECK(worst_gradient_error(net, x, y, nn::StatMode::update) <= 1e-4);
  CHECK(worst_gradient_error(net, x, y, nn::StatMode::running) <= 1e-4);

  auto mlp = build_attack_mlp<double>(AttackMLPSpec{6}, 1);
  nn::Tensor<double> f(5, 6, 1, 1);
  for (auto& v : f.data) v = rng.normal();
  CHECK(worst_gradient_error(mlp, f, {0, 1, 1, 0, 1}, nn::StatMode::frozen) <= 1e-4);
}

TEST_CASE("sgd with zero learning rate leaves parameters unchanged") {
  auto state = make_train_state(small_spec(), 10, 0, 0.9, 5e-4);
  const auto before = state.model.flat_state();
  Rng rng(7);
  const auto x = random_batch<float>(rng, 2, 3, 8);
  nn::Tape<float> tape;
  state.model.zero_grad();
  const auto z = state.model.forward(x, nn::StatMode::frozen, &tape);
  nn::Tensor<float> g;
  const std::vector<int> y{0, 1};
  const std::vector<double> w{0.5, 0.5};
  nn::cross_entropy<float>(z, y, w, &g);
  state.model.backward(g, tape);
  state.optimizer.step(state.model, 0.0);
  CHECK(state.model.flat_state() == before);
}

TEST_CASE("checkpoint round trip") {
  const auto dir = test::scratch_dir("ckpt");
  auto state = make_train_state(small_spec(), 10, 4, 0.9, 5e-4);
  state.step = 3;
  // Perturb the EMA and velocity so the round trip is not trivially equal.
  auto ema = state.ema.flat_state();
  for (auto& v : ema) v *= 0.5f;
  state.ema.load_flat_state(ema);
  state.optimizer.velocity().assign(state.model.params().size(), {});
  for (std::size_t i = 0; i < state.model.params().size(); ++i)
    state.optimizer.velocity()[i].assign(state.model.params()[i]->value.size(), 0.25f);
  state.set_extra({"flex", {2}, {1.0f, -1.0f}});
  checkpoint_save(state, dir / "s.ckpt");

  const auto loaded = checkpoint_load(dir / "s.ckpt", state.spec);
  CHECK(loaded.step == 3);
  CHECK(loaded.seed == 4);
  CHECK(loaded.total_steps == 10);
  CHECK(loaded.model.flat_state() == state.model.flat_state());
  CHECK(loaded.ema.flat_state() == state.ema.flat_state());
  CHECK(loaded.optimizer.velocity() == state.optimizer.velocity());
  REQUIRE(loaded.extra("flex") != nullptr);
  CHECK(loaded.extra("flex")->values == std::vector<float>{1.0f, -1.0f});

  Rng rng(8);
  std::vector<Image> batch{test::random_image(rng, 3, 8, 8), test::random_image(rng, 3, 8, 8)};
  CHECK(predict_posteriors(loaded.ema, batch) == predict_posteriors(state.ema, batch));

  auto other = state.spec;
  other.class_count = 4;
  CHECK_THROWS_AS(checkpoint_load(dir / "s.ckpt", other), DataError);

  const auto size = std::filesystem::file_size(dir / "s.ckpt");
  std::filesystem::copy_file(dir / "s.ckpt", dir / "t.ckpt");
  std::filesystem::resize_file(dir / "t.ckpt", size / 2);
  CHECK_THROWS(checkpoint_load(dir / "t.ckpt"));
  {
    std::ofstream out(dir / "junk.ckpt", std::ios::binary);
    out << "not a checkpoint";
  }
  CHECK_THROWS(checkpoint_load(dir / "junk.ckpt"));
}
