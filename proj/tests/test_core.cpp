#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>

#include "doctest.h"
#include "semileak/core/config.hpp"
#include "semileak/core/dataset.hpp"
#include "semileak/core/error.hpp"
#include "semileak/core/rng.hpp"
#include "semileak/core/split.hpp"
#include "support.hpp"

using namespace semileak;

namespace {

SampleStore labeled_samples(int n, int classes) {
  SampleStore out;
  for (int i = 0; i < n; ++i) out.push_back({i, Image(1, 1, 1, 0.5f), i % classes});
  return out;
}

void check_partition(const SplitBundle& b, std::size_t n) {
  std::set<std::int64_t> all;
  std::size_t total = 0;
  for (const auto* part : {&b.target_train, &b.target_test, &b.shadow_train, &b.shadow_test}) {
    all.insert(part->begin(), part->end());
    total += part->size();
  }
  CHECK(total == n);
  CHECK(all.size() == n);
  CHECK(*all.begin() == 0);
  CHECK(*all.rbegin() == static_cast<std::int64_t>(n) - 1);
}

}  // namespace

TEST_CASE("rng streams are deterministic and keyed") {
  auto a = Rng::derive(7, "split", {1, 2});
  auto b = Rng::derive(7, "split", {1, 2});
  auto c = Rng::derive(7, "split", {1, 3});
  auto d = Rng::derive(7, "target", {1, 2});
  const auto va = a.next_u64();
  CHECK(va == b.next_u64());
  CHECK(va != c.next_u64());
  CHECK(va != d.next_u64());
  CHECK(stage_seed(1, "split") != stage_seed(1, "shadow"));
  CHECK(stage_seed(1, "split") != stage_seed(2, "split"));
}

TEST_CASE("rng value mappings stay in range") {
  Rng rng(3);
  std::vector<int> counts(5, 0);
  double sum = 0.0, sq = 0.0;
  for (int i = 0; i < 20000; ++i) {
    const auto k = rng.uniform_int(5);
    REQUIRE(k < 5);
    ++counts[k];
    const double u = rng.uniform();
    REQUIRE(u >= 0.0);
    REQUIRE(u < 1.0);
    const auto r = rng.uniform_range(-2, 2);
    REQUIRE(r >= -2);
    REQUIRE(r <= 2);
    const double z = rng.normal();
    sum += z;
    sq += z * z;
  }
  for (int c : counts) CHECK(c == doctest::Approx(4000).epsilon(0.1));
  CHECK(sum / 20000 == doctest::Approx(0.0).epsilon(0.05));
  CHECK(sq / 20000 == doctest::Approx(1.0).epsilon(0.05));
}

TEST_CASE("split of 40 samples into quarters of 10") {
  const auto samples = labeled_samples(40, 4);
  const auto b = split_dataset(samples, 4, 0);
  CHECK(b.target_train.size() == 10);
  CHECK(b.target_test.size() == 10);
  CHECK(b.shadow_train.size() == 10);
  CHECK(b.shadow_test.size() == 10);
  CHECK(std::count(b.labeled_mask.begin(), b.labeled_mask.end(), true) == 4);
  check_partition(b, 40);
  CHECK_NOTHROW(validate_bundle(b, samples, 4));
  CHECK(b == split_dataset(samples, 4, 0));
  CHECK_FALSE(b == split_dataset(samples, 4, 1));
}

TEST_CASE("split of a CIFAR-10 sized set gives quarters of 15000") {
  const auto samples = labeled_samples(60000, 10);
  const auto b = split_dataset(samples, 500, 0);
  CHECK(b.target_train.size() == 15000);
  CHECK(b.shadow_test.size() == 15000);
  CHECK(b.labeled_ids().size() == 500);
}

TEST_CASE("split partitions and stratifies for many seeds") {
  for (int n : {200, 201, 202, 203, 400}) {
    const auto samples = labeled_samples(n, 3);
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      const int L = 1 + static_cast<int>(seed % 3) * 2 + 2;
      const auto b = split_dataset(samples, L, seed);
      check_partition(b, static_cast<std::size_t>(n));
      std::vector<std::size_t> sizes{b.target_train.size(), b.target_test.size(),
                                     b.shadow_train.size(), b.shadow_test.size()};
      CHECK(*std::max_element(sizes.begin(), sizes.end()) -
                *std::min_element(sizes.begin(), sizes.end()) <=
            1);
      CHECK(b.target_train.size() == *std::max_element(sizes.begin(), sizes.end()));
      std::map<int, int> per_class;
      for (auto id : b.labeled_ids()) ++per_class[*samples[static_cast<std::size_t>(id)].label];
      CHECK(per_class.size() == 3);
      int lo = L, hi = 0;
      for (auto [c, k] : per_class) lo = std::min(lo, k), hi = std::max(hi, k);
      CHECK(hi - lo <= 1);
      CHECK(b.labeled_ids().size() == static_cast<std::size_t>(L));
    }
  }
}

TEST_CASE("split rejects bad arguments") {
  const auto samples = labeled_samples(40, 4);
  CHECK_THROWS_AS(split_dataset(samples, 11, 0), ContractError);
  CHECK_THROWS_AS(split_dataset(samples, 0, 0), ContractError);
  CHECK_THROWS_AS(split_dataset(std::span(samples).first(3), 1, 0), ContractError);
  // Fewer labeled slots than classes leaves a class unlabeled.
  CHECK_THROWS_AS(split_dataset(samples, 3, 0), DataError);
  // A class with no samples in the training quarter cannot be labeled.
  SampleStore skewed = labeled_samples(40, 4);
  for (auto& s : skewed) s.label = s.id < 39 ? 0 : 1;
  int failures = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    try {
      const auto b = split_dataset(skewed, 2, seed);
      CHECK_NOTHROW(validate_bundle(b, skewed, 2));
    } catch (const DataError&) {
      ++failures;
    }
  }
  CHECK(failures > 0);
}

TEST_CASE("split bundle round-trips through json") {
  const auto samples = labeled_samples(40, 4);
  const auto b = split_dataset(samples, 4, 5);
  nlohmann::json j = b;
  CHECK(j.get<SplitBundle>() == b);
}

TEST_CASE("cifar binary loader") {
  const auto dir = test::scratch_dir("cifar");
  std::vector<unsigned char> bytes(2 * kCifarRecordBytes, 0);
  bytes[0] = 3;
  bytes[kCifarRecordBytes] = 7;
  bytes[kCifarRecordBytes + 1] = 255;                // R(0,0) of record 1
  bytes[kCifarRecordBytes + 1 + 1024 + 33] = 255;    // G(1,1) of record 1
  {
    std::ofstream out(dir / "b.bin", std::ios::binary);
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  }
  const auto store = load_cifar_binary(dir / "b.bin");
  REQUIRE(store.size() == 2);
  CHECK(store[0].id == 0);
  CHECK(store[1].id == 1);
  CHECK(*store[0].label == 3);
  CHECK(*store[1].label == 7);
  CHECK(std::all_of(store[0].image.data.begin(), store[0].image.data.end(),
                    [](float v) { return v == 0.0f; }));
  CHECK(store[1].image.at(0, 0, 0) == 1.0f);
  CHECK(store[1].image.at(1, 1, 1) == 1.0f);
  CHECK(store[1].image.at(2, 1, 1) == 0.0f);

  {
    std::ofstream out(dir / "t.bin", std::ios::binary);
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(kCifarRecordBytes + 100));
  }
  try {
    load_cifar_binary(dir / "t.bin");
    FAIL("expected DataError");
  } catch (const DataError& e) {
    CHECK(std::string(e.what()).find(std::to_string(kCifarRecordBytes)) != std::string::npos);
  }
}

TEST_CASE("synthetic dataset is balanced, valid and seeded") {
  const auto a = make_synthetic_dataset(100, 4, 0);
  REQUIRE(a.size() == 100);
  std::map<int, int> counts;
  for (const auto& s : a) {
    ++counts[*s.label];
    CHECK(s.image.channels == 3);
    CHECK(s.image.height == 32);
    CHECK_NOTHROW(validate_sample(s, 4));
  }
  for (auto [c, k] : counts) CHECK(k == 25);
  const auto b = make_synthetic_dataset(100, 4, 0);
  CHECK(dataset_checksum(a) == dataset_checksum(b));
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i].image == b[i].image);
  const auto c = make_synthetic_dataset(100, 4, 1);
  CHECK(dataset_checksum(a) != dataset_checksum(c));
  CHECK_THROWS(make_synthetic_dataset(100, kSyntheticShapeCount + 1, 0));
  CHECK_THROWS(make_synthetic_dataset(3, 4, 0));
}

TEST_CASE("sample validation") {
  ImageSample s{0, Image(3, 2, 2, 0.5f), 1};
  CHECK_NOTHROW(validate_sample(s, 2));
  s.label = 2;
  CHECK_THROWS_AS(validate_sample(s, 2), DataError);
  s.label = 0;
  s.image.data[0] = 1.5f;
  CHECK_THROWS_AS(validate_sample(s, 2), DataError);
  s.image.data[0] = std::nanf("");
  CHECK_THROWS_AS(validate_sample(s, 2), DataError);
}

TEST_CASE("experiment config validation and json") {
  ExperimentConfig c;
  CHECK_NOTHROW(c.validate());
  auto bad = c;
  bad.tau = 1.01;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = c;
  bad.K = 0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = c;
  bad.uratio = 0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = c;
  bad.aug_level = 5;
  CHECK_THROWS_AS(bad.validate(), ConfigError);

  c.ssl_method = SslMethod::uda;
  c.sim_fn = SimFn::cosine;
  c.stacking_widen = {1, 2};
  nlohmann::json j = c;
  CHECK(j.get<ExperimentConfig>() == c);

  nlohmann::json partial = {{"ssl_method", "uda"}};
  CHECK(partial.get<ExperimentConfig>().tau == doctest::Approx(0.8));
  nlohmann::json typo = {{"tua", 0.5}};
  CHECK_THROWS_AS(typo.get<ExperimentConfig>(), ConfigError);
  CHECK_THROWS_AS(ssl_method_from_string("mixmatch"), ConfigError);
}
