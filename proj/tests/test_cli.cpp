#include <algorithm>
#include <cmath>
#include <fstream>
#include <regex>
#include <sstream>

#include "doctest.h"
#include "semileak/cli/cli.hpp"
#include "semileak/core/io.hpp"
#include "support.hpp"

using namespace semileak;
namespace fs = std::filesystem;

namespace {

int run_cli(std::vector<std::string> args) {
  args.insert(args.begin(), "semileak");
  std::vector<char*> argv;
  for (auto& a : args) argv.push_back(a.data());
  return cli::main(static_cast<int>(argv.size()), argv.data());
}

fs::path write_config(const fs::path& dir, const nlohmann::json& extra = {}) {
  nlohmann::json c = {{"ssl_method", "fixmatch"},
                      {"L", 8},
                      {"total_steps", 20},
                      {"batch_size", 4},
                      {"uratio", 2},
                      {"base_channels", 4},
                      {"widen_factor", 1},
                      {"K", 2},
                      {"checkpoint_every", 10},
                      {"attack_epochs", 2},
                      {"stacking_widen", {1, 2}},
                      {"data", {{"source", "synthetic"}, {"n", 400}, {"classes", 4}, {"seed", 0}}}};
  if (extra.is_object()) c.update(extra);
  const auto path = dir / "config.json";
  std::ofstream(path) << c.dump();
  return path;
}

std::vector<std::vector<std::string>> read_csv(const fs::path& path) {
  std::vector<std::vector<std::string>> rows;
  std::istringstream in(read_text(path));
  for (std::string line; std::getline(in, line);) {
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream ls(line);
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    rows.push_back(cells);
  }
  return rows;
}

double svg_attr(const std::string& svg, const std::string& name) {
  std::smatch m;
  REQUIRE(std::regex_search(svg, m, std::regex(name + "=\"([^\"]+)\"")));
  return std::stod(m[1]);
}

}  // namespace

TEST_CASE("prepare writes an even split and is reproducible") {
  const auto dir = test::scratch_dir("cli_prepare");
  const auto config = write_config(dir);
  const auto out = (dir / "run").string();
  REQUIRE(run_cli({"prepare", "--config", config.string(), "--out", out, "--seed", "3"}) == 0);
  const auto manifest = read_json(dir / "run" / "manifest.json");
  for (const char* part : {"target_train", "target_test", "shadow_train", "shadow_test"})
    CHECK(manifest["split"][part] == 100);
  const auto first = read_text(dir / "run" / "manifest.json");
  const auto split = read_text(dir / "run" / "split.json");
  REQUIRE(run_cli({"prepare", "--config", config.string(), "--out", out, "--seed", "3"}) == 0);
  CHECK(read_text(dir / "run" / "manifest.json") == first);
  CHECK(read_text(dir / "run" / "split.json") == split);

  // A different configuration in the same directory is refused.
  CHECK(run_cli({"prepare", "--config", config.string(), "--out", out, "--seed", "4"}) == 2);

  // Report with only the prepare stage gives header-only sweep files.
  REQUIRE(run_cli({"report", "--out", out}) == 0);
  const auto rows = read_csv(dir / "run" / "reports" / "sweep.csv");
  REQUIRE(rows.size() == 1);
  CHECK(rows[0][0] == "step");
  CHECK(rows[0].size() == 5 + 3 * 6);
}

TEST_CASE("exit codes") {
  const auto dir = test::scratch_dir("cli_exit");
  const auto out = (dir / "run").string();
  CHECK(run_cli({"train", "target", "--out", out}) == 3);
  CHECK(run_cli({"attack", "--out", out}) == 3);

  const auto big_l = write_config(dir, {{"L", 101}});
  CHECK(run_cli({"prepare", "--config", big_l.string(), "--out", out}) == 2);

  std::ofstream(dir / "typo.json") << R"({"tua": 0.5})";
  CHECK(run_cli({"prepare", "--config", (dir / "typo.json").string(), "--out", out}) == 2);
  std::ofstream(dir / "bad.json") << "{not json";
  CHECK(run_cli({"prepare", "--config", (dir / "bad.json").string(), "--out", out}) == 2);
  CHECK(run_cli({"attack", "--out", out, "--sim", "manhattan"}) == 2);
  CHECK(run_cli({"bogus"}) == 2);

  const auto config = write_config(dir);
  REQUIRE(run_cli({"prepare", "--config", config.string(), "--out", out}) == 0);
  CHECK(run_cli({"attack", "--out", out}) == 3);
  CHECK(run_cli({"defend", "--out", out, "--defense", "topk"}) == 3);
  std::ofstream(dir / "run" / "split.json") << R"({"target_train": 5})";
  CHECK(run_cli({"train", "target", "--out", out}) == 4);
}

TEST_CASE("full pipeline, defenses and reports") {
  const auto dir = test::scratch_dir("cli_run");
  const auto config = write_config(dir);
  const auto out_path = dir / "run";
  const auto out = out_path.string();
  REQUIRE(run_cli({"run", "--config", config.string(), "--out", out, "--seed", "1"}) == 0);

  auto manifest = read_json(out_path / "manifest.json");
  for (const char* s : {"prepare", "train_target", "train_shadow", "attack", "report"})
    CHECK(manifest["stages"][s] == true);
  const auto& ckpts = manifest["artifacts"]["checkpoints"]["target"];
  REQUIRE(ckpts.size() == 3);
  CHECK(ckpts.back()["step"] == 20);
  for (const auto& c : ckpts) CHECK(fs::exists(out_path / c["path"].get<std::string>()));

  // Six attacks with overall, labeled and unlabeled AUC each.
  const auto auc = read_csv(out_path / "attacks" / "k2_js_aug2" / "auc.csv");
  REQUIRE(auc.size() == 7);
  for (std::size_t i = 1; i < auc.size(); ++i) {
    REQUIRE(auc[i].size() == 4);
    for (std::size_t j = 1; j < 4; ++j) {
      const double v = std::stod(auc[i][j]);
      CHECK(v >= 0.0);
      CHECK(v <= 1.0);
    }
  }
  const auto undefended = manifest["attack_runs"]["k2_js_aug2"]["final"];

  // Chart axes cover the CSV extrema.
  const auto sweep = read_csv(out_path / "reports" / "sweep.csv");
  REQUIRE(sweep.size() == 4);
  const auto svg = read_text(out_path / "reports" / "sweep_overfit.svg");
  double lo = 1e9, hi = -1e9;
  for (std::size_t i = 1; i < sweep.size(); ++i) {
    const double v = std::stod(sweep[i][3]);
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  CHECK(svg_attr(svg, "data-y-min") <= lo + 1e-6);
  CHECK(svg_attr(svg, "data-y-max") >= hi - 1e-6);
  CHECK(svg_attr(svg, "data-x-min") <= 0.0);
  CHECK(svg_attr(svg, "data-x-max") >= 20.0);

  auto defended = [&](const std::string& label) {
    const auto m = read_json(out_path / "manifest.json");
    std::map<std::string, nlohmann::json> rows;
    for (const auto& r : m["defenses"])
      if (r["defense"] == label) rows[r["attack"].get<std::string>()] = r;
    return rows;
  };
  auto undefended_rows = [&] {
    std::map<std::string, nlohmann::json> rows;
    for (const auto& a : undefended) rows[a["attack"].get<std::string>()] = a;
    return rows;
  };
  const auto base = undefended_rows();
  REQUIRE(base.size() == 6);

  REQUIRE(run_cli({"defend", "--out", out, "--defense", "none"}) == 0);
  REQUIRE(run_cli({"defend", "--out", out, "--defense", "topk", "--k", "4"}) == 0);
  REQUIRE(run_cli({"defend", "--out", out, "--defense", "early_stop", "--stop-step", "20"}) == 0);
  for (const std::string label : {"none", "topk_4", "early_stop_20"}) {
    const auto rows = defended(label);
    REQUIRE(rows.size() == 6);
    for (const auto& [attack, row] : rows) {
      CHECK(std::abs(row["auc_overall"].get<double>() -
                     base.at(attack)["auc_overall"].get<double>()) <= 1e-9);
      CHECK(std::abs(row["auc_labeled"].get<double>() -
                     base.at(attack)["auc_labeled"].get<double>()) <= 1e-9);
    }
  }
  REQUIRE(run_cli({"defend", "--out", out, "--defense", "topk", "--k", "1"}) == 0);
  CHECK(defended("topk_1").size() == 6);
  REQUIRE(run_cli({"defend", "--out", out, "--defense", "early_stop", "--stop-step", "5"}) == 0);
  CHECK(defended("early_stop_5").begin()->second["step"] == 0);
  CHECK(run_cli({"defend", "--out", out, "--defense", "early_stop"}) == 2);
  CHECK(run_cli({"defend", "--out", out, "--defense", "topk", "--k", "5"}) == 2);

  // An ablation with other attack settings lands next to the default run.
  REQUIRE(run_cli({"attack", "--out", out, "--views", "1", "--sim", "cosine", "--attacks",
                   "da,conf"}) == 0);
  REQUIRE(run_cli({"report", "--out", out}) == 0);
  CHECK(fs::exists(out_path / "reports" / "sweep_k1_cosine_aug2.csv"));
  const auto ablation = read_csv(out_path / "reports" / "ablation.csv");
  CHECK(ablation.size() == 1 + 6 + 2);
  const auto defenses = read_csv(out_path / "reports" / "defenses.csv");
  CHECK(defenses.size() == 1 + 5 * 6);
}

TEST_CASE("an interrupted training stage resumes to the same checkpoint") {
  const auto dir = test::scratch_dir("cli_resume");
  const auto config = write_config(dir);
  const auto out_path = dir / "run";
  const auto out = out_path.string();
  REQUIRE(run_cli({"prepare", "--config", config.string(), "--out", out}) == 0);
  REQUIRE(run_cli({"train", "shadow", "--out", out}) == 0);
  const auto final_path = out_path / "checkpoints" / "shadow" / "step_00000020.ckpt";
  const auto final_bytes = read_text(final_path);
  const auto log = read_text(out_path / "logs" / "shadow.jsonl");

  // Roll the manifest back to the state after the step-10 checkpoint.
  auto m = read_json(out_path / "manifest.json");
  m["stages"]["train_shadow"] = false;
  auto& list = m["artifacts"]["checkpoints"]["shadow"];
  list.erase(list.size() - 1);
  write_json_atomic(out_path / "manifest.json", m);
  fs::remove(final_path);

  REQUIRE(run_cli({"train", "shadow", "--out", out}) == 0);
  CHECK(read_text(final_path) == final_bytes);
  CHECK(read_text(out_path / "logs" / "shadow.jsonl") == log);
  CHECK(read_json(out_path / "manifest.json")["stages"]["train_shadow"] == true);
}

TEST_CASE("zero-step training keeps only the initial checkpoint") {
  const auto dir = test::scratch_dir("cli_zero");
  const auto config = write_config(dir, {{"total_steps", 0}});
  const auto out = (dir / "run").string();
  REQUIRE(run_cli({"prepare", "--config", config.string(), "--out", out}) == 0);
  REQUIRE(run_cli({"train", "target", "--out", out}) == 0);
  const auto m = read_json(dir / "run" / "manifest.json");
  REQUIRE(m["artifacts"]["checkpoints"]["target"].size() == 1);
  CHECK(m["artifacts"]["checkpoints"]["target"][0]["step"] == 0);
}
