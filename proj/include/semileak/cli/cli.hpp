#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "semileak/ssl/ssl.hpp"

namespace semileak::cli {

// Command-line options shared by every subcommand.
struct Options {
  std::filesystem::path out;
  std::optional<std::filesystem::path> config;
  std::optional<std::uint64_t> seed;
  std::string attacks = "all";
  std::string defense = "none";
  std::optional<std::int64_t> stop_step;
  std::optional<int> k;
  std::optional<int> views;
  std::optional<std::string> sim;
  std::optional<int> aug_level;
};

// Stages. Each reads and updates <out>/manifest.json and throws ConfigError,
// PrerequisiteError or DataError on failure.
void cmd_prepare(const Options& o);
void cmd_train(const Options& o, ssl::Role role);
void cmd_attack(const Options& o);
void cmd_defend(const Options& o);
void cmd_report(const Options& o);
// prepare, train target, train shadow, attack, report.
void cmd_run(const Options& o);

// Exit codes of the command-line tool.
inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitPrerequisite = 3;
inline constexpr int kExitData = 4;

// Parses argv and runs the chosen subcommand; errors are reported on stderr
// and mapped to the exit codes above.
int main(int argc, char** argv);

}  // namespace semileak::cli
