#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "meshshift/cli/config.hpp"
#include "meshshift/harness/report.hpp"

namespace meshshift::cli {

/// Exit codes shared by every subcommand.
enum ExitCode : int {
  kOk = 0,
  kFailure = 1,         // a check or audit failed
  kUsage = 2,           // bad config, flags or missing inputs
  kQuorum = 3,          // more than half of a cell's runs were unstable
  kExistingOutput = 4,  // output present and --force not given
};

/// A parsed config plus the exact bytes it was read from, for echoing.
struct LoadedConfig {
  PipelineConfig config;
  std::string echo;
};

/// Reads a config file, or builds the default config when no path is given.
LoadedConfig load_config(const std::optional<std::filesystem::path>& path);

struct RunFlags {
  bool force = false;
  bool dry_run = false;
  std::optional<std::size_t> workers;
  std::optional<std::string> profile;
  std::optional<std::string> seeds;
  std::optional<std::string> strategies;
  std::optional<std::string> difficulty;
};

/// Applies flag and environment overrides, then re-validates. Flags win over the environment.
void apply_overrides(PipelineConfig& c, const RunFlags& flags);

struct GenerateFlags {
  std::optional<std::string> task;
  std::optional<std::size_t> n;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> resolution;
  std::optional<std::filesystem::path> out;
};

int cmd_generate(LoadedConfig cfg, const GenerateFlags& g, const RunFlags& flags, std::ostream& out);
int cmd_bench(LoadedConfig cfg, const RunFlags& flags, std::ostream& out);
int cmd_select(LoadedConfig cfg, const RunFlags& flags, std::ostream& out);
int cmd_report(LoadedConfig cfg, const RunFlags& flags, std::ostream& out);
int cmd_evaluate(const std::filesystem::path& run_dir, const std::filesystem::path& dataset_dir,
                 datagen::Difficulty difficulty, const std::string& domain, std::ostream& out);
/// Checks a dataset, run, sweep or report directory and prints one PASS/FAIL line per check.
int cmd_verify(const std::filesystem::path& dir, std::ostream& out);

/// Reads a sweep directory back into the form the report builder consumes.
harness::DifficultyRuns load_sweep(const std::filesystem::path& sweep_dir, datagen::Difficulty difficulty,
                                   double target_range_width);

}  // namespace meshshift::cli
