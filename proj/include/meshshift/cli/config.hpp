#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "meshshift/datagen/split.hpp"
#include "meshshift/harness/train.hpp"
#include "meshshift/selection/selection.hpp"

namespace meshshift::cli {

inline constexpr int kConfigVersion = 1;

/// Everything a pipeline run depends on besides the code itself.
struct PipelineConfig {
  int format_version = kConfigVersion;
  std::string name = "bench";
  harness::Profile profile = harness::Profile::desk;

  std::string task = datagen::kPlateHeat;
  std::size_t resolution = 0;  // 0 keeps the task default
  std::size_t samples = 600;
  std::uint64_t corpus_seed = 7;
  std::string dataset;  // directory name under <output_root>/datasets; derived when empty

  std::uint64_t split_seed = 3;
  std::optional<datagen::Boundaries> boundaries;  // task defaults when absent
  std::vector<datagen::Difficulty> difficulties = {datagen::Difficulty::medium};

  harness::TrainConfig train;  // coord_dim, num_params and num_fields follow the task
  std::vector<uda::Kind> kinds = {uda::Kind::coral, uda::Kind::cmd, uda::Kind::dann};
  std::vector<double> lambdas;  // profile grid when empty
  std::vector<std::uint64_t> seeds = {0, 1, 2, 3};
  std::vector<selection::Strategy> strategies = {selection::Strategy::SB, selection::Strategy::IWV,
                                                 selection::Strategy::DEV, selection::Strategy::TB};
  selection::DensityRatioConfig ratio;

  std::filesystem::path output_root = "out";
  std::size_t workers = 0;  // 0 means one per hardware thread

  datagen::TaskSpec task_spec() const;
  datagen::Boundaries effective_boundaries() const;
  std::vector<double> effective_lambdas() const;
  std::size_t effective_workers() const;
  std::string dataset_name() const;
  std::filesystem::path dataset_dir() const;
  std::filesystem::path sweep_dir(datagen::Difficulty d) const;
  std::filesystem::path report_dir() const;

  /// Fills the task-dependent model fields and applies the profile caps.
  void finalize();
  void validate() const;
};

/// Parses a config document. Errors name the offending field or the line and column.
PipelineConfig parse_config(const std::string& text, const std::string& origin);
nlohmann::json to_json(const PipelineConfig& c);

/// MESHSHIFT_OUTPUT_ROOT and MESHSHIFT_WORKERS, when set.
void apply_environment(PipelineConfig& c);

/// "3" means seeds 0..2; "0,5,9" lists them.
std::vector<std::uint64_t> parse_seeds(const std::string& s);
std::vector<datagen::Difficulty> parse_difficulties(const std::string& csv);

}  // namespace meshshift::cli
