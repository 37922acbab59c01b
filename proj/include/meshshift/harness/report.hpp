#pragma once

#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "meshshift/datagen/split.hpp"
#include "meshshift/harness/sweep.hpp"
#include "meshshift/selection/selection.hpp"

namespace meshshift::harness {

/// Completed sweep of one difficulty, as the report consumes it.
struct DifficultyRuns {
  datagen::Difficulty difficulty = datagen::Difficulty::medium;
  double target_range_width = 0.0;
  std::vector<selection::RunRecord> records;           // sorted by run id
  std::map<std::string, double> source_test_nrmse;     // by run id, stable runs only
  std::map<std::string, MetricsReport> source_metrics;  // per-sample vectors for the histogram table
  std::map<std::string, MetricsReport> target_metrics;
};

/// One strategy's pick inside one (architecture, kind, seed) pool.
struct Choice {
  datagen::Difficulty difficulty;
  std::string architecture;
  std::string kind;
  selection::Strategy strategy;
  std::uint64_t seed;
  std::string run_id;
  double source_nrmse;
  double target_nrmse;
  selection::SelectionScore score;
};

struct SummaryRow {
  datagen::Difficulty difficulty;
  std::string architecture;
  std::string kind;      // "none" for the unregularized baseline
  std::string strategy;  // "baseline" for kind none
  std::string domain;    // "source" or "target"
  double mean = 0.0;
  double std = 0.0;
  std::size_t seeds = 0;
  double difference = 0.0;  // mean - baseline mean of the same domain; negative is an improvement
  std::size_t unstable = 0;
};

struct ScalingRow {
  datagen::Difficulty difficulty;
  std::string architecture;
  double target_range_width = 0.0;
  double baseline_source = 0.0;
  double baseline_target = 0.0;
  double baseline_target_std = 0.0;
  std::string best_uda;  // "kind/strategy", empty if no regularized runs
  double best_uda_target = 0.0;
  double tb_target = 0.0;
};

struct Report {
  std::vector<Choice> choices;
  std::vector<SummaryRow> summary;
  std::vector<ScalingRow> scaling;
  /// Cells where more than half of the runs are unstable, as "difficulty/arch/kind".
  std::vector<std::string> quorum_failures;
};

/// Deterministic fold over the completed runs. Target NRMSE is opened through the
/// sealed accessor in the final-report context; TB opens it in the oracle context.
Report build_report(const std::vector<DifficultyRuns>& runs, const std::vector<selection::Strategy>& strategies,
                    selection::OracleAudit& audit, const selection::DensityRatioConfig& ratio_cfg = {});

std::string summary_csv(const Report& r);
std::string scaling_csv(const Report& r);
std::string per_sample_csv(const std::vector<DifficultyRuns>& runs);
nlohmann::json selection_json(const Report& r);

/// Sample mean and 1/(n-1) standard deviation; a single value has std 0.
std::pair<double, double> mean_std(const std::vector<double>& v);

/// Number formatting shared by every CSV: shortest round-trip representation.
std::string format_number(double v);

}  // namespace meshshift::harness
