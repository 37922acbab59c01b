#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "meshshift/harness/train.hpp"

namespace meshshift::harness {

std::vector<double> paper_lambda_grid();
std::vector<double> desk_lambda_grid();  // includes 0

/// "sage-coral-1e-02-s0"; lambda 0 is written as "0" and its kind as "none".
std::string run_id(models::Architecture arch, uda::Kind kind, double lambda, std::uint64_t seed);

struct SweepSpec {
  TrainConfig base;
  std::vector<uda::Kind> kinds;   // regularized kinds; none is added automatically
  std::vector<double> lambdas;    // a 0 entry is ignored, the unregularized runs are always added
  std::vector<std::uint64_t> seeds;
  std::size_t workers = 1;
};

/// One configuration per (kind, lambda > 0, seed) plus one lambda = 0 run per seed, sorted by run id.
std::vector<TrainConfig> expand_sweep(const SweepSpec& spec);

struct SweepRun {
  RunResult result;
  std::optional<MetricsReport> source_test;
  std::optional<MetricsReport> target_test;
  std::string error;  // non-empty if the run threw something other than a numeric failure
};

/// Trains every configuration over `workers` threads, evaluates each, and writes
/// run directories under `out_dir` when it is non-empty. Failures stay local to their run.
std::vector<SweepRun> run_sweep(const SweepSpec& spec, const SplitData& data, const std::filesystem::path& out_dir,
                                selection::OracleAudit& audit);

/// Writes config.json, checkpoint.{bin,json}, loss_curve.csv, cache.bin and metrics.json.
void write_run_dir(const std::filesystem::path& dir, const SweepRun& run);

}  // namespace meshshift::harness
