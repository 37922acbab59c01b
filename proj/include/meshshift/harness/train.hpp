#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "meshshift/harness/data.hpp"
#include "meshshift/harness/metrics.hpp"
#include "meshshift/harness/optimizer.hpp"
#include "meshshift/models/surrogate.hpp"
#include "meshshift/selection/selection.hpp"
#include "meshshift/uda/uda.hpp"

namespace meshshift::harness {

enum class Profile { paper, desk };
std::string to_string(Profile p);
Profile profile_from_string(const std::string& s);

struct TrainConfig {
  models::ModelConfig model;
  uda::UdaConfig uda;
  double learning_rate = 1e-3;
  AdamWConfig adamw;
  double grad_clip = 1.0;
  std::size_t batch_size = 16;
  std::size_t max_epochs = 3000;
  std::size_t eval_every = 10;
  std::size_t patience = 500;
  double ema_decay = 0.95;
  std::uint64_t seed = 0;
  Profile profile = Profile::paper;

  /// Desk caps epochs at 300 and patience at 60; paper leaves values as given.
  void apply_profile();
  void validate() const;
  bool operator==(const TrainConfig&) const = default;
};

void to_json(nlohmann::json& j, const TrainConfig& c);
void from_json(const nlohmann::json& j, TrainConfig& c);

struct EpochLog {
  std::size_t epoch = 0;
  double recon = 0.0;
  double da = 0.0;
  double total = 0.0;
  std::optional<double> source_val;      // raw weights, on eval epochs
  std::optional<double> source_val_ema;  // shadow weights, on eval epochs
};

std::string loss_curve_csv(const std::vector<EpochLog>& log);

/// Forward pass over many graphs without recording gradients.
struct Inference {
  std::vector<Tensor> predictions;  // normalized, one N_i x F per graph
  Tensor z;                         // graphs x latent
};

Inference infer(const models::SurrogateModel& model, std::span<const models::GraphInput* const> graphs,
                std::size_t chunk = 32);
Tensor encode_conditions(const models::SurrogateModel& model, std::span<const models::GraphInput* const> graphs);

/// Mean squared error over nodes and fields of each sample, in z-score units.
std::vector<double> per_sample_loss(const std::vector<Tensor>& predictions, std::span<const LabeledGraph> truth);

struct RunResult {
  std::string run_id;
  TrainConfig config;
  bool stable = true;
  nlohmann::json diagnostics;  // set when the run went non-finite
  std::size_t epochs_run = 0;
  std::size_t best_epoch = 0;
  double best_source_val = 0.0;  // EMA weights of the returned checkpoint
  std::vector<EpochLog> log;
  std::optional<models::SurrogateModel> model;  // best EMA checkpoint; empty if unstable before any eval
  std::vector<double> source_val_losses;
  Tensor source_val_z;
  Tensor target_train_z;
};

/// Trains one configuration on one split. Target samples contribute inputs only.
RunResult train_run(const TrainConfig& cfg, const SplitData& data, const std::string& run_id = "run");

/// The selection view of a finished run. Target-test NRMSE is passed in sealed.
selection::RunRecord make_record(const RunResult& r, std::optional<double> target_test_nrmse);

/// Metrics on source-test (labels visible) and target-test (labels opened from the vault).
MetricsReport evaluate_source(const models::SurrogateModel& model, const SplitData& data,
                              std::span<const LabeledGraph> samples, const std::string& domain);
MetricsReport evaluate_target(const models::SurrogateModel& model, const SplitData& data,
                              selection::AccessContext ctx, selection::OracleAudit& audit);

/// Cache file of per-sample source-val losses and representations.
std::vector<char> encode_cache(const RunResult& r);
struct CachedRun {
  std::vector<double> source_val_losses;
  Tensor source_val_z;
  Tensor target_train_z;
};
CachedRun decode_cache(std::vector<char> bytes, const std::string& origin);

}  // namespace meshshift::harness
