#pragma once

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "meshshift/datagen/task.hpp"
#include "meshshift/harness/data.hpp"

namespace meshshift::harness {

/// Error summary of one model on one set of samples.
struct MetricsReport {
  std::string domain;
  std::vector<std::string> field_names;
  std::vector<double> rmse;             // per field, physical units
  std::vector<double> normalized_rmse;  // per field, z-score units
  double nrmse = 0.0;                   // sum of normalized_rmse
  double nrmse_mean = 0.0;              // nrmse / F
  std::optional<double> deformation_error;
  std::vector<std::string> sample_ids;
  std::vector<double> sample_nrmse;  // per sample, summed over fields

  bool operator==(const MetricsReport&) const = default;
};

nlohmann::json to_json(const MetricsReport& m);
MetricsReport metrics_from_json(const nlohmann::json& j);

/// Mean over samples of the per-sample root-mean-square error, per field.
/// `truth` and `predicted` are raw (physical) N x F matrices.
MetricsReport compute_metrics(const datagen::TaskSpec& task, const std::vector<std::string>& ids,
                              const std::vector<Tensor>& truth, const std::vector<Tensor>& predicted,
                              const NormalizationStats& stats, const std::string& domain);

}  // namespace meshshift::harness
