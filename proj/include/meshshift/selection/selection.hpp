#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "meshshift/selection/oracle.hpp"
#include "meshshift/tensor/tensor.hpp"

namespace meshshift::selection {

using tensor::Tensor;

struct DensityRatioConfig {
  double l2 = 1e-3;
  std::size_t max_iterations = 20000;
  double tolerance = 1e-9;
  double clip_lo = 1e-3;
  double clip_hi = 1e3;
};

/// Logistic source-vs-target classifier turned into beta(x) = D(x) / (1 - D(x)) * n / m.
class DensityRatioModel {
 public:
  DensityRatioModel() = default;
  DensityRatioModel(std::vector<double> center, std::vector<double> scale, std::vector<double> weights, double bias,
                    std::size_t n_source, std::size_t n_target, double clip_lo, double clip_hi);

  double ratio(std::span<const double> x) const;
  std::vector<double> ratios(const Tensor& rows) const;
  std::size_t dim() const noexcept { return weights_.size(); }
  std::size_t n_source() const noexcept { return n_source_; }
  std::size_t n_target() const noexcept { return n_target_; }
  const std::vector<double>& weights() const noexcept { return weights_; }
  double bias() const noexcept { return bias_; }
  nlohmann::json to_json() const;

 private:
  std::vector<double> center_, scale_, weights_;
  double bias_ = 0.0;
  std::size_t n_source_ = 0, n_target_ = 0;
  double clip_lo_ = 1e-3, clip_hi_ = 1e3;
};

/// Fits the classifier by accelerated full-batch gradient descent on standardized inputs.
DensityRatioModel estimate_density_ratio(const Tensor& source, const Tensor& target,
                                         const DensityRatioConfig& cfg = {});

/// Mean of w_i * l_i.
double iwv_score(std::span<const double> losses, std::span<const double> weights);
/// Control-variate corrected importance-weighted risk.
double dev_score(std::span<const double> losses, std::span<const double> weights);

enum class Strategy { SB, IWV, DEV, TB };
std::string to_string(Strategy s);
Strategy strategy_from_string(const std::string& s);
std::vector<Strategy> parse_strategies(const std::string& csv);

/// What selection needs from one trained run.
struct RunRecord {
  std::string run_id;
  std::string architecture;
  std::string kind;
  double lambda = 0.0;
  std::uint64_t seed = 0;
  bool stable = true;
  std::vector<double> source_val_losses;
  Tensor source_val_z;
  Tensor target_train_z;
  /// Importance weights of the source-val samples; empty until a ratio is attached.
  std::vector<double> source_val_weights;
  Sealed<double> target_test_nrmse;

  double source_val_mean() const;
};

/// Fits a ratio on the run's cached representations and stores the source-val weights.
DensityRatioModel attach_density_ratio(RunRecord& run, const DensityRatioConfig& cfg = {});

struct SelectionScore {
  Strategy strategy = Strategy::SB;
  std::vector<std::pair<std::string, double>> scores;  // sorted by run id
  std::string chosen;
};

struct SelectionContext {
  OracleAudit* audit = nullptr;
  bool oracle_allowed = true;
};

/// Scores every stable run and picks the argmin, breaking ties by the smallest run id.
SelectionScore select_model(std::span<const RunRecord* const> runs, Strategy strategy, const SelectionContext& ctx);

nlohmann::json to_json(const SelectionScore& s);

}  // namespace meshshift::selection
