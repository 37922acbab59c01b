#include "meshshift/selection/selection.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <sstream>

namespace meshshift::selection {

DensityRatioModel::DensityRatioModel(std::vector<double> center, std::vector<double> scale, std::vector<double> weights,
                                     double bias, std::size_t n_source, std::size_t n_target, double clip_lo,
                                     double clip_hi)
    : center_(std::move(center)),
      scale_(std::move(scale)),
      weights_(std::move(weights)),
      bias_(bias),
      n_source_(n_source),
      n_target_(n_target),
      clip_lo_(clip_lo),
      clip_hi_(clip_hi) {}

double DensityRatioModel::ratio(std::span<const double> x) const {
  if (x.size() != weights_.size()) throw ShapeError("density ratio input has the wrong dimension");
  double s = bias_;
  for (std::size_t j = 0; j < x.size(); ++j) s += weights_[j] * (x[j] - center_[j]) / scale_[j];
  // D / (1 - D) = exp(logit)
  const double log_beta = s + std::log(static_cast<double>(n_source_) / static_cast<double>(n_target_));
  return std::clamp(std::exp(std::clamp(log_beta, -700.0, 700.0)), clip_lo_, clip_hi_);
}

std::vector<double> DensityRatioModel::ratios(const Tensor& rows) const {
  std::vector<double> out(rows.rows());
  const std::size_t m = rows.cols();
  for (std::size_t i = 0; i < rows.rows(); ++i) out[i] = ratio(rows.data().subspan(i * m, m));
  return out;
}

nlohmann::json DensityRatioModel::to_json() const {
  return {{"center", center_},   {"scale", scale_},       {"weights", weights_},
          {"bias", bias_},       {"n_source", n_source_}, {"n_target", n_target_},
          {"clip", {clip_lo_, clip_hi_}}};
}

DensityRatioModel estimate_density_ratio(const Tensor& source, const Tensor& target, const DensityRatioConfig& cfg) {
  if (source.cols() != target.cols()) throw ShapeError("source and target representations differ in width");
  const std::size_t ns = source.rows(), nt = target.rows(), m = source.cols(), n = ns + nt;
  if (ns == 0 || nt == 0) throw EstimationError("density ratio needs samples from both domains");

  Eigen::MatrixXd x(n, m);
  Eigen::VectorXd y(n);
  for (std::size_t i = 0; i < ns; ++i) {
    for (std::size_t j = 0; j < m; ++j) x(i, j) = source(i, j);
    y[i] = 0.0;
  }
  for (std::size_t i = 0; i < nt; ++i) {
    for (std::size_t j = 0; j < m; ++j) x(ns + i, j) = target(i, j);
    y[ns + i] = 1.0;
  }
  std::vector<double> center(m), scale(m);
  for (std::size_t j = 0; j < m; ++j) {
    const double mu = x.col(j).mean();
    const double sd = std::sqrt((x.col(j).array() - mu).square().mean());
    center[j] = mu;
    scale[j] = sd > 1e-12 ? sd : 1.0;
    x.col(j) = (x.col(j).array() - mu) / scale[j];
  }
  if (!x.allFinite()) throw EstimationError("non-finite representation in density ratio input");

  // Augmented design [x 1]; the bias is not regularized.
  Eigen::MatrixXd xa(n, m + 1);
  xa.leftCols(m) = x;
  xa.col(m).setOnes();
  const Eigen::MatrixXd gram = xa.transpose() * xa / static_cast<double>(n);
  const double lmax = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(gram, Eigen::EigenvaluesOnly).eigenvalues().maxCoeff();
  const double lip = 0.25 * lmax + cfg.l2;
  const double step = 1.0 / lip;
  const double momentum = (std::sqrt(lip) - std::sqrt(cfg.l2)) / (std::sqrt(lip) + std::sqrt(cfg.l2));

  Eigen::VectorXd reg = Eigen::VectorXd::Constant(m + 1, cfg.l2);
  reg[m] = 0.0;
  auto gradient = [&](const Eigen::VectorXd& th) {
    Eigen::VectorXd s = xa * th;
    Eigen::VectorXd p = s.unaryExpr([](double v) { return v >= 0 ? 1.0 / (1.0 + std::exp(-v)) : std::exp(v) / (1.0 + std::exp(v)); });
    Eigen::VectorXd g = xa.transpose() * (p - y) / static_cast<double>(n);
    return Eigen::VectorXd(g + reg.cwiseProduct(th));
  };
  Eigen::VectorXd theta = Eigen::VectorXd::Zero(m + 1), prev = theta;
  for (std::size_t it = 0; it < cfg.max_iterations; ++it) {
    Eigen::VectorXd look = theta + momentum * (theta - prev);
    Eigen::VectorXd g = gradient(look);
    prev = theta;
    theta = look - step * g;
    if (g.lpNorm<Eigen::Infinity>() < cfg.tolerance) break;
  }
  if (!theta.allFinite()) throw EstimationError("density ratio fit diverged");
  std::vector<double> w(theta.data(), theta.data() + m);
  return DensityRatioModel(std::move(center), std::move(scale), std::move(w), theta[m], ns, nt, cfg.clip_lo,
                           cfg.clip_hi);
}

double iwv_score(std::span<const double> losses, std::span<const double> weights) {
  if (losses.size() != weights.size() || losses.empty()) {
    throw ShapeError("iwv_score needs equally many, and at least one, losses and weights");
  }
  double s = 0.0;
  for (std::size_t i = 0; i < losses.size(); ++i) s += weights[i] * losses[i];
  return s / static_cast<double>(losses.size());
}

double dev_score(std::span<const double> losses, std::span<const double> weights) {
  if (losses.size() != weights.size()) throw ShapeError("dev_score needs equally many losses and weights");
  const std::size_t b = losses.size();
  if (b < 2) throw InsufficientBatchError("dev_score needs at least 2 validation samples");
  std::vector<double> wl(b);
  double mean_l = 0.0, mean_w = 0.0;
  for (std::size_t i = 0; i < b; ++i) {
    wl[i] = weights[i] * losses[i];
    mean_l += wl[i];
    mean_w += weights[i];
  }
  mean_l /= static_cast<double>(b);
  mean_w /= static_cast<double>(b);
  double cov = 0.0, var = 0.0;
  for (std::size_t i = 0; i < b; ++i) {
    cov += (wl[i] - mean_l) * (weights[i] - mean_w);
    var += (weights[i] - mean_w) * (weights[i] - mean_w);
  }
  cov /= static_cast<double>(b - 1);
  var /= static_cast<double>(b - 1);
  const double eta = var < 1e-12 ? 0.0 : -cov / var;
  return mean_l + eta * mean_w - eta;
}

std::string to_string(Strategy s) {
  switch (s) {
    case Strategy::SB: return "SB";
    case Strategy::IWV: return "IWV";
    case Strategy::DEV: return "DEV";
    case Strategy::TB: return "TB";
  }
  return "?";
}

Strategy strategy_from_string(const std::string& s) {
  if (s == "SB") return Strategy::SB;
  if (s == "IWV") return Strategy::IWV;
  if (s == "DEV") return Strategy::DEV;
  if (s == "TB") return Strategy::TB;
  throw ConfigError("unknown selection strategy '" + s + "' (expected SB, IWV, DEV or TB)");
}

std::vector<Strategy> parse_strategies(const std::string& csv) {
  std::vector<Strategy> out;
  std::stringstream ss(csv);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    auto s = strategy_from_string(item);
    if (std::find(out.begin(), out.end(), s) == out.end()) out.push_back(s);
  }
  if (out.empty()) throw ConfigError("no selection strategies given");
  return out;
}

double RunRecord::source_val_mean() const {
  if (source_val_losses.empty()) throw SelectionError("run " + run_id + " has no source-val losses");
  double s = 0.0;
  for (double l : source_val_losses) s += l;
  return s / static_cast<double>(source_val_losses.size());
}

DensityRatioModel attach_density_ratio(RunRecord& run, const DensityRatioConfig& cfg) {
  auto model = estimate_density_ratio(run.source_val_z, run.target_train_z, cfg);
  run.source_val_weights = model.ratios(run.source_val_z);
  return model;
}

SelectionScore select_model(std::span<const RunRecord* const> runs, Strategy strategy, const SelectionContext& ctx) {
  if (strategy == Strategy::TB) {
    if (!ctx.audit) throw PolicyError("TB selection requires an oracle audit log");
    if (!ctx.oracle_allowed) {
      ctx.audit->record(AccessContext::selection, "TB selection", false);
      throw PolicyError("TB selection invoked in a no-oracle context");
    }
  }
  std::vector<const RunRecord*> pool;
  for (const auto* r : runs) {
    if (r && r->stable) pool.push_back(r);
  }
  if (pool.empty()) throw SelectionError("no stable runs to select from");
  std::sort(pool.begin(), pool.end(), [](const auto* a, const auto* b) { return a->run_id < b->run_id; });

  SelectionScore out;
  out.strategy = strategy;
  double best = 0.0;
  for (const auto* r : pool) {
    double score = 0.0;
    switch (strategy) {
      case Strategy::SB: score = r->source_val_mean(); break;
      case Strategy::IWV:
      case Strategy::DEV:
        if (r->source_val_weights.size() != r->source_val_losses.size()) {
          throw SelectionError("run " + r->run_id + " has no density ratio attached");
        }
        score = strategy == Strategy::IWV ? iwv_score(r->source_val_losses, r->source_val_weights)
                                          : dev_score(r->source_val_losses, r->source_val_weights);
        break;
      case Strategy::TB: score = r->target_test_nrmse.open(AccessContext::oracle_tb, *ctx.audit); break;
    }
    if (!std::isfinite(score)) throw SelectionError("non-finite " + to_string(strategy) + " score for " + r->run_id);
    out.scores.emplace_back(r->run_id, score);
    if (out.chosen.empty() || score < best) {
      best = score;
      out.chosen = r->run_id;
    }
  }
  return out;
}

nlohmann::json to_json(const SelectionScore& s) {
  nlohmann::json scores = nlohmann::json::object();
  for (const auto& [id, v] : s.scores) scores[id] = v;
  return {{"strategy", to_string(s.strategy)}, {"chosen", s.chosen}, {"scores", scores}};
}

}  // namespace meshshift::selection
