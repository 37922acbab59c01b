#include "meshshift/harness/metrics.hpp"

#include <algorithm>
#include <cmath>

namespace meshshift::harness {

nlohmann::json to_json(const MetricsReport& m) {
  nlohmann::json j = {{"domain", m.domain},
                      {"fields", m.field_names},
                      {"rmse", m.rmse},
                      {"normalized_rmse", m.normalized_rmse},
                      {"nrmse", m.nrmse},
                      {"nrmse_mean", m.nrmse_mean},
                      {"sample_ids", m.sample_ids},
                      {"sample_nrmse", m.sample_nrmse}};
  j["deformation_error"] = m.deformation_error ? nlohmann::json(*m.deformation_error) : nlohmann::json(nullptr);
  return j;
}

MetricsReport metrics_from_json(const nlohmann::json& j) {
  MetricsReport m;
  m.domain = j.at("domain").get<std::string>();
  m.field_names = j.at("fields").get<std::vector<std::string>>();
  m.rmse = j.at("rmse").get<std::vector<double>>();
  m.normalized_rmse = j.at("normalized_rmse").get<std::vector<double>>();
  m.nrmse = j.at("nrmse").get<double>();
  m.nrmse_mean = j.at("nrmse_mean").get<double>();
  m.sample_ids = j.at("sample_ids").get<std::vector<std::string>>();
  m.sample_nrmse = j.at("sample_nrmse").get<std::vector<double>>();
  if (!j.at("deformation_error").is_null()) m.deformation_error = j.at("deformation_error").get<double>();
  return m;
}

MetricsReport compute_metrics(const datagen::TaskSpec& task, const std::vector<std::string>& ids,
                              const std::vector<Tensor>& truth, const std::vector<Tensor>& predicted,
                              const NormalizationStats& stats, const std::string& domain) {
  const std::size_t f = task.field_names.size();
  if (truth.size() != predicted.size() || truth.size() != ids.size()) {
    throw ShapeError("metrics need one prediction and one id per ground-truth sample");
  }
  if (truth.empty()) throw EmptyInputError("metrics need at least one sample");
  if (stats.num_fields() != f) throw FieldSchemaError("normalization stats do not match the task's fields");

  auto it = std::find_if(task.field_names.begin(), task.field_names.end(),
                         [](const std::string& n) { return n == "deflection" || n == "displacement"; });
  const bool has_deformation = it != task.field_names.end();
  const std::size_t def_field = has_deformation ? static_cast<std::size_t>(it - task.field_names.begin()) : 0;

  MetricsReport m;
  m.domain = domain;
  m.field_names = task.field_names;
  m.rmse.assign(f, 0.0);
  m.normalized_rmse.assign(f, 0.0);
  m.sample_ids = ids;
  double deformation = 0.0;

  for (std::size_t g = 0; g < truth.size(); ++g) {
    const auto& y = truth[g];
    const auto& p = predicted[g];
    if (y.cols() != f || p.cols() != f || y.rows() != p.rows()) {
      throw FieldSchemaError("sample " + ids[g] + " does not match the task's field schema");
    }
    const std::size_t n = y.rows();
    std::vector<double> sq(f, 0.0);
    double abs_def = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t k = 0; k < f; ++k) {
        const double e = p(i, k) - y(i, k);
        sq[k] += e * e;
      }
      if (has_deformation) abs_def += std::abs(p(i, def_field) - y(i, def_field));
    }
    double sample_sum = 0.0;
    for (std::size_t k = 0; k < f; ++k) {
      const double r = std::sqrt(sq[k] / static_cast<double>(n));
      m.rmse[k] += r;
      m.normalized_rmse[k] += r / stats.std[k];
      sample_sum += r / stats.std[k];
    }
    m.sample_nrmse.push_back(sample_sum);
    deformation += abs_def / static_cast<double>(n);
  }
  const double count = static_cast<double>(truth.size());
  for (std::size_t k = 0; k < f; ++k) {
    m.rmse[k] /= count;
    m.normalized_rmse[k] /= count;
    m.nrmse += m.normalized_rmse[k];
  }
  m.nrmse_mean = m.nrmse / static_cast<double>(f);
  if (has_deformation) m.deformation_error = deformation / count;
  return m;
}

}  // namespace meshshift::harness
