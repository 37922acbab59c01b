#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "meshshift/datagen/dataset_io.hpp"
#include "meshshift/models/graph.hpp"
#include "meshshift/selection/oracle.hpp"

namespace meshshift::harness {

using tensor::Tensor;

/// Per-field z-score statistics, computed on source-train nodes only.
struct NormalizationStats {
  std::vector<double> mean;
  std::vector<double> std;

  std::size_t num_fields() const noexcept { return mean.size(); }
  bool operator==(const NormalizationStats&) const = default;
};

NormalizationStats compute_stats(std::span<const datagen::MeshSample* const> samples);
/// N x F field matrix of a sample mapped to z-scores.
Tensor normalize_fields(const datagen::MeshSample& s, const NormalizationStats& stats);
Tensor normalize_fields(const Tensor& raw, const NormalizationStats& stats);
Tensor denormalize_fields(const Tensor& normalized, const NormalizationStats& stats);
/// The sample's fields as an N x F tensor.
Tensor field_matrix(const datagen::MeshSample& s);

void to_json(nlohmann::json& j, const NormalizationStats& s);
void from_json(const nlohmann::json& j, NormalizationStats& s);

/// A source sample with model inputs and both label scalings.
struct LabeledGraph {
  std::string id;
  models::GraphInput input;
  Tensor raw;         // N x F
  Tensor normalized;  // N x F
};

/// Target labels, held sealed so that only permitted contexts can read them.
class LabelVault {
 public:
  void add(const std::string& id, Tensor raw_fields);
  const Tensor& open(const std::string& id, selection::AccessContext ctx, selection::OracleAudit& audit) const;
  bool contains(const std::string& id) const { return labels_.count(id) != 0; }
  std::size_t size() const noexcept { return labels_.size(); }

 private:
  std::map<std::string, selection::Sealed<Tensor>> labels_;
};

/// Everything one difficulty of a dataset contributes to a sweep.
struct SplitData {
  datagen::TaskSpec task;
  datagen::DomainSplit split;
  NormalizationStats stats;
  models::SinusoidalConfig encoding;
  std::vector<LabeledGraph> source_train, source_val, source_test;
  std::vector<std::string> target_train_ids, target_test_ids;
  std::vector<models::GraphInput> target_train, target_test;
  LabelVault target_labels;
};

/// Loads the samples of one split. Target fields go straight into the vault.
SplitData load_split(const std::filesystem::path& dataset_dir, datagen::Difficulty difficulty,
                     const models::SinusoidalConfig& encoding = {});

/// Builds split data from in-memory samples, indexed like the split.
SplitData make_split_data(const datagen::TaskSpec& task, const datagen::DomainSplit& split,
                          const std::vector<datagen::MeshSample>& samples, const models::SinusoidalConfig& encoding = {});

}  // namespace meshshift::harness
