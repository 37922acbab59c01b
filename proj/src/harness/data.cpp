#include "meshshift/harness/data.hpp"

#include <cmath>

namespace meshshift::harness {

using datagen::MeshSample;

Tensor field_matrix(const MeshSample& s) {
  if (!s.has_labels()) throw FieldSchemaError("sample " + s.sample_id + " carries no fields");
  return Tensor::matrix(s.num_nodes(), s.num_fields, s.fields);
}

NormalizationStats compute_stats(std::span<const MeshSample* const> samples) {
  if (samples.empty()) throw EmptyInputError("normalization statistics need at least one sample");
  const std::size_t f = samples.front()->num_fields;
  std::vector<double> sum(f, 0.0);
  std::size_t count = 0;
  for (const auto* s : samples) {
    if (s->num_fields != f) throw FieldSchemaError("samples disagree on the number of fields");
    for (std::size_t n = 0; n < s->num_nodes(); ++n)
      for (std::size_t k = 0; k < f; ++k) sum[k] += s->field(n, k);
    count += s->num_nodes();
  }
  NormalizationStats st;
  st.mean.resize(f);
  st.std.assign(f, 0.0);
  for (std::size_t k = 0; k < f; ++k) st.mean[k] = sum[k] / static_cast<double>(count);
  for (const auto* s : samples)
    for (std::size_t n = 0; n < s->num_nodes(); ++n)
      for (std::size_t k = 0; k < f; ++k) st.std[k] += std::pow(s->field(n, k) - st.mean[k], 2);
  for (std::size_t k = 0; k < f; ++k) {
    st.std[k] = std::sqrt(st.std[k] / static_cast<double>(count));
    if (!(st.std[k] > 1e-12 * std::max(1.0, std::abs(st.mean[k])))) {
      throw DegenerateFieldError("field " + std::to_string(k) + " is constant over source-train");
    }
  }
  return st;
}

Tensor normalize_fields(const Tensor& raw, const NormalizationStats& stats) {
  if (raw.cols() != stats.num_fields()) throw FieldSchemaError("field count does not match normalization stats");
  auto out = raw;
  auto d = out.mutable_data();
  const std::size_t f = stats.num_fields();
  for (std::size_t i = 0; i < d.size(); ++i) d[i] = (d[i] - stats.mean[i % f]) / stats.std[i % f];
  return out;
}

Tensor normalize_fields(const MeshSample& s, const NormalizationStats& stats) {
  return normalize_fields(field_matrix(s), stats);
}

Tensor denormalize_fields(const Tensor& normalized, const NormalizationStats& stats) {
  if (normalized.cols() != stats.num_fields()) throw FieldSchemaError("field count does not match normalization stats");
  auto out = normalized;
  auto d = out.mutable_data();
  const std::size_t f = stats.num_fields();
  for (std::size_t i = 0; i < d.size(); ++i) d[i] = d[i] * stats.std[i % f] + stats.mean[i % f];
  return out;
}

void to_json(nlohmann::json& j, const NormalizationStats& s) { j = {{"mean", s.mean}, {"std", s.std}}; }

void from_json(const nlohmann::json& j, NormalizationStats& s) {
  s.mean = j.at("mean").get<std::vector<double>>();
  s.std = j.at("std").get<std::vector<double>>();
  if (s.mean.size() != s.std.size()) throw FormatError("normalization stats have mismatched lengths", 0);
}

void LabelVault::add(const std::string& id, Tensor raw_fields) {
  labels_.insert_or_assign(id, selection::Sealed<Tensor>(std::move(raw_fields), id + "/fields"));
}

const Tensor& LabelVault::open(const std::string& id, selection::AccessContext ctx,
                               selection::OracleAudit& audit) const {
  auto it = labels_.find(id);
  if (it == labels_.end()) throw SelectionError("no sealed labels for sample " + id);
  return it->second.open(ctx, audit);
}

namespace {

models::GraphInput graph_input(const datagen::TaskSpec& task, const MeshSample& s,
                               const models::SinusoidalConfig& enc) {
  return models::make_graph_input(s, task.unit_scale(s.params), enc);
}

}  // namespace

SplitData make_split_data(const datagen::TaskSpec& task, const datagen::DomainSplit& split,
                          const std::vector<MeshSample>& samples, const models::SinusoidalConfig& encoding) {
  auto sample_at = [&](std::size_t i) -> const MeshSample& {
    if (i >= samples.size()) throw FormatError("split index " + std::to_string(i) + " is out of range", 0);
    return samples[i];
  };
  SplitData d;
  d.task = task;
  d.split = split;
  d.encoding = encoding;

  std::vector<const MeshSample*> train;
  for (auto i : split.source_train) train.push_back(&sample_at(i));
  d.stats = compute_stats(train);

  auto labeled = [&](const std::vector<std::size_t>& idx) {
    std::vector<LabeledGraph> out;
    out.reserve(idx.size());
    for (auto i : idx) {
      const auto& s = sample_at(i);
      if (s.num_fields != task.field_names.size()) throw FieldSchemaError("sample " + s.sample_id + " has wrong fields");
      auto raw = field_matrix(s);
      auto norm = normalize_fields(raw, d.stats);
      out.push_back({s.sample_id, graph_input(task, s, encoding), std::move(raw), std::move(norm)});
    }
    return out;
  };
  d.source_train = labeled(split.source_train);
  d.source_val = labeled(split.source_val);
  d.source_test = labeled(split.source_test);

  for (auto i : split.target_train) {
    const auto& s = sample_at(i);
    d.target_train_ids.push_back(s.sample_id);
    d.target_train.push_back(graph_input(task, s, encoding));
  }
  for (auto i : split.target_test) {
    const auto& s = sample_at(i);
    d.target_test_ids.push_back(s.sample_id);
    d.target_test.push_back(graph_input(task, s, encoding));
    d.target_labels.add(s.sample_id, field_matrix(s));
  }
  return d;
}

SplitData load_split(const std::filesystem::path& dataset_dir, datagen::Difficulty difficulty,
                     const models::SinusoidalConfig& encoding) {
  const auto manifest = datagen::read_manifest(dataset_dir);
  const auto& split = manifest.split(difficulty);
  std::vector<MeshSample> samples(manifest.samples.size());
  auto load = [&](const std::vector<std::size_t>& idx, bool keep_labels) {
    for (auto i : idx) {
      if (i >= samples.size()) throw FormatError("split index " + std::to_string(i) + " is out of range", 0);
      samples[i] = datagen::read_dataset_sample(dataset_dir, manifest.samples[i]);
      samples[i].sample_id = manifest.samples[i].id;
      if (!keep_labels) samples[i].fields.clear();
    }
  };
  load(split.source_train, true);
  load(split.source_val, true);
  load(split.source_test, true);
  // Target-train labels are never needed; drop them as soon as they are read.
  load(split.target_train, false);
  load(split.target_test, true);
  return make_split_data(manifest.task, split, samples, encoding);
}

}  // namespace meshshift::harness
