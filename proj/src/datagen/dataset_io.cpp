#include "meshshift/datagen/dataset_io.hpp"

#include <cmath>

#include "meshshift/common/binary_io.hpp"
#include "meshshift/common/errors.hpp"

namespace meshshift::datagen {

namespace fs = std::filesystem;

const DomainSplit& DatasetManifest::split(Difficulty d) const {
  auto it = splits.find(d);
  if (it == splits.end()) throw ConfigError("dataset has no " + to_string(d) + " split");
  return it->second;
}

std::vector<double> DatasetManifest::dominant_values() const {
  const auto k = task.dominant_index();
  std::vector<double> out;
  out.reserve(samples.size());
  for (const auto& s : samples) out.push_back(s.params.at(k));
  return out;
}

std::vector<char> encode_sample(const MeshSample& s) {
  io::ByteWriter w(io::RecordType::sample);
  w.u64(s.num_nodes());
  w.u64(s.dim);
  w.u64(s.num_cells());
  w.u64(s.num_fields);
  w.f64s(s.coords);
  w.u64s(s.cells);
  w.f64s(s.params);
  w.f64s(s.fields);
  return w.bytes();
}

void write_sample(const fs::path& path, const MeshSample& s) {
  const auto bytes = encode_sample(s);
  io::write_file_atomic(path, bytes);
}

MeshSample decode_sample(std::vector<char> bytes, const std::string& origin) {
  io::ByteReader r(std::move(bytes), io::RecordType::sample, origin);
  MeshSample s;
  const auto counts_at = r.offset();
  const auto n = r.u64(), d = r.u64(), c = r.u64(), f = r.u64();
  if (d != 1 && d != 2) r.fail_at("unsupported coordinate dimension " + std::to_string(d), counts_at + 8);
  const std::uint64_t cell_size = d + 1;
  // Each count is bounded by the bytes left so the products below cannot overflow.
  const auto budget = r.remaining() / 8;
  if (n > budget || c > budget || f > budget || (f && n > budget / f) || n * d + c * cell_size + n * f > budget) {
    r.fail_at("counts N=" + std::to_string(n) + " C=" + std::to_string(c) + " F=" + std::to_string(f) +
                  " exceed the file size",
              counts_at);
  }
  const auto param_bytes = r.remaining() - 8 * (n * d + c * cell_size + n * f);
  if (param_bytes % 8 != 0) r.fail_at("payload length is not a whole number of values", counts_at);
  s.dim = d;
  s.cell_size = cell_size;
  s.num_fields = f;
  s.coords = r.f64s(n * d);
  const auto cells_at = r.offset();
  s.cells = r.u64s(c * cell_size);
  for (std::size_t i = 0; i < s.cells.size(); ++i) {
    if (s.cells[i] >= n) r.fail_at("cell index out of range", cells_at + 8 * i);
  }
  s.params = r.f64s(param_bytes / 8);
  s.fields = r.f64s(n * f);
  r.expect_end();
  return s;
}

MeshSample read_sample(const fs::path& path) { return decode_sample(io::read_file(path), path.string()); }

nlohmann::json manifest_json(const DatasetManifest& m) {
  auto samples = nlohmann::json::array();
  for (const auto& e : m.samples) {
    samples.push_back({{"id", e.id}, {"file", e.file}, {"params", e.params}, {"mesh_seed", e.mesh_seed}});
  }
  nlohmann::json splits = nlohmann::json::object();
  for (const auto& [d, s] : m.splits) splits[to_string(d)] = s;
  return {{"format_version", m.format_version},
          {"task", m.task},
          {"seed", m.seed},
          {"split_seed", m.split_seed},
          {"n_samples", m.samples.size()},
          {"boundaries", m.boundaries},
          {"samples", samples},
          {"splits", splits}};
}

std::string manifest_text(const DatasetManifest& m) { return manifest_json(m).dump(2) + "\n"; }

DatasetManifest manifest_from_json(const nlohmann::json& j) {
  DatasetManifest m;
  m.format_version = j.at("format_version").get<int>();
  if (m.format_version != 1) throw ConfigError("unsupported manifest format_version " + std::to_string(m.format_version));
  m.task = j.at("task").get<TaskSpec>();
  m.task.validate();
  m.seed = j.at("seed").get<std::uint64_t>();
  m.split_seed = j.at("split_seed").get<std::uint64_t>();
  m.boundaries = j.at("boundaries").get<Boundaries>();
  for (const auto& e : j.at("samples")) {
    m.samples.push_back({e.at("id").get<std::string>(), e.at("file").get<std::string>(),
                         e.at("params").get<std::vector<double>>(), e.value("mesh_seed", std::uint64_t{0})});
  }
  if (j.at("n_samples").get<std::size_t>() != m.samples.size()) {
    throw ConfigError("manifest n_samples disagrees with the sample table");
  }
  for (const auto& [name, s] : j.at("splits").items()) {
    auto split = s.get<DomainSplit>();
    if (to_string(split.difficulty) != name) throw ConfigError("split key '" + name + "' disagrees with its difficulty");
    m.splits.emplace(split.difficulty, std::move(split));
  }
  return m;
}

DatasetManifest write_dataset(const fs::path& dir, const Corpus& corpus, const Boundaries& boundaries,
                              std::uint64_t split_seed, bool force) {
  const auto manifest_path = dir / "manifest.json";
  if (fs::exists(manifest_path) && !force) {
    throw IoError("dataset already exists at " + dir.string() + " (pass --force to overwrite)");
  }
  boundaries.validate(corpus.task);

  DatasetManifest m;
  m.task = corpus.task;
  m.seed = corpus.seed;
  m.split_seed = split_seed;
  m.boundaries = boundaries;
  const auto dominant = corpus.dominant_values();
  for (auto d : kDifficulties) m.splits.emplace(d, split_domains(dominant, corpus.task, d, boundaries, split_seed));

  fs::create_directories(dir / "samples");
  if (fs::exists(manifest_path)) fs::remove(manifest_path);
  for (std::size_t i = 0; i < corpus.samples.size(); ++i) {
    const auto& s = corpus.samples[i];
    SampleEntry e{s.sample_id.empty() ? sample_id(i) : s.sample_id, "", s.params, derive_seed(corpus.seed, i + 1)};
    e.file = "samples/" + e.id + ".bin";
    write_sample(dir / e.file, s);
    m.samples.push_back(std::move(e));
  }
  io::write_text_atomic(manifest_path, manifest_text(m));
  return m;
}

DatasetManifest read_manifest(const fs::path& dir) {
  const auto path = dir / "manifest.json";
  if (!fs::exists(path)) throw IoError("no manifest.json in " + dir.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(io::read_text(path));
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError(path.string() + ": " + e.what(), e.byte);
  }
  try {
    return manifest_from_json(j);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

MeshSample read_dataset_sample(const fs::path& dir, const SampleEntry& entry) {
  auto s = read_sample(dir / entry.file);
  s.sample_id = entry.id;
  return s;
}

}  // namespace meshshift::datagen
