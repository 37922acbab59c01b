#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "meshshift/datagen/corpus.hpp"
#include "meshshift/datagen/split.hpp"

namespace meshshift::datagen {

struct SampleEntry {
  std::string id;
  std::string file;   // relative to the dataset directory
  std::vector<double> params;
  std::uint64_t mesh_seed = 0;
};

/// Parsed manifest.json of a dataset directory.
struct DatasetManifest {
  int format_version = 1;
  TaskSpec task;
  std::uint64_t seed = 0;
  std::uint64_t split_seed = 0;
  Boundaries boundaries;
  std::vector<SampleEntry> samples;
  std::map<Difficulty, DomainSplit> splits;

  const DomainSplit& split(Difficulty d) const;
  std::vector<double> dominant_values() const;
};

void write_sample(const std::filesystem::path& path, const MeshSample& s);
std::vector<char> encode_sample(const MeshSample& s);
/// Reads a sample file. The id is not stored in the binary and is left empty.
MeshSample read_sample(const std::filesystem::path& path);
MeshSample decode_sample(std::vector<char> bytes, const std::string& origin);

nlohmann::json manifest_json(const DatasetManifest& m);
DatasetManifest manifest_from_json(const nlohmann::json& j);
std::string manifest_text(const DatasetManifest& m);

/// Writes samples, then manifest.json last so a present manifest implies a complete dataset.
DatasetManifest write_dataset(const std::filesystem::path& dir, const Corpus& corpus, const Boundaries& boundaries,
                              std::uint64_t split_seed, bool force);
DatasetManifest read_manifest(const std::filesystem::path& dir);
MeshSample read_dataset_sample(const std::filesystem::path& dir, const SampleEntry& entry);

}  // namespace meshshift::datagen
