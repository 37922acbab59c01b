#include "meshshift/datagen/split.hpp"

#include <algorithm>
#include <map>
#include <random>

#include "meshshift/common/errors.hpp"
#include "meshshift/datagen/corpus.hpp"

namespace meshshift::datagen {

std::string to_string(Difficulty d) {
  switch (d) {
    case Difficulty::easy: return "easy";
    case Difficulty::medium: return "medium";
    case Difficulty::hard: return "hard";
  }
  return "?";
}

Difficulty difficulty_from_string(const std::string& s) {
  if (s == "easy") return Difficulty::easy;
  if (s == "medium") return Difficulty::medium;
  if (s == "hard") return Difficulty::hard;
  throw ConfigError("unknown difficulty '" + s + "' (expected easy, medium or hard)");
}

double Boundaries::at(Difficulty d) const {
  switch (d) {
    case Difficulty::easy: return easy;
    case Difficulty::medium: return medium;
    case Difficulty::hard: return hard;
  }
  return medium;
}

void Boundaries::validate(const TaskSpec& task) const {
  const auto& d = task.params.at(task.dominant_index());
  if (!(hard < medium && medium < easy)) {
    throw ConfigError("split boundaries must satisfy hard < medium < easy");
  }
  if (!(hard > d.min && easy < d.max)) {
    throw ConfigError("split boundaries must lie strictly inside the range of '" + d.name + "'");
  }
}

Boundaries default_boundaries(const TaskSpec& task) {
  if (task.name == kPlateHeat) return {0.44, 0.39, 0.35};
  if (task.name == kRodBending) return {0.13, 0.12, 0.11};
  throw ConfigError("no default boundaries for task '" + task.name + "'");
}

std::size_t DomainSplit::total() const {
  return source_train.size() + source_val.size() + source_test.size() + target_train.size() + target_test.size();
}

std::string DomainSplit::overlap() const {
  std::map<std::size_t, const char*> owner;
  const std::pair<const char*, const std::vector<std::size_t>*> parts[] = {
      {"source.train", &source_train}, {"source.val", &source_val},   {"source.test", &source_test},
      {"target.train", &target_train}, {"target.test", &target_test}};
  for (const auto& [name, list] : parts) {
    for (auto i : *list) {
      auto [it, fresh] = owner.emplace(i, name);
      if (!fresh) return "index " + std::to_string(i) + " appears in " + it->second + " and " + name;
    }
  }
  return {};
}

DomainSplit split_domains(const std::vector<double>& dominant_values, const TaskSpec& task, Difficulty difficulty,
                          const Boundaries& boundaries, std::uint64_t seed) {
  boundaries.validate(task);
  const auto& d = task.params.at(task.dominant_index());
  DomainSplit s;
  s.difficulty = difficulty;
  s.source_lo = d.min;
  s.boundary = boundaries.at(difficulty);
  s.target_hi = d.max;

  std::vector<std::size_t> source, target;
  for (std::size_t i = 0; i < dominant_values.size(); ++i) {
    (dominant_values[i] < s.boundary ? source : target).push_back(i);
  }
  if (source.size() < 4) {
    throw InsufficientDataError("source domain of the " + to_string(difficulty) + " split has " +
                                std::to_string(source.size()) + " samples, need at least 4");
  }
  if (target.size() < 4) {
    throw InsufficientDataError("target domain of the " + to_string(difficulty) + " split has " +
                                std::to_string(target.size()) + " samples, need at least 4");
  }
  std::mt19937_64 rng(derive_seed(seed, 1000 + static_cast<std::uint64_t>(difficulty)));
  std::shuffle(source.begin(), source.end(), rng);
  std::shuffle(target.begin(), target.end(), rng);

  const std::size_t n_val = source.size() / 4, n_test = source.size() / 4;
  const std::size_t n_train = source.size() - n_val - n_test;
  s.source_train.assign(source.begin(), source.begin() + static_cast<long>(n_train));
  s.source_val.assign(source.begin() + static_cast<long>(n_train), source.begin() + static_cast<long>(n_train + n_val));
  s.source_test.assign(source.begin() + static_cast<long>(n_train + n_val), source.end());
  const std::size_t t_test = target.size() / 2;
  const std::size_t t_train = target.size() - t_test;
  s.target_train.assign(target.begin(), target.begin() + static_cast<long>(t_train));
  s.target_test.assign(target.begin() + static_cast<long>(t_train), target.end());
  return s;
}

void to_json(nlohmann::json& j, const Boundaries& b) {
  j = {{"easy", b.easy}, {"medium", b.medium}, {"hard", b.hard}};
}

void from_json(const nlohmann::json& j, Boundaries& b) {
  b.easy = j.at("easy").get<double>();
  b.medium = j.at("medium").get<double>();
  b.hard = j.at("hard").get<double>();
}

void to_json(nlohmann::json& j, const DomainSplit& s) {
  j = {{"difficulty", to_string(s.difficulty)},
       {"source_range", {s.source_lo, s.boundary}},
       {"target_range", {s.boundary, s.target_hi}},
       {"source", {{"train", s.source_train}, {"val", s.source_val}, {"test", s.source_test}}},
       {"target", {{"train", s.target_train}, {"test", s.target_test}}},
       {"target_labels", "unavailable_for_training"}};
}

void from_json(const nlohmann::json& j, DomainSplit& s) {
  s.difficulty = difficulty_from_string(j.at("difficulty").get<std::string>());
  s.source_lo = j.at("source_range").at(0).get<double>();
  s.boundary = j.at("source_range").at(1).get<double>();
  s.target_hi = j.at("target_range").at(1).get<double>();
  const auto& src = j.at("source");
  const auto& tgt = j.at("target");
  s.source_train = src.at("train").get<std::vector<std::size_t>>();
  s.source_val = src.at("val").get<std::vector<std::size_t>>();
  s.source_test = src.at("test").get<std::vector<std::size_t>>();
  s.target_train = tgt.at("train").get<std::vector<std::size_t>>();
  s.target_test = tgt.at("test").get<std::vector<std::size_t>>();
}

}  // namespace meshshift::datagen
