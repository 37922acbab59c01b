#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "meshshift/datagen/task.hpp"

namespace meshshift::datagen {

enum class Difficulty { easy, medium, hard };

inline constexpr std::array<Difficulty, 3> kDifficulties = {Difficulty::easy, Difficulty::medium, Difficulty::hard};

std::string to_string(Difficulty d);
Difficulty difficulty_from_string(const std::string& s);

/// Source/target boundary on the dominant parameter per difficulty; hard < medium < easy.
struct Boundaries {
  double easy = 0.0;
  double medium = 0.0;
  double hard = 0.0;

  double at(Difficulty d) const;
  void validate(const TaskSpec& task) const;
  bool operator==(const Boundaries&) const = default;
};

Boundaries default_boundaries(const TaskSpec& task);

struct DomainSplit {
  Difficulty difficulty = Difficulty::medium;
  double source_lo = 0.0;   // source range [source_lo, boundary)
  double boundary = 0.0;
  double target_hi = 0.0;   // target range [boundary, target_hi]
  std::vector<std::size_t> source_train, source_val, source_test;
  std::vector<std::size_t> target_train, target_test;

  std::size_t total() const;
  /// Empty when every index appears at most once; otherwise a description of the first clash.
  std::string overlap() const;
  bool operator==(const DomainSplit&) const = default;
};

/// Partitions samples by their dominant parameter value. Source gets 50/25/25,
/// target 50/50, with rounding remainders going to the training partitions.
DomainSplit split_domains(const std::vector<double>& dominant_values, const TaskSpec& task, Difficulty difficulty,
                          const Boundaries& boundaries, std::uint64_t seed);

void to_json(nlohmann::json& j, const Boundaries& b);
void from_json(const nlohmann::json& j, Boundaries& b);
void to_json(nlohmann::json& j, const DomainSplit& s);
void from_json(const nlohmann::json& j, DomainSplit& s);

}  // namespace meshshift::datagen
