#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

namespace meshshift::datagen {

struct ParamDescriptor {
  std::string name;
  std::string unit;
  double min = 0.0;
  double max = 1.0;

  friend bool operator==(const ParamDescriptor&, const ParamDescriptor&) = default;
};

/// Everything needed to draw and solve samples of one synthetic task.
struct TaskSpec {
  std::string name;
  std::vector<ParamDescriptor> params;
  /// Cells per side for plate-heat, node count for rod-bending.
  std::size_t resolution = 0;
  std::vector<std::string> field_names;
  std::string dominant;

  std::size_t dominant_index() const;
  std::size_t dim() const;
  /// Maps a raw parameter vector to [0, 1] per coordinate using the descriptor ranges.
  std::vector<double> unit_scale(const std::vector<double>& raw) const;
  bool in_range(const std::vector<double>& raw) const;
  void validate() const;

  friend bool operator==(const TaskSpec&, const TaskSpec&) = default;
};

inline constexpr const char* kPlateHeat = "plate-heat";
inline constexpr const char* kRodBending = "rod-bending";

TaskSpec plate_heat_task(std::size_t resolution = 24);
TaskSpec rod_bending_task(std::size_t nodes = 200);
/// Default task by name; resolution 0 keeps the task's default.
TaskSpec task_by_name(const std::string& name, std::size_t resolution = 0);

void to_json(nlohmann::json& j, const TaskSpec& t);
void from_json(const nlohmann::json& j, TaskSpec& t);

}  // namespace meshshift::datagen
