#include "meshshift/datagen/task.hpp"

#include <algorithm>
#include <cmath>

#include "meshshift/common/errors.hpp"

namespace meshshift::datagen {

std::size_t TaskSpec::dominant_index() const {
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params[i].name == dominant) return i;
  }
  throw ConfigError("task '" + name + "': dominant parameter '" + dominant + "' is not a parameter");
}

std::size_t TaskSpec::dim() const {
  if (name == kPlateHeat) return 2;
  if (name == kRodBending) return 1;
  throw ConfigError("unknown task '" + name + "'");
}

std::vector<double> TaskSpec::unit_scale(const std::vector<double>& raw) const {
  if (raw.size() != params.size()) {
    throw ConfigError("task '" + name + "' expects " + std::to_string(params.size()) + " parameters, got " +
                      std::to_string(raw.size()));
  }
  std::vector<double> out(raw.size());
  for (std::size_t i = 0; i < raw.size(); ++i) {
    out[i] = (raw[i] - params[i].min) / (params[i].max - params[i].min);
  }
  return out;
}

bool TaskSpec::in_range(const std::vector<double>& raw) const {
  if (raw.size() != params.size()) return false;
  for (std::size_t i = 0; i < raw.size(); ++i) {
    if (!(raw[i] >= params[i].min && raw[i] <= params[i].max)) return false;
  }
  return true;
}

void TaskSpec::validate() const {
  dim();
  if (params.empty()) throw ConfigError("task '" + name + "': no parameters");
  std::size_t dominant_count = 0;
  for (const auto& p : params) {
    if (!std::isfinite(p.min) || !std::isfinite(p.max) || !(p.min < p.max)) {
      throw ConfigError("task '" + name + "': parameter '" + p.name + "' needs finite min < max");
    }
    if (p.name == dominant) ++dominant_count;
  }
  if (dominant_count != 1) {
    throw ConfigError("task '" + name + "': exactly one parameter must be dominant, found " +
                      std::to_string(dominant_count) + " named '" + dominant + "'");
  }
  if (field_names.empty()) throw ConfigError("task '" + name + "': no output fields");
  if (name == kPlateHeat) {
    if (resolution < 8) throw ConfigError("plate-heat resolution must be at least 8");
    for (const auto& p : params) {
      if (p.name == "notch_size" && (p.min <= 0.0 || p.max > 0.5)) {
        throw ConfigError("plate-heat notch_size range must lie in (0, 0.5]");
      }
      if (p.name == "conductivity_ratio" && p.min <= 0.0) {
        throw ConfigError("plate-heat conductivity_ratio must be positive");
      }
    }
  } else {
    if (resolution < 3) throw ConfigError("rod-bending needs at least 3 nodes");
    for (const auto& p : params) {
      if (p.name != "load" && p.min <= 0.0) {
        throw ConfigError("rod-bending parameter '" + p.name + "' must be positive");
      }
      if (p.name == "load" && p.min < 0.0) throw ConfigError("rod-bending load must be nonnegative");
    }
  }
}

TaskSpec plate_heat_task(std::size_t resolution) {
  TaskSpec t;
  t.name = kPlateHeat;
  t.params = {{"t_left", "K", 300.0, 400.0},
              {"t_right", "K", 250.0, 350.0},
              {"conductivity_ratio", "-", 0.5, 4.0},
              {"notch_size", "-", 0.1, 0.5}};
  t.resolution = resolution;
  t.field_names = {"temperature", "flux_x", "flux_y"};
  t.dominant = "notch_size";
  return t;
}

TaskSpec rod_bending_task(std::size_t nodes) {
  TaskSpec t;
  t.name = kRodBending;
  t.params = {{"length", "m", 1.0, 3.0},
              {"thickness", "m", 0.05, 0.15},
              {"load", "N", 100.0, 1000.0},
              {"modulus", "Pa", 7.0e10, 2.1e11}};
  t.resolution = nodes;
  t.field_names = {"deflection", "stress"};
  t.dominant = "thickness";
  return t;
}

TaskSpec task_by_name(const std::string& name, std::size_t resolution) {
  if (name == kPlateHeat) return resolution ? plate_heat_task(resolution) : plate_heat_task();
  if (name == kRodBending) return resolution ? rod_bending_task(resolution) : rod_bending_task();
  throw ConfigError("unknown task '" + name + "' (expected plate-heat or rod-bending)");
}

void to_json(nlohmann::json& j, const TaskSpec& t) {
  auto params = nlohmann::json::array();
  for (const auto& p : t.params) {
    params.push_back({{"name", p.name}, {"unit", p.unit}, {"min", p.min}, {"max", p.max}});
  }
  j = {{"name", t.name},
       {"parameters", params},
       {"resolution", t.resolution},
       {"fields", t.field_names},
       {"dominant", t.dominant}};
}

void from_json(const nlohmann::json& j, TaskSpec& t) {
  t.name = j.at("name").get<std::string>();
  t.params.clear();
  for (const auto& p : j.at("parameters")) {
    t.params.push_back({p.at("name").get<std::string>(), p.value("unit", std::string("-")), p.at("min").get<double>(),
                        p.at("max").get<double>()});
  }
  t.resolution = j.at("resolution").get<std::size_t>();
  t.field_names = j.at("fields").get<std::vector<std::string>>();
  t.dominant = j.at("dominant").get<std::string>();
}

}  // namespace meshshift::datagen
