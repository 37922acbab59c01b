#include "meshshift/cli/config.hpp"

#include <cstdlib>
#include <sstream>
#include <thread>

#include "meshshift/harness/sweep.hpp"

namespace meshshift::cli {

using nlohmann::json;

datagen::TaskSpec PipelineConfig::task_spec() const { return datagen::task_by_name(task, resolution); }

datagen::Boundaries PipelineConfig::effective_boundaries() const {
  return boundaries ? *boundaries : datagen::default_boundaries(task_spec());
}

std::vector<double> PipelineConfig::effective_lambdas() const {
  if (!lambdas.empty()) return lambdas;
  return profile == harness::Profile::desk ? harness::desk_lambda_grid() : harness::paper_lambda_grid();
}

std::size_t PipelineConfig::effective_workers() const {
  if (workers > 0) return workers;
  return std::max(1u, std::thread::hardware_concurrency());
}

std::string PipelineConfig::dataset_name() const {
  if (!dataset.empty()) return dataset;
  const auto spec = task_spec();
  return spec.name + "-n" + std::to_string(samples) + "-r" + std::to_string(spec.resolution) + "-s" +
         std::to_string(corpus_seed);
}

std::filesystem::path PipelineConfig::dataset_dir() const { return output_root / "datasets" / dataset_name(); }

std::filesystem::path PipelineConfig::sweep_dir(datagen::Difficulty d) const {
  return output_root / "runs" / (name + "-" + datagen::to_string(d));
}

std::filesystem::path PipelineConfig::report_dir() const { return output_root / "reports" / name; }

void PipelineConfig::finalize() {
  const auto spec = task_spec();
  train.model.coord_dim = spec.dim();
  train.model.num_params = spec.params.size();
  train.model.num_fields = spec.field_names.size();
  train.profile = profile;
  train.apply_profile();
}

void PipelineConfig::validate() const {
  if (format_version != kConfigVersion) {
    throw ConfigError("format_version: expected " + std::to_string(kConfigVersion) + ", got " +
                      std::to_string(format_version));
  }
  if (name.empty() || name.find('/') != std::string::npos) throw ConfigError("name: must be a plain, nonempty name");
  const auto spec = task_spec();
  spec.validate();
  if (samples == 0) throw ConfigError("task.samples: must be positive");
  effective_boundaries().validate(spec);
  if (difficulties.empty()) throw ConfigError("split.difficulties: at least one difficulty is required");
  if (seeds.empty()) throw ConfigError("seeds: at least one seed is required");
  if (strategies.empty()) throw ConfigError("strategies: at least one strategy is required");
  for (double l : effective_lambdas()) {
    if (!(l >= 0.0) || !std::isfinite(l)) throw ConfigError("uda.lambdas: values must be finite and nonnegative");
  }
  if (!(ratio.l2 > 0) || !(ratio.clip_lo > 0) || !(ratio.clip_hi > ratio.clip_lo)) {
    throw ConfigError("density_ratio: l2 and clip bounds must be positive with clip[0] < clip[1]");
  }
  train.validate();
}

namespace {

/// Reads an optional member, prefixing conversion errors with its dotted path.
template <class T>
void read(const json& obj, const char* key, const std::string& path, T& out) {
  if (!obj.is_object()) throw ConfigError(path + ": expected an object");
  auto it = obj.find(key);
  if (it == obj.end()) return;
  const std::string where = path.empty() ? key : path + "." + key;
  try {
    out = it->template get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(where + ": " + e.what());
  } catch (const Error& e) {
    throw ConfigError(where + ": " + e.what());
  }
}

template <class T, class Conv>
void read_list(const json& obj, const char* key, const std::string& path, std::vector<T>& out, Conv conv) {
  std::vector<std::string> names;
  read(obj, key, path, names);
  if (obj.contains(key)) {
    out.clear();
    try {
      for (const auto& n : names) out.push_back(conv(n));
    } catch (const Error& e) {
      throw ConfigError(path + "." + key + ": " + e.what());
    }
  }
}

const json& section(const json& root, const char* key) {
  static const json empty = json::object();
  auto it = root.find(key);
  if (it == root.end()) return empty;
  if (!it->is_object()) throw ConfigError(std::string(key) + ": expected an object");
  return *it;
}

void reject_unknown(const json& obj, std::initializer_list<const char*> known, const std::string& path) {
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    bool ok = false;
    for (const char* k : known) ok = ok || it.key() == k;
    if (!ok) throw ConfigError((path.empty() ? "" : path + ".") + it.key() + ": unknown field");
  }
}

std::string line_column(const std::string& text, std::size_t byte) {
  std::size_t line = 1, col = 1;
  for (std::size_t i = 0; i < std::min(byte, text.size()); ++i) {
    if (text[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return "line " + std::to_string(line) + ", column " + std::to_string(col);
}

}  // namespace

PipelineConfig parse_config(const std::string& text, const std::string& origin) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(origin + ": " + line_column(text, e.byte > 0 ? e.byte - 1 : 0) + ": " + e.what());
  }
  if (!root.is_object()) throw ConfigError(origin + ": the config must be a JSON object");

  try {
    reject_unknown(root,
                   {"format_version", "name", "profile", "task", "split", "model", "train", "uda", "seeds",
                    "strategies", "density_ratio", "output_root", "workers"},
                   "");
    PipelineConfig c;
    read(root, "format_version", "", c.format_version);
    read(root, "name", "", c.name);
    std::string profile = harness::to_string(c.profile);
    read(root, "profile", "", profile);
    try {
      c.profile = harness::profile_from_string(profile);
    } catch (const Error& e) {
      throw ConfigError(std::string("profile: ") + e.what());
    }
    if (c.profile == harness::Profile::paper) {
      c.train.max_epochs = 3000;
      c.train.patience = 500;
    } else {
      c.train.max_epochs = 300;
      c.train.patience = 60;
    }

    const auto& task = section(root, "task");
    reject_unknown(task, {"name", "resolution", "samples", "seed", "dataset"}, "task");
    read(task, "name", "task", c.task);
    read(task, "resolution", "task", c.resolution);
    read(task, "samples", "task", c.samples);
    read(task, "seed", "task", c.corpus_seed);
    read(task, "dataset", "task", c.dataset);

    const auto& split = section(root, "split");
    reject_unknown(split, {"seed", "boundaries", "difficulties"}, "split");
    read(split, "seed", "split", c.split_seed);
    if (split.contains("boundaries")) {
      datagen::Boundaries b;
      read(split, "boundaries", "split", b);
      c.boundaries = b;
    }
    read_list(split, "difficulties", "split", c.difficulties, datagen::difficulty_from_string);

    auto& m = c.train.model;
    const auto& model = section(root, "model");
    reject_unknown(model, {"architecture", "conditioning", "width", "layers", "encoding", "conditioner_hidden", "latent"},
                   "model");
    std::string arch = models::to_string(m.architecture), cond = models::to_string(m.conditioning);
    read(model, "architecture", "model", arch);
    read(model, "conditioning", "model", cond);
    try {
      m.architecture = models::architecture_from_string(arch);
      m.conditioning = models::conditioning_from_string(cond);
    } catch (const Error& e) {
      throw ConfigError(std::string("model: ") + e.what());
    }
    read(model, "width", "model", m.width);
    read(model, "layers", "model", m.layers);
    read(model, "conditioner_hidden", "model", m.conditioner.hidden);
    read(model, "latent", "model", m.conditioner.latent);
    const auto& enc = section(model, "encoding");
    reject_unknown(enc, {"frequencies", "base"}, "model.encoding");
    read(enc, "frequencies", "model.encoding", m.conditioner.encoding.frequencies);
    read(enc, "base", "model.encoding", m.conditioner.encoding.base);

    auto& t = c.train;
    const auto& train = section(root, "train");
    reject_unknown(train,
                   {"learning_rate", "weight_decay", "beta1", "beta2", "eps", "grad_clip", "batch_size", "max_epochs",
                    "eval_every", "patience", "ema_decay"},
                   "train");
    read(train, "learning_rate", "train", t.learning_rate);
    read(train, "weight_decay", "train", t.adamw.weight_decay);
    read(train, "beta1", "train", t.adamw.beta1);
    read(train, "beta2", "train", t.adamw.beta2);
    read(train, "eps", "train", t.adamw.eps);
    read(train, "grad_clip", "train", t.grad_clip);
    read(train, "batch_size", "train", t.batch_size);
    read(train, "max_epochs", "train", t.max_epochs);
    read(train, "eval_every", "train", t.eval_every);
    read(train, "patience", "train", t.patience);
    read(train, "ema_decay", "train", t.ema_decay);
    if (c.profile == harness::Profile::desk && (t.max_epochs > 300 || t.patience > 60)) {
      throw ConfigError("train.max_epochs/patience: the desk profile allows at most 300 epochs and patience 60");
    }

    const auto& u = section(root, "uda");
    reject_unknown(u, {"kinds", "lambdas", "cmd_order", "cmd_bounds", "dann_hidden"}, "uda");
    read_list(u, "kinds", "uda", c.kinds, uda::kind_from_string);
    read(u, "lambdas", "uda", c.lambdas);
    read(u, "cmd_order", "uda", t.uda.cmd_order);
    std::vector<double> bounds = {t.uda.cmd_lo, t.uda.cmd_hi};
    read(u, "cmd_bounds", "uda", bounds);
    if (bounds.size() != 2 || !(bounds[0] < bounds[1])) throw ConfigError("uda.cmd_bounds: expected [lo, hi] with lo < hi");
    t.uda.cmd_lo = bounds[0];
    t.uda.cmd_hi = bounds[1];
    read(u, "dann_hidden", "uda", t.uda.dann_hidden);

    read(root, "seeds", "", c.seeds);
    read_list(root, "strategies", "", c.strategies, selection::strategy_from_string);

    const auto& dr = section(root, "density_ratio");
    reject_unknown(dr, {"l2", "max_iterations", "tolerance", "clip"}, "density_ratio");
    read(dr, "l2", "density_ratio", c.ratio.l2);
    read(dr, "max_iterations", "density_ratio", c.ratio.max_iterations);
    read(dr, "tolerance", "density_ratio", c.ratio.tolerance);
    std::vector<double> clip = {c.ratio.clip_lo, c.ratio.clip_hi};
    read(dr, "clip", "density_ratio", clip);
    if (clip.size() != 2) throw ConfigError("density_ratio.clip: expected [lo, hi]");
    c.ratio.clip_lo = clip[0];
    c.ratio.clip_hi = clip[1];

    std::string root_dir = c.output_root.string();
    read(root, "output_root", "", root_dir);
    c.output_root = root_dir;
    read(root, "workers", "", c.workers);

    c.finalize();
    c.validate();
    return c;
  } catch (const ConfigError& e) {
    throw ConfigError(origin + ": " + e.what());
  }
}

json to_json(const PipelineConfig& c) {
  const auto& t = c.train;
  const auto& m = t.model;
  json j = {
      {"format_version", c.format_version},
      {"name", c.name},
      {"profile", harness::to_string(c.profile)},
      {"task", {{"name", c.task}, {"resolution", c.resolution}, {"samples", c.samples}, {"seed", c.corpus_seed}}},
      {"model",
       {{"architecture", models::to_string(m.architecture)},
        {"conditioning", models::to_string(m.conditioning)},
        {"width", m.width},
        {"layers", m.layers},
        {"encoding", {{"frequencies", m.conditioner.encoding.frequencies}, {"base", m.conditioner.encoding.base}}},
        {"conditioner_hidden", m.conditioner.hidden},
        {"latent", m.conditioner.latent}}},
      {"train",
       {{"learning_rate", t.learning_rate},
        {"weight_decay", t.adamw.weight_decay},
        {"beta1", t.adamw.beta1},
        {"beta2", t.adamw.beta2},
        {"eps", t.adamw.eps},
        {"grad_clip", t.grad_clip},
        {"batch_size", t.batch_size},
        {"max_epochs", t.max_epochs},
        {"eval_every", t.eval_every},
        {"patience", t.patience},
        {"ema_decay", t.ema_decay}}},
      {"seeds", c.seeds},
      {"density_ratio",
       {{"l2", c.ratio.l2},
        {"max_iterations", c.ratio.max_iterations},
        {"tolerance", c.ratio.tolerance},
        {"clip", {c.ratio.clip_lo, c.ratio.clip_hi}}}},
      {"output_root", c.output_root.string()},
      {"workers", c.workers}};
  if (!c.dataset.empty()) j["task"]["dataset"] = c.dataset;
  json split = {{"seed", c.split_seed}};
  if (c.boundaries) split["boundaries"] = *c.boundaries;
  split["difficulties"] = json::array();
  for (auto d : c.difficulties) split["difficulties"].push_back(datagen::to_string(d));
  j["split"] = split;
  json kinds = json::array();
  for (auto k : c.kinds) kinds.push_back(uda::to_string(k));
  j["uda"] = {{"kinds", kinds},
              {"lambdas", c.effective_lambdas()},
              {"cmd_order", t.uda.cmd_order},
              {"cmd_bounds", {t.uda.cmd_lo, t.uda.cmd_hi}},
              {"dann_hidden", t.uda.dann_hidden}};
  json strategies = json::array();
  for (auto s : c.strategies) strategies.push_back(selection::to_string(s));
  j["strategies"] = strategies;
  return j;
}

void apply_environment(PipelineConfig& c) {
  if (const char* root = std::getenv("MESHSHIFT_OUTPUT_ROOT"); root && *root) c.output_root = root;
  if (const char* w = std::getenv("MESHSHIFT_WORKERS"); w && *w) {
    try {
      std::size_t used = 0;
      const auto n = std::stoul(w, &used);
      if (used != std::string(w).size()) throw std::invalid_argument(w);
      c.workers = n;
    } catch (const std::exception&) {
      throw ConfigError(std::string("MESHSHIFT_WORKERS: not a number: ") + w);
    }
  }
}

std::vector<std::uint64_t> parse_seeds(const std::string& s) {
  std::vector<std::uint64_t> out;
  std::stringstream ss(s);
  std::string item;
  try {
    while (std::getline(ss, item, ',')) {
      if (item.empty()) continue;
      std::size_t used = 0;
      out.push_back(std::stoull(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    }
  } catch (const std::exception&) {
    throw ConfigError("--seeds: expected a count or a comma-separated list of integers, got '" + s + "'");
  }
  if (out.empty()) throw ConfigError("--seeds: no seeds given");
  if (s.find(',') == std::string::npos) {
    const auto n = out.front();
    if (n == 0) throw ConfigError("--seeds: the seed count must be positive");
    out.clear();
    for (std::uint64_t i = 0; i < n; ++i) out.push_back(i);
  }
  return out;
}

std::vector<datagen::Difficulty> parse_difficulties(const std::string& csv) {
  std::vector<datagen::Difficulty> out;
  std::stringstream ss(csv);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    const auto d = datagen::difficulty_from_string(item);
    if (std::find(out.begin(), out.end(), d) == out.end()) out.push_back(d);
  }
  if (out.empty()) throw ConfigError("--difficulty: no difficulties given");
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace meshshift::cli
