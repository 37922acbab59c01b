#include "meshshift/cli/commands.hpp"

#include <chrono>
#include <ctime>
#include <iostream>

#include "meshshift/common/binary_io.hpp"
#include "meshshift/datagen/corpus.hpp"
#include "meshshift/datagen/dataset_io.hpp"
#include "meshshift/harness/sweep.hpp"

namespace meshshift::cli {

namespace fs = std::filesystem;
using nlohmann::json;

LoadedConfig load_config(const std::optional<fs::path>& path) {
  LoadedConfig lc;
  if (path) {
    lc.echo = io::read_text(*path);
    lc.config = parse_config(lc.echo, path->string());
  } else {
    lc.config.finalize();
    lc.config.validate();
    lc.echo = to_json(lc.config).dump(2) + "\n";
  }
  return lc;
}

void apply_overrides(PipelineConfig& c, const RunFlags& flags) {
  apply_environment(c);
  if (flags.workers) c.workers = *flags.workers;
  if (flags.profile) {
    const auto p = harness::profile_from_string(*flags.profile);
    if (p != c.profile) {
      c.profile = p;
      if (p == harness::Profile::paper) {
        c.train.max_epochs = 3000;
        c.train.patience = 500;
      }
      c.lambdas.clear();
    }
  }
  if (flags.seeds) c.seeds = parse_seeds(*flags.seeds);
  if (flags.strategies) c.strategies = selection::parse_strategies(*flags.strategies);
  if (flags.difficulty) c.difficulties = parse_difficulties(*flags.difficulty);
  c.finalize();
  c.validate();
}

namespace {

double cpu_seconds() { return static_cast<double>(std::clock()) / CLOCKS_PER_SEC; }

void check_dataset_matches(const PipelineConfig& c, const datagen::DatasetManifest& m) {
  const auto spec = c.task_spec();
  std::string why;
  if (!(m.task == spec)) why = "task or resolution differs";
  else if (m.samples.size() != c.samples) why = "sample count differs";
  else if (m.seed != c.corpus_seed) why = "corpus seed differs";
  else if (m.split_seed != c.split_seed) why = "split seed differs";
  else if (!(m.boundaries == c.effective_boundaries())) why = "split boundaries differ";
  if (!why.empty()) {
    throw ConfigError("dataset at " + c.dataset_dir().string() + " does not match the config (" + why +
                      "); regenerate it with --force");
  }
}

harness::SweepSpec sweep_spec(const PipelineConfig& c) {
  harness::SweepSpec s;
  s.base = c.train;
  s.kinds = c.kinds;
  s.lambdas = c.effective_lambdas();
  s.seeds = c.seeds;
  s.workers = c.effective_workers();
  return s;
}

std::vector<harness::DifficultyRuns> load_all(const PipelineConfig& c, const datagen::DatasetManifest& m) {
  std::vector<harness::DifficultyRuns> out;
  for (auto d : c.difficulties) {
    const auto& split = m.split(d);
    out.push_back(load_sweep(c.sweep_dir(d), d, split.target_hi - split.boundary));
  }
  return out;
}

struct ReportOutcome {
  harness::Report report;
  std::size_t non_oracle_reads = 0;
};

/// Builds the report from run artifacts on disk and writes the report directory.
ReportOutcome write_report(const LoadedConfig& lc, const datagen::DatasetManifest& m, selection::OracleAudit& audit,
                           bool write) {
  const auto& c = lc.config;
  const auto runs = load_all(c, m);
  ReportOutcome o;
  o.report = harness::build_report(runs, c.strategies, audit, c.ratio);
  o.non_oracle_reads = audit.non_oracle_reads();
  if (!write) return o;
  const auto dir = c.report_dir();
  fs::create_directories(dir);
  io::write_text_atomic(dir / "summary.csv", harness::summary_csv(o.report));
  io::write_text_atomic(dir / "scaling.csv", harness::scaling_csv(o.report));
  io::write_text_atomic(dir / "per_sample_errors.csv", harness::per_sample_csv(runs));
  io::write_text_atomic(dir / "selection.json", harness::selection_json(o.report).dump(2) + "\n");
  io::write_text_atomic(dir / "oracle_audit.json", audit.to_json().dump(2) + "\n");
  io::write_text_atomic(dir / "pipeline_config.json", lc.echo);
  io::write_text_atomic(dir / "effective_config.json", to_json(c).dump(2) + "\n");
  return o;
}

bool excluded_from_hashes(const fs::path& p) {
  const auto name = p.filename().string();
  return name == "determinism.json" || name == "timing.json" || name == "effective_config.json" ||
         name == "pipeline_config.json";
}

json file_hashes(const PipelineConfig& c) {
  std::vector<fs::path> roots;
  for (auto d : c.difficulties) roots.push_back(c.sweep_dir(d));
  roots.push_back(c.report_dir());
  std::vector<fs::path> files;
  for (const auto& r : roots) {
    if (!fs::exists(r)) continue;
    for (const auto& e : fs::recursive_directory_iterator(r)) {
      if (e.is_regular_file() && !excluded_from_hashes(e.path())) files.push_back(e.path());
    }
  }
  std::sort(files.begin(), files.end());
  json out = json::object();
  for (const auto& f : files) out[fs::relative(f, c.output_root).generic_string()] = io::sha256_file(f);
  return out;
}

/// Retrains the first stable run and compares its weights and cached losses bit for bit.
json replay_audit(const PipelineConfig& c) {
  for (auto d : c.difficulties) {
    const auto sweep = c.sweep_dir(d);
    std::vector<fs::path> dirs;
    for (const auto& e : fs::directory_iterator(sweep))
      if (e.is_directory()) dirs.push_back(e.path());
    std::sort(dirs.begin(), dirs.end());
    for (const auto& dir : dirs) {
      if (!fs::exists(dir / "checkpoint.bin")) continue;
      const auto cfg = json::parse(io::read_text(dir / "config.json")).get<harness::TrainConfig>();
      const auto data = harness::load_split(c.dataset_dir(), d, cfg.model.conditioner.encoding);
      const auto id = dir.filename().string();
      const auto r = harness::train_run(cfg, data, id);
      json j = {{"run_id", id}, {"difficulty", datagen::to_string(d)}};
      if (!r.model) {
        j["match"] = false;
        j["detail"] = "replay was unstable but the original run was not";
        return j;
      }
      const auto replay_bytes = models::encode_weights(r.model->parameters());
      const auto original_bytes = io::read_file(dir / "checkpoint.bin");
      const auto cached = harness::decode_cache(io::read_file(dir / "cache.bin"), (dir / "cache.bin").string());
      const bool weights = replay_bytes == original_bytes;
      const bool losses = cached.source_val_losses == r.source_val_losses;
      j["checkpoint_sha256"] = io::sha256_hex(original_bytes);
      j["replay_sha256"] = io::sha256_hex(replay_bytes);
      j["weights_match"] = weights;
      j["source_val_losses_match"] = losses;
      j["match"] = weights && losses;
      return j;
    }
  }
  return {{"match", nullptr}, {"detail", "no stable run to replay"}};
}

void print_summary(const harness::Report& rep, std::ostream& out) {
  for (const auto& row : rep.summary) {
    if (row.domain != "target") continue;
    out << "  " << datagen::to_string(row.difficulty) << ' ' << row.architecture << ' ' << row.kind << ' '
        << row.strategy << ": target NRMSE " << harness::format_number(row.mean) << " +- "
        << harness::format_number(row.std) << " (difference " << harness::format_number(row.difference) << ")\n";
  }
}

}  // namespace

harness::DifficultyRuns load_sweep(const fs::path& sweep_dir, datagen::Difficulty difficulty,
                                   double target_range_width) {
  if (!fs::is_directory(sweep_dir)) throw IoError("no sweep directory at " + sweep_dir.string());
  harness::DifficultyRuns dr;
  dr.difficulty = difficulty;
  dr.target_range_width = target_range_width;
  std::vector<fs::path> dirs;
  for (const auto& e : fs::directory_iterator(sweep_dir))
    if (e.is_directory() && fs::exists(e.path() / "metrics.json")) dirs.push_back(e.path());
  std::sort(dirs.begin(), dirs.end());
  for (const auto& dir : dirs) {
    const auto metrics = json::parse(io::read_text(dir / "metrics.json"));
    const auto cfg = json::parse(io::read_text(dir / "config.json")).get<harness::TrainConfig>();
    selection::RunRecord rec;
    rec.run_id = metrics.at("run_id").get<std::string>();
    rec.architecture = models::to_string(cfg.model.architecture);
    rec.kind = uda::to_string(cfg.uda.kind);
    rec.lambda = cfg.uda.lambda;
    rec.seed = cfg.seed;
    rec.stable = metrics.at("stable").get<bool>() && !metrics.at("target_test").is_null();
    if (rec.stable) {
      const auto cache = harness::decode_cache(io::read_file(dir / "cache.bin"), (dir / "cache.bin").string());
      rec.source_val_losses = cache.source_val_losses;
      rec.source_val_z = cache.source_val_z;
      rec.target_train_z = cache.target_train_z;
      auto src = harness::metrics_from_json(metrics.at("source_test"));
      auto tgt = harness::metrics_from_json(metrics.at("target_test"));
      rec.target_test_nrmse = selection::Sealed<double>(tgt.nrmse, rec.run_id + "/target_test_nrmse");
      dr.source_test_nrmse[rec.run_id] = src.nrmse;
      dr.source_metrics.emplace(rec.run_id, std::move(src));
      dr.target_metrics.emplace(rec.run_id, std::move(tgt));
    }
    dr.records.push_back(std::move(rec));
  }
  return dr;
}

int cmd_generate(LoadedConfig lc, const GenerateFlags& g, const RunFlags& flags, std::ostream& out) {
  auto& c = lc.config;
  if (g.task) c.task = *g.task;
  if (g.n) c.samples = *g.n;
  if (g.seed) c.corpus_seed = *g.seed;
  if (g.resolution) c.resolution = *g.resolution;
  if (g.task && !g.resolution) c.resolution = 0;
  if (g.task) c.boundaries.reset();
  apply_overrides(c, flags);
  const auto dir = g.out ? *g.out : c.dataset_dir();
  const auto spec = c.task_spec();
  const auto bounds = c.effective_boundaries();

  // Splits only depend on the parameter draws, so the plan is exact without solving.
  const auto params = datagen::stratified_params(spec, c.samples, c.corpus_seed);
  std::vector<double> dominant;
  for (const auto& p : params) dominant.push_back(p[spec.dominant_index()]);
  json plan = {{"dataset", dir.string()}, {"task", spec.name}, {"resolution", spec.resolution},
               {"samples", c.samples},    {"seed", c.corpus_seed}, {"boundaries", bounds}};
  for (auto d : c.difficulties) {
    const auto s = datagen::split_domains(dominant, spec, d, bounds, c.split_seed);
    plan["splits"][datagen::to_string(d)] = {{"source_train", s.source_train.size()},
                                             {"source_val", s.source_val.size()},
                                             {"source_test", s.source_test.size()},
                                             {"target_train", s.target_train.size()},
                                             {"target_test", s.target_test.size()}};
  }
  if (flags.dry_run) {
    out << plan.dump(2) << "\n";
    return kOk;
  }
  if (fs::exists(dir / "manifest.json") && !flags.force) {
    out << "error: dataset already exists at " << dir.string() << " (pass --force to overwrite)\n";
    return kExistingOutput;
  }
  if (flags.force && fs::exists(dir)) fs::remove_all(dir);
  const auto corpus = datagen::build_corpus(spec, c.samples, c.corpus_seed, c.effective_workers());
  const auto manifest = datagen::write_dataset(dir, corpus, bounds, c.split_seed, flags.force);
  io::write_text_atomic(dir / "pipeline_config.json", lc.echo);
  out << "wrote " << manifest.samples.size() << " " << spec.name << " samples to " << dir.string() << "\n";
  out << plan["splits"].dump() << "\n";
  return kOk;
}

int cmd_bench(LoadedConfig lc, const RunFlags& flags, std::ostream& out) {
  auto& c = lc.config;
  apply_overrides(c, flags);
  const auto wall0 = std::chrono::steady_clock::now();
  const double cpu0 = cpu_seconds();

  if (!fs::exists(c.dataset_dir() / "manifest.json")) {
    out << "error: no dataset at " << c.dataset_dir().string() << "; run `meshshift generate` with this config first\n";
    return kUsage;
  }
  const auto manifest = datagen::read_manifest(c.dataset_dir());
  check_dataset_matches(c, manifest);
  const auto spec = sweep_spec(c);
  const auto configs = harness::expand_sweep(spec);

  if (flags.dry_run) {
    json plan = {{"dataset", c.dataset_dir().string()}, {"report", c.report_dir().string()}, {"workers", spec.workers}};
    for (auto d : c.difficulties) {
      json ids = json::array();
      for (const auto& t : configs) ids.push_back(harness::run_id(t.model.architecture, t.uda.kind, t.uda.lambda, t.seed));
      plan["sweeps"][datagen::to_string(d)] = {{"dir", c.sweep_dir(d).string()}, {"runs", ids}};
    }
    out << plan.dump(2) << "\n";
    return kOk;
  }
  for (auto d : c.difficulties) {
    if (fs::exists(c.sweep_dir(d)) && !flags.force) {
      out << "error: sweep output already exists at " << c.sweep_dir(d).string() << " (pass --force to overwrite)\n";
      return kExistingOutput;
    }
  }
  if (flags.force) {
    for (auto d : c.difficulties) fs::remove_all(c.sweep_dir(d));
    fs::remove_all(c.report_dir());
  }

  selection::OracleAudit audit;
  for (auto d : c.difficulties) {
    const auto data = harness::load_split(c.dataset_dir(), d, c.train.model.conditioner.encoding);
    out << "sweep " << datagen::to_string(d) << ": " << configs.size() << " runs on " << spec.workers << " worker(s)\n"
        << std::flush;
    fs::create_directories(c.sweep_dir(d));
    io::write_text_atomic(c.sweep_dir(d) / "pipeline_config.json", lc.echo);
    const auto runs = harness::run_sweep(spec, data, c.sweep_dir(d), audit);
    for (const auto& r : runs) {
      const auto run_dir = c.sweep_dir(d) / r.result.run_id;
      if (fs::is_directory(run_dir)) io::write_text_atomic(run_dir / "pipeline_config.json", lc.echo);
      if (!r.error.empty()) out << "  run " << r.result.run_id << " failed: " << r.error << "\n";
      else if (!r.result.stable) out << "  run " << r.result.run_id << " unstable\n";
    }
  }

  const auto outcome = write_report(lc, manifest, audit, true);
  const auto replay = replay_audit(c);
  json determinism = {{"files", file_hashes(c)}, {"replay", replay}};
  io::write_text_atomic(c.report_dir() / "determinism.json", determinism.dump(2) + "\n");
  const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - wall0).count();
  io::write_text_atomic(c.report_dir() / "timing.json",
                        json({{"wall_seconds", wall}, {"cpu_seconds", cpu_seconds() - cpu0}, {"workers", spec.workers}})
                                .dump(2) +
                            "\n");

  out << "report written to " << c.report_dir().string() << "\n";
  print_summary(outcome.report, out);
  int code = kOk;
  if (outcome.non_oracle_reads != 0) {
    out << "FAIL oracle audit: " << outcome.non_oracle_reads << " non-oracle reads of target labels\n";
    code = kFailure;
  } else {
    out << "PASS oracle audit: zero non-oracle reads of target labels\n";
  }
  if (replay.at("match").is_boolean() && !replay.at("match").get<bool>()) {
    out << "FAIL determinism replay of " << replay.value("run_id", "?") << "\n";
    code = kFailure;
  } else {
    out << "PASS determinism replay " << replay.value("run_id", std::string("(skipped)")) << "\n";
  }
  if (!outcome.report.quorum_failures.empty()) {
    for (const auto& q : outcome.report.quorum_failures) out << "FAIL quorum: more than half of " << q << " unstable\n";
    if (code == kOk) code = kQuorum;
  }
  return code;
}

int cmd_select(LoadedConfig lc, const RunFlags& flags, std::ostream& out) {
  auto& c = lc.config;
  apply_overrides(c, flags);
  const auto manifest = datagen::read_manifest(c.dataset_dir());
  selection::OracleAudit audit;
  json all = json::object();
  for (auto d : c.difficulties) {
    const auto& split = manifest.split(d);
    const auto runs = load_sweep(c.sweep_dir(d), d, split.target_hi - split.boundary);
    const auto rep = harness::build_report({runs}, c.strategies, audit, c.ratio);
    auto j = harness::selection_json(rep);
    if (!flags.dry_run) io::write_text_atomic(c.sweep_dir(d) / "selection.json", j.dump(2) + "\n");
    all[datagen::to_string(d)] = std::move(j);
  }
  all["oracle_audit"] = audit.to_json();
  out << all.dump(2) << "\n";
  return audit.non_oracle_reads() == 0 ? kOk : kFailure;
}

int cmd_report(LoadedConfig lc, const RunFlags& flags, std::ostream& out) {
  auto& c = lc.config;
  apply_overrides(c, flags);
  const auto manifest = datagen::read_manifest(c.dataset_dir());
  selection::OracleAudit audit;
  const auto outcome = write_report(lc, manifest, audit, !flags.dry_run);
  const auto det_path = c.report_dir() / "determinism.json";
  if (!flags.dry_run && fs::exists(det_path)) {
    auto det = json::parse(io::read_text(det_path));
    det["files"] = file_hashes(c);
    io::write_text_atomic(det_path, det.dump(2) + "\n");
  }
  out << harness::summary_csv(outcome.report);
  out << harness::scaling_csv(outcome.report);
  if (outcome.non_oracle_reads != 0) return kFailure;
  return outcome.report.quorum_failures.empty() ? kOk : kQuorum;
}

int cmd_evaluate(const fs::path& run_dir, const fs::path& dataset_dir, datagen::Difficulty difficulty,
                 const std::string& domain, std::ostream& out) {
  const auto model = models::load_checkpoint(run_dir / "checkpoint");
  const auto data = harness::load_split(dataset_dir, difficulty, model.config().conditioner.encoding);
  harness::MetricsReport m;
  selection::OracleAudit audit;
  if (domain == "source_test") {
    m = harness::evaluate_source(model, data, data.source_test, domain);
  } else if (domain == "source_val") {
    m = harness::evaluate_source(model, data, data.source_val, domain);
  } else if (domain == "target_test") {
    m = harness::evaluate_target(model, data, selection::AccessContext::final_report, audit);
  } else {
    throw ConfigError("--domain must be source_val, source_test or target_test");
  }
  auto j = harness::to_json(m);
  j["oracle_audit"] = {{"total_reads", audit.total()}, {"non_oracle_reads", audit.non_oracle_reads()}};
  out << j.dump(2) << "\n";
  return kOk;
}

}  // namespace meshshift::cli
