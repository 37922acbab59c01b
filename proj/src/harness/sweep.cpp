#include "meshshift/harness/sweep.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <mutex>
#include <thread>

#include "meshshift/common/binary_io.hpp"

namespace meshshift::harness {

std::vector<double> paper_lambda_grid() {
  std::vector<double> g;
  for (int e = 1; e <= 9; ++e) g.push_back(std::pow(10.0, -e));
  return g;
}

std::vector<double> desk_lambda_grid() { return {1e-1, 1e-2, 1e-3, 1e-4, 0.0}; }

std::string run_id(models::Architecture arch, uda::Kind kind, double lambda, std::uint64_t seed) {
  std::string lam = "0";
  if (lambda != 0.0) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.0e", lambda);
    lam = buf;
  }
  const auto k = lambda == 0.0 ? std::string("none") : uda::to_string(kind);
  return models::to_string(arch) + "-" + k + "-" + lam + "-s" + std::to_string(seed);
}

std::vector<TrainConfig> expand_sweep(const SweepSpec& spec) {
  if (spec.seeds.empty()) throw ConfigError("a sweep needs at least one seed");
  std::vector<TrainConfig> out;
  for (auto seed : spec.seeds) {
    TrainConfig base = spec.base;
    base.seed = seed;
    base.uda = uda::UdaConfig{};
    base.uda.kind = uda::Kind::none;
    base.uda.lambda = 0.0;
    out.push_back(base);
    for (auto kind : spec.kinds) {
      if (kind == uda::Kind::none) continue;
      for (double lam : spec.lambdas) {
        if (lam < 0.0 || !std::isfinite(lam)) throw ConfigError("lambda values must be finite and nonnegative");
        if (lam == 0.0) continue;
        TrainConfig c = spec.base;
        c.seed = seed;
        c.uda.kind = kind;
        c.uda.lambda = lam;
        out.push_back(c);
      }
    }
  }
  auto id = [](const TrainConfig& c) { return run_id(c.model.architecture, c.uda.kind, c.uda.lambda, c.seed); };
  std::sort(out.begin(), out.end(), [&](const auto& a, const auto& b) { return id(a) < id(b); });
  auto dup = std::adjacent_find(out.begin(), out.end(), [&](const auto& a, const auto& b) { return id(a) == id(b); });
  if (dup != out.end()) throw ConfigError("sweep contains duplicate run " + id(*dup));
  return out;
}

void write_run_dir(const std::filesystem::path& dir, const SweepRun& run) {
  std::filesystem::create_directories(dir);
  const auto& r = run.result;
  nlohmann::json cfg = r.config;
  cfg["run_id"] = r.run_id;
  io::write_text_atomic(dir / "config.json", cfg.dump(2) + "\n");
  io::write_text_atomic(dir / "loss_curve.csv", loss_curve_csv(r.log));

  nlohmann::json metrics = {{"run_id", r.run_id},
                            {"stable", r.stable && r.model.has_value()},
                            {"epochs_run", r.epochs_run},
                            {"best_epoch", r.best_epoch},
                            {"error", run.error}};
  metrics["best_source_val"] = r.model ? nlohmann::json(r.best_source_val) : nlohmann::json(nullptr);
  metrics["diagnostics"] = r.diagnostics.is_null() ? nlohmann::json(nullptr) : r.diagnostics;
  metrics["source_test"] = run.source_test ? to_json(*run.source_test) : nlohmann::json(nullptr);
  metrics["target_test"] = run.target_test ? to_json(*run.target_test) : nlohmann::json(nullptr);

  if (r.model) {
    models::save_checkpoint(dir / "checkpoint", *r.model,
                            {{"run_id", r.run_id}, {"best_epoch", r.best_epoch}, {"best_source_val", r.best_source_val}});
    io::write_file_atomic(dir / "cache.bin", encode_cache(r));
  }
  io::write_text_atomic(dir / "metrics.json", metrics.dump(2) + "\n");
}

std::vector<SweepRun> run_sweep(const SweepSpec& spec, const SplitData& data, const std::filesystem::path& out_dir,
                                selection::OracleAudit& audit) {
  const auto configs = expand_sweep(spec);
  std::vector<SweepRun> runs(configs.size());
  std::atomic<std::size_t> next{0};
  std::mutex failure_mu;
  std::exception_ptr failure;

  auto run_one = [&](std::size_t i) {
    const auto& c = configs[i];
    auto& run = runs[i];
    const auto id = run_id(c.model.architecture, c.uda.kind, c.uda.lambda, c.seed);
    try {
      run.result = train_run(c, data, id);
      if (run.result.model) {
        const auto& m = *run.result.model;
        run.source_test = evaluate_source(m, data, data.source_test, "source_test");
        run.target_test = evaluate_target(m, data, selection::AccessContext::final_report, audit);
      }
    } catch (const Error& e) {
      run.result.run_id = id;
      run.result.config = c;
      run.result.stable = false;
      run.error = e.what();
    }
    if (!out_dir.empty()) write_run_dir(out_dir / id, run);
  };
  auto work = [&] {
    try {
      for (std::size_t i = next++; i < configs.size(); i = next++) run_one(i);
    } catch (...) {
      std::lock_guard lock(failure_mu);
      if (!failure) failure = std::current_exception();
      next = configs.size();
    }
  };
  const std::size_t workers = std::max<std::size_t>(1, std::min(spec.workers, configs.size()));
  std::vector<std::thread> pool;
  for (std::size_t w = 1; w < workers; ++w) pool.emplace_back(work);
  work();
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
  return runs;
}

}  // namespace meshshift::harness
