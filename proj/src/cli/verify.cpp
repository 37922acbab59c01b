#include <algorithm>
#include <cmath>
#include <functional>
#include <ostream>

#include "meshshift/cli/commands.hpp"
#include "meshshift/common/binary_io.hpp"
#include "meshshift/datagen/dataset_io.hpp"
#include "meshshift/datagen/solvers.hpp"
#include "meshshift/harness/train.hpp"

namespace meshshift::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

class Checker {
 public:
  explicit Checker(std::ostream& out) : out_(out) {}

  // The check returns an empty string on success or a failure description.
  void check(const std::string& name, const std::function<std::string()>& fn) {
    std::string why;
    try {
      why = fn();
    } catch (const std::exception& e) {
      why = e.what();
    }
    if (why.empty()) {
      out_ << "PASS " << name << "\n";
    } else {
      out_ << "FAIL " << name << ": " << why << "\n";
      ++failures_;
    }
  }

  int failures() const { return failures_; }

 private:
  std::ostream& out_;
  int failures_ = 0;
};

constexpr double kPlateResidualTol = 1e-8;
constexpr double kRodRelTol = 1e-10;

void verify_dataset(const fs::path& dir, Checker& ck) {
  datagen::DatasetManifest m;
  bool manifest_ok = false;
  ck.check("manifest parses", [&] {
    m = datagen::read_manifest(dir);
    manifest_ok = true;
    return std::string();
  });
  if (!manifest_ok) return;

  ck.check("samples decode and match the manifest (" + std::to_string(m.samples.size()) + ")", [&] {
    std::string worst;
    double worst_residual = 0.0;
    for (const auto& e : m.samples) {
      const auto s = datagen::read_dataset_sample(dir, e);
      s.validate();
      if (s.params != e.params) return "sample " + e.id + " parameters differ from the manifest";
      if (m.task.name == datagen::kPlateHeat) {
        const double r = datagen::plate_heat_residual(s);
        worst_residual = std::max(worst_residual, r);
        if (!(r < kPlateResidualTol)) return "sample " + e.id + " residual " + std::to_string(r);
        if (!datagen::plate_heat_max_principle(s)) return "sample " + e.id + " violates the maximum principle";
      } else {
        const auto fresh = datagen::solve_task(m.task, e.params, e.mesh_seed);
        if (fresh.coords != s.coords) return "sample " + e.id + " mesh differs from a fresh solve";
        for (std::size_t i = 0; i < s.fields.size(); ++i) {
          const double scale = std::max(1e-300, std::abs(fresh.fields[i]));
          if (std::abs(fresh.fields[i] - s.fields[i]) / scale > kRodRelTol && fresh.fields[i] != s.fields[i])
            return "sample " + e.id + " fields differ from a fresh solve";
        }
      }
    }
    return std::string();
  });

  const auto dominant = m.dominant_values();
  for (const auto& [d, split] : m.splits) {
    const auto label = "split " + datagen::to_string(d);
    ck.check(label + " indices are disjoint and in range", [&] {
      const auto clash = split.overlap();
      if (!clash.empty()) return clash;
      for (const auto* part : {&split.source_train, &split.source_val, &split.source_test, &split.target_train,
                               &split.target_test}) {
        for (auto i : *part)
          if (i >= m.samples.size()) return "index " + std::to_string(i) + " out of range";
      }
      if (split.total() != m.samples.size()) return std::string("split does not cover every sample");
      return std::string();
    });
    ck.check(label + " matches a recomputation from the split seed", [&] {
      const auto fresh = datagen::split_domains(dominant, m.task, d, m.boundaries, m.split_seed);
      return fresh == split ? std::string() : std::string("stored split differs");
    });
  }
}

void verify_run(const fs::path& dir, Checker& ck) {
  const auto id = dir.filename().string();
  json metrics;
  ck.check(id + " metrics parse", [&] {
    metrics = json::parse(io::read_text(dir / "metrics.json"));
    json::parse(io::read_text(dir / "config.json")).get<harness::TrainConfig>();
    return std::string();
  });
  if (!metrics.is_object()) return;
  if (!metrics.value("stable", false)) {
    ck.check(id + " unstable run carries diagnostics", [&] {
      return metrics.contains("diagnostics") && !metrics["diagnostics"].is_null() ? std::string()
                                                                                  : std::string("no diagnostics");
    });
    return;
  }
  ck.check(id + " checkpoint loads with finite weights", [&] {
    const auto model = models::load_checkpoint(dir / "checkpoint");
    return model.parameters().all_finite() ? std::string() : std::string("non-finite weights");
  });
  ck.check(id + " cache decodes", [&] {
    const auto c = harness::decode_cache(io::read_file(dir / "cache.bin"), (dir / "cache.bin").string());
    return c.source_val_losses.empty() ? std::string("empty cache") : std::string();
  });
}

void verify_sweep(const fs::path& dir, Checker& ck) {
  std::vector<fs::path> runs;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.is_directory() && fs::exists(e.path() / "metrics.json")) runs.push_back(e.path());
  std::sort(runs.begin(), runs.end());
  for (const auto& r : runs) verify_run(r, ck);
}

void verify_report(const fs::path& dir, Checker& ck) {
  ck.check("oracle audit has zero non-oracle reads", [&] {
    const auto a = json::parse(io::read_text(dir / "oracle_audit.json"));
    const auto n = a.at("non_oracle_reads").get<std::size_t>();
    return n == 0 ? std::string() : std::to_string(n) + " non-oracle reads";
  });
  if (!fs::exists(dir / "determinism.json")) return;
  const auto det = json::parse(io::read_text(dir / "determinism.json"));
  const auto root = dir.parent_path().parent_path();
  ck.check("artifact hashes match determinism.json (" + std::to_string(det.at("files").size()) + " files)", [&] {
    for (const auto& [rel, hash] : det.at("files").items()) {
      const auto p = root / rel;
      if (!fs::exists(p)) return "missing " + rel;
      if (io::sha256_file(p) != hash.get<std::string>()) return "hash mismatch for " + rel;
    }
    return std::string();
  });
  ck.check("determinism replay matched", [&] {
    const auto& r = det.at("replay");
    if (r.at("match").is_null()) return std::string();
    return r.at("match").get<bool>() ? std::string() : std::string("replay of ") + r.value("run_id", "?") + " differed";
  });
}

}  // namespace

int cmd_verify(const fs::path& dir, std::ostream& out) {
  Checker ck(out);
  if (!fs::is_directory(dir)) {
    out << "FAIL " << dir.string() << " is not a directory\n";
    return kFailure;
  }
  bool any = false;
  if (fs::exists(dir / "manifest.json")) {
    verify_dataset(dir, ck);
    any = true;
  }
  if (fs::exists(dir / "metrics.json")) {
    verify_run(dir, ck);
    any = true;
  }
  if (!any) {
    bool sweep = false;
    for (const auto& e : fs::directory_iterator(dir))
      sweep = sweep || (e.is_directory() && fs::exists(e.path() / "metrics.json"));
    if (sweep) {
      verify_sweep(dir, ck);
      any = true;
    }
  }
  if (fs::exists(dir / "oracle_audit.json")) {
    verify_report(dir, ck);
    any = true;
  }
  if (!any) {
    out << "FAIL " << dir.string() << " is not a dataset, run, sweep or report directory\n";
    return kFailure;
  }
  out << (ck.failures() == 0 ? "verify: all checks passed\n" : "verify: " + std::to_string(ck.failures()) + " check(s) failed\n");
  return ck.failures() == 0 ? kOk : kFailure;
}

}  // namespace meshshift::cli
