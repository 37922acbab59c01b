#include "meshshift/harness/report.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>
#include <map>
#include <set>
#include <tuple>
#include <sstream>

namespace meshshift::harness {

using selection::AccessContext;
using selection::RunRecord;
using selection::Strategy;

std::string format_number(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

std::pair<double, double> mean_std(const std::vector<double>& v) {
  if (v.empty()) return {std::numeric_limits<double>::quiet_NaN(), 0.0};
  double m = 0.0;
  for (double x : v) m += x;
  m /= static_cast<double>(v.size());
  if (v.size() < 2) return {m, 0.0};
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return {m, std::sqrt(s / static_cast<double>(v.size() - 1))};
}

namespace {

struct CellKey {
  datagen::Difficulty difficulty;
  std::string architecture, kind, strategy;
  auto operator<=>(const CellKey&) const = default;
};

}  // namespace

Report build_report(const std::vector<DifficultyRuns>& all_runs, const std::vector<Strategy>& strategies,
                    selection::OracleAudit& audit, const selection::DensityRatioConfig& ratio_cfg) {
  Report rep;
  const bool needs_ratio = std::any_of(strategies.begin(), strategies.end(),
                                       [](Strategy s) { return s == Strategy::IWV || s == Strategy::DEV; });

  for (const auto& dr : all_runs) {
    std::vector<RunRecord> records = dr.records;
    std::sort(records.begin(), records.end(), [](const auto& a, const auto& b) { return a.run_id < b.run_id; });
    if (needs_ratio) {
      for (auto& r : records) {
        if (!r.stable) continue;
        try {
          selection::attach_density_ratio(r, ratio_cfg);
        } catch (const EstimationError&) {
          r.source_val_weights.clear();
        }
      }
    }

    std::set<std::string> archs, kinds;
    std::set<std::uint64_t> seeds;
    std::map<std::pair<std::string, std::string>, std::size_t> unstable_count, run_count;
    for (const auto& r : records) {
      archs.insert(r.architecture);
      if (r.kind != "none") kinds.insert(r.kind);
      seeds.insert(r.seed);
      ++run_count[{r.architecture, r.kind}];
      if (!r.stable) ++unstable_count[{r.architecture, r.kind}];
    }
    for (const auto& [key, total] : run_count) {
      if (2 * unstable_count[key] > total) {
        rep.quorum_failures.push_back(datagen::to_string(dr.difficulty) + "/" + key.first + "/" + key.second);
      }
    }

    auto source_of = [&](const std::string& id) { return dr.source_test_nrmse.at(id); };
    auto target_of = [&](const RunRecord& r) { return r.target_test_nrmse.open(AccessContext::final_report, audit); };
    auto find = [&](const std::string& id) -> const RunRecord& {
      for (const auto& r : records)
        if (r.run_id == id) return r;
      throw SelectionError("unknown run " + id);
    };

    std::map<CellKey, std::vector<double>> src_vals, tgt_vals;

    for (const auto& arch : archs) {
      std::vector<double> tb_all;
      for (auto seed : seeds) {
        std::vector<const RunRecord*> seed_runs;
        for (const auto& r : records)
          if (r.architecture == arch && r.seed == seed) seed_runs.push_back(&r);

        for (const auto* r : seed_runs) {
          if (r->kind == "none" && r->stable) {
            src_vals[{dr.difficulty, arch, "none", "baseline"}].push_back(source_of(r->run_id));
            tgt_vals[{dr.difficulty, arch, "none", "baseline"}].push_back(target_of(*r));
          }
        }
        for (const auto& kind : kinds) {
          std::vector<const RunRecord*> pool;
          for (const auto* r : seed_runs)
            if (r->kind == kind || r->kind == "none") pool.push_back(r);
          for (auto s : strategies) {
            selection::SelectionScore score;
            try {
              score = selection::select_model(pool, s, {&audit, s == Strategy::TB});
            } catch (const SelectionError&) {
              continue;
            }
            const auto& chosen = find(score.chosen);
            Choice c{dr.difficulty, arch, kind, s, seed, score.chosen, source_of(score.chosen), target_of(chosen), score};
            src_vals[{dr.difficulty, arch, kind, selection::to_string(s)}].push_back(c.source_nrmse);
            tgt_vals[{dr.difficulty, arch, kind, selection::to_string(s)}].push_back(c.target_nrmse);
            rep.choices.push_back(std::move(c));
          }
        }
        // Oracle over every kind of this architecture and seed, for the scaling table.
        if (std::find(strategies.begin(), strategies.end(), Strategy::TB) != strategies.end()) {
          try {
            auto score = selection::select_model(seed_runs, Strategy::TB, {&audit, true});
            tb_all.push_back(target_of(find(score.chosen)));
          } catch (const SelectionError&) {
          }
        }
      }

      const CellKey base_key{dr.difficulty, arch, "none", "baseline"};
      const auto [bs_mean, bs_std] = mean_std(src_vals[base_key]);
      const auto [bt_mean, bt_std] = mean_std(tgt_vals[base_key]);
      (void)bs_std;

      ScalingRow sc;
      sc.difficulty = dr.difficulty;
      sc.architecture = arch;
      sc.target_range_width = dr.target_range_width;
      sc.baseline_source = bs_mean;
      sc.baseline_target = bt_mean;
      sc.baseline_target_std = bt_std;
      sc.best_uda_target = std::numeric_limits<double>::quiet_NaN();
      sc.tb_target = mean_std(tb_all).first;

      auto emit = [&](const std::string& kind, const std::string& strategy) {
        const CellKey key{dr.difficulty, arch, kind, strategy};
        const auto uk = unstable_count[{arch, kind}];
        for (const char* domain : {"source", "target"}) {
          const bool src = domain[0] == 's';
          const auto& vals = src ? src_vals[key] : tgt_vals[key];
          if (vals.empty()) continue;
          const auto [m, sd] = mean_std(vals);
          SummaryRow row{dr.difficulty, arch, kind, strategy, domain, m, sd, vals.size(), m - (src ? bs_mean : bt_mean),
                         uk};
          rep.summary.push_back(row);
          if (!src && kind != "none" && strategy != "TB" && !(m >= sc.best_uda_target)) {
            sc.best_uda_target = m;
            sc.best_uda = kind + "/" + strategy;
          }
        }
      };
      emit("none", "baseline");
      for (const auto& kind : kinds)
        for (auto s : strategies) emit(kind, selection::to_string(s));
      rep.scaling.push_back(sc);
    }
  }
  std::stable_sort(rep.scaling.begin(), rep.scaling.end(), [](const auto& a, const auto& b) {
    return std::tie(a.architecture, a.target_range_width) < std::tie(b.architecture, b.target_range_width);
  });
  return rep;
}

std::string summary_csv(const Report& r) {
  std::ostringstream os;
  os << "difficulty,architecture,kind,strategy,domain,nrmse_mean,nrmse_std,seeds,difference,unstable_runs\n";
  for (const auto& s : r.summary) {
    os << datagen::to_string(s.difficulty) << ',' << s.architecture << ',' << s.kind << ',' << s.strategy << ','
       << s.domain << ',' << format_number(s.mean) << ',' << format_number(s.std) << ',' << s.seeds << ','
       << format_number(s.difference) << ',' << s.unstable << '\n';
  }
  return os.str();
}

std::string scaling_csv(const Report& r) {
  // Empty cells mark quantities that were not computed, such as TB when it was not requested.
  auto cell = [](double v) { return std::isnan(v) ? std::string() : format_number(v); };
  std::ostringstream os;
  os << "difficulty,architecture,target_range_width,baseline_source_nrmse,baseline_target_nrmse,"
        "baseline_target_std,best_uda,best_uda_target_nrmse,tb_target_nrmse\n";
  for (const auto& s : r.scaling) {
    os << datagen::to_string(s.difficulty) << ',' << s.architecture << ',' << format_number(s.target_range_width)
       << ',' << cell(s.baseline_source) << ',' << cell(s.baseline_target) << ',' << cell(s.baseline_target_std)
       << ',' << s.best_uda << ',' << (s.best_uda.empty() ? "" : cell(s.best_uda_target)) << ',' << cell(s.tb_target)
       << '\n';
  }
  return os.str();
}

std::string per_sample_csv(const std::vector<DifficultyRuns>& runs) {
  std::ostringstream os;
  os << "difficulty,run_id,domain,sample_id,nrmse\n";
  for (const auto& dr : runs) {
    for (const auto* metrics : {&dr.source_metrics, &dr.target_metrics}) {
      for (const auto& [id, m] : *metrics) {
        for (std::size_t i = 0; i < m.sample_ids.size(); ++i) {
          os << datagen::to_string(dr.difficulty) << ',' << id << ',' << m.domain << ',' << m.sample_ids[i] << ','
             << format_number(m.sample_nrmse[i]) << '\n';
        }
      }
    }
  }
  return os.str();
}

nlohmann::json selection_json(const Report& r) {
  auto list = nlohmann::json::array();
  for (const auto& c : r.choices) {
    list.push_back({{"difficulty", datagen::to_string(c.difficulty)},
                    {"architecture", c.architecture},
                    {"kind", c.kind},
                    {"strategy", selection::to_string(c.strategy)},
                    {"seed", c.seed},
                    {"chosen", c.run_id},
                    {"source_nrmse", c.source_nrmse},
                    {"target_nrmse", c.target_nrmse},
                    {"scores", selection::to_json(c.score)["scores"]}});
  }
  return {{"choices", list}, {"quorum_failures", r.quorum_failures}};
}

}  // namespace meshshift::harness
