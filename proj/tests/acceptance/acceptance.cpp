// Acceptance runner. Prints one PASS/FAIL line per criterion and exits nonzero
// if any criterion fails. Criteria 5 to 8 drive the meshshift executable.
#include <sys/resource.h>
#include <sys/wait.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "meshshift/common/binary_io.hpp"
#include "meshshift/datagen/corpus.hpp"
#include "meshshift/datagen/dataset_io.hpp"
#include "meshshift/datagen/solvers.hpp"
#include "meshshift/models/surrogate.hpp"
#include "meshshift/selection/selection.hpp"
#include "meshshift/tensor/grad_check.hpp"
#include "meshshift/uda/uda.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace meshshift;
using tensor::Tape;
using tensor::Tensor;
using tensor::Var;
namespace ops = meshshift::tensor;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

double child_cpu_seconds() {
  rusage ru{};
  getrusage(RUSAGE_CHILDREN, &ru);
  return static_cast<double>(ru.ru_utime.tv_sec + ru.ru_stime.tv_sec) +
         1e-6 * static_cast<double>(ru.ru_utime.tv_usec + ru.ru_stime.tv_usec);
}

double self_cpu_seconds() { return static_cast<double>(std::clock()) / CLOCKS_PER_SEC; }

struct Clock {
  std::chrono::steady_clock::time_point wall0 = std::chrono::steady_clock::now();
  double self0 = self_cpu_seconds();
  double child0 = child_cpu_seconds();
  double wall() const { return std::chrono::duration<double>(std::chrono::steady_clock::now() - wall0).count(); }
  double cpu() const { return (self_cpu_seconds() - self0) + (child_cpu_seconds() - child0); }
};

std::string fmt(double v, int prec = 3) {
  std::ostringstream s;
  s.precision(prec);
  s << v;
  return s.str();
}

Tensor random_matrix(std::mt19937_64& rng, std::size_t r, std::size_t c, double mean = 0.0, double sd = 0.6) {
  std::normal_distribution<double> n(mean, sd);
  std::vector<double> d(r * c);
  for (auto& x : d) x = n(rng);
  return Tensor::matrix(r, c, std::move(d));
}

// ---------------------------------------------------------------- criterion 1

models::ModelConfig small_model(models::Architecture arch) {
  models::ModelConfig c;
  c.architecture = arch;
  c.conditioning = models::Conditioning::film;
  c.width = 6;
  c.layers = arch == models::Architecture::sage ? 3 : 2;
  c.coord_dim = 2;
  c.num_params = 4;
  c.num_fields = 3;
  c.conditioner.hidden = {6};
  c.conditioner.encoding.frequencies = 3;
  c.conditioner.encoding.base = 10.0;
  return c;
}

Outcome criterion_gradients() {
  constexpr int kInstances = 20;
  constexpr double kStep = 1e-6;
  std::map<std::string, double> worst;
  std::mt19937_64 rng(20240601);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const auto plate = datagen::plate_heat_task(8);

  for (int rep = 0; rep < kInstances; ++rep) {
    std::vector<double> raw;
    for (const auto& p : plate.params) raw.push_back(p.min + (p.max - p.min) * unit(rng));
    const auto sample = datagen::solve_task(plate, raw, 1000 + rep);

    for (auto arch : {models::Architecture::pointnet, models::Architecture::sage}) {
      models::SurrogateModel m(small_model(arch), 500 + rep);
      const auto g = models::make_graph_input(sample, plate.unit_scale(raw), m.config().conditioner.encoding);
      const auto batch = models::make_batch(g);
      const auto target = random_matrix(rng, sample.num_nodes(), 3);
      models::ParamFunction f = [&](Tape& t, std::span<const Var> p) {
        Var d = ops::sub(t, m.forward(t, p, batch).prediction, t.constant(target));
        return ops::mean(t, ops::mul(t, d, d));
      };
      auto& w = worst[models::to_string(arch) + " forward"];
      w = std::max(w, models::grad_check_parameters(f, m.parameters(), kStep));

      if (arch == models::Architecture::sage) {
        std::vector<double> u(3 * 4);
        for (auto& x : u) x = unit(rng);
        const auto feat = models::sinusoidal(Tensor::matrix(3, 4, u), m.config().conditioner.encoding);
        models::ParamFunction fc = [&](Tape& t, std::span<const Var> p) {
          Var z = m.encode_condition(t, p, feat);
          return ops::sum(t, ops::mul(t, z, z));
        };
        auto& wc = worst["conditioner"];
        wc = std::max(wc, models::grad_check_parameters(fc, m.parameters(), kStep, m.conditioner_begin(),
                                                        m.conditioner_end()));
      }
    }

    {
      models::ParameterSet ps;
      const auto film = models::make_film(ps, "film", 8, 5, rng);
      const auto h = random_matrix(rng, 9, 5);
      const auto z = random_matrix(rng, 2, 8);
      ops::Index owner(9, 0);
      for (std::size_t i = 5; i < 9; ++i) owner[i] = 1;
      const auto graph = ops::make_index(owner);
      models::ParamFunction fp = [&](Tape& t, std::span<const Var> p) {
        Var y = models::film_modulate(t, p, film, t.constant(h), t.constant(z), graph);
        return ops::sum(t, ops::mul(t, y, y));
      };
      tensor::TapeFunction<double> fh = [&](Tape& t, Var x) {
        auto p = ps.bind(t);
        Var y = models::film_modulate(t, p, film, x, t.constant(z), graph);
        return ops::sum(t, ops::mul(t, y, y));
      };
      auto& w = worst["film"];
      w = std::max(w, models::grad_check_parameters(fp, ps, kStep));
      w = std::max(w, tensor::grad_check<double>(fh, h, kStep));
    }

    {
      const auto a = random_matrix(rng, 6, 4), b = random_matrix(rng, 5, 4, 0.4);
      tensor::TapeFunction<double> c1 = [&](Tape& t, Var x) { return uda::coral_distance(t, x, t.constant(b)); };
      tensor::TapeFunction<double> c2 = [&](Tape& t, Var x) { return uda::coral_distance(t, t.constant(a), x); };
      tensor::TapeFunction<double> m1 = [&](Tape& t, Var x) {
        return uda::cmd_distance(t, ops::tanh(t, x), ops::tanh(t, t.constant(b)), 5, -1, 1);
      };
      tensor::TapeFunction<double> m2 = [&](Tape& t, Var x) {
        return uda::cmd_distance(t, ops::tanh(t, t.constant(a)), ops::tanh(t, x), 5, -1, 1);
      };
      auto& wc = worst["coral"];
      wc = std::max({wc, tensor::grad_check<double>(c1, a, kStep), tensor::grad_check<double>(c2, b, kStep)});
      auto& wm = worst["cmd"];
      wm = std::max({wm, tensor::grad_check<double>(m1, a, kStep), tensor::grad_check<double>(m2, b, kStep)});
    }

    {
      models::ParameterSet ps;
      const auto disc = uda::make_discriminator(ps, 8, {16}, rng);
      const auto hs = random_matrix(rng, 5, 8), ht = random_matrix(rng, 4, 8, 0.5);
      models::ParamFunction fp = [&](Tape& t, std::span<const Var> p) {
        return uda::dann_domain_loss(t, p, disc, t.constant(hs), t.constant(ht), 1.0);
      };
      // With strength -1 the reversal layer passes the plain gradient, which finite differences can see.
      tensor::TapeFunction<double> fx = [&](Tape& t, Var x) {
        auto p = ps.bind(t);
        return uda::dann_domain_loss(t, p, disc, x, t.constant(ht), -1.0);
      };
      auto& w = worst["dann"];
      w = std::max({w, models::grad_check_parameters(fp, ps, kStep), tensor::grad_check<double>(fx, hs, kStep)});
    }
  }

  Outcome o{true, ""};
  for (const auto& [name, err] : worst) {
    o.pass = o.pass && err < 1e-5;
    o.detail += name + " " + fmt(err, 2) + "; ";
  }
  o.detail = "max relative error over " + std::to_string(kInstances) + " instances: " + o.detail;
  return o;
}

// ---------------------------------------------------------------- criterion 2

double lib_coral(const Tensor& a, const Tensor& b) {
  Tape t(false);
  return t.value(uda::coral_distance(t, t.constant(a), t.constant(b))).item();
}

double lib_cmd(const Tensor& a, const Tensor& b, std::size_t k, double lo, double hi) {
  Tape t(false);
  return t.value(uda::cmd_distance(t, t.constant(a), t.constant(b), k, lo, hi)).item();
}

using Rows = std::vector<std::vector<double>>;

Rows rows_of(const Tensor& t) {
  Rows r(t.rows(), std::vector<double>(t.cols()));
  for (std::size_t i = 0; i < t.rows(); ++i)
    for (std::size_t j = 0; j < t.cols(); ++j) r[i][j] = t(i, j);
  return r;
}

// Plain-loop evaluations that share no code with the tape implementation.
double direct_coral(const Rows& s, const Rows& t) {
  const std::size_t d = s[0].size();
  auto cov = [d](const Rows& x) {
    std::vector<double> mu(d, 0.0);
    for (const auto& r : x)
      for (std::size_t j = 0; j < d; ++j) mu[j] += r[j] / static_cast<double>(x.size());
    std::vector<double> c(d * d, 0.0);
    for (const auto& r : x)
      for (std::size_t i = 0; i < d; ++i)
        for (std::size_t j = 0; j < d; ++j) c[i * d + j] += (r[i] - mu[i]) * (r[j] - mu[j]);
    for (auto& v : c) v /= static_cast<double>(x.size() - 1);
    return c;
  };
  const auto cs = cov(s), ct = cov(t);
  double f = 0.0;
  for (std::size_t i = 0; i < cs.size(); ++i) f += (cs[i] - ct[i]) * (cs[i] - ct[i]);
  return f / (4.0 * static_cast<double>(d * d));
}

double direct_cmd(const Rows& s, const Rows& t, std::size_t order, double lo, double hi) {
  const std::size_t d = s[0].size();
  auto mean = [d](const Rows& x) {
    std::vector<double> mu(d, 0.0);
    for (const auto& r : x)
      for (std::size_t j = 0; j < d; ++j) mu[j] += r[j];
    for (auto& v : mu) v /= static_cast<double>(x.size());
    return mu;
  };
  auto central = [d](const Rows& x, const std::vector<double>& mu, std::size_t k) {
    std::vector<double> c(d, 0.0);
    for (const auto& r : x)
      for (std::size_t j = 0; j < d; ++j) c[j] += std::pow(r[j] - mu[j], static_cast<double>(k));
    for (auto& v : c) v /= static_cast<double>(x.size());
    return c;
  };
  auto norm_diff = [](const std::vector<double>& a, const std::vector<double>& b) {
    double s2 = 0.0;
    for (std::size_t j = 0; j < a.size(); ++j) s2 += (a[j] - b[j]) * (a[j] - b[j]);
    return std::sqrt(s2);
  };
  const auto ms = mean(s), mt = mean(t);
  double total = norm_diff(ms, mt) / (hi - lo);
  for (std::size_t k = 2; k <= order; ++k) {
    total += norm_diff(central(s, ms, k), central(t, mt, k)) / std::pow(hi - lo, static_cast<double>(k));
  }
  return total;
}

Outcome criterion_divergences() {
  std::mt19937_64 rng(77);
  int violations = 0;
  double worst_direct = 0.0;
  for (int rep = 0; rep < 100; ++rep) {
    const std::size_t d = 1 + rep % 5;
    const auto a = random_matrix(rng, 4 + rep % 9, d);
    const auto b = random_matrix(rng, 3 + rep % 7, d, 0.3, 0.9);
    std::vector<std::size_t> pa(a.rows()), pb(b.rows());
    std::iota(pa.begin(), pa.end(), 0);
    std::iota(pb.begin(), pb.end(), 0);
    std::shuffle(pa.begin(), pa.end(), rng);
    std::shuffle(pb.begin(), pb.end(), rng);
    auto permute = [](const Tensor& x, const std::vector<std::size_t>& p) {
      std::vector<double> v(x.numel());
      for (std::size_t i = 0; i < x.rows(); ++i)
        for (std::size_t j = 0; j < x.cols(); ++j) v[i * x.cols() + j] = x(p[i], j);
      return Tensor::matrix(x.rows(), x.cols(), std::move(v));
    };
    const auto ap = permute(a, pa), bp = permute(b, pb);
    const double c = lib_coral(a, b), m = lib_cmd(a, b, 5, -3, 3);
    if (lib_coral(a, a) != 0.0 || lib_cmd(a, a, 5, -3, 3) != 0.0) ++violations;
    if (c != lib_coral(b, a) || m != lib_cmd(b, a, 5, -3, 3)) ++violations;
    if (std::abs(lib_coral(ap, bp) - c) > 1e-12 * std::max(1.0, c)) ++violations;
    if (std::abs(lib_cmd(ap, bp, 5, -3, 3) - m) > 1e-12 * std::max(1.0, m)) ++violations;
    worst_direct = std::max(worst_direct, std::abs(c - direct_coral(rows_of(a), rows_of(b))));
    worst_direct = std::max(worst_direct, std::abs(m - direct_cmd(rows_of(a), rows_of(b), 5, -3, 3)));
  }
  const auto s1 = Tensor::matrix(2, 1, {-1, 1}), t1 = Tensor::matrix(2, 1, {-2, 2});
  const auto s2 = Tensor::matrix(2, 1, {0, 1}), t2 = Tensor::matrix(2, 1, {0.5, 0.5});
  const double coral_lib = lib_coral(s1, t1), coral_direct = direct_coral(rows_of(s1), rows_of(t1));
  const double cmd_lib = lib_cmd(s2, t2, 2, 0, 1), cmd_direct = direct_cmd(rows_of(s2), rows_of(t2), 2, 0, 1);
  const bool worked = std::abs(coral_lib - coral_direct) <= 1e-12 && std::abs(coral_lib - 9.0) <= 1e-12 &&
                      std::abs(cmd_lib - cmd_direct) <= 1e-12 && std::abs(cmd_lib - 0.25) <= 1e-12;
  Outcome o;
  o.pass = violations == 0 && worked && worst_direct <= 1e-12;
  o.detail = "identity/symmetry/permutation violations " + std::to_string(violations) + " of 100 pairs; coral " +
             fmt(coral_lib, 17) + " (direct " + fmt(coral_direct, 17) + "), cmd " + fmt(cmd_lib, 17) + " (direct " +
             fmt(cmd_direct, 17) + "); max |library - direct| on random pairs " + fmt(worst_direct, 2);
  return o;
}

// ---------------------------------------------------------------- criterion 3

Outcome criterion_solvers() {
  std::mt19937_64 rng(31);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const auto plate = datagen::plate_heat_task();
  double worst_residual = 0.0;
  int principle_failures = 0;
  for (int i = 0; i < 100; ++i) {
    std::vector<double> raw;
    for (const auto& p : plate.params) raw.push_back(p.min + (p.max - p.min) * unit(rng));
    const auto s = datagen::solve_task(plate, raw, 9000 + i);
    worst_residual = std::max(worst_residual, datagen::plate_heat_residual(s));
    if (!datagen::plate_heat_max_principle(s)) ++principle_failures;
  }
  const auto rod = datagen::rod_bending_task(200);
  double worst_rel = 0.0;
  for (int i = 0; i < 50; ++i) {
    datagen::RodParams p;
    p.length = 1.0 + 2.0 * unit(rng);
    p.thickness = 0.05 + 0.1 * unit(rng);
    p.load = 100.0 + 900.0 * unit(rng);
    p.modulus = 7.0e10 + 1.4e11 * unit(rng);
    const auto s = datagen::solve_rod_bending(p, 200);
    std::size_t tip = 0;
    for (std::size_t n = 1; n < s.num_nodes(); ++n)
      if (s.coord(n, 0) > s.coord(tip, 0)) tip = n;
    const double inertia = std::pow(p.thickness, 4) / 12.0;
    const double expected = p.load * std::pow(p.length, 3) / (3.0 * p.modulus * inertia);
    worst_rel = std::max(worst_rel, std::abs(std::abs(s.field(tip, 0)) - expected) / expected);
  }
  Outcome o;
  o.pass = worst_residual < 1e-8 && principle_failures == 0 && worst_rel <= 0.01;
  o.detail = "plate (res " + std::to_string(plate.resolution) + ", 100 samples) max residual " +
             fmt(worst_residual, 2) + ", max-principle failures " + std::to_string(principle_failures) +
             "; rod tip deflection max relative error " + fmt(worst_rel, 2) + " over 50 draws";
  return o;
}

// ---------------------------------------------------------------- criterion 4

double quad_loss(double x) { return (x - 3.0) * (x - 3.0) / 5.0; }

Outcome criterion_iwv() {
  std::mt19937_64 mc(99);
  std::normal_distribution<double> target_dist(1.0, 1.0);
  double truth = 0.0;
  const int n_mc = 2'000'000;
  for (int i = 0; i < n_mc; ++i) truth += quad_loss(target_dist(mc));
  truth /= n_mc;

  auto column = [](std::mt19937_64& rng, std::size_t n, double mean) {
    std::normal_distribution<double> g(mean, 1.0);
    std::vector<double> v(n);
    for (auto& x : v) x = g(rng);
    return Tensor::matrix(n, 1, std::move(v));
  };
  auto losses_of = [](const Tensor& x) {
    std::vector<double> l(x.rows());
    for (std::size_t i = 0; i < x.rows(); ++i) l[i] = quad_loss(x(i, 0));
    return l;
  };
  auto exact = [](const Tensor& x) {
    std::vector<double> w(x.rows());
    for (std::size_t i = 0; i < x.rows(); ++i) w[i] = std::exp(x(i, 0) - 0.5);
    return w;
  };

  std::mt19937_64 rng(2024);
  const auto src = column(rng, 2000, 0.0), tgt = column(rng, 2000, 1.0);
  const auto losses = losses_of(src);
  const double closed = selection::iwv_score(losses, exact(src));
  const double estimated =
      selection::iwv_score(losses, selection::estimate_density_ratio(src, tgt).ratios(src));

  std::vector<double> iwv, dev;
  for (int r = 0; r < 100; ++r) {
    const auto x = column(rng, 2000, 0.0);
    const auto l = losses_of(x);
    const auto w = exact(x);
    iwv.push_back(selection::iwv_score(l, w));
    dev.push_back(selection::dev_score(l, w));
  }
  auto variance = [](const std::vector<double>& v) {
    const double m = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
    double s = 0.0;
    for (double x : v) s += (x - m) * (x - m);
    return s / static_cast<double>(v.size() - 1);
  };
  const double vi = variance(iwv), vd = variance(dev);
  Outcome o;
  o.pass = std::abs(estimated - truth) <= 0.05 && std::abs(closed - truth) <= 0.02 && vd <= vi;
  o.detail = "Monte-Carlo target risk " + fmt(truth, 6) + "; IWV estimated ratio " + fmt(estimated, 6) +
             " (|err| " + fmt(std::abs(estimated - truth), 2) + "), closed-form ratio " + fmt(closed, 6) +
             " (|err| " + fmt(std::abs(closed - truth), 2) + "); resampling variance DEV " + fmt(vd, 3) +
             " vs IWV " + fmt(vi, 3);
  return o;
}

// ---------------------------------------------------------------- criteria 5 to 8

struct Env {
  std::string cli;
  fs::path configs;
  fs::path work;
};

int run_cli(const Env& env, const std::string& args, const fs::path& root, const fs::path& log) {
  const std::string cmd = "MESHSHIFT_OUTPUT_ROOT='" + root.string() + "' '" + env.cli + "' " + args + " > '" +
                          log.string() + "' 2>&1";
  const int status = std::system(cmd.c_str());
  if (status == -1) return -1;
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string tail_of(const fs::path& log) {
  std::ifstream in(log);
  std::string line, last;
  while (std::getline(in, line))
    if (!line.empty()) last = line;
  return last;
}

fs::path dataset_dir(const fs::path& root) {
  for (const auto& e : fs::directory_iterator(root / "datasets")) return e.path();
  return {};
}

struct BenchState {
  bool generated = false;
  bool bench_ok = false;
  fs::path root1, root2;
  std::string generate_error, bench_error;
};

void prepare_main_bench(const Env& env, BenchState& st, double& cpu, double& wall) {
  st.root1 = env.work / "run-workers2";
  st.root2 = env.work / "run-workers1";
  const auto cfg = (env.configs / "desk-plate-medium.json").string();
  Clock clk;
  for (const auto& root : {st.root1, st.root2}) {
    fs::remove_all(root);
    fs::create_directories(root);
    const int rc = run_cli(env, "generate --config '" + cfg + "'", root, root / "generate.log");
    if (rc != 0) {
      st.generate_error = "generate exited " + std::to_string(rc) + ": " + tail_of(root / "generate.log");
      return;
    }
  }
  st.generated = true;
  const double gen_cpu = clk.cpu();
  Clock bench;
  const int rc = run_cli(env, "bench --config '" + cfg + "' --workers 2", st.root1, st.root1 / "bench.log");
  cpu = bench.cpu() + gen_cpu / 2.0;
  wall = bench.wall();
  if (rc != 0) st.bench_error = "bench exited " + std::to_string(rc) + ": " + tail_of(st.root1 / "bench.log");
  st.bench_ok = rc == 0;
}

Outcome criterion_end_to_end(const Env& env, BenchState& st, double bench_cpu, double bench_wall) {
  if (!st.generated) return {false, st.generate_error};
  if (!st.bench_ok) return {false, st.bench_error};
  const auto cfg = (env.configs / "desk-plate-medium.json").string();
  const auto report1 = st.root1 / "reports" / "desk-plate-medium";
  const auto report2 = st.root2 / "reports" / "desk-plate-medium";

  const auto summary = io::read_text(report1 / "summary.csv");
  const bool has_difference = summary.rfind("difficulty,architecture,kind,strategy,domain,nrmse_mean,nrmse_std,seeds,difference", 0) == 0;
  std::set<std::string> strategies;
  std::istringstream rows(summary);
  std::string line;
  std::getline(rows, line);
  while (std::getline(rows, line)) {
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (cells.size() > 3) strategies.insert(cells[3]);
  }
  const bool all_strategies = strategies.count("SB") && strategies.count("IWV") && strategies.count("DEV") &&
                              strategies.count("TB") && strategies.count("baseline");
  const auto audit = json::parse(io::read_text(report1 / "oracle_audit.json"));
  const auto non_oracle = audit.at("non_oracle_reads").get<std::size_t>();

  Clock rerun;
  const int rc = run_cli(env, "bench --config '" + cfg + "' --workers 1", st.root2, st.root2 / "bench.log");
  const double rerun_cpu = rerun.cpu();
  bool identical = false;
  std::string diff_note;
  if (rc == 0) {
    identical = true;
    for (const char* f : {"summary.csv", "scaling.csv", "selection.json", "per_sample_errors.csv"}) {
      if (io::read_text(report1 / f) != io::read_text(report2 / f)) {
        identical = false;
        diff_note += std::string(" ") + f + " differs;";
      }
    }
  } else {
    diff_note = " rerun exited " + std::to_string(rc) + ": " + tail_of(st.root2 / "bench.log");
  }
  const double budget = 30.0 * 60.0;
  Outcome o;
  o.pass = has_difference && all_strategies && non_oracle == 0 && identical && bench_cpu <= budget;
  o.detail = "bench CPU " + fmt(bench_cpu / 60.0, 3) + " min (wall " + fmt(bench_wall / 60.0, 3) +
             " min, budget 30 CPU-min); summary has difference column: " + (has_difference ? "yes" : "no") +
             "; strategies present: " + (all_strategies ? "yes" : "no") + "; non-oracle target reads " +
             std::to_string(non_oracle) + " of " + std::to_string(audit.at("total_reads").get<std::size_t>()) +
             "; --workers 1 rerun (CPU " + fmt(rerun_cpu / 60.0, 3) + " min) byte-identical: " +
             (identical ? "yes" : "no") + diff_note;
  return o;
}

Outcome criterion_dominance(const BenchState& st, const std::vector<fs::path>& reports) {
  if (!st.bench_ok) return {false, "no completed sweep: " + st.bench_error};
  std::size_t comparisons = 0, violations = 0, pools = 0;
  for (const auto& report : reports) {
    if (!fs::exists(report / "selection.json")) continue;
    const auto sel = json::parse(io::read_text(report / "selection.json"));
    const auto root = report.parent_path().parent_path();
    const auto name = report.filename().string();
    // (difficulty, arch, kind, seed) -> strategy -> target NRMSE of the pick
    std::map<std::tuple<std::string, std::string, std::string, std::uint64_t>, std::map<std::string, double>> cells;
    for (const auto& c : sel.at("choices")) {
      cells[{c.at("difficulty"), c.at("architecture"), c.at("kind"), c.at("seed")}][c.at("strategy")] =
          c.at("target_nrmse").get<double>();
    }
    for (const auto& [key, picks] : cells) {
      const auto& [difficulty, arch, kind, seed] = key;
      auto tb = picks.find("TB");
      if (tb == picks.end()) continue;
      ++pools;
      for (const auto& [strategy, value] : picks) {
        ++comparisons;
        if (!(tb->second <= value)) ++violations;
      }
      const auto baseline = root / "runs" / (name + "-" + difficulty) / (arch + "-none-0-s" + std::to_string(seed)) /
                            "metrics.json";
      if (fs::exists(baseline)) {
        const auto m = json::parse(io::read_text(baseline));
        if (m.value("stable", false) && !m.at("target_test").is_null()) {
          ++comparisons;
          if (!(tb->second <= m.at("target_test").at("nrmse").get<double>())) ++violations;
        }
      }
    }
  }
  Outcome o;
  o.pass = comparisons > 0 && violations == 0;
  o.detail = std::to_string(violations) + " violations in " + std::to_string(comparisons) +
             " exact comparisons of TB against SB/IWV/DEV picks and the lambda=0 baseline over " +
             std::to_string(pools) + " pools";
  return o;
}

Outcome criterion_scaling(const Env& env, const BenchState& st, fs::path& report_out) {
  if (!st.generated) return {false, st.generate_error};
  const auto root = st.root1;
  const auto cfg = (env.configs / "desk-scaling.json").string();
  Clock clk;
  const int rc = run_cli(env, "bench --config '" + cfg + "'", root, root / "bench-scaling.log");
  const double cpu = clk.cpu(), wall = clk.wall();
  if (rc != 0) return {false, "scaling bench exited " + std::to_string(rc) + ": " + tail_of(root / "bench-scaling.log")};
  report_out = root / "reports" / "desk-scaling";
  std::map<std::string, std::pair<double, double>> by_difficulty;  // difficulty -> (source, target)
  std::istringstream rows(io::read_text(report_out / "summary.csv"));
  std::string line;
  std::getline(rows, line);
  while (std::getline(rows, line)) {
    std::vector<std::string> c;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) c.push_back(cell);
    if (c.size() < 6 || c[1] != "sage" || c[2] != "none") continue;
    (c[4] == "source" ? by_difficulty[c[0]].first : by_difficulty[c[0]].second) = std::stod(c[5]);
  }
  if (by_difficulty.size() != 3) return {false, "summary lacks a baseline row for every difficulty"};
  const double e = by_difficulty["easy"].second, m = by_difficulty["medium"].second, h = by_difficulty["hard"].second;
  const double ratio = m / by_difficulty["medium"].first;
  Outcome o;
  o.pass = e <= m && m <= h && ratio >= 1.5;
  o.detail = "baseline target NRMSE easy " + fmt(e, 4) + ", medium " + fmt(m, 4) + ", hard " + fmt(h, 4) +
             "; medium target/source " + fmt(ratio, 3) + " (need >= 1.5); CPU " + fmt(cpu / 60.0, 3) + " min, wall " +
             fmt(wall / 60.0, 3) + " min";
  return o;
}

Outcome criterion_formats(const Env& env, const BenchState& st) {
  if (!st.bench_ok) return {false, "no completed bench output: " + st.bench_error};
  const auto root = st.root1;
  const auto data = dataset_dir(root);
  const auto sweep = root / "runs" / "desk-plate-medium-medium";
  const auto report = root / "reports" / "desk-plate-medium";
  const auto scratch = env.work / "formats";
  fs::remove_all(scratch);
  fs::create_directories(scratch);
  std::vector<std::string> problems;

  // Dataset: read every sample and re-encode it.
  const auto manifest = datagen::read_manifest(data);
  std::size_t samples_checked = 0;
  for (const auto& e : manifest.samples) {
    const auto original = io::read_file(data / e.file);
    const auto decoded = datagen::decode_sample(original, e.file);
    if (datagen::encode_sample(decoded) != original) problems.push_back("sample " + e.id + " re-encodes differently");
    ++samples_checked;
  }
  if (datagen::manifest_text(manifest) != io::read_text(data / "manifest.json"))
    problems.push_back("manifest re-serializes differently");

  // Checkpoints: load and save again.
  std::size_t checkpoints = 0;
  for (const auto& e : fs::directory_iterator(sweep)) {
    if (!fs::exists(e.path() / "checkpoint.bin")) continue;
    const auto model = models::load_checkpoint(e.path() / "checkpoint");
    const auto sidecar = json::parse(io::read_text(e.path() / "checkpoint.json"));
    const auto stem = scratch / e.path().filename() / "checkpoint";
    fs::create_directories(stem.parent_path());
    models::save_checkpoint(stem, model, sidecar.value("extra", json::object()));
    if (io::read_file(e.path() / "checkpoint.bin") != io::read_file(fs::path(stem.string() + ".bin")))
      problems.push_back(e.path().filename().string() + " checkpoint.bin differs after reload");
    if (io::read_text(e.path() / "checkpoint.json") != io::read_text(fs::path(stem.string() + ".json")))
      problems.push_back(e.path().filename().string() + " checkpoint.json differs after reload");
    ++checkpoints;
  }

  auto verify = [&](const fs::path& dir, const std::string& tag) {
    return run_cli(env, "verify '" + dir.string() + "'", root, scratch / ("verify-" + tag + ".log"));
  };
  const bool fresh_ok = verify(data, "dataset") == 0 && verify(sweep, "sweep") == 0 && verify(report, "report") == 0;

  // Corruption 1: a split index duplicated across partitions.
  const auto bad_split = scratch / "bad-split";
  fs::copy(data, bad_split, fs::copy_options::recursive);
  {
    auto m = json::parse(io::read_text(bad_split / "manifest.json"));
    auto& sp = m.at("splits").at("medium");
    sp.at("target").at("test")[0] = sp.at("source").at("train")[0];
    io::write_text_atomic(bad_split / "manifest.json", m.dump(2));
  }
  // Corruption 2: a truncated sample file.
  const auto bad_sample = scratch / "bad-sample";
  fs::copy(data, bad_sample, fs::copy_options::recursive);
  {
    const auto p = bad_sample / manifest.samples.front().file;
    auto bytes = io::read_file(p);
    bytes.resize(bytes.size() / 2);
    io::write_file_atomic(p, bytes);
  }
  // Corruption 3: non-finite bytes written into a checkpoint.
  const auto bad_ckpt = scratch / "bad-checkpoint";
  fs::path src_run;
  for (const auto& e : fs::directory_iterator(sweep))
    if (fs::exists(e.path() / "checkpoint.bin") && (src_run.empty() || e.path() < src_run)) src_run = e.path();
  fs::copy(src_run, bad_ckpt, fs::copy_options::recursive);
  {
    auto bytes = io::read_file(bad_ckpt / "checkpoint.bin");
    const std::size_t at = bytes.size() - 8;
    const double nan = std::nan("");
    std::memcpy(bytes.data() + at, &nan, sizeof nan);
    io::write_file_atomic(bad_ckpt / "checkpoint.bin", bytes);
  }
  const bool c1 = verify(bad_split, "bad-split") != 0;
  const bool c2 = verify(bad_sample, "bad-sample") != 0;
  const bool c3 = verify(bad_ckpt, "bad-checkpoint") != 0;

  Outcome o;
  o.pass = problems.empty() && samples_checked > 0 && checkpoints > 0 && fresh_ok && c1 && c2 && c3;
  o.detail = std::to_string(samples_checked) + " samples and " + std::to_string(checkpoints) +
             " checkpoints round-trip byte-identically: " + (problems.empty() ? "yes" : problems.front()) +
             "; verify on fresh outputs: " + (fresh_ok ? "pass" : "FAIL") + "; corruptions detected (split, sample, " +
             "checkpoint): " + (c1 ? "yes" : "no") + "/" + (c2 ? "yes" : "no") + "/" + (c3 ? "yes" : "no");
  return o;
}

}  // namespace

int main(int argc, char** argv) {
  Env env;
  std::set<int> only;
  for (int i = 1; i < argc; ++i) {
    const std::string a = argv[i];
    if (a == "--cli" && i + 1 < argc) env.cli = argv[++i];
    else if (a == "--configs" && i + 1 < argc) env.configs = argv[++i];
    else if (a == "--work" && i + 1 < argc) env.work = argv[++i];
    else if (a == "--only" && i + 1 < argc) {
      std::stringstream ss(argv[++i]);
      std::string tok;
      while (std::getline(ss, tok, ',')) only.insert(std::stoi(tok));
    } else {
      std::cerr << "usage: acceptance --cli PATH --configs DIR --work DIR [--only 1,2,...]\n";
      return 2;
    }
  }
  if (env.cli.empty() || env.configs.empty() || env.work.empty()) {
    std::cerr << "usage: acceptance --cli PATH --configs DIR --work DIR [--only 1,2,...]\n";
    return 2;
  }
  fs::create_directories(env.work);
  auto wanted = [&](int n) { return only.empty() || only.count(n) > 0; };

  std::map<int, Outcome> results;
  std::map<int, std::pair<double, double>> timing;  // criterion -> (wall, cpu) seconds
  auto timed = [&](int n, const std::function<Outcome()>& fn) {
    Clock clk;
    try {
      results[n] = fn();
    } catch (const std::exception& e) {
      results[n] = {false, std::string("exception: ") + e.what()};
    }
    timing[n] = {clk.wall(), clk.cpu()};
    const auto& r = results[n];
    std::cout << (r.pass ? "PASS" : "FAIL") << " criterion " << n << ": " << r.detail << " [wall "
              << fmt(timing[n].first, 3) << " s, cpu " << fmt(timing[n].second, 3) << " s]\n"
              << std::flush;
  };

  if (wanted(1)) timed(1, criterion_gradients);
  if (wanted(2)) timed(2, criterion_divergences);
  if (wanted(3)) timed(3, criterion_solvers);
  if (wanted(4)) timed(4, criterion_iwv);

  BenchState st;
  fs::path scaling_report;
  if (wanted(5) || wanted(6) || wanted(7) || wanted(8)) {
    double cpu = 0, wall = 0;
    prepare_main_bench(env, st, cpu, wall);
    if (wanted(7)) timed(7, [&] { return criterion_end_to_end(env, st, cpu, wall); });
    if (wanted(6)) timed(6, [&] { return criterion_scaling(env, st, scaling_report); });
    if (wanted(5)) {
      timed(5, [&] {
        std::vector<fs::path> reports = {st.root1 / "reports" / "desk-plate-medium"};
        if (!scaling_report.empty()) reports.push_back(scaling_report);
        return criterion_dominance(st, reports);
      });
    }
    if (wanted(8)) timed(8, [&] { return criterion_formats(env, st); });
  }

  std::cout << "\nacceptance summary\n";
  int failed = 0;
  for (const auto& [n, r] : results) {
    std::cout << (r.pass ? "PASS" : "FAIL") << " criterion " << n << " [wall " << fmt(timing[n].first, 3)
              << " s, cpu " << fmt(timing[n].second, 3) << " s]\n";
    failed += r.pass ? 0 : 1;
  }
  std::cout << (failed == 0 ? "all criteria passed\n" : std::to_string(failed) + " criterion(s) failed\n");
  return failed == 0 ? 0 : 1;
}
