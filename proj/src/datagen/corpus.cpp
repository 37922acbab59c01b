#include "meshshift/datagen/corpus.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <exception>
#include <mutex>
#include <numeric>
#include <random>
#include <sstream>
#include <thread>

#include "meshshift/common/errors.hpp"
#include "meshshift/datagen/solvers.hpp"

namespace meshshift::datagen {

std::vector<double> Corpus::dominant_values() const {
  const auto k = task.dominant_index();
  std::vector<double> out;
  out.reserve(samples.size());
  for (const auto& s : samples) out.push_back(s.params.at(k));
  return out;
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  // splitmix64 finalizer over the combined value.
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

std::string sample_id(std::size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "s%06zu", index);
  return buf;
}

std::vector<std::vector<double>> stratified_params(const TaskSpec& task, std::size_t n, std::uint64_t seed) {
  if (n == 0) throw ConfigError("n_samples must be at least 1");
  task.validate();
  std::mt19937_64 rng(derive_seed(seed, 0));
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<std::vector<double>> out(n, std::vector<double>(task.params.size()));
  for (std::size_t p = 0; p < task.params.size(); ++p) {
    std::vector<std::size_t> strata(n);
    std::iota(strata.begin(), strata.end(), 0);
    std::shuffle(strata.begin(), strata.end(), rng);
    const auto& d = task.params[p];
    const double width = (d.max - d.min) / static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) {
      const double v = d.min + (static_cast<double>(strata[i]) + unit(rng)) * width;
      out[i][p] = std::clamp(v, d.min, d.max);
    }
  }
  return out;
}

MeshSample solve_task(const TaskSpec& task, const std::vector<double>& params, std::uint64_t seed) {
  if (!task.in_range(params)) throw ConfigError("parameters outside the ranges of task '" + task.name + "'");
  if (task.name == kPlateHeat) {
    return solve_plate_heat({params[0], params[1], params[2], params[3]}, task.resolution, seed);
  }
  if (task.name == kRodBending) {
    return solve_rod_bending({params[0], params[1], params[2], params[3]}, task.resolution);
  }
  throw ConfigError("unknown task '" + task.name + "'");
}

namespace {

std::string describe(const TaskSpec& task, const std::vector<double>& params) {
  std::ostringstream os;
  os.precision(17);
  for (std::size_t i = 0; i < params.size(); ++i) {
    os << (i ? ", " : "") << task.params[i].name << '=' << params[i];
  }
  return os.str();
}

}  // namespace

Corpus build_corpus(const TaskSpec& task, std::size_t n, std::uint64_t seed, std::size_t workers) {
  const auto draws = stratified_params(task, n, seed);
  Corpus corpus{task, seed, std::vector<MeshSample>(n)};
  std::atomic<std::size_t> next{0};
  std::mutex err_mu;
  std::exception_ptr first_error;
  std::size_t first_error_index = n;

  auto work = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        auto s = solve_task(task, draws[i], derive_seed(seed, i + 1));
        s.sample_id = sample_id(i);
        corpus.samples[i] = std::move(s);
      } catch (const std::exception& e) {
        std::lock_guard lock(err_mu);
        if (i < first_error_index) {
          first_error_index = i;
          first_error = std::make_exception_ptr(
              SolverError("sample " + sample_id(i) + " [" + describe(task, draws[i]) + "]: " + e.what()));
        }
      }
    }
  };
  const std::size_t nthreads = std::clamp<std::size_t>(workers, 1, n);
  std::vector<std::thread> pool;
  for (std::size_t t = 1; t < nthreads; ++t) pool.emplace_back(work);
  work();
  for (auto& t : pool) t.join();
  if (first_error) std::rethrow_exception(first_error);
  return corpus;
}

}  // namespace meshshift::datagen
