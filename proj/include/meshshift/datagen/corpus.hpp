#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "meshshift/datagen/mesh_sample.hpp"
#include "meshshift/datagen/task.hpp"

namespace meshshift::datagen {

struct Corpus {
  TaskSpec task;
  std::uint64_t seed = 0;
  std::vector<MeshSample> samples;

  std::vector<double> dominant_values() const;
};

/// Stratified uniform draws: per parameter, one value in each of n equal-width
/// strata, strata order shuffled independently per parameter. Row i is sample i.
std::vector<std::vector<double>> stratified_params(const TaskSpec& task, std::size_t n, std::uint64_t seed);

/// Solves one sample of the task. `seed` drives mesh randomization where the task has any.
MeshSample solve_task(const TaskSpec& task, const std::vector<double>& params, std::uint64_t seed);

std::string sample_id(std::size_t index);
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

/// Generates n samples in parallel over `workers` threads; output order and
/// content depend only on (task, n, seed).
Corpus build_corpus(const TaskSpec& task, std::size_t n, std::uint64_t seed, std::size_t workers = 1);

}  // namespace meshshift::datagen
