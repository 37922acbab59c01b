#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "meshshift/datagen/mesh_sample.hpp"
#include "meshshift/tensor/ops.hpp"

namespace meshshift::models {

using tensor::Tensor;

/// Sinusoidal ladder: omega_k = base^(k / (K - 1)), k = 0..K-1.
struct SinusoidalConfig {
  std::size_t frequencies = 8;
  double base = 1e3;

  std::size_t width_per_input() const noexcept { return 2 * frequencies; }
  bool operator==(const SinusoidalConfig&) const = default;
};

/// Rows of `u` (R x D, values expected in [0, 1]) mapped to R x (2 K D) features,
/// ordered per input as sin(omega_0 u), cos(omega_0 u), sin(omega_1 u), ...
Tensor sinusoidal(const Tensor& u, const SinusoidalConfig& cfg);

/// Directed edges of a mesh with both directions per cell edge and one self-loop
/// per node, sorted by (dst, src).
struct AdjacencyIndex {
  std::size_t num_nodes = 0;
  std::vector<std::uint32_t> src, dst;

  std::size_t num_edges() const noexcept { return src.size(); }
  std::vector<std::size_t> in_degree() const;
};

AdjacencyIndex build_adjacency(const datagen::MeshSample& s);
/// Only self-loops; turns message passing into a per-node map.
AdjacencyIndex self_loops(std::size_t num_nodes);

/// Inputs of one sample in the form the models consume. Labels are not part of it.
struct GraphInput {
  Tensor node_features;  // N x (2 K d), encoded coordinates
  Tensor cond_features;  // 1 x (2 K P), encoded unit-scaled parameters
  AdjacencyIndex adjacency;

  std::size_t num_nodes() const noexcept { return adjacency.num_nodes; }
};

GraphInput make_graph_input(const datagen::MeshSample& s, const std::vector<double>& unit_params,
                            const SinusoidalConfig& enc);

/// Disjoint union of several graphs.
struct GraphBatch {
  std::size_t num_graphs = 0;
  std::size_t num_nodes = 0;
  Tensor node_features;
  Tensor cond_features;             // num_graphs x (2 K P)
  tensor::IndexPtr node_graph;      // graph id per node
  tensor::IndexPtr edge_src, edge_dst;
  std::vector<std::size_t> node_offsets;  // num_graphs + 1
};

GraphBatch make_batch(std::span<const GraphInput* const> graphs);
GraphBatch make_batch(const GraphInput& g);

}  // namespace meshshift::models
