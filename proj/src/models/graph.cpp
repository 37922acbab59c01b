#include "meshshift/models/graph.hpp"

#include <algorithm>
#include <cmath>
#include <utility>

namespace meshshift::models {

Tensor sinusoidal(const Tensor& u, const SinusoidalConfig& cfg) {
  if (cfg.frequencies < 2) throw ConfigError("sinusoidal encoding needs at least 2 frequencies");
  const std::size_t r = u.rows(), d = u.cols(), k = cfg.frequencies;
  std::vector<double> omega(k);
  for (std::size_t i = 0; i < k; ++i) {
    omega[i] = std::pow(cfg.base, static_cast<double>(i) / static_cast<double>(k - 1));
  }
  std::vector<double> out(r * d * 2 * k);
  std::size_t o = 0;
  for (std::size_t i = 0; i < r; ++i) {
    for (std::size_t j = 0; j < d; ++j) {
      const double x = u(i, j);
      for (std::size_t f = 0; f < k; ++f) {
        out[o++] = std::sin(omega[f] * x);
        out[o++] = std::cos(omega[f] * x);
      }
    }
  }
  return Tensor::matrix(r, d * 2 * k, std::move(out));
}

std::vector<std::size_t> AdjacencyIndex::in_degree() const {
  std::vector<std::size_t> deg(num_nodes, 0);
  for (auto d : dst) ++deg[d];
  return deg;
}

namespace {

AdjacencyIndex from_pairs(std::size_t n, std::vector<std::pair<std::uint32_t, std::uint32_t>> pairs) {
  for (std::uint32_t i = 0; i < n; ++i) pairs.emplace_back(i, i);
  std::sort(pairs.begin(), pairs.end());
  pairs.erase(std::unique(pairs.begin(), pairs.end()), pairs.end());
  AdjacencyIndex a;
  a.num_nodes = n;
  a.src.reserve(pairs.size());
  a.dst.reserve(pairs.size());
  for (auto [d, s] : pairs) {
    a.dst.push_back(d);
    a.src.push_back(s);
  }
  return a;
}

}  // namespace

AdjacencyIndex build_adjacency(const datagen::MeshSample& s) {
  const std::size_t n = s.num_nodes();
  if (n >= std::numeric_limits<std::uint32_t>::max()) throw ShapeError("mesh too large for 32-bit node ids");
  std::vector<std::pair<std::uint32_t, std::uint32_t>> pairs;  // (dst, src)
  pairs.reserve(s.num_cells() * s.cell_size * 2);
  for (std::size_t c = 0; c < s.num_cells(); ++c) {
    for (std::size_t a = 0; a < s.cell_size; ++a) {
      for (std::size_t b = a + 1; b < s.cell_size; ++b) {
        const auto u = static_cast<std::uint32_t>(s.cells[c * s.cell_size + a]);
        const auto v = static_cast<std::uint32_t>(s.cells[c * s.cell_size + b]);
        if (u >= n || v >= n) throw ShapeError("cell index out of range while building adjacency");
        pairs.emplace_back(u, v);
        pairs.emplace_back(v, u);
      }
    }
  }
  return from_pairs(n, std::move(pairs));
}

AdjacencyIndex self_loops(std::size_t num_nodes) { return from_pairs(num_nodes, {}); }

GraphInput make_graph_input(const datagen::MeshSample& s, const std::vector<double>& unit_params,
                            const SinusoidalConfig& enc) {
  if (s.num_nodes() == 0) throw EmptyInputError("sample " + s.sample_id + " has no nodes");
  GraphInput g;
  g.node_features = sinusoidal(Tensor::matrix(s.num_nodes(), s.dim, s.coords), enc);
  g.cond_features = sinusoidal(Tensor::matrix(1, unit_params.size(), unit_params), enc);
  g.adjacency = build_adjacency(s);
  return g;
}

GraphBatch make_batch(std::span<const GraphInput* const> graphs) {
  if (graphs.empty()) throw EmptyInputError("empty graph batch");
  GraphBatch b;
  b.num_graphs = graphs.size();
  const std::size_t fn = graphs[0]->node_features.cols(), fc = graphs[0]->cond_features.cols();
  std::size_t edges = 0;
  b.node_offsets.push_back(0);
  for (const auto* g : graphs) {
    if (g->num_nodes() == 0) throw EmptyInputError("graph with no nodes in batch");
    if (g->node_features.cols() != fn || g->cond_features.cols() != fc) {
      throw ShapeError("graphs in a batch must share feature widths");
    }
    b.num_nodes += g->num_nodes();
    edges += g->adjacency.num_edges();
    b.node_offsets.push_back(b.num_nodes);
  }
  std::vector<double> nf, cf;
  nf.reserve(b.num_nodes * fn);
  cf.reserve(b.num_graphs * fc);
  tensor::Index ng, src, dst;
  ng.reserve(b.num_nodes);
  src.reserve(edges);
  dst.reserve(edges);
  for (std::size_t i = 0; i < graphs.size(); ++i) {
    const auto* g = graphs[i];
    const auto off = static_cast<std::uint32_t>(b.node_offsets[i]);
    nf.insert(nf.end(), g->node_features.data().begin(), g->node_features.data().end());
    cf.insert(cf.end(), g->cond_features.data().begin(), g->cond_features.data().end());
    ng.insert(ng.end(), g->num_nodes(), static_cast<std::uint32_t>(i));
    for (std::size_t e = 0; e < g->adjacency.num_edges(); ++e) {
      src.push_back(g->adjacency.src[e] + off);
      dst.push_back(g->adjacency.dst[e] + off);
    }
  }
  b.node_features = Tensor::matrix(b.num_nodes, fn, std::move(nf));
  b.cond_features = Tensor::matrix(b.num_graphs, fc, std::move(cf));
  b.node_graph = tensor::make_index(std::move(ng));
  b.edge_src = tensor::make_index(std::move(src));
  b.edge_dst = tensor::make_index(std::move(dst));
  return b;
}

GraphBatch make_batch(const GraphInput& g) {
  const GraphInput* one[] = {&g};
  return make_batch(std::span<const GraphInput* const>(one));
}

}  // namespace meshshift::models
