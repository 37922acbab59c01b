#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include <algorithm>
#include <array>
#include <cmath>
#include <random>
#include <vector>

#include "meshshift/common/errors.hpp"
#include "meshshift/datagen/solvers.hpp"

namespace meshshift::datagen {

namespace {

constexpr double kJitter = 0.2;
constexpr std::size_t kConductivityIndex = 2;

struct Element {
  std::array<std::uint64_t, 3> v;
  double area;
  std::array<double, 3> gx, gy;  // gradients of the three hat functions
};

Element element(const MeshSample& m, std::size_t c) {
  Element e;
  for (int k = 0; k < 3; ++k) e.v[k] = m.cells[3 * c + k];
  const double x0 = m.coord(e.v[0], 0), y0 = m.coord(e.v[0], 1);
  const double x1 = m.coord(e.v[1], 0), y1 = m.coord(e.v[1], 1);
  const double x2 = m.coord(e.v[2], 0), y2 = m.coord(e.v[2], 1);
  const double det = (x1 - x0) * (y2 - y0) - (x2 - x0) * (y1 - y0);
  if (!(det > 0.0)) throw NumericError("degenerate or inverted triangle " + std::to_string(c));
  e.area = 0.5 * det;
  e.gx = {(y1 - y2) / det, (y2 - y0) / det, (y0 - y1) / det};
  e.gy = {(x2 - x1) / det, (x0 - x2) / det, (x1 - x0) / det};
  return e;
}

double element_conductivity(const MeshSample& m, const Element& e, double ratio) {
  const double cy = (m.coord(e.v[0], 1) + m.coord(e.v[1], 1) + m.coord(e.v[2], 1)) / 3.0;
  return cy < 0.5 ? ratio : 1.0;
}

bool in_circumcircle(const std::array<double, 2>& a, const std::array<double, 2>& b, const std::array<double, 2>& c,
                     const std::array<double, 2>& d) {
  const double adx = a[0] - d[0], ady = a[1] - d[1];
  const double bdx = b[0] - d[0], bdy = b[1] - d[1];
  const double cdx = c[0] - d[0], cdy = c[1] - d[1];
  const double det = (adx * adx + ady * ady) * (bdx * cdy - cdx * bdy) -
                     (bdx * bdx + bdy * bdy) * (adx * cdy - cdx * ady) +
                     (cdx * cdx + cdy * cdy) * (adx * bdy - bdx * ady);
  return det > 0.0;
}

/// Full stiffness matrix of the sample's mesh for the given conductivity ratio.
Eigen::SparseMatrix<double> stiffness(const MeshSample& m, double ratio) {
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(9 * m.num_cells());
  for (std::size_t c = 0; c < m.num_cells(); ++c) {
    const auto e = element(m, c);
    const double k = element_conductivity(m, e, ratio);
    for (int a = 0; a < 3; ++a) {
      for (int b = 0; b < 3; ++b) {
        const double v = k * e.area * (e.gx[a] * e.gx[b] + e.gy[a] * e.gy[b]);
        trip.emplace_back(static_cast<int>(e.v[a]), static_cast<int>(e.v[b]), v);
      }
    }
  }
  const auto n = static_cast<int>(m.num_nodes());
  Eigen::SparseMatrix<double> a(n, n);
  a.setFromTriplets(trip.begin(), trip.end());
  for (int k = 0; k < a.outerSize(); ++k) {
    for (Eigen::SparseMatrix<double>::InnerIterator it(a, k); it; ++it) {
      if (!std::isfinite(it.value())) throw NumericError("non-finite stiffness entry");
    }
  }
  return a;
}

/// Dirichlet value per node, NaN for free nodes.
std::vector<double> dirichlet_values(const MeshSample& m, double t_left, double t_right) {
  std::vector<double> d(m.num_nodes(), std::numeric_limits<double>::quiet_NaN());
  for (std::size_t i = 0; i < m.num_nodes(); ++i) {
    const double x = m.coord(i, 0);
    if (x == 0.0) d[i] = t_left;
    else if (x == 1.0) d[i] = t_right;
  }
  return d;
}

struct Partition {
  std::vector<int> free_index;  // node -> free dof or -1
  std::vector<std::size_t> free_nodes;
};

Partition partition(const std::vector<double>& dir) {
  Partition p;
  p.free_index.assign(dir.size(), -1);
  for (std::size_t i = 0; i < dir.size(); ++i) {
    if (std::isnan(dir[i])) {
      p.free_index[i] = static_cast<int>(p.free_nodes.size());
      p.free_nodes.push_back(i);
    }
  }
  return p;
}

/// Reduced system A_ff u_f = b with b = -A_fd u_d.
void reduce(const Eigen::SparseMatrix<double>& a, const std::vector<double>& dir, const Partition& p,
            Eigen::SparseMatrix<double>& aff, Eigen::VectorXd& b) {
  const auto nf = static_cast<int>(p.free_nodes.size());
  std::vector<Eigen::Triplet<double>> trip;
  b = Eigen::VectorXd::Zero(nf);
  for (int k = 0; k < a.outerSize(); ++k) {
    for (Eigen::SparseMatrix<double>::InnerIterator it(a, k); it; ++it) {
      const int r = p.free_index[static_cast<std::size_t>(it.row())];
      if (r < 0) continue;
      const int c = p.free_index[static_cast<std::size_t>(it.col())];
      if (c >= 0) trip.emplace_back(r, c, it.value());
      else b[r] -= it.value() * dir[static_cast<std::size_t>(it.col())];
    }
  }
  aff.resize(nf, nf);
  aff.setFromTriplets(trip.begin(), trip.end());
}

}  // namespace

MeshSample plate_mesh(double notch_size, std::size_t resolution, std::uint64_t seed) {
  if (resolution < 8) throw ConfigError("plate-heat resolution must be at least 8");
  if (!(notch_size > 0.0 && notch_size <= 0.5)) throw ConfigError("notch_size must lie in (0, 0.5]");
  const std::size_t n = resolution;
  const double h = 1.0 / static_cast<double>(n);
  auto nearest = [&](double v) { return static_cast<std::size_t>(std::lround(v / h)); };

  // Grid lines snapped onto the notch walls so the notch is represented exactly.
  const double wall_l = 0.5 - notch_size / 2, wall_r = 0.5 + notch_size / 2, wall_b = 1.0 - notch_size;
  std::size_t il = std::clamp<std::size_t>(nearest(wall_l), 1, n - 2);
  std::size_t ir = std::clamp<std::size_t>(nearest(wall_r), 1, n - 1);
  if (ir <= il) ir = il + 1;
  const std::size_t jb = std::clamp<std::size_t>(nearest(wall_b), 1, n - 1);

  std::vector<double> xs(n + 1), ys(n + 1);
  for (std::size_t i = 0; i <= n; ++i) xs[i] = ys[i] = static_cast<double>(i) * h;
  xs[il] = wall_l;
  xs[ir] = wall_r;
  ys[jb] = wall_b;

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> jitter(-kJitter * h, kJitter * h);
  auto in_notch_node = [&](std::size_t i, std::size_t j) { return i > il && i < ir && j > jb; };
  auto in_notch_cell = [&](std::size_t i, std::size_t j) { return i >= il && i < ir && j >= jb; };

  std::vector<long> id((n + 1) * (n + 1), -1);
  MeshSample m;
  m.dim = 2;
  m.cell_size = 3;
  for (std::size_t j = 0; j <= n; ++j) {
    for (std::size_t i = 0; i <= n; ++i) {
      // Draw both jitters for every grid node so the stream does not depend on the notch.
      const double dx = jitter(rng), dy = jitter(rng);
      if (in_notch_node(i, j)) continue;
      const bool fix_x = i == 0 || i == n || i == il || i == ir;
      const bool fix_y = j == 0 || j == n || j == jb;
      id[j * (n + 1) + i] = static_cast<long>(m.num_nodes());
      m.coords.push_back(fix_x ? xs[i] : xs[i] + dx);
      m.coords.push_back(fix_y ? ys[j] : ys[j] + dy);
    }
  }
  auto node = [&](std::size_t i, std::size_t j) { return static_cast<std::uint64_t>(id[j * (n + 1) + i]); };
  auto pos = [&](std::uint64_t v) { return std::array<double, 2>{m.coords[2 * v], m.coords[2 * v + 1]}; };
  for (std::size_t j = 0; j < n; ++j) {
    for (std::size_t i = 0; i < n; ++i) {
      if (in_notch_cell(i, j)) continue;
      const auto a = node(i, j), b = node(i + 1, j), c = node(i + 1, j + 1), d = node(i, j + 1);
      if (!in_circumcircle(pos(a), pos(b), pos(c), pos(d))) {
        m.cells.insert(m.cells.end(), {a, b, c, a, c, d});
      } else {
        m.cells.insert(m.cells.end(), {a, b, d, b, c, d});
      }
    }
  }
  for (std::size_t c = 0; c < m.num_cells(); ++c) element(m, c);
  if (!m.connected()) throw SolverError("plate mesh is not connected");
  return m;
}

MeshSample solve_plate_heat(const PlateHeatParams& p, std::size_t resolution, std::uint64_t seed) {
  if (!(p.conductivity_ratio > 0.0) || !std::isfinite(p.t_left) || !std::isfinite(p.t_right)) {
    throw ConfigError("plate-heat parameters must be finite with positive conductivity ratio");
  }
  MeshSample m = plate_mesh(p.notch_size, resolution, seed);
  m.params = {p.t_left, p.t_right, p.conductivity_ratio, p.notch_size};

  const auto a = stiffness(m, p.conductivity_ratio);
  const auto dir = dirichlet_values(m, p.t_left, p.t_right);
  const auto part = partition(dir);
  Eigen::SparseMatrix<double> aff;
  Eigen::VectorXd b;
  reduce(a, dir, part, aff, b);

  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt(aff);
  if (ldlt.info() != Eigen::Success) throw SolverError("plate-heat stiffness factorization failed");
  const Eigen::VectorXd uf = ldlt.solve(b);
  if (ldlt.info() != Eigen::Success || !uf.allFinite()) throw SolverError("plate-heat solve failed");

  const std::size_t nn = m.num_nodes();
  std::vector<double> t(nn);
  for (std::size_t i = 0; i < nn; ++i) t[i] = part.free_index[i] >= 0 ? uf[part.free_index[i]] : dir[i];

  // Element gradients averaged to nodes with area weights.
  std::vector<double> qx(nn, 0.0), qy(nn, 0.0), w(nn, 0.0);
  for (std::size_t c = 0; c < m.num_cells(); ++c) {
    const auto e = element(m, c);
    const double k = element_conductivity(m, e, p.conductivity_ratio);
    double gx = 0.0, gy = 0.0;
    for (int v = 0; v < 3; ++v) {
      gx += t[e.v[v]] * e.gx[v];
      gy += t[e.v[v]] * e.gy[v];
    }
    for (int v = 0; v < 3; ++v) {
      qx[e.v[v]] += -k * gx * e.area;
      qy[e.v[v]] += -k * gy * e.area;
      w[e.v[v]] += e.area;
    }
  }
  m.num_fields = 3;
  m.fields.resize(nn * 3);
  for (std::size_t i = 0; i < nn; ++i) {
    m.fields[3 * i] = t[i];
    m.fields[3 * i + 1] = qx[i] / w[i];
    m.fields[3 * i + 2] = qy[i] / w[i];
  }
  for (double v : m.fields) {
    if (!std::isfinite(v)) throw NumericError("non-finite plate-heat field");
  }
  return m;
}

double plate_heat_residual(const MeshSample& s) {
  if (s.dim != 2 || s.cell_size != 3 || s.params.size() != 4 || s.num_fields != 3) {
    throw FieldSchemaError("sample is not a plate-heat sample");
  }
  const auto a = stiffness(s, s.params[kConductivityIndex]);
  const auto dir = dirichlet_values(s, s.params[0], s.params[1]);
  const auto part = partition(dir);
  Eigen::SparseMatrix<double> aff;
  Eigen::VectorXd b;
  reduce(a, dir, part, aff, b);
  Eigen::VectorXd u(static_cast<Eigen::Index>(part.free_nodes.size()));
  for (std::size_t k = 0; k < part.free_nodes.size(); ++k) u[static_cast<Eigen::Index>(k)] = s.field(part.free_nodes[k], 0);
  const double num = (aff * u - b).lpNorm<Eigen::Infinity>();
  const double den = b.lpNorm<Eigen::Infinity>();
  // Zero data (both edges at 0 K) has the trivial solution; report the absolute residual.
  return den > 0.0 ? num / den : num;
}

bool plate_heat_max_principle(const MeshSample& s) {
  const double lo = std::min(s.params[0], s.params[1]);
  const double hi = std::max(s.params[0], s.params[1]);
  const double tol = 1e-9 * std::max({1.0, std::abs(lo), std::abs(hi)});
  for (std::size_t i = 0; i < s.num_nodes(); ++i) {
    const double t = s.field(i, 0);
    if (t < lo - tol || t > hi + tol) return false;
  }
  return true;
}

}  // namespace meshshift::datagen
