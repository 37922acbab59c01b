#include <cmath>

#include "meshshift/common/errors.hpp"
#include "meshshift/datagen/solvers.hpp"

namespace meshshift::datagen {

double rod_second_moment(double thickness) { return std::pow(thickness, 4) / 12.0; }

double rod_tip_deflection_closed_form(const RodParams& p) {
  return p.load * std::pow(p.length, 3) / (3.0 * p.modulus * rod_second_moment(p.thickness));
}

MeshSample solve_rod_bending(const RodParams& p, std::size_t nodes) {
  if (!(p.length > 0.0 && p.thickness > 0.0 && p.modulus > 0.0) || !(p.load >= 0.0) || !std::isfinite(p.load)) {
    throw ConfigError("rod-bending parameters must be positive (load nonnegative) and finite");
  }
  if (nodes < 3) throw ConfigError("rod-bending needs at least 3 nodes");
  const double inertia = rod_second_moment(p.thickness);
  const double ei = p.modulus * inertia;
  const double h = p.length / static_cast<double>(nodes - 1);
  auto moment = [&](double x) { return p.load * (p.length - x); };

  // Central differences for w'' = M / EI, marched from the clamp. The clamp slope
  // condition w'(0) = 0 enters through the mirrored ghost node w(-h) = w(h).
  std::vector<double> w(nodes, 0.0);
  w[1] = 0.5 * h * h * moment(0.0) / ei;
  for (std::size_t i = 1; i + 1 < nodes; ++i) {
    const double x = static_cast<double>(i) * h;
    w[i + 1] = 2.0 * w[i] - w[i - 1] + h * h * moment(x) / ei;
  }

  MeshSample m;
  m.dim = 1;
  m.cell_size = 2;
  m.params = {p.length, p.thickness, p.load, p.modulus};
  m.num_fields = 2;
  m.coords.resize(nodes);
  m.fields.resize(2 * nodes);
  for (std::size_t i = 0; i < nodes; ++i) {
    const double x = static_cast<double>(i) * h;
    m.coords[i] = static_cast<double>(i) / static_cast<double>(nodes - 1);
    m.fields[2 * i] = w[i];
    m.fields[2 * i + 1] = moment(x) * (0.5 * p.thickness) / inertia;
  }
  for (std::size_t i = 0; i + 1 < nodes; ++i) m.cells.insert(m.cells.end(), {i, i + 1});
  for (double v : m.fields) {
    if (!std::isfinite(v)) throw NumericError("non-finite rod-bending field");
  }
  return m;
}

}  // namespace meshshift::datagen
