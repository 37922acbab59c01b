#pragma once

#include <cstddef>
#include <cstdint>

#include "meshshift/datagen/mesh_sample.hpp"

namespace meshshift::datagen {

struct PlateHeatParams {
  double t_left = 300.0;             // K
  double t_right = 300.0;            // K
  double conductivity_ratio = 1.0;   // conductivity of the lower half relative to the upper half
  double notch_size = 0.2;           // side of the square notch cut from the top edge, relative to the plate
};

/// Steady heat conduction on a notched unit plate with a two-region conductivity.
/// Fields: temperature, flux_x, flux_y.
MeshSample solve_plate_heat(const PlateHeatParams& p, std::size_t resolution, std::uint64_t seed);

/// Triangulated notched plate without a solution; exposed for mesh tests.
MeshSample plate_mesh(double notch_size, std::size_t resolution, std::uint64_t seed);

/// Relative residual max|A u - b| / max|b| of the stored temperature against a
/// fresh assembly of the sample's own mesh and parameters.
double plate_heat_residual(const MeshSample& s);

/// True when no temperature leaves [min(t_left, t_right), max(t_left, t_right)]
/// by more than a rounding tolerance.
bool plate_heat_max_principle(const MeshSample& s);

struct RodParams {
  double length = 2.0;      // m
  double thickness = 0.1;   // m, square cross-section
  double load = 500.0;      // N, tip point load
  double modulus = 2.0e11;  // Pa
};

/// Cantilever clamped at x = 0 with a tip load. Coordinates are x / length.
/// Fields: deflection (m), stress (Pa, bending stress at the outer fibre).
MeshSample solve_rod_bending(const RodParams& p, std::size_t nodes = 200);

double rod_second_moment(double thickness);
double rod_tip_deflection_closed_form(const RodParams& p);

}  // namespace meshshift::datagen
