#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

namespace meshshift::datagen {

/// One solved simulation instance. All arrays are row-major.
struct MeshSample {
  std::string sample_id;
  std::size_t dim = 2;
  std::vector<double> coords;          // N x dim
  std::size_t cell_size = 3;           // 2 for segments, 3 for triangles
  std::vector<std::uint64_t> cells;    // C x cell_size
  std::vector<double> params;          // P
  std::size_t num_fields = 0;
  std::vector<double> fields;          // N x F

  std::size_t num_nodes() const noexcept { return dim ? coords.size() / dim : 0; }
  std::size_t num_cells() const noexcept { return cell_size ? cells.size() / cell_size : 0; }
  double coord(std::size_t node, std::size_t axis) const { return coords[node * dim + axis]; }
  double field(std::size_t node, std::size_t f) const { return fields[node * num_fields + f]; }
  bool has_labels() const noexcept { return !fields.empty(); }

  /// Checks array lengths, cell indices, connectivity and finiteness of fields.
  void validate() const;
  bool connected() const;

  bool operator==(const MeshSample&) const = default;
};

}  // namespace meshshift::datagen
