#include "meshshift/datagen/mesh_sample.hpp"

#include <cmath>
#include <vector>

#include "meshshift/common/errors.hpp"

namespace meshshift::datagen {

void MeshSample::validate() const {
  if (dim == 0 || coords.size() % dim != 0) throw ShapeError("sample " + sample_id + ": coords not a multiple of dim");
  const std::size_t n = num_nodes();
  if (n == 0) throw EmptyInputError("sample " + sample_id + " has no nodes");
  if (cell_size == 0 || cells.size() % cell_size != 0) {
    throw ShapeError("sample " + sample_id + ": cells not a multiple of cell size");
  }
  for (auto c : cells) {
    if (c >= n) throw ShapeError("sample " + sample_id + ": cell index " + std::to_string(c) + " out of range");
  }
  for (double x : coords) {
    if (!std::isfinite(x)) throw NumericError("sample " + sample_id + ": non-finite coordinate");
  }
  if (has_labels()) {
    if (fields.size() != n * num_fields) throw ShapeError("sample " + sample_id + ": field array has wrong length");
    for (double x : fields) {
      if (!std::isfinite(x)) throw NumericError("sample " + sample_id + ": non-finite field value");
    }
  }
  if (!connected()) throw ShapeError("sample " + sample_id + ": mesh is not connected");
}

bool MeshSample::connected() const {
  const std::size_t n = num_nodes();
  if (n <= 1) return true;
  std::vector<std::vector<std::uint64_t>> nbr(n);
  for (std::size_t c = 0; c < num_cells(); ++c) {
    for (std::size_t a = 0; a < cell_size; ++a) {
      for (std::size_t b = 0; b < cell_size; ++b) {
        if (a != b) nbr[cells[c * cell_size + a]].push_back(cells[c * cell_size + b]);
      }
    }
  }
  std::vector<char> seen(n, 0);
  std::vector<std::uint64_t> stack = {0};
  seen[0] = 1;
  std::size_t count = 1;
  while (!stack.empty()) {
    auto v = stack.back();
    stack.pop_back();
    for (auto w : nbr[v]) {
      if (!seen[w]) {
        seen[w] = 1;
        ++count;
        stack.push_back(w);
      }
    }
  }
  return count == n;
}

}  // namespace meshshift::datagen
