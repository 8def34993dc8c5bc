#pragma once

#include <cstddef>

#include "fracbench/grid.hpp"

namespace fracbench::detail {

// Visits every cell for which `inside(idx)` holds and at least one face
// neighbour is outside (or off-grid). Planar grids ignore the z direction.
// `emit(i, j, k, idx)` is called in raster order.
template <typename Inside, typename Emit>
void scan_boundary(const Grid3& grid, bool planar, Inside&& inside, Emit&& emit) {
  const int nx = grid.dims[0], ny = grid.dims[1], nz = grid.dims[2];
  const std::size_t sx = 1, sy = static_cast<std::size_t>(nx), sz = sy * static_cast<std::size_t>(ny);
  for (int k = 0; k < nz; ++k) {
    for (int j = 0; j < ny; ++j) {
      std::size_t idx = grid.index(0, j, k);
      for (int i = 0; i < nx; ++i, ++idx) {
        if (!inside(idx)) continue;
        bool boundary = i == 0 || i == nx - 1 || j == 0 || j == ny - 1 || !inside(idx - sx) ||
                        !inside(idx + sx) || !inside(idx - sy) || !inside(idx + sy);
        if (!boundary && !planar) {
          boundary = k == 0 || k == nz - 1 || !inside(idx - sz) || !inside(idx + sz);
        }
        if (boundary) emit(i, j, k, idx);
      }
    }
  }
}

}  // namespace fracbench::detail
