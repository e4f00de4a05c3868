#pragma once

#include <stdexcept>

namespace smcda::sw {

/// Uniform finite-volume grid with one ghost-cell layer.  Interior (physical)
/// nodes are indexed i in 1..nx, j in 1..ny and sit at
/// ((i-1)*dx, (j-1)*dy); ghost cells occupy i = 0, nx+1 and j = 0, ny+1.
/// State vectors hold the interior only, blocks [eta | u | v], each block
/// laid out y-fastest (column-major over the ny x nx field matrix).
struct SwGrid {
  int nx = 0, ny = 0;
  double dx = 0.0, dy = 0.0;

  int full_x() const { return nx + 2; }
  int full_y() const { return ny + 2; }
  int field_size() const { return nx * ny; }
  int state_dim() const { return 3 * nx * ny; }

  double x_of(int i) const { return (i - 1) * dx; }
  double y_of(int j) const { return (j - 1) * dy; }
  /// Hull of the physical nodes; drifters are clamped to this box.
  double max_x() const { return (nx - 1) * dx; }
  double max_y() const { return (ny - 1) * dy; }

  /// Flat offset of interior node (i, j) within one field block (0-based).
  int flat(int i, int j) const { return (i - 1) * ny + (j - 1); }

  void validate() const {
    if (nx < 2 || ny < 1) throw std::invalid_argument("SwGrid: need nx >= 2, ny >= 1");
    if (!(dx > 0) || !(dy > 0)) throw std::invalid_argument("SwGrid: cell sizes must be positive");
  }
};

}  // namespace smcda::sw
