#pragma once

#include <array>
#include <cstdint>
#include <vector>

namespace pnph {

// Coordinates and integer lattice indices. Only the first `dim` entries are
// meaningful; the toolkit supports dim = 1 and dim = 2.
using Point = std::array<double, 2>;
using Index = std::array<std::int64_t, 2>;

// Axis-aligned box given by its two corners.
struct Box {
  Point lower{0.0, 0.0};
  Point upper{0.0, 0.0};

  double extent(int axis) const { return upper[axis] - lower[axis]; }
  double volume(int dim) const;
  bool contains(const Point& x, int dim, double tol = 0.0) const;
};

// The unit cell (0,1)^dim with a single axis-aligned box inclusion strictly
// inside it. `clearance` is the declared minimum distance from the inclusion
// to the cell boundary; construction rejects inclusions that violate it.
struct CellGeometry {
  int dim = 2;
  Box inclusion;
  double clearance = 0.0;

  CellGeometry(int dim_, Box inclusion_, double clearance_);

  // Actual distance from the closed inclusion to the cell boundary.
  double boundary_distance() const;
};

// Measures of the unit cell: inclusion volume |w|, interface measure |dw|
// (counting measure in 1D, perimeter in 2D), pore volume |Y \ w|.
struct CellMeasures {
  double vol_inclusion;
  double surf_inclusion;
  double vol_pore;
};

CellMeasures measures(const CellGeometry& cell);

// The reference domain paved by scaled copies of the unit cell. Only whole
// cells whose inclusion keeps a distance >= boundary_gap * epsilon from the
// domain boundary are retained.
struct PavedDomain {
  CellGeometry cell;
  double epsilon;
  Box domain;
  std::vector<Index> retained_cells;
  double boundary_gap;

  std::size_t cell_count() const { return retained_cells.size(); }
};

// Splits x into the integer cell index floor(x/epsilon) and the local cell
// coordinate in [0,1)^dim. Lattice points map to local coordinate 0.
struct Decomposition {
  Index index;
  Point local;
};

Decomposition decompose_coordinates(const Point& x, double epsilon, int dim);

// Enumerates all whole cells inside `domain` whose inclusion respects the
// boundary gap. Throws EmptyPaving when nothing is retained.
PavedDomain build_paving(const Box& domain, double epsilon, const CellGeometry& cell,
                         double boundary_gap);

}  // namespace pnph
