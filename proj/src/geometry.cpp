#include "pnph/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "pnph/errors.hpp"

namespace pnph {

double Box::volume(int dim) const {
  double v = 1.0;
  for (int a = 0; a < dim; ++a) v *= extent(a);
  return v;
}

bool Box::contains(const Point& x, int dim, double tol) const {
  for (int a = 0; a < dim; ++a) {
    if (x[a] < lower[a] - tol || x[a] > upper[a] + tol) return false;
  }
  return true;
}

CellGeometry::CellGeometry(int dim_, Box inclusion_, double clearance_)
    : dim(dim_), inclusion(inclusion_), clearance(clearance_) {
  if (dim != 1 && dim != 2) throw Error("CellGeometry: dim must be 1 or 2");
  if (clearance <= 0.0) throw Error("CellGeometry: clearance must be positive");
  for (int a = 0; a < dim; ++a) {
    if (!(inclusion.lower[a] < inclusion.upper[a]))
      throw Error("CellGeometry: inclusion is degenerate along an axis");
    if (inclusion.lower[a] < clearance || 1.0 - inclusion.upper[a] < clearance)
      throw Error("CellGeometry: inclusion violates the declared clearance to the cell boundary");
  }
  const double vol = inclusion.volume(dim);
  if (!(vol > 0.0 && vol < 1.0))
    throw Error("CellGeometry: inclusion volume must lie strictly between 0 and 1");
}

double CellGeometry::boundary_distance() const {
  double d = std::numeric_limits<double>::infinity();
  for (int a = 0; a < dim; ++a) {
    d = std::min(d, inclusion.lower[a]);
    d = std::min(d, 1.0 - inclusion.upper[a]);
  }
  return d;
}

CellMeasures measures(const CellGeometry& cell) {
  CellMeasures m{};
  m.vol_inclusion = cell.inclusion.volume(cell.dim);
  m.vol_pore = 1.0 - m.vol_inclusion;
  if (cell.dim == 1) {
    m.surf_inclusion = 2.0;  // counting measure: two interface points
  } else {
    m.surf_inclusion = 2.0 * (cell.inclusion.extent(0) + cell.inclusion.extent(1));
  }
  return m;
}

Decomposition decompose_coordinates(const Point& x, double epsilon, int dim) {
  Decomposition d{};
  for (int a = 0; a < dim; ++a) {
    const double s = x[a] / epsilon;
    const double fl = std::floor(s);
    d.index[a] = static_cast<std::int64_t>(fl);
    d.local[a] = s - fl;
    if (d.local[a] >= 1.0) {  // guard against floor roundoff at lattice points
      d.local[a] -= 1.0;
      d.index[a] += 1;
    }
  }
  return d;
}

PavedDomain build_paving(const Box& domain, double epsilon, const CellGeometry& cell,
                         double boundary_gap) {
  if (!(epsilon > 0.0)) throw Error("build_paving: epsilon must be positive");
  if (boundary_gap < 0.0) throw Error("build_paving: boundary_gap must be nonnegative");
  for (int a = 0; a < cell.dim; ++a) {
    if (!(domain.extent(a) > 0.0)) throw Error("build_paving: degenerate domain");
  }

  const double tol = 1e-12 * std::max({1.0, std::abs(domain.extent(0)),
                                       cell.dim > 1 ? std::abs(domain.extent(1)) : 0.0});

  PavedDomain paved{cell, epsilon, domain, {}, boundary_gap};

  // Scan the integer lattice range covering the domain.
  Index lo{}, hi{};
  for (int a = 0; a < cell.dim; ++a) {
    lo[a] = static_cast<std::int64_t>(std::floor(domain.lower[a] / epsilon)) - 1;
    hi[a] = static_cast<std::int64_t>(std::ceil(domain.upper[a] / epsilon)) + 1;
  }
  const std::int64_t j_lo = cell.dim > 1 ? lo[1] : 0;
  const std::int64_t j_hi = cell.dim > 1 ? hi[1] : 0;

  for (std::int64_t j = j_lo; j <= j_hi; ++j) {
    for (std::int64_t i = lo[0]; i <= hi[0]; ++i) {
      const Index p{i, j};
      bool keep = true;
      for (int a = 0; a < cell.dim; ++a) {
        const double cell_lo = epsilon * static_cast<double>(p[a]);
        const double cell_hi = cell_lo + epsilon;
        // whole-cell tiles only: cells cut by the domain boundary are dropped
        if (cell_lo < domain.lower[a] - tol || cell_hi > domain.upper[a] + tol) {
          keep = false;
          break;
        }
        // the scaled inclusion must keep the gap distance from the domain boundary
        const double incl_lo = cell_lo + epsilon * cell.inclusion.lower[a];
        const double incl_hi = cell_lo + epsilon * cell.inclusion.upper[a];
        if (incl_lo - domain.lower[a] < boundary_gap * epsilon - tol ||
            domain.upper[a] - incl_hi < boundary_gap * epsilon - tol) {
          keep = false;
          break;
        }
      }
      if (keep) paved.retained_cells.push_back(p);
    }
  }

  if (paved.retained_cells.empty())
    throw EmptyPaving("build_paving: no whole cell satisfies the gap rule; reduce epsilon");
  return paved;
}

}  // namespace pnph
