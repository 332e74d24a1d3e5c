#pragma once

#include <array>
#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "pnph/geometry.hpp"

namespace pnph {

enum class Region : int { solid = 0, pore = 1 };

const char* region_name(Region r);

// Multilinear element: segment (1D) or axis-aligned quadrilateral (2D).
// Local node order is tensorized: (0), (1) in 1D; (0,0), (1,0), (0,1), (1,1)
// in 2D.
struct MeshElement {
  std::array<int, 4> dofs{-1, -1, -1, -1};
  Region region = Region::pore;
};

// One geometric interface facet with its two one-sided DOF lists. The plus
// side lives in the pore region, the minus side in the solid region, and the
// normal points from solid to pore. In a non-broken mesh both sides list the
// same DOFs. 1D facets are points (one DOF per side, measure 1); 2D facets
// are lattice edges (two DOFs per side, measure h).
struct FacetPair {
  std::array<int, 2> plus_dofs{-1, -1};
  std::array<int, 2> minus_dofs{-1, -1};
  Point normal{0.0, 0.0};
  double measure = 0.0;
  int plus_element = -1;   // adjacent pore element
  int minus_element = -1;  // adjacent solid element
};

// Structured mesh whose interface DOFs are duplicated so fields may jump
// across the inclusion boundaries. Immutable after construction.
struct BrokenMesh {
  int dim = 2;
  double h = 0.0;             // lattice spacing, identical along both axes
  Box bounds;                 // meshed box
  std::array<int, 2> cells{}; // element counts per axis
  std::vector<Point> dof_coords;
  std::vector<MeshElement> elements;
  std::vector<FacetPair> interface_facets;
  std::vector<int> dirichlet_dofs;                  // sorted
  std::vector<std::pair<int, int>> periodic_pairs;  // (slave, master), slave > master lattice face
  int dof_count = 0;
  int lattice_dofs = 0;  // DOFs 0..lattice_dofs-1 are grid vertices; the rest are duplicates

  int dofs_per_element() const { return dim == 1 ? 2 : 4; }
  int dofs_per_facet_side() const { return dim == 1 ? 1 : 2; }
  std::size_t element_count() const { return elements.size(); }

  Point element_origin(const MeshElement& e) const { return dof_coords[e.dofs[0]]; }

  // Element index from lattice position, row-major with x fastest.
  int element_at(int ix, int iy) const { return ix + cells[0] * iy; }

  // Locates the element containing x; `hint` disambiguates points lying on
  // the interface (and is ignored elsewhere). Throws OutOfDomain.
  int locate_element(const Point& x, Region hint = Region::pore) const;

  // Region of the unique phase a DOF belongs to.
  std::vector<Region> dof_regions() const;
};

// Nodal field over a broken mesh; evaluable anywhere, with one-sided traces
// on the interface.
struct BrokenField {
  std::shared_ptr<const BrokenMesh> mesh;
  Eigen::VectorXd values;

  double evaluate(const Point& x, Region hint = Region::pore) const;
};

struct JumpTrace {
  double plus;
  double minus;
  double jump;  // plus - minus
};

// One-sided traces and jump of a field at a point of an interface facet.
JumpTrace jump_trace(const BrokenField& field, const FacetPair& facet, const Point& x);

// Meshes the unit cell at spacing h (1/h must be an integer and the inclusion
// corners must sit on the lattice). With `broken`, interface DOFs are
// duplicated; with `periodic`, opposite-face DOFs are paired master/slave.
BrokenMesh build_cell_mesh(const CellGeometry& cell, double h, bool periodic, bool broken);

// Meshes the paved domain at per-cell spacing h_cell by replicating the cell
// discretization into every retained cell; continuous across cell boundaries,
// broken only on inclusion interfaces. Dirichlet DOFs cover the whole domain
// boundary.
BrokenMesh build_domain_mesh(const PavedDomain& paved, double h_cell);

// Continuous single-region mesh of a box (used for the macroscopic problem).
BrokenMesh build_box_mesh(const Box& box, int cells_per_axis);

// Plain-text mesh dump; the round trip write -> read -> write is bit-exact.
void write_mesh(const BrokenMesh& mesh, std::ostream& out);
BrokenMesh read_mesh(std::istream& in);
void write_mesh_file(const BrokenMesh& mesh, const std::string& path);
BrokenMesh read_mesh_file(const std::string& path);

}  // namespace pnph
