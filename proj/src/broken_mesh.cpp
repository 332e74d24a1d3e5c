#include "pnph/broken_mesh.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <ostream>
#include <sstream>

#include "pnph/errors.hpp"

namespace pnph {

namespace {

constexpr double kAlignTol = 1e-9;

int checked_round(double x, const char* what) {
  const double r = std::round(x);
  if (std::abs(x - r) > kAlignTol)
    throw MisalignedInclusion(std::string(what) + ": value " + std::to_string(x) +
                              " is not an integer at this resolution");
  return static_cast<int>(r);
}

// Element index bounds [ilo, ihi) of one inclusion on the lattice.
struct InclusionBox {
  std::array<int, 2> ilo{0, 0};
  std::array<int, 2> ihi{0, 0};
};

struct BuildSpec {
  int dim = 2;
  Point origin{0.0, 0.0};
  double h = 0.0;
  std::array<int, 2> cells{1, 1};
  std::vector<InclusionBox> inclusions;
  bool broken = true;
  bool periodic = false;
  bool dirichlet_boundary = false;
};

BrokenMesh build_structured(const BuildSpec& spec) {
  BrokenMesh mesh;
  mesh.dim = spec.dim;
  mesh.h = spec.h;
  mesh.cells = spec.cells;
  const int nx = spec.cells[0];
  const int ny = spec.dim > 1 ? spec.cells[1] : 0;
  mesh.bounds.lower = spec.origin;
  mesh.bounds.upper = {spec.origin[0] + nx * spec.h,
                       spec.dim > 1 ? spec.origin[1] + ny * spec.h : 0.0};

  const int vx = nx + 1;
  const int vy = spec.dim > 1 ? ny + 1 : 1;
  auto vid = [vx](int i, int j) { return i + vx * j; };

  mesh.lattice_dofs = vx * vy;
  mesh.dof_coords.reserve(mesh.lattice_dofs);
  for (int j = 0; j < vy; ++j)
    for (int i = 0; i < vx; ++i)
      mesh.dof_coords.push_back({spec.origin[0] + i * spec.h,
                                 spec.dim > 1 ? spec.origin[1] + j * spec.h : 0.0});

  // Element regions: pore by default, solid inside any inclusion box.
  const int ey = spec.dim > 1 ? ny : 1;
  std::vector<Region> elem_region(static_cast<std::size_t>(nx) * ey, Region::pore);
  for (const auto& box : spec.inclusions) {
    const int jlo = spec.dim > 1 ? box.ilo[1] : 0;
    const int jhi = spec.dim > 1 ? box.ihi[1] : 1;
    for (int j = jlo; j < jhi; ++j)
      for (int i = box.ilo[0]; i < box.ihi[0]; ++i)
        elem_region[i + static_cast<std::size_t>(nx) * j] = Region::solid;
  }

  // Duplicate every lattice vertex on an inclusion boundary: the lattice DOF
  // stays with the pore side, the appended copy serves the solid side.
  std::map<int, int> solid_copy;
  if (spec.broken) {
    for (const auto& box : spec.inclusions) {
      if (spec.dim == 1) {
        for (int i : {box.ilo[0], box.ihi[0]}) {
          const int v = vid(i, 0);
          solid_copy[v] = static_cast<int>(mesh.dof_coords.size());
          mesh.dof_coords.push_back(mesh.dof_coords[v]);
        }
      } else {
        for (int j = box.ilo[1]; j <= box.ihi[1]; ++j)
          for (int i = box.ilo[0]; i <= box.ihi[0]; ++i) {
            const bool on_boundary = i == box.ilo[0] || i == box.ihi[0] || j == box.ilo[1] ||
                                     j == box.ihi[1];
            if (!on_boundary) continue;
            const int v = vid(i, j);
            solid_copy[v] = static_cast<int>(mesh.dof_coords.size());
            mesh.dof_coords.push_back(mesh.dof_coords[v]);
          }
      }
    }
  }
  mesh.dof_count = static_cast<int>(mesh.dof_coords.size());

  auto element_dof = [&](int v, Region r) {
    if (r == Region::solid) {
      auto it = solid_copy.find(v);
      if (it != solid_copy.end()) return it->second;
    }
    return v;
  };

  mesh.elements.reserve(elem_region.size());
  for (int j = 0; j < ey; ++j)
    for (int i = 0; i < nx; ++i) {
      MeshElement e;
      e.region = elem_region[i + static_cast<std::size_t>(nx) * j];
      if (spec.dim == 1) {
        e.dofs[0] = element_dof(vid(i, 0), e.region);
        e.dofs[1] = element_dof(vid(i + 1, 0), e.region);
      } else {
        e.dofs[0] = element_dof(vid(i, j), e.region);
        e.dofs[1] = element_dof(vid(i + 1, j), e.region);
        e.dofs[2] = element_dof(vid(i, j + 1), e.region);
        e.dofs[3] = element_dof(vid(i + 1, j + 1), e.region);
      }
      mesh.elements.push_back(e);
    }

  // Interface facet pairs, normal pointing from solid into pore.
  auto side_dof = [&](int v, bool solid_side) {
    if (!solid_side) return v;
    auto it = solid_copy.find(v);
    return it != solid_copy.end() ? it->second : v;
  };
  auto elem_at = [nx](int i, int j) { return i + nx * j; };
  for (const auto& box : spec.inclusions) {
    if (spec.dim == 1) {
      FacetPair left;
      left.plus_dofs[0] = side_dof(vid(box.ilo[0], 0), false);
      left.minus_dofs[0] = side_dof(vid(box.ilo[0], 0), true);
      left.normal = {-1.0, 0.0};
      left.measure = 1.0;
      left.plus_element = elem_at(box.ilo[0] - 1, 0);
      left.minus_element = elem_at(box.ilo[0], 0);
      mesh.interface_facets.push_back(left);
      FacetPair right;
      right.plus_dofs[0] = side_dof(vid(box.ihi[0], 0), false);
      right.minus_dofs[0] = side_dof(vid(box.ihi[0], 0), true);
      right.normal = {1.0, 0.0};
      right.measure = 1.0;
      right.plus_element = elem_at(box.ihi[0], 0);
      right.minus_element = elem_at(box.ihi[0] - 1, 0);
      mesh.interface_facets.push_back(right);
    } else {
      auto add_edge = [&](int v0, int v1, double nx_, double ny_, int plus_e, int minus_e) {
        FacetPair f;
        f.plus_dofs = {side_dof(v0, false), side_dof(v1, false)};
        f.minus_dofs = {side_dof(v0, true), side_dof(v1, true)};
        f.normal = {nx_, ny_};
        f.measure = spec.h;
        f.plus_element = plus_e;
        f.minus_element = minus_e;
        mesh.interface_facets.push_back(f);
      };
      for (int j = box.ilo[1]; j < box.ihi[1]; ++j) {
        add_edge(vid(box.ilo[0], j), vid(box.ilo[0], j + 1), -1.0, 0.0,
                 elem_at(box.ilo[0] - 1, j), elem_at(box.ilo[0], j));
        add_edge(vid(box.ihi[0], j), vid(box.ihi[0], j + 1), 1.0, 0.0,
                 elem_at(box.ihi[0], j), elem_at(box.ihi[0] - 1, j));
      }
      for (int i = box.ilo[0]; i < box.ihi[0]; ++i) {
        add_edge(vid(i, box.ilo[1]), vid(i + 1, box.ilo[1]), 0.0, -1.0,
                 elem_at(i, box.ilo[1] - 1), elem_at(i, box.ilo[1]));
        add_edge(vid(i, box.ihi[1]), vid(i + 1, box.ihi[1]), 0.0, 1.0,
                 elem_at(i, box.ihi[1]), elem_at(i, box.ihi[1] - 1));
      }
    }
  }

  if (spec.periodic) {
    // Slaves live on the upper faces; masters are the matching lower-face
    // vertices with every maximal index wrapped to zero, so no DOF is both.
    for (int j = 0; j < vy; ++j)
      for (int i = 0; i < vx; ++i) {
        const bool top_x = i == nx;
        const bool top_y = spec.dim > 1 && j == ny;
        if (!top_x && !top_y) continue;
        const int slave = vid(i, j);
        const int master = vid(top_x ? 0 : i, top_y ? 0 : j);
        mesh.periodic_pairs.emplace_back(slave, master);
      }
  }

  if (spec.dirichlet_boundary) {
    for (int j = 0; j < vy; ++j)
      for (int i = 0; i < vx; ++i) {
        const bool on_bd = i == 0 || i == nx || (spec.dim > 1 && (j == 0 || j == ny));
        if (on_bd) mesh.dirichlet_dofs.push_back(vid(i, j));
      }
  }

  return mesh;
}

InclusionBox inclusion_index_box(const CellGeometry& cell, int m) {
  InclusionBox box;
  for (int a = 0; a < cell.dim; ++a) {
    box.ilo[a] = checked_round(cell.inclusion.lower[a] * m, "inclusion corner");
    box.ihi[a] = checked_round(cell.inclusion.upper[a] * m, "inclusion corner");
    if (box.ilo[a] < 1 || box.ihi[a] > m - 1 || box.ilo[a] >= box.ihi[a])
      throw MisalignedInclusion("inclusion must stay strictly inside the cell at this resolution");
  }
  return box;
}

}  // namespace

const char* region_name(Region r) { return r == Region::solid ? "solid" : "pore"; }

int BrokenMesh::locate_element(const Point& x, Region hint) const {
  const double tol = 1e-12 * std::max(1.0, std::max(std::abs(bounds.extent(0)),
                                                    dim > 1 ? std::abs(bounds.extent(1)) : 0.0));
  std::array<std::vector<int>, 2> cand;
  for (int a = 0; a < dim; ++a) {
    if (x[a] < bounds.lower[a] - tol || x[a] > bounds.upper[a] + tol)
      throw OutOfDomain("locate_element: point outside the meshed box");
    const double t = (x[a] - bounds.lower[a]) / h;
    int i = std::clamp(static_cast<int>(std::floor(t)), 0, cells[a] - 1);
    const double frac = t - i;
    cand[a].push_back(i);
    if (frac < 1e-9 && i > 0) cand[a].push_back(i - 1);
    if (frac > 1.0 - 1e-9 && i + 1 < cells[a]) cand[a].push_back(i + 1);
  }
  if (dim == 1) cand[1].push_back(0);

  int fallback = -1;
  for (int iy : cand[1])
    for (int ix : cand[0]) {
      const int e = element_at(ix, iy);
      if (elements[e].region == hint) return e;
      if (fallback < 0) fallback = e;
    }
  return fallback;
}

std::vector<Region> BrokenMesh::dof_regions() const {
  std::vector<Region> regions(dof_count, Region::pore);
  std::vector<char> seen(dof_count, 0);
  const int nd = dofs_per_element();
  for (const auto& e : elements)
    for (int k = 0; k < nd; ++k) {
      const int d = e.dofs[k];
      if (!seen[d]) {
        regions[d] = e.region;
        seen[d] = 1;
      } else if (regions[d] != e.region) {
        // only possible in a non-broken mesh; shared vertices count as pore
        regions[d] = Region::pore;
      }
    }
  return regions;
}

double BrokenField::evaluate(const Point& x, Region hint) const {
  const BrokenMesh& m = *mesh;
  const int e = m.locate_element(x, hint);
  const MeshElement& el = m.elements[e];
  const Point o = m.element_origin(el);
  const double xi = (x[0] - o[0]) / m.h;
  if (m.dim == 1) return (1.0 - xi) * values[el.dofs[0]] + xi * values[el.dofs[1]];
  const double eta = (x[1] - o[1]) / m.h;
  return (1.0 - xi) * (1.0 - eta) * values[el.dofs[0]] + xi * (1.0 - eta) * values[el.dofs[1]] +
         (1.0 - xi) * eta * values[el.dofs[2]] + xi * eta * values[el.dofs[3]];
}

JumpTrace jump_trace(const BrokenField& field, const FacetPair& facet, const Point& x) {
  const BrokenMesh& m = *field.mesh;
  JumpTrace t{};
  if (m.dim == 1) {
    t.plus = field.values[facet.plus_dofs[0]];
    t.minus = field.values[facet.minus_dofs[0]];
  } else {
    const Point& c0 = m.dof_coords[facet.plus_dofs[0]];
    const Point& c1 = m.dof_coords[facet.plus_dofs[1]];
    const double len2 = (c1[0] - c0[0]) * (c1[0] - c0[0]) + (c1[1] - c0[1]) * (c1[1] - c0[1]);
    const double s = ((x[0] - c0[0]) * (c1[0] - c0[0]) + (x[1] - c0[1]) * (c1[1] - c0[1])) / len2;
    t.plus = (1.0 - s) * field.values[facet.plus_dofs[0]] + s * field.values[facet.plus_dofs[1]];
    t.minus = (1.0 - s) * field.values[facet.minus_dofs[0]] + s * field.values[facet.minus_dofs[1]];
  }
  t.jump = t.plus - t.minus;
  return t;
}

BrokenMesh build_cell_mesh(const CellGeometry& cell, double h, bool periodic, bool broken) {
  const int m = checked_round(1.0 / h, "cell resolution");
  BuildSpec spec;
  spec.dim = cell.dim;
  spec.origin = {0.0, 0.0};
  spec.h = 1.0 / m;
  spec.cells = {m, cell.dim > 1 ? m : 0};
  spec.inclusions.push_back(inclusion_index_box(cell, m));
  spec.broken = broken;
  spec.periodic = periodic;
  spec.dirichlet_boundary = false;
  return build_structured(spec);
}

BrokenMesh build_domain_mesh(const PavedDomain& paved, double h_cell) {
  if (paved.retained_cells.empty()) throw EmptyPaving("build_domain_mesh: empty paving");
  const CellGeometry& cell = paved.cell;
  const int m = checked_round(1.0 / h_cell, "cell resolution");
  const InclusionBox unit_box = inclusion_index_box(cell, m);

  BuildSpec spec;
  spec.dim = cell.dim;
  spec.origin = paved.domain.lower;
  spec.h = paved.epsilon / m;
  for (int a = 0; a < cell.dim; ++a) {
    const int n = checked_round(paved.domain.extent(a) / paved.epsilon, "domain extent");
    spec.cells[a] = n * m;
  }
  if (cell.dim == 1) spec.cells[1] = 0;

  for (const Index& p : paved.retained_cells) {
    InclusionBox box = unit_box;
    for (int a = 0; a < cell.dim; ++a) {
      const int cell_offset =
          checked_round(p[a] - paved.domain.lower[a] / paved.epsilon, "cell alignment");
      box.ilo[a] += cell_offset * m;
      box.ihi[a] += cell_offset * m;
    }
    spec.inclusions.push_back(box);
  }
  spec.broken = true;
  spec.periodic = false;
  spec.dirichlet_boundary = true;
  return build_structured(spec);
}

BrokenMesh build_box_mesh(const Box& box, int cells_per_axis) {
  BuildSpec spec;
  spec.dim = box.extent(1) > 0.0 ? 2 : 1;
  spec.origin = box.lower;
  spec.h = box.extent(0) / cells_per_axis;
  spec.cells[0] = cells_per_axis;
  if (spec.dim > 1) {
    spec.cells[1] = checked_round(box.extent(1) / spec.h, "box aspect");
  } else {
    spec.cells[1] = 0;
  }
  spec.broken = false;
  spec.periodic = false;
  spec.dirichlet_boundary = true;
  return build_structured(spec);
}

namespace {

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

void write_mesh(const BrokenMesh& mesh, std::ostream& out) {
  out << mesh.dim << ' ' << mesh.dof_count << ' ' << mesh.elements.size() << ' '
      << mesh.interface_facets.size() << '\n';
  for (int d = 0; d < mesh.dof_count; ++d) {
    out << d << ' ' << fmt_double(mesh.dof_coords[d][0]);
    if (mesh.dim > 1) out << ' ' << fmt_double(mesh.dof_coords[d][1]);
    out << '\n';
  }
  const int nd = mesh.dofs_per_element();
  for (std::size_t e = 0; e < mesh.elements.size(); ++e) {
    out << e << ' ' << region_name(mesh.elements[e].region);
    for (int k = 0; k < nd; ++k) out << ' ' << mesh.elements[e].dofs[k];
    out << '\n';
  }
  const int nf = mesh.dofs_per_facet_side();
  for (std::size_t f = 0; f < mesh.interface_facets.size(); ++f) {
    const FacetPair& fp = mesh.interface_facets[f];
    out << f;
    for (int k = 0; k < nf; ++k) out << ' ' << fp.plus_dofs[k];
    out << " |";
    for (int k = 0; k < nf; ++k) out << ' ' << fp.minus_dofs[k];
    out << " | " << fmt_double(fp.normal[0]);
    if (mesh.dim > 1) out << ' ' << fmt_double(fp.normal[1]);
    out << '\n';
  }
}

BrokenMesh read_mesh(std::istream& in) {
  BrokenMesh mesh;
  std::size_t n_vertices = 0, n_elements = 0, n_facets = 0;
  if (!(in >> mesh.dim >> n_vertices >> n_elements >> n_facets))
    throw Error("read_mesh: malformed header");
  if (mesh.dim != 1 && mesh.dim != 2) throw Error("read_mesh: unsupported dimension");

  mesh.dof_coords.resize(n_vertices);
  for (std::size_t d = 0; d < n_vertices; ++d) {
    std::size_t id;
    in >> id >> mesh.dof_coords[d][0];
    if (mesh.dim > 1) in >> mesh.dof_coords[d][1];
    if (!in || id != d) throw Error("read_mesh: malformed vertex line");
  }
  mesh.dof_count = static_cast<int>(n_vertices);
  mesh.lattice_dofs = mesh.dof_count;

  const int nd = mesh.dim == 1 ? 2 : 4;
  mesh.elements.resize(n_elements);
  for (std::size_t e = 0; e < n_elements; ++e) {
    std::size_t id;
    std::string region;
    in >> id >> region;
    for (int k = 0; k < nd; ++k) in >> mesh.elements[e].dofs[k];
    if (!in || id != e) throw Error("read_mesh: malformed element line");
    if (region == "solid")
      mesh.elements[e].region = Region::solid;
    else if (region == "pore")
      mesh.elements[e].region = Region::pore;
    else
      throw Error("read_mesh: unknown region tag '" + region + "'");
  }

  const int nf = mesh.dim == 1 ? 1 : 2;
  mesh.interface_facets.resize(n_facets);
  for (std::size_t f = 0; f < n_facets; ++f) {
    std::size_t id;
    std::string sep;
    FacetPair& fp = mesh.interface_facets[f];
    in >> id;
    for (int k = 0; k < nf; ++k) in >> fp.plus_dofs[k];
    in >> sep;
    if (sep != "|") throw Error("read_mesh: malformed facet line");
    for (int k = 0; k < nf; ++k) in >> fp.minus_dofs[k];
    in >> sep;
    if (sep != "|") throw Error("read_mesh: malformed facet line");
    in >> fp.normal[0];
    if (mesh.dim > 1) in >> fp.normal[1];
    if (!in || id != f) throw Error("read_mesh: malformed facet line");
  }

  // Reconstruct derived geometry from the dumped topology.
  mesh.bounds.lower = mesh.bounds.upper = mesh.dof_coords.empty() ? Point{0.0, 0.0}
                                                                  : mesh.dof_coords[0];
  for (const Point& p : mesh.dof_coords)
    for (int a = 0; a < mesh.dim; ++a) {
      mesh.bounds.lower[a] = std::min(mesh.bounds.lower[a], p[a]);
      mesh.bounds.upper[a] = std::max(mesh.bounds.upper[a], p[a]);
    }
  if (!mesh.elements.empty()) {
    const MeshElement& e0 = mesh.elements[0];
    mesh.h = mesh.dof_coords[e0.dofs[1]][0] - mesh.dof_coords[e0.dofs[0]][0];
    for (int a = 0; a < mesh.dim; ++a)
      mesh.cells[a] = checked_round(mesh.bounds.extent(a) / mesh.h, "mesh extent");
    if (mesh.dim == 1) mesh.cells[1] = 0;
  }
  std::vector<std::vector<int>> incident(mesh.dof_count);
  for (std::size_t e = 0; e < mesh.elements.size(); ++e)
    for (int k = 0; k < nd; ++k) incident[mesh.elements[e].dofs[k]].push_back(static_cast<int>(e));
  auto common_element = [&](const std::array<int, 2>& dofs, int count, Region preferred) {
    int any = -1;
    for (int e : incident[dofs[0]]) {
      bool all = true;
      for (int k = 1; k < count; ++k) {
        const auto& lst = incident[dofs[k]];
        if (std::find(lst.begin(), lst.end(), e) == lst.end()) all = false;
      }
      if (!all) continue;
      if (mesh.elements[e].region == preferred) return e;
      if (any < 0) any = e;
    }
    return any;
  };
  for (FacetPair& fp : mesh.interface_facets) {
    if (mesh.dim == 1) {
      fp.measure = 1.0;
    } else {
      const Point& c0 = mesh.dof_coords[fp.plus_dofs[0]];
      const Point& c1 = mesh.dof_coords[fp.plus_dofs[1]];
      fp.measure = std::hypot(c1[0] - c0[0], c1[1] - c0[1]);
    }
    fp.plus_element = common_element(fp.plus_dofs, nf, Region::pore);
    fp.minus_element = common_element(fp.minus_dofs, nf, Region::solid);
  }
  return mesh;
}

void write_mesh_file(const BrokenMesh& mesh, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("write_mesh_file: cannot open " + path);
  write_mesh(mesh, out);
}

BrokenMesh read_mesh_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("read_mesh_file: cannot open " + path);
  return read_mesh(in);
}

}  // namespace pnph
