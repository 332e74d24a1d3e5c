#include "pnph/assembly.hpp"

#include <cmath>
#include <limits>

#include <Eigen/IterativeLinearSolvers>
#include <Eigen/SparseCholesky>
#include <Eigen/SparseLU>

#include "pnph/errors.hpp"

namespace pnph {

MaterialModel::MaterialModel(double sigma_solid_, double sigma_pore_, double alpha_, double g_)
    : sigma_solid(sigma_solid_),
      sigma_pore(sigma_pore_),
      k_lower(std::min(sigma_solid_, sigma_pore_)),
      k_upper(std::max(sigma_solid_, sigma_pore_)),
      alpha(alpha_),
      g(g_) {
  if (!(sigma_solid > 0.0) || !(sigma_pore > 0.0))
    throw Error("MaterialModel: permittivities must be positive");
  if (!(alpha > 0.0)) throw Error("MaterialModel: alpha must be positive");
}

bool region_selected(RegionFilter filter, Region r) {
  switch (filter) {
    case RegionFilter::all:
      return true;
    case RegionFilter::solid:
      return r == Region::solid;
    case RegionFilter::pore:
      return r == Region::pore;
  }
  return false;
}

namespace {
// 2-point Gauss abscissae on [0,1].
constexpr double kGaussLo = 0.5 - 0.28867513459481287;
constexpr double kGaussHi = 0.5 + 0.28867513459481287;
constexpr double kGauss[2] = {kGaussLo, kGaussHi};
}  // namespace

int element_quad_count(int dim) { return dim == 1 ? 2 : 4; }

void element_quad_point(int dim, double h, int q, double& xi, double& eta, double& weight) {
  if (dim == 1) {
    xi = kGauss[q];
    eta = 0.0;
    weight = 0.5 * h;
  } else {
    xi = kGauss[q % 2];
    eta = kGauss[q / 2];
    weight = 0.25 * h * h;
  }
}

double q1_shape(int dim, int k, double xi, double eta) {
  if (dim == 1) return k == 0 ? 1.0 - xi : xi;
  switch (k) {
    case 0: return (1.0 - xi) * (1.0 - eta);
    case 1: return xi * (1.0 - eta);
    case 2: return (1.0 - xi) * eta;
    default: return xi * eta;
  }
}

void q1_shape_gradient(int dim, int k, double xi, double eta, double h, double grad[2]) {
  if (dim == 1) {
    grad[0] = (k == 0 ? -1.0 : 1.0) / h;
    grad[1] = 0.0;
    return;
  }
  switch (k) {
    case 0: grad[0] = -(1.0 - eta); grad[1] = -(1.0 - xi); break;
    case 1: grad[0] = (1.0 - eta);  grad[1] = -xi;         break;
    case 2: grad[0] = -eta;         grad[1] = (1.0 - xi);  break;
    default: grad[0] = eta;         grad[1] = xi;          break;
  }
  grad[0] /= h;
  grad[1] /= h;
}

int facet_quad_count(int dim) { return dim == 1 ? 1 : 2; }

void facet_quad_point(int dim, double measure, int q, double& s, double& weight) {
  if (dim == 1) {
    s = 0.0;
    weight = 1.0;  // counting measure at an interface point
  } else {
    s = kGauss[q];
    weight = 0.5 * measure;
  }
}

double element_value(const BrokenMesh& mesh, const MeshElement& e, const Eigen::VectorXd& v,
                     double xi, double eta) {
  double val = 0.0;
  const int nd = mesh.dofs_per_element();
  for (int k = 0; k < nd; ++k) val += q1_shape(mesh.dim, k, xi, eta) * v[e.dofs[k]];
  return val;
}

Eigen::Vector2d element_gradient(const BrokenMesh& mesh, const MeshElement& e,
                                 const Eigen::VectorXd& v, double xi, double eta) {
  Eigen::Vector2d g = Eigen::Vector2d::Zero();
  double gk[2];
  const int nd = mesh.dofs_per_element();
  for (int k = 0; k < nd; ++k) {
    q1_shape_gradient(mesh.dim, k, xi, eta, mesh.h, gk);
    g[0] += gk[0] * v[e.dofs[k]];
    g[1] += gk[1] * v[e.dofs[k]];
  }
  return g;
}

Point element_point(const BrokenMesh& mesh, const MeshElement& e, double xi, double eta) {
  const Point o = mesh.element_origin(e);
  return {o[0] + xi * mesh.h, mesh.dim > 1 ? o[1] + eta * mesh.h : 0.0};
}

SparseMatrix assemble_stiffness(const BrokenMesh& mesh,
                                const std::function<Eigen::Matrix2d(int)>& tensor) {
  std::vector<Eigen::Triplet<double>> trips;
  const int nd = mesh.dofs_per_element();
  const int nq = element_quad_count(mesh.dim);
  trips.reserve(mesh.elements.size() * nd * nd);
  double gk[4][2];
  for (std::size_t ei = 0; ei < mesh.elements.size(); ++ei) {
    const MeshElement& e = mesh.elements[ei];
    const Eigen::Matrix2d A = tensor(static_cast<int>(ei));
    double local[4][4] = {};
    for (int q = 0; q < nq; ++q) {
      double xi, eta, w;
      element_quad_point(mesh.dim, mesh.h, q, xi, eta, w);
      for (int k = 0; k < nd; ++k) q1_shape_gradient(mesh.dim, k, xi, eta, mesh.h, gk[k]);
      for (int a = 0; a < nd; ++a) {
        const double Aga0 = A(0, 0) * gk[a][0] + A(0, 1) * gk[a][1];
        const double Aga1 = A(1, 0) * gk[a][0] + A(1, 1) * gk[a][1];
        for (int b = 0; b < nd; ++b)
          local[a][b] += w * (Aga0 * gk[b][0] + Aga1 * gk[b][1]);
      }
    }
    for (int a = 0; a < nd; ++a)
      for (int b = 0; b < nd; ++b) trips.emplace_back(e.dofs[a], e.dofs[b], local[a][b]);
  }
  SparseMatrix K(mesh.dof_count, mesh.dof_count);
  K.setFromTriplets(trips.begin(), trips.end());
  return K;
}

SparseMatrix assemble_stiffness(const BrokenMesh& mesh, const MaterialModel& material) {
  return assemble_stiffness(
      mesh, [&](int e) { return material.tensor(mesh.elements[e].region); });
}

SparseMatrix assemble_interface_penalty(const BrokenMesh& mesh, double weight) {
  if (weight < 0.0) throw Error("assemble_interface_penalty: weight must be nonnegative");
  std::vector<Eigen::Triplet<double>> trips;
  const int nf = mesh.dofs_per_facet_side();
  const int nq = facet_quad_count(mesh.dim);
  for (const FacetPair& f : mesh.interface_facets) {
    // trace mass on the facet
    double tm[2][2] = {};
    for (int q = 0; q < nq; ++q) {
      double s, w;
      facet_quad_point(mesh.dim, f.measure, q, s, w);
      const double sh[2] = {1.0 - s, s};
      for (int a = 0; a < nf; ++a)
        for (int b = 0; b < nf; ++b) tm[a][b] += w * sh[a] * sh[b];
    }
    // signed dofs: plus side +1, minus side -1
    const int dofs[4] = {f.plus_dofs[0], f.plus_dofs[1], f.minus_dofs[0], f.minus_dofs[1]};
    const double sign[2] = {1.0, -1.0};
    for (int sa = 0; sa < 2; ++sa)
      for (int sb = 0; sb < 2; ++sb)
        for (int a = 0; a < nf; ++a)
          for (int b = 0; b < nf; ++b)
            trips.emplace_back(dofs[sa * 2 + a], dofs[sb * 2 + b],
                               weight * sign[sa] * sign[sb] * tm[a][b]);
  }
  SparseMatrix P(mesh.dof_count, mesh.dof_count);
  P.setFromTriplets(trips.begin(), trips.end());
  return P;
}

Eigen::VectorXd assemble_minus_boundary_source(const BrokenMesh& mesh, double coefficient) {
  Eigen::VectorXd b = Eigen::VectorXd::Zero(mesh.dof_count);
  const int nf = mesh.dofs_per_facet_side();
  const int nq = facet_quad_count(mesh.dim);
  for (const FacetPair& f : mesh.interface_facets) {
    for (int q = 0; q < nq; ++q) {
      double s, w;
      facet_quad_point(mesh.dim, f.measure, q, s, w);
      const double sh[2] = {1.0 - s, s};
      for (int a = 0; a < nf; ++a) b[f.minus_dofs[a]] += coefficient * w * sh[a];
    }
  }
  return b;
}

SparseMatrix assemble_mass(const BrokenMesh& mesh, RegionFilter filter) {
  std::vector<Eigen::Triplet<double>> trips;
  const int nd = mesh.dofs_per_element();
  const int nq = element_quad_count(mesh.dim);
  for (const MeshElement& e : mesh.elements) {
    if (!region_selected(filter, e.region)) continue;
    double local[4][4] = {};
    for (int q = 0; q < nq; ++q) {
      double xi, eta, w;
      element_quad_point(mesh.dim, mesh.h, q, xi, eta, w);
      double sh[4];
      for (int k = 0; k < nd; ++k) sh[k] = q1_shape(mesh.dim, k, xi, eta);
      for (int a = 0; a < nd; ++a)
        for (int b = 0; b < nd; ++b) local[a][b] += w * sh[a] * sh[b];
    }
    for (int a = 0; a < nd; ++a)
      for (int b = 0; b < nd; ++b) trips.emplace_back(e.dofs[a], e.dofs[b], local[a][b]);
  }
  SparseMatrix M(mesh.dof_count, mesh.dof_count);
  M.setFromTriplets(trips.begin(), trips.end());
  return M;
}

Eigen::VectorXd assemble_volume_load(const BrokenMesh& mesh, RegionFilter filter,
                                     const std::function<double(const Point&)>& f) {
  Eigen::VectorXd b = Eigen::VectorXd::Zero(mesh.dof_count);
  const int nd = mesh.dofs_per_element();
  const int nq = element_quad_count(mesh.dim);
  for (const MeshElement& e : mesh.elements) {
    if (!region_selected(filter, e.region)) continue;
    for (int q = 0; q < nq; ++q) {
      double xi, eta, w;
      element_quad_point(mesh.dim, mesh.h, q, xi, eta, w);
      const double fv = f(element_point(mesh, e, xi, eta));
      for (int k = 0; k < nd; ++k) b[e.dofs[k]] += w * fv * q1_shape(mesh.dim, k, xi, eta);
    }
  }
  return b;
}

Eigen::VectorXd assemble_gradient_load(
    const BrokenMesh& mesh, const std::function<Eigen::Vector2d(int, const Point&)>& q) {
  Eigen::VectorXd b = Eigen::VectorXd::Zero(mesh.dof_count);
  const int nd = mesh.dofs_per_element();
  const int nq = element_quad_count(mesh.dim);
  double gk[2];
  for (std::size_t ei = 0; ei < mesh.elements.size(); ++ei) {
    const MeshElement& e = mesh.elements[ei];
    for (int iq = 0; iq < nq; ++iq) {
      double xi, eta, w;
      element_quad_point(mesh.dim, mesh.h, iq, xi, eta, w);
      const Eigen::Vector2d qv = q(static_cast<int>(ei), element_point(mesh, e, xi, eta));
      for (int k = 0; k < nd; ++k) {
        q1_shape_gradient(mesh.dim, k, xi, eta, mesh.h, gk);
        b[e.dofs[k]] += w * (qv[0] * gk[0] + qv[1] * gk[1]);
      }
    }
  }
  return b;
}

double integrate_grad_sq(const BrokenField& u) {
  const BrokenMesh& mesh = *u.mesh;
  double total = 0.0;
  const int nq = element_quad_count(mesh.dim);
  for (const MeshElement& e : mesh.elements)
    for (int q = 0; q < nq; ++q) {
      double xi, eta, w;
      element_quad_point(mesh.dim, mesh.h, q, xi, eta, w);
      total += w * element_gradient(mesh, e, u.values, xi, eta).squaredNorm();
    }
  return total;
}

double integrate_sq(const BrokenField& u, RegionFilter filter) {
  const BrokenMesh& mesh = *u.mesh;
  double total = 0.0;
  const int nq = element_quad_count(mesh.dim);
  for (const MeshElement& e : mesh.elements) {
    if (!region_selected(filter, e.region)) continue;
    for (int q = 0; q < nq; ++q) {
      double xi, eta, w;
      element_quad_point(mesh.dim, mesh.h, q, xi, eta, w);
      const double v = element_value(mesh, e, u.values, xi, eta);
      total += w * v * v;
    }
  }
  return total;
}

double integrate_value(const BrokenField& u, RegionFilter filter) {
  const BrokenMesh& mesh = *u.mesh;
  double total = 0.0;
  const int nq = element_quad_count(mesh.dim);
  for (const MeshElement& e : mesh.elements) {
    if (!region_selected(filter, e.region)) continue;
    for (int q = 0; q < nq; ++q) {
      double xi, eta, w;
      element_quad_point(mesh.dim, mesh.h, q, xi, eta, w);
      total += w * element_value(mesh, e, u.values, xi, eta);
    }
  }
  return total;
}

double integrate_jump_sq(const BrokenField& u) {
  const BrokenMesh& mesh = *u.mesh;
  double total = 0.0;
  const int nf = mesh.dofs_per_facet_side();
  const int nq = facet_quad_count(mesh.dim);
  for (const FacetPair& f : mesh.interface_facets)
    for (int q = 0; q < nq; ++q) {
      double s, w;
      facet_quad_point(mesh.dim, f.measure, q, s, w);
      const double sh[2] = {1.0 - s, s};
      double jump = 0.0;
      for (int a = 0; a < nf; ++a)
        jump += sh[a] * (u.values[f.plus_dofs[a]] - u.values[f.minus_dofs[a]]);
      total += w * jump * jump;
    }
  return total;
}

double h1_broken_norm_sq(const BrokenField& u) {
  return integrate_grad_sq(u) + integrate_sq(u, RegionFilter::all);
}

double region_volume(const BrokenMesh& mesh, RegionFilter filter) {
  double vol = 0.0;
  const double ev = mesh.dim == 1 ? mesh.h : mesh.h * mesh.h;
  for (const MeshElement& e : mesh.elements)
    if (region_selected(filter, e.region)) vol += ev;
  return vol;
}

void apply_dirichlet(SparseMatrix& matrix, Eigen::VectorXd& rhs, const std::vector<int>& dofs) {
  std::vector<char> fixed(matrix.rows(), 0);
  for (int d : dofs) fixed[d] = 1;
  // Homogeneous values: the symmetric correction to the right side vanishes.
  std::vector<Eigen::Triplet<double>> trips;
  trips.reserve(matrix.nonZeros() + dofs.size());
  for (int k = 0; k < matrix.outerSize(); ++k)
    for (SparseMatrix::InnerIterator it(matrix, k); it; ++it)
      if (!fixed[it.row()] && !fixed[it.col()]) trips.emplace_back(it.row(), it.col(), it.value());
  for (int d : dofs) trips.emplace_back(d, d, 1.0);
  SparseMatrix out(matrix.rows(), matrix.cols());
  out.setFromTriplets(trips.begin(), trips.end());
  matrix.swap(out);
  for (int d : dofs) rhs[d] = 0.0;
}

PeriodicMap make_periodic_map(const BrokenMesh& mesh) {
  PeriodicMap map;
  map.full_count = mesh.dof_count;
  std::vector<int> master_of(mesh.dof_count, -1);
  for (const auto& [slave, master] : mesh.periodic_pairs) master_of[slave] = master;
  map.full_to_reduced.assign(mesh.dof_count, -1);
  for (int d = 0; d < mesh.dof_count; ++d) {
    if (master_of[d] < 0) {
      map.full_to_reduced[d] = map.reduced_count++;
      map.reduced_to_full.push_back(d);
    }
  }
  for (int d = 0; d < mesh.dof_count; ++d) {
    if (master_of[d] >= 0) {
      const int m = master_of[d];
      if (master_of[m] >= 0) throw Error("make_periodic_map: chained master-slave pair");
      map.full_to_reduced[d] = map.full_to_reduced[m];
    }
  }
  return map;
}

SparseMatrix reduce_matrix(const SparseMatrix& matrix, const PeriodicMap& map) {
  std::vector<Eigen::Triplet<double>> trips;
  trips.reserve(matrix.nonZeros());
  for (int k = 0; k < matrix.outerSize(); ++k)
    for (SparseMatrix::InnerIterator it(matrix, k); it; ++it)
      trips.emplace_back(map.full_to_reduced[it.row()], map.full_to_reduced[it.col()],
                         it.value());
  SparseMatrix R(map.reduced_count, map.reduced_count);
  R.setFromTriplets(trips.begin(), trips.end());
  return R;
}

Eigen::VectorXd reduce_vector(const Eigen::VectorXd& v, const PeriodicMap& map) {
  Eigen::VectorXd r = Eigen::VectorXd::Zero(map.reduced_count);
  for (int d = 0; d < map.full_count; ++d) r[map.full_to_reduced[d]] += v[d];
  return r;
}

Eigen::VectorXd expand_vector(const Eigen::VectorXd& reduced, const PeriodicMap& map) {
  Eigen::VectorXd v(map.full_count);
  for (int d = 0; d < map.full_count; ++d) v[d] = reduced[map.full_to_reduced[d]];
  return v;
}

SparseSystem with_zero_mean_constraint(const SparseMatrix& matrix, const Eigen::VectorXd& rhs,
                                       const Eigen::VectorXd& weights) {
  const int n = static_cast<int>(matrix.rows());
  std::vector<Eigen::Triplet<double>> trips;
  trips.reserve(matrix.nonZeros() + 2 * n);
  for (int k = 0; k < matrix.outerSize(); ++k)
    for (SparseMatrix::InnerIterator it(matrix, k); it; ++it)
      trips.emplace_back(it.row(), it.col(), it.value());
  for (int d = 0; d < n; ++d) {
    if (weights[d] != 0.0) {
      trips.emplace_back(n, d, weights[d]);
      trips.emplace_back(d, n, weights[d]);
    }
  }
  SparseSystem sys;
  sys.matrix.resize(n + 1, n + 1);
  sys.matrix.setFromTriplets(trips.begin(), trips.end());
  sys.rhs = Eigen::VectorXd::Zero(n + 1);
  sys.rhs.head(n) = rhs;
  sys.has_constraint_row = true;
  return sys;
}

Eigen::VectorXd solve_spd(const SparseSystem& system, double tolerance, int direct_limit) {
  const Eigen::Index n = system.matrix.rows();
  Eigen::VectorXd x;
  bool iterative = false;
  int iterations = 0;

  if (system.has_constraint_row) {
    Eigen::SparseLU<SparseMatrix> lu;
    lu.compute(system.matrix);
    if (lu.info() != Eigen::Success)
      throw SingularSystem("solve_spd: LU factorization of the constrained system failed");
    x = lu.solve(system.rhs);
  } else if (n > direct_limit) {
    Eigen::ConjugateGradient<SparseMatrix, Eigen::Lower | Eigen::Upper,
                             Eigen::DiagonalPreconditioner<double>>
        cg;
    cg.setTolerance(tolerance);
    cg.setMaxIterations(10 * n);
    cg.compute(system.matrix);
    x = cg.solve(system.rhs);
    if (cg.info() != Eigen::Success)
      throw NotConverged(static_cast<int>(cg.iterations()), cg.error());
    iterative = true;
    iterations = static_cast<int>(cg.iterations());
  } else {
    Eigen::SimplicialLDLT<SparseMatrix> ldlt;
    ldlt.compute(system.matrix);
    if (ldlt.info() != Eigen::Success)
      throw SingularSystem("solve_spd: LDLT factorization failed");
    const auto& D = ldlt.vectorD();
    const double dmax = D.cwiseAbs().maxCoeff();
    const double dmin = D.cwiseAbs().minCoeff();
    if (!(dmin > 1e-12 * dmax))
      throw SingularSystem("solve_spd: near-zero pivot, the system has a kernel");
    x = ldlt.solve(system.rhs);
  }

  // verify the true residual; an iterative recurrence can report convergence
  // on a singular system while the actual residual stalls
  const double rhs_norm = std::max(system.rhs.norm(), std::numeric_limits<double>::min());
  const double rel = (system.matrix * x - system.rhs).norm() / rhs_norm;
  if (!std::isfinite(rel) || rel > std::max(tolerance * 100.0, 1e-8)) {
    if (iterative) throw NotConverged(iterations, rel);
    throw SingularSystem("solve_spd: direct solve residual check failed");
  }
  return system.has_constraint_row ? Eigen::VectorXd(x.head(n - 1)) : x;
}

}  // namespace pnph
