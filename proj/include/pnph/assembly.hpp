#pragma once

#include <functional>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Sparse>

#include "pnph/broken_mesh.hpp"

namespace pnph {

using SparseMatrix = Eigen::SparseMatrix<double>;

// Piecewise-constant isotropic permittivity with interface parameters. The
// two-sided spectral bounds hold by construction for this material class.
struct MaterialModel {
  double sigma_solid;
  double sigma_pore;
  double k_lower;
  double k_upper;
  double alpha;  // interface jump coefficient, > 0
  double g;      // interface surface current

  MaterialModel(double sigma_solid_, double sigma_pore_, double alpha_, double g_);

  double sigma(Region r) const { return r == Region::solid ? sigma_solid : sigma_pore; }
  Eigen::Matrix2d tensor(Region r) const {
    return sigma(r) * Eigen::Matrix2d::Identity();
  }
};

enum class RegionFilter { solid, pore, all };

bool region_selected(RegionFilter filter, Region r);

// ---------------------------------------------------------------------------
// Q1 reference element: tensorized multilinear shapes on [0,1]^dim with
// 2-point Gauss quadrature per axis (exact for multilinear x multilinear
// integrands with piecewise-constant coefficients).

int element_quad_count(int dim);
// Reference coordinates and physical weight of quadrature point q.
void element_quad_point(int dim, double h, int q, double& xi, double& eta, double& weight);
double q1_shape(int dim, int k, double xi, double eta);
// Physical gradient of shape k on an element of spacing h.
void q1_shape_gradient(int dim, int k, double xi, double eta, double h, double grad[2]);

int facet_quad_count(int dim);
// Arclength parameter in [0,1] along the facet and physical weight.
void facet_quad_point(int dim, double measure, int q, double& s, double& weight);

// Field value / gradient inside one element at reference coordinates.
double element_value(const BrokenMesh& mesh, const MeshElement& e, const Eigen::VectorXd& v,
                     double xi, double eta);
Eigen::Vector2d element_gradient(const BrokenMesh& mesh, const MeshElement& e,
                                 const Eigen::VectorXd& v, double xi, double eta);
// Physical position of reference coordinates inside an element.
Point element_point(const BrokenMesh& mesh, const MeshElement& e, double xi, double eta);

// ---------------------------------------------------------------------------
// Operators.

// Volume form  (grad u)^T A grad v  with A per element region.
SparseMatrix assemble_stiffness(const BrokenMesh& mesh, const MaterialModel& material);
// Extension point: arbitrary symmetric per-element tensor.
SparseMatrix assemble_stiffness(const BrokenMesh& mesh,
                                const std::function<Eigen::Matrix2d(int)>& tensor);

// Interface form  weight * int [[u]][[v]] dS  over all facet pairs.
SparseMatrix assemble_interface_penalty(const BrokenMesh& mesh, double weight);

// Load  coefficient * int_{interface, solid side} psi^- dS.
Eigen::VectorXd assemble_minus_boundary_source(const BrokenMesh& mesh, double coefficient);

// Mass matrix restricted to elements matching the filter.
SparseMatrix assemble_mass(const BrokenMesh& mesh, RegionFilter filter);

// Load  int f psi dx restricted to a region; f is evaluated at quadrature points.
Eigen::VectorXd assemble_volume_load(const BrokenMesh& mesh, RegionFilter filter,
                                     const std::function<double(const Point&)>& f);

// Load  int q . grad psi dx with a per-point vector coefficient.
Eigen::VectorXd assemble_gradient_load(const BrokenMesh& mesh,
                                       const std::function<Eigen::Vector2d(int, const Point&)>& q);

// ---------------------------------------------------------------------------
// Norm and average bookkeeping.

double integrate_grad_sq(const BrokenField& u);
double integrate_sq(const BrokenField& u, RegionFilter filter);
double integrate_value(const BrokenField& u, RegionFilter filter);
double integrate_jump_sq(const BrokenField& u);
double h1_broken_norm_sq(const BrokenField& u);
double region_volume(const BrokenMesh& mesh, RegionFilter filter);

// ---------------------------------------------------------------------------
// Constraints and linear solves.

// Homogeneous Dirichlet rows/columns eliminated symmetrically (unit diagonal).
void apply_dirichlet(SparseMatrix& matrix, Eigen::VectorXd& rhs, const std::vector<int>& dofs);

// Master-slave elimination of the mesh's periodic pairs.
struct PeriodicMap {
  std::vector<int> full_to_reduced;
  std::vector<int> reduced_to_full;
  int reduced_count = 0;
  int full_count = 0;
};

PeriodicMap make_periodic_map(const BrokenMesh& mesh);
SparseMatrix reduce_matrix(const SparseMatrix& matrix, const PeriodicMap& map);
Eigen::VectorXd reduce_vector(const Eigen::VectorXd& v, const PeriodicMap& map);
Eigen::VectorXd expand_vector(const Eigen::VectorXd& reduced, const PeriodicMap& map);

struct SparseSystem {
  SparseMatrix matrix;
  Eigen::VectorXd rhs;
  bool has_constraint_row = false;
};

// Appends one Lagrange-multiplier row/column enforcing weights . u = 0.
SparseSystem with_zero_mean_constraint(const SparseMatrix& matrix, const Eigen::VectorXd& rhs,
                                       const Eigen::VectorXd& weights);

// Deterministic solve: sparse direct factorization at desk scale, Jacobi-
// preconditioned conjugate gradients above kDirectSolveLimit unknowns.
// Constraint-row systems always take the direct (LU) path. If the system has
// a constraint row, the returned vector excludes the multiplier entry.
// `direct_limit` exists so tests can force the iterative path.
inline constexpr int kDirectSolveLimit = 200000;

Eigen::VectorXd solve_spd(const SparseSystem& system, double tolerance,
                          int direct_limit = kDirectSolveLimit);

}  // namespace pnph
