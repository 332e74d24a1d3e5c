#pragma once

#include <functional>
#include <memory>
#include <vector>

#include "pnph/assembly.hpp"
#include "pnph/broken_mesh.hpp"
#include "pnph/geometry.hpp"

namespace pnph {

// Pointwise evaluation of the unfolding of f: value at (cell p, local y) is
// f(epsilon * p + epsilon * y). Throws OutOfDomain when the unfolded point
// leaves the reference domain.
double unfold(const std::function<double(const Point&)>& f, const Box& domain, int dim,
              double epsilon, const Index& p, const Point& y);

struct UnfoldedForce {
  std::function<double(const Point&)> f;
  Box domain;
  int dim = 2;
  double epsilon = 1.0;

  double operator()(const Index& p, const Point& y) const {
    return unfold(f, domain, dim, epsilon, p, y);
  }
};

// Certification residuals recorded while building the correctors.
//
// The interface relation (A0 + B) nu = alpha [[N]] and the normal-trace
// continuity of B hold almost everywhere; at the inclusion corners the exact
// flux is singular and pointwise sampling cannot converge there. The primary
// residuals therefore sample quadrature points at least `corner_margin` away
// from the corners; the _global variants keep the corner neighbourhoods and
// the _l2 variant is the quadrature-weighted interface norm.
struct CorrectorDiagnostics {
  double formula_agreement = 0.0;        // max entry gap between the two effective-tensor formulas
  double mean_B = 0.0;                   // max |<B>_ij|
  double interface_relation_residual = 0.0;
  double interface_relation_global = 0.0;
  double interface_relation_l2 = 0.0;
  double jump_B = 0.0;                   // max |[[B nu]]| away from corners
  double jump_B_global = 0.0;
  double weak_divergence_residual = 0.0; // max weak residual of the decomposition rows
  double min_eigenvalue = 0.0;
  double mean_L = 0.0;
  double mean_L_error = 0.0;             // |<L> - |dw|/|Y||
  double corner_margin = 0.1;
};

// dim x dim matrix samples at every element quadrature point.
struct QuadMatrixField {
  int quad_per_element = 0;
  std::vector<Eigen::Matrix2d> values;

  const Eigen::Matrix2d& at(std::size_t element, int q) const {
    return values[element * quad_per_element + q];
  }
};

struct CellCorrectors {
  std::shared_ptr<const BrokenMesh> traction_mesh;  // broken, natural boundary
  std::shared_ptr<const BrokenMesh> periodic_mesh;  // broken + periodic
  BrokenField L;
  std::vector<BrokenField> N;  // one component per space dimension
  Eigen::Matrix2d A0 = Eigen::Matrix2d::Identity();
  QuadMatrixField B;
  CorrectorDiagnostics diagnostics;
};

// Cell problem with natural boundary conditions driven by the solid-side
// interface trace; its cell average equals |dw|/|Y|.
BrokenField solve_cell_traction(std::shared_ptr<const BrokenMesh> cell_mesh,
                                const MaterialModel& material, double linear_tol);

// Cell problem driven by the unfolded volume force restricted to the pore;
// its cell average equals the pore average of the unfolded force.
BrokenField solve_cell_volume_force(std::shared_ptr<const BrokenMesh> cell_mesh,
                                    const MaterialModel& material, const UnfoldedForce& force,
                                    const Index& cell_index, double linear_tol);

// Periodic corrector components with zero mean; each solves the oscillating-
// coefficient cell problem with the interface jump form.
std::vector<BrokenField> solve_cell_oscillation(std::shared_ptr<const BrokenMesh> periodic_mesh,
                                                const MaterialModel& material, double linear_tol);

struct EffectiveTensor {
  Eigen::Matrix2d volume_average;  // average of the corrected flux rows
  Eigen::Matrix2d energy_formula;  // symmetric form including the interface term
  Eigen::Matrix2d certified;       // symmetrized value used downstream
  double agreement;                // max entry gap between the two formulas
  double min_eigenvalue;
};

// Computes the effective tensor both ways and certifies agreement, symmetry
// and positive definiteness. Throws CertificationFailed.
EffectiveTensor compute_effective_tensor(const std::vector<BrokenField>& N,
                                         const MaterialModel& material, double agreement_tol);

// Zero-average decomposition remainder of the corrected flux, sampled at
// element quadrature points, with its certification residuals.
QuadMatrixField compute_flux_decomposition(const std::vector<BrokenField>& N,
                                           const MaterialModel& material,
                                           const Eigen::Matrix2d& A0,
                                           CorrectorDiagnostics& diagnostics);

// Full pipeline on one cell geometry: meshes, corrector solves, effective
// tensor, decomposition and diagnostics.
CellCorrectors build_cell_correctors(const CellGeometry& cell, const MaterialModel& material,
                                     double h, double linear_tol, double agreement_tol = 1e-8);

// One row of an expansion experiment at a fixed epsilon.
struct ExpansionResidual {
  double epsilon = 0.0;
  double residual = 0.0;
  double residual_over_eps = 0.0;
  double cell_average_check = 0.0;  // max per-cell violation of the volume-force average identity
};

// Interface-traction expansion: compares the scaled solid-side boundary term
// against the uniformly distributed potential.
ExpansionResidual verify_traction_expansion(const PavedDomain& paved,
                                            const MaterialModel& material, double h_cell,
                                            const std::function<double(const Point&)>& probe);

// Volume-force expansion: compares the pore-restricted load against the
// porosity-scaled full load; optionally certifies the per-cell average
// identity of the unfolded force problem.
ExpansionResidual verify_volume_expansion(const PavedDomain& paved, const MaterialModel& material,
                                          double h_cell,
                                          const std::function<double(const Point&)>& f,
                                          const std::function<double(const Point&)>& probe,
                                          bool check_cell_averages = false,
                                          double linear_tol = 1e-10);

}  // namespace pnph
