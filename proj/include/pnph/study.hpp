#pragma once

#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

#include "pnph/broken_mesh.hpp"
#include "pnph/cell_problems.hpp"
#include "pnph/geometry.hpp"
#include "pnph/pb_solver.hpp"

namespace pnph {

struct ConvergenceRow {
  double epsilon = 0.0;
  double grad_error_sq = 0.0;
  double jump_error_sq_over_eps = 0.0;
  double energy_error = 0.0;  // sqrt(grad_error_sq + jump_error_sq_over_eps)
  int micro_dofs = 0;
  int macro_dofs = 0;
  int newton_iters_micro = 0;
  int newton_iters_macro = 0;
  double wall_time = 0.0;  // seconds, telemetry only

  // Diagnostics kept out of the serialized report:
  double no_corrector_error = 0.0;  // energy error of phi_eps - phi0
  double raw_energy = 0.0;          // energy norm of phi_eps itself
};

struct ConvergenceReport {
  std::vector<ConvergenceRow> rows;  // strictly decreasing in epsilon
  double fitted_rate = 0.0;          // NaN sentinel when errors are degenerate
  std::string config_hash;
};

// Element-averaged gradients pushed to the vertices (volume-weighted); the
// standard recovery for smooth fields on structured meshes.
std::vector<Eigen::Vector2d> recover_vertex_gradients(const BrokenField& u);

// First-order two-scale reconstruction on the domain mesh: at a DOF with
// coordinates x in local cell position y, the value is
//   phi0(x) + epsilon * grad phi0(x) . N(y)
// where N is evaluated on the DOF's own side of the interface, so the
// reconstruction inherits N's jumps.
BrokenField build_corrector(const BrokenField& phi0, const std::vector<BrokenField>& N,
                            double epsilon, std::shared_ptr<const BrokenMesh> domain_mesh);

struct EnergyError {
  double grad_sq = 0.0;
  double jump_sq_over_eps = 0.0;
  double total() const;
};

// Broken energy error between two fields on the same mesh (MeshMismatch
// otherwise): gradient term plus the 1/epsilon-weighted interface jump term.
EnergyError energy_error(const BrokenField& phi_eps, const BrokenField& phi1, double epsilon);

// Least-squares slope of log(energy_error) against log(epsilon). Throws
// InsufficientData below two rows; returns NaN when any error is at the
// roundoff floor (<= 1e-14).
double fit_rate(const std::vector<ConvergenceRow>& rows);

// Everything a sweep needs; the CLI builds this from the parsed config.
struct StudySetup {
  CellGeometry cell;
  MaterialModel material;
  IonSystem ions;
  Box domain;
  double boundary_gap = 0.2;
  std::vector<double> epsilons;  // any order; the sweep sorts descending
  double h_cell = 1.0 / 16.0;    // per-cell resolution of cell and micro meshes
  double macro_h = 1.0 / 64.0;   // macroscale mesh spacing
  NewtonConfig newton;
  double linear_tol = 1e-10;
  int threads = 1;
  std::string config_echo;  // canonical serialized config, hashed into the report
};

// Cell correctors and macro solve once, one micro solve per epsilon, then the
// corrector errors and the fitted rate.
ConvergenceReport run_convergence_study(const StudySetup& setup);

void write_report_csv(const ConvergenceReport& report, std::ostream& out);
void write_report_json(const ConvergenceReport& report, const std::string& config_echo,
                       std::ostream& out);

std::string fnv1a_hex(const std::string& data);

}  // namespace pnph
