#pragma once

#include <memory>
#include <vector>

#include <Eigen/Core>

#include "pnph/assembly.hpp"
#include "pnph/broken_mesh.hpp"

namespace pnph {

// Charge vector and thermal scale. Construction enforces charge neutrality
// (within the stated tolerance) and the sign condition min z < 0 < max z.
// Dirichlet data is normalised to a zero bath potential and unit bath
// concentrations throughout the toolkit.
struct IonSystem {
  std::vector<double> charges;
  double kT;
  double neutrality_tol;

  IonSystem(std::vector<double> charges_, double kT_, double neutrality_tol_ = 1e-12);

  std::size_t species_count() const { return charges.size(); }
  // Sum of squared charges, the zero-potential slope of the ionic term.
  double charge_square_sum() const;
};

struct NewtonConfig {
  double abs_tol = 1e-10;
  int max_iter = 50;
  double exp_clamp = 50.0;  // exponent arguments are clamped to [-exp_clamp, exp_clamp]
  int max_halvings = 20;
};

struct NewtonResult {
  BrokenField phi;
  int iterations = 0;
  double final_residual = 0.0;
  bool clamp_active = false;  // solution is untrusted when the clamp engaged
  std::vector<double> residual_history;
};

// Microscale transmission problem on a paved-domain mesh: permittivity
// stiffness, interface penalty alpha/epsilon, ionic term on the pore phase,
// solid-side boundary source epsilon*g, zero Dirichlet data. `nonlinear =
// false` drops the ionic term (diagnostic mode).
NewtonResult solve_micro_pb(std::shared_ptr<const BrokenMesh> mesh, const MaterialModel& material,
                            const IonSystem& ions, double epsilon, const NewtonConfig& config,
                            double linear_tol, bool nonlinear = true);

// Macroscale problem on a continuous mesh: effective tensor stiffness,
// porosity-scaled ionic term everywhere, uniform volume source g_eff.
NewtonResult solve_macro_pb(std::shared_ptr<const BrokenMesh> mesh, const Eigen::Matrix2d& A0,
                            double porosity, double g_eff, const IonSystem& ions,
                            const NewtonConfig& config, double linear_tol, bool nonlinear = true);

// Boltzmann statistics per species: exp(-z_s phi / kT) at pore DOFs, the bath
// value 1 at solid DOFs.
std::vector<BrokenField> recover_concentrations(const BrokenField& phi, const IonSystem& ions);

struct EnergyDiagnostic {
  double grad_sq = 0.0;
  double jump_sq_over_eps = 0.0;
  double l2_pore_sq = 0.0;
};

// The three a-priori energy terms of the microscale solution.
EnergyDiagnostic energy_diagnostic(const BrokenField& phi, double epsilon);

// Sampled strong-monotonicity constant of the ionic term over [xi_lo, xi_hi].
// Throws NonPositive when the sampled minimum is not positive.
double monotonicity_constant(const IonSystem& ions, double xi_lo, double xi_hi, int samples);

// Residual and Jacobian of the discrete problem at a given state, exposed so
// the Newton linearization can be verified against finite differences.
struct PbOperator {
  std::shared_ptr<const BrokenMesh> mesh;
  SparseMatrix linear_part;  // Dirichlet rows eliminated
  Eigen::VectorXd load;
  RegionFilter ionic_region = RegionFilter::pore;
  double ionic_scale = 1.0;
  IonSystem ions;
  NewtonConfig config;
  bool nonlinear = true;

  Eigen::VectorXd residual(const Eigen::VectorXd& phi) const;
  Eigen::VectorXd residual(const Eigen::VectorXd& phi, bool& clamp_hit) const;
  SparseMatrix jacobian(const Eigen::VectorXd& phi) const;
};

PbOperator make_micro_operator(std::shared_ptr<const BrokenMesh> mesh,
                               const MaterialModel& material, const IonSystem& ions,
                               double epsilon, const NewtonConfig& config, bool nonlinear = true);
PbOperator make_macro_operator(std::shared_ptr<const BrokenMesh> mesh, const Eigen::Matrix2d& A0,
                               double porosity, double g_eff, const IonSystem& ions,
                               const NewtonConfig& config, bool nonlinear = true);

}  // namespace pnph
