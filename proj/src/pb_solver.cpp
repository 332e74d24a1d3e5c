#include "pnph/pb_solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "pnph/errors.hpp"

namespace pnph {

IonSystem::IonSystem(std::vector<double> charges_, double kT_, double neutrality_tol_)
    : charges(std::move(charges_)), kT(kT_), neutrality_tol(neutrality_tol_) {
  if (charges.size() < 2) throw Error("IonSystem: at least two species required");
  if (!(kT > 0.0)) throw Error("IonSystem: kT must be positive");
  const double sum = std::accumulate(charges.begin(), charges.end(), 0.0);
  if (std::abs(sum) > neutrality_tol)
    throw Error("IonSystem: charge neutrality violated, sum = " + std::to_string(sum));
  const auto [mn, mx] = std::minmax_element(charges.begin(), charges.end());
  if (!(*mn < 0.0 && *mx > 0.0))
    throw Error("IonSystem: charges must include both signs");
}

double IonSystem::charge_square_sum() const {
  double s = 0.0;
  for (double z : charges) s += z * z;
  return s;
}

namespace {

// ionic density  -sum_s z_s exp(-z_s xi / kT)  with clamped exponents
double ionic_density(const IonSystem& ions, double clamp, double xi, bool& clamp_hit) {
  double v = 0.0;
  for (double z : ions.charges) {
    double t = -z * xi / ions.kT;
    if (t > clamp || t < -clamp) {
      clamp_hit = true;
      t = std::clamp(t, -clamp, clamp);
    }
    v -= z * std::exp(t);
  }
  return v;
}

// its derivative  sum_s z_s^2 / kT exp(-z_s xi / kT), nonnegative
double ionic_slope(const IonSystem& ions, double clamp, double xi) {
  double v = 0.0;
  for (double z : ions.charges) {
    const double t = std::clamp(-z * xi / ions.kT, -clamp, clamp);
    v += z * z / ions.kT * std::exp(t);
  }
  return v;
}

}  // namespace

Eigen::VectorXd PbOperator::residual(const Eigen::VectorXd& phi) const {
  bool clamp_hit = false;
  return residual(phi, clamp_hit);
}

Eigen::VectorXd PbOperator::residual(const Eigen::VectorXd& phi, bool& clamp_hit) const {
  const BrokenMesh& m = *mesh;
  Eigen::VectorXd r = linear_part * phi - load;
  if (nonlinear) {
    const int nd = m.dofs_per_element();
    const int nq = element_quad_count(m.dim);
    for (const MeshElement& e : m.elements) {
      if (!region_selected(ionic_region, e.region)) continue;
      for (int q = 0; q < nq; ++q) {
        double xi, eta, w;
        element_quad_point(m.dim, m.h, q, xi, eta, w);
        const double nval =
            ionic_density(ions, config.exp_clamp, element_value(m, e, phi, xi, eta), clamp_hit);
        for (int k = 0; k < nd; ++k)
          r[e.dofs[k]] += ionic_scale * w * nval * q1_shape(m.dim, k, xi, eta);
      }
    }
  }
  for (int d : m.dirichlet_dofs) r[d] = phi[d];  // pinned to the zero bath value
  return r;
}

SparseMatrix PbOperator::jacobian(const Eigen::VectorXd& phi) const {
  const BrokenMesh& m = *mesh;
  SparseMatrix J = linear_part;
  if (!nonlinear) return J;
  std::vector<char> fixed(m.dof_count, 0);
  for (int d : m.dirichlet_dofs) fixed[d] = 1;
  std::vector<Eigen::Triplet<double>> trips;
  const int nd = m.dofs_per_element();
  const int nq = element_quad_count(m.dim);
  for (const MeshElement& e : m.elements) {
    if (!region_selected(ionic_region, e.region)) continue;
    for (int q = 0; q < nq; ++q) {
      double xi, eta, w;
      element_quad_point(m.dim, m.h, q, xi, eta, w);
      const double slope =
          ionic_slope(ions, config.exp_clamp, element_value(m, e, phi, xi, eta));
      double sh[4];
      for (int k = 0; k < nd; ++k) sh[k] = q1_shape(m.dim, k, xi, eta);
      for (int a = 0; a < nd; ++a)
        for (int b = 0; b < nd; ++b)
          if (!fixed[e.dofs[a]] && !fixed[e.dofs[b]])
            trips.emplace_back(e.dofs[a], e.dofs[b], ionic_scale * w * slope * sh[a] * sh[b]);
    }
  }
  SparseMatrix M(m.dof_count, m.dof_count);
  M.setFromTriplets(trips.begin(), trips.end());
  J += M;
  return J;
}

PbOperator make_micro_operator(std::shared_ptr<const BrokenMesh> mesh,
                               const MaterialModel& material, const IonSystem& ions,
                               double epsilon, const NewtonConfig& config, bool nonlinear) {
  const BrokenMesh& m = *mesh;
  SparseMatrix K = assemble_stiffness(m, material);
  K += assemble_interface_penalty(m, material.alpha / epsilon);
  Eigen::VectorXd load = assemble_minus_boundary_source(m, epsilon * material.g);
  apply_dirichlet(K, load, m.dirichlet_dofs);
  return PbOperator{std::move(mesh), std::move(K),  std::move(load), RegionFilter::pore,
                    1.0,             ions,           config,          nonlinear};
}

PbOperator make_macro_operator(std::shared_ptr<const BrokenMesh> mesh, const Eigen::Matrix2d& A0,
                               double porosity, double g_eff, const IonSystem& ions,
                               const NewtonConfig& config, bool nonlinear) {
  const BrokenMesh& m = *mesh;
  SparseMatrix K = assemble_stiffness(m, [&](int) { return A0; });
  Eigen::VectorXd load =
      assemble_volume_load(m, RegionFilter::all, [&](const Point&) { return g_eff; });
  apply_dirichlet(K, load, m.dirichlet_dofs);
  return PbOperator{std::move(mesh), std::move(K),  std::move(load), RegionFilter::all,
                    porosity,        ions,           config,          nonlinear};
}

namespace {

NewtonResult newton_solve(PbOperator op, double linear_tol) {
  NewtonResult result;
  Eigen::VectorXd phi = Eigen::VectorXd::Zero(op.mesh->dof_count);
  Eigen::VectorXd r = op.residual(phi);
  double rnorm = r.norm();
  result.residual_history.push_back(rnorm);

  int iter = 0;
  while (rnorm > op.config.abs_tol) {
    if (iter >= op.config.max_iter) throw NewtonDiverged(iter, result.residual_history);
    SparseSystem sys{op.jacobian(phi), -r, false};
    const Eigen::VectorXd step = solve_spd(sys, linear_tol);

    double t = 1.0;
    Eigen::VectorXd phi_next = phi + step;
    Eigen::VectorXd r_next = op.residual(phi_next);
    for (int halving = 0; halving < op.config.max_halvings && r_next.norm() >= rnorm; ++halving) {
      t *= 0.5;
      phi_next = phi + t * step;
      r_next = op.residual(phi_next);
    }
    phi.swap(phi_next);
    r.swap(r_next);
    rnorm = r.norm();
    result.residual_history.push_back(rnorm);
    ++iter;
  }

  bool clamp_hit = false;
  (void)op.residual(phi, clamp_hit);
  result.clamp_active = op.nonlinear && clamp_hit;
  result.iterations = iter;
  result.final_residual = rnorm;
  result.phi = BrokenField{op.mesh, std::move(phi)};
  return result;
}

}  // namespace

NewtonResult solve_micro_pb(std::shared_ptr<const BrokenMesh> mesh, const MaterialModel& material,
                            const IonSystem& ions, double epsilon, const NewtonConfig& config,
                            double linear_tol, bool nonlinear) {
  return newton_solve(
      make_micro_operator(std::move(mesh), material, ions, epsilon, config, nonlinear),
      linear_tol);
}

NewtonResult solve_macro_pb(std::shared_ptr<const BrokenMesh> mesh, const Eigen::Matrix2d& A0,
                            double porosity, double g_eff, const IonSystem& ions,
                            const NewtonConfig& config, double linear_tol, bool nonlinear) {
  return newton_solve(
      make_macro_operator(std::move(mesh), A0, porosity, g_eff, ions, config, nonlinear),
      linear_tol);
}

std::vector<BrokenField> recover_concentrations(const BrokenField& phi, const IonSystem& ions) {
  const BrokenMesh& mesh = *phi.mesh;
  const std::vector<Region> regions = mesh.dof_regions();
  std::vector<BrokenField> out;
  out.reserve(ions.species_count());
  for (double z : ions.charges) {
    Eigen::VectorXd c(mesh.dof_count);
    for (int d = 0; d < mesh.dof_count; ++d)
      c[d] = regions[d] == Region::pore ? std::exp(-z * phi.values[d] / ions.kT) : 1.0;
    out.push_back(BrokenField{phi.mesh, std::move(c)});
  }
  return out;
}

EnergyDiagnostic energy_diagnostic(const BrokenField& phi, double epsilon) {
  EnergyDiagnostic d;
  d.grad_sq = integrate_grad_sq(phi);
  d.jump_sq_over_eps = integrate_jump_sq(phi) / epsilon;
  d.l2_pore_sq = integrate_sq(phi, RegionFilter::pore);
  return d;
}

double monotonicity_constant(const IonSystem& ions, double xi_lo, double xi_hi, int samples) {
  if (samples < 2) throw Error("monotonicity_constant: need at least two samples");
  double kmin = std::numeric_limits<double>::infinity();
  for (int k = 0; k < samples; ++k) {
    const double xi = xi_lo + (xi_hi - xi_lo) * k / (samples - 1);
    double ratio;
    if (std::abs(xi) < 1e-12) {
      ratio = ions.charge_square_sum();  // limit value at xi = 0
    } else {
      double num = 0.0;
      for (double z : ions.charges) num -= z * xi * std::exp(-z * xi);
      ratio = num / (xi * xi);
    }
    kmin = std::min(kmin, ratio);
  }
  if (!(kmin > 0.0))
    throw NonPositive("monotonicity_constant: sampled constant is not positive, K = " +
                      std::to_string(kmin));
  return kmin;
}

}  // namespace pnph
