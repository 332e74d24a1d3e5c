#include "pnph/study.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <future>
#include <limits>
#include <ostream>

#include <json.hpp>

#include "pnph/errors.hpp"

namespace pnph {

double EnergyError::total() const { return std::sqrt(grad_sq + jump_sq_over_eps); }

std::vector<Eigen::Vector2d> recover_vertex_gradients(const BrokenField& u) {
  const BrokenMesh& mesh = *u.mesh;
  std::vector<Eigen::Vector2d> grads(mesh.dof_count, Eigen::Vector2d::Zero());
  std::vector<double> weight(mesh.dof_count, 0.0);
  const int nd = mesh.dofs_per_element();
  const double vol = mesh.dim == 1 ? mesh.h : mesh.h * mesh.h;
  for (const MeshElement& e : mesh.elements) {
    const Eigen::Vector2d g = element_gradient(mesh, e, u.values, 0.5, 0.5);
    for (int k = 0; k < nd; ++k) {
      grads[e.dofs[k]] += vol * g;
      weight[e.dofs[k]] += vol;
    }
  }
  for (int d = 0; d < mesh.dof_count; ++d)
    if (weight[d] > 0.0) grads[d] /= weight[d];
  return grads;
}

namespace {

// Bilinear interpolation of per-DOF vectors at a point.
Eigen::Vector2d interpolate_vectors(const BrokenMesh& mesh,
                                    const std::vector<Eigen::Vector2d>& data, const Point& x) {
  const int e = mesh.locate_element(x);
  const MeshElement& el = mesh.elements[e];
  const Point o = mesh.element_origin(el);
  const double xi = (x[0] - o[0]) / mesh.h;
  const double eta = mesh.dim > 1 ? (x[1] - o[1]) / mesh.h : 0.0;
  Eigen::Vector2d v = Eigen::Vector2d::Zero();
  const int nd = mesh.dofs_per_element();
  for (int k = 0; k < nd; ++k) v += q1_shape(mesh.dim, k, xi, eta) * data[el.dofs[k]];
  return v;
}

}  // namespace

BrokenField build_corrector(const BrokenField& phi0, const std::vector<BrokenField>& N,
                            double epsilon, std::shared_ptr<const BrokenMesh> domain_mesh) {
  const BrokenMesh& mesh = *domain_mesh;
  const BrokenMesh& macro = *phi0.mesh;
  const std::vector<Eigen::Vector2d> grads = recover_vertex_gradients(phi0);
  const std::vector<Region> regions = mesh.dof_regions();

  Eigen::VectorXd values(mesh.dof_count);
  for (int d = 0; d < mesh.dof_count; ++d) {
    const Point& x = mesh.dof_coords[d];
    const double base = phi0.evaluate(x);
    const Eigen::Vector2d grad = interpolate_vectors(macro, grads, x);
    const Decomposition dec = decompose_coordinates(x, epsilon, mesh.dim);
    double osc = 0.0;
    for (int i = 0; i < mesh.dim; ++i) osc += grad[i] * N[i].evaluate(dec.local, regions[d]);
    values[d] = base + epsilon * osc;
  }
  return BrokenField{std::move(domain_mesh), std::move(values)};
}

EnergyError energy_error(const BrokenField& phi_eps, const BrokenField& phi1, double epsilon) {
  if (phi_eps.mesh.get() != phi1.mesh.get())
    throw MeshMismatch("energy_error: fields live on different meshes");
  BrokenField diff{phi_eps.mesh, phi_eps.values - phi1.values};
  EnergyError e;
  e.grad_sq = integrate_grad_sq(diff);
  e.jump_sq_over_eps = integrate_jump_sq(diff) / epsilon;
  return e;
}

double fit_rate(const std::vector<ConvergenceRow>& rows) {
  if (rows.size() < 2) throw InsufficientData("fit_rate: need at least two rows");
  for (const ConvergenceRow& r : rows)
    if (r.energy_error <= 1e-14) return std::numeric_limits<double>::quiet_NaN();
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  const double n = static_cast<double>(rows.size());
  for (const ConvergenceRow& r : rows) {
    const double x = std::log(r.epsilon);
    const double y = std::log(r.energy_error);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

namespace {

ConvergenceRow sweep_row(const StudySetup& setup, const CellCorrectors& correctors,
                         const NewtonResult& macro, double epsilon) {
  const auto t0 = std::chrono::steady_clock::now();
  const PavedDomain paving = build_paving(setup.domain, epsilon, setup.cell, setup.boundary_gap);
  auto mesh = std::make_shared<const BrokenMesh>(build_domain_mesh(paving, setup.h_cell));

  const NewtonResult micro = solve_micro_pb(mesh, setup.material, setup.ions, epsilon,
                                            setup.newton, setup.linear_tol);
  const BrokenField phi1 = build_corrector(macro.phi, correctors.N, epsilon, mesh);
  const EnergyError err = energy_error(micro.phi, phi1, epsilon);

  ConvergenceRow row;
  row.epsilon = epsilon;
  row.grad_error_sq = err.grad_sq;
  row.jump_error_sq_over_eps = err.jump_sq_over_eps;
  row.energy_error = err.total();
  row.micro_dofs = mesh->dof_count;
  row.macro_dofs = macro.phi.mesh->dof_count;
  row.newton_iters_micro = micro.iterations;
  row.newton_iters_macro = macro.iterations;

  // reference errors without the oscillating correction
  std::vector<BrokenField> zeroN;
  for (int i = 0; i < mesh->dim; ++i)
    zeroN.push_back(BrokenField{correctors.N[i].mesh,
                                Eigen::VectorXd::Zero(correctors.N[i].mesh->dof_count)});
  const BrokenField phi0_interp = build_corrector(macro.phi, zeroN, epsilon, mesh);
  row.no_corrector_error = energy_error(micro.phi, phi0_interp, epsilon).total();
  BrokenField zero{mesh, Eigen::VectorXd::Zero(mesh->dof_count)};
  row.raw_energy = energy_error(micro.phi, zero, epsilon).total();

  row.wall_time =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return row;
}

}  // namespace

ConvergenceReport run_convergence_study(const StudySetup& setup) {
  std::vector<double> eps = setup.epsilons;
  std::sort(eps.begin(), eps.end(), std::greater<>());
  if (eps.empty()) throw Error("run_convergence_study: no epsilon values configured");

  const CellCorrectors correctors = build_cell_correctors(
      setup.cell, setup.material, setup.h_cell, setup.linear_tol);
  const CellMeasures cm = measures(setup.cell);

  const int macro_cells =
      static_cast<int>(std::llround(setup.domain.extent(0) / setup.macro_h));
  auto macro_mesh = std::make_shared<const BrokenMesh>(build_box_mesh(setup.domain, macro_cells));
  const NewtonResult macro =
      solve_macro_pb(macro_mesh, correctors.A0, cm.vol_pore, cm.surf_inclusion * setup.material.g,
                     setup.ions, setup.newton, setup.linear_tol);

  ConvergenceReport report;
  report.rows.resize(eps.size());
  if (setup.threads > 1) {
    std::vector<std::future<ConvergenceRow>> futures;
    for (double e : eps)
      futures.push_back(std::async(std::launch::async, [&, e] {
        return sweep_row(setup, correctors, macro, e);
      }));
    for (std::size_t k = 0; k < eps.size(); ++k) report.rows[k] = futures[k].get();
  } else {
    for (std::size_t k = 0; k < eps.size(); ++k)
      report.rows[k] = sweep_row(setup, correctors, macro, eps[k]);
  }

  report.fitted_rate = report.rows.size() >= 2 ? fit_rate(report.rows)
                                               : std::numeric_limits<double>::quiet_NaN();
  report.config_hash = fnv1a_hex(setup.config_echo);
  return report;
}

namespace {

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string fmt_time(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.3f", v);
  return buf;
}

}  // namespace

void write_report_csv(const ConvergenceReport& report, std::ostream& out) {
  out << "epsilon,grad_err_sq,jump_err_sq_over_eps,energy_err,micro_dofs,macro_dofs,"
         "newton_micro,newton_macro,wall_s\n";
  for (const ConvergenceRow& r : report.rows) {
    out << fmt(r.epsilon) << ',' << fmt(r.grad_error_sq) << ',' << fmt(r.jump_error_sq_over_eps)
        << ',' << fmt(r.energy_error) << ',' << r.micro_dofs << ',' << r.macro_dofs << ','
        << r.newton_iters_micro << ',' << r.newton_iters_macro << ',' << fmt_time(r.wall_time)
        << '\n';
  }
}

void write_report_json(const ConvergenceReport& report, const std::string& config_echo,
                       std::ostream& out) {
  nlohmann::json j;
  j["fitted_rate"] = report.fitted_rate;
  j["config_hash"] = report.config_hash;
  j["config"] = config_echo;
  j["rows"] = nlohmann::json::array();
  for (const ConvergenceRow& r : report.rows) {
    j["rows"].push_back({{"epsilon", r.epsilon},
                         {"grad_err_sq", r.grad_error_sq},
                         {"jump_err_sq_over_eps", r.jump_error_sq_over_eps},
                         {"energy_err", r.energy_error},
                         {"micro_dofs", r.micro_dofs},
                         {"macro_dofs", r.macro_dofs},
                         {"newton_micro", r.newton_iters_micro},
                         {"newton_macro", r.newton_iters_macro},
                         {"wall_s", r.wall_time}});
  }
  out << j.dump(2) << '\n';
}

std::string fnv1a_hex(const std::string& data) {
  std::uint64_t hash = 1469598103934665603ull;
  for (unsigned char c : data) {
    hash ^= c;
    hash *= 1099511628211ull;
  }
  char buf[20];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(hash));
  return buf;
}

}  // namespace pnph
