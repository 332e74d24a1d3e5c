#include "pnph/cell_problems.hpp"

#include <cmath>
#include <limits>
#include <map>

#include <Eigen/Eigenvalues>

#include "pnph/errors.hpp"

namespace pnph {

double unfold(const std::function<double(const Point&)>& f, const Box& domain, int dim,
              double epsilon, const Index& p, const Point& y) {
  Point x{0.0, 0.0};
  for (int a = 0; a < dim; ++a) x[a] = epsilon * (static_cast<double>(p[a]) + y[a]);
  const double tol = 1e-12 * std::max(1.0, std::abs(domain.extent(0)));
  if (!domain.contains(x, dim, tol))
    throw OutOfDomain("unfold: unfolded point lies outside the reference domain");
  return f(x);
}

namespace {

// Operator shared by the traction and volume-force cell problems: the volume
// term keeps the system definite without boundary or mean constraints.
SparseSystem cell_reaction_system(const BrokenMesh& mesh, const MaterialModel& material,
                                  Eigen::VectorXd rhs) {
  SparseSystem sys;
  sys.matrix = assemble_stiffness(mesh, material);
  sys.matrix += assemble_mass(mesh, RegionFilter::all);
  sys.rhs = std::move(rhs);
  return sys;
}

}  // namespace

BrokenField solve_cell_traction(std::shared_ptr<const BrokenMesh> cell_mesh,
                                const MaterialModel& material, double linear_tol) {
  const BrokenMesh& mesh = *cell_mesh;
  if (!mesh.periodic_pairs.empty())
    throw Error("solve_cell_traction: expected a non-periodic cell mesh");
  SparseSystem sys = cell_reaction_system(mesh, material, assemble_minus_boundary_source(mesh, 1.0));
  BrokenField L{std::move(cell_mesh), solve_spd(sys, linear_tol)};
  return L;
}

BrokenField solve_cell_volume_force(std::shared_ptr<const BrokenMesh> cell_mesh,
                                    const MaterialModel& material, const UnfoldedForce& force,
                                    const Index& cell_index, double linear_tol) {
  const BrokenMesh& mesh = *cell_mesh;
  Eigen::VectorXd rhs = assemble_volume_load(
      mesh, RegionFilter::pore, [&](const Point& y) { return force(cell_index, y); });
  SparseSystem sys = cell_reaction_system(mesh, material, std::move(rhs));
  BrokenField M{std::move(cell_mesh), solve_spd(sys, linear_tol)};
  return M;
}

std::vector<BrokenField> solve_cell_oscillation(std::shared_ptr<const BrokenMesh> periodic_mesh,
                                                const MaterialModel& material, double linear_tol) {
  const BrokenMesh& mesh = *periodic_mesh;
  if (mesh.periodic_pairs.empty())
    throw Error("solve_cell_oscillation: mesh has no periodic identification");

  SparseMatrix op = assemble_stiffness(mesh, material);
  op += assemble_interface_penalty(mesh, material.alpha);

  const PeriodicMap pmap = make_periodic_map(mesh);
  const SparseMatrix op_red = reduce_matrix(op, pmap);
  const Eigen::VectorXd mean_weights = reduce_vector(
      assemble_volume_load(mesh, RegionFilter::all, [](const Point&) { return 1.0; }), pmap);

  std::vector<BrokenField> N;
  for (int i = 0; i < mesh.dim; ++i) {
    Eigen::Vector2d dir = Eigen::Vector2d::Zero();
    dir[i] = 1.0;
    Eigen::VectorXd rhs = assemble_gradient_load(mesh, [&](int e, const Point&) {
      return Eigen::Vector2d(-material.tensor(mesh.elements[e].region) * dir);
    });
    SparseSystem sys =
        with_zero_mean_constraint(op_red, reduce_vector(rhs, pmap), mean_weights);
    N.push_back(BrokenField{periodic_mesh, expand_vector(solve_spd(sys, linear_tol), pmap)});
  }
  return N;
}

namespace {

Eigen::Matrix2d corrected_flux(const BrokenMesh& mesh, const std::vector<BrokenField>& N,
                               const MeshElement& e, const Eigen::Matrix2d& A, double xi,
                               double eta) {
  // rows are (grad N_i + e_i)^T A
  Eigen::Matrix2d rows = Eigen::Matrix2d::Zero();
  for (int i = 0; i < mesh.dim; ++i) {
    Eigen::Vector2d gi = element_gradient(mesh, e, N[i].values, xi, eta);
    gi[i] += 1.0;
    for (int j = 0; j < mesh.dim; ++j) rows(i, j) = gi[0] * A(0, j) + gi[1] * A(1, j);
  }
  return rows;
}

// Reference coordinates of a physical point inside a given element.
void ref_coords(const BrokenMesh& mesh, const MeshElement& e, const Point& x, double& xi,
                double& eta) {
  const Point o = mesh.element_origin(e);
  xi = (x[0] - o[0]) / mesh.h;
  eta = mesh.dim > 1 ? (x[1] - o[1]) / mesh.h : 0.0;
}

Point facet_point(const BrokenMesh& mesh, const FacetPair& f, double s) {
  const Point& c0 = mesh.dof_coords[f.plus_dofs[0]];
  if (mesh.dim == 1) return c0;
  const Point& c1 = mesh.dof_coords[f.plus_dofs[1]];
  return {c0[0] + s * (c1[0] - c0[0]), c0[1] + s * (c1[1] - c0[1])};
}

}  // namespace

EffectiveTensor compute_effective_tensor(const std::vector<BrokenField>& N,
                                         const MaterialModel& material, double agreement_tol) {
  const BrokenMesh& mesh = *N.at(0).mesh;
  const int dim = mesh.dim;
  const double cell_volume = region_volume(mesh, RegionFilter::all);
  const int nq = element_quad_count(dim);

  Eigen::Matrix2d vol_avg = Eigen::Matrix2d::Zero();
  Eigen::Matrix2d energy = Eigen::Matrix2d::Zero();
  for (const MeshElement& e : mesh.elements) {
    const Eigen::Matrix2d A = material.tensor(e.region);
    for (int q = 0; q < nq; ++q) {
      double xi, eta, w;
      element_quad_point(dim, mesh.h, q, xi, eta, w);
      Eigen::Matrix2d grads = Eigen::Matrix2d::Zero();  // rows grad N_i + e_i
      for (int i = 0; i < dim; ++i) {
        Eigen::Vector2d gi = element_gradient(mesh, e, N[i].values, xi, eta);
        gi[i] += 1.0;
        grads.row(i).head(dim) = gi.head(dim).transpose();
      }
      vol_avg += w * grads * A;
      energy += w * grads * A * grads.transpose();
    }
  }

  // interface contribution of the energy formula
  const int nqf = facet_quad_count(dim);
  const int nf = mesh.dofs_per_facet_side();
  for (const FacetPair& f : mesh.interface_facets)
    for (int q = 0; q < nqf; ++q) {
      double s, w;
      facet_quad_point(dim, f.measure, q, s, w);
      const double sh[2] = {1.0 - s, s};
      Eigen::Vector2d jumps = Eigen::Vector2d::Zero();
      for (int i = 0; i < dim; ++i)
        for (int a = 0; a < nf; ++a)
          jumps[i] += sh[a] * (N[i].values[f.plus_dofs[a]] - N[i].values[f.minus_dofs[a]]);
      energy += material.alpha * w * jumps * jumps.transpose();
    }

  vol_avg /= cell_volume;
  energy /= cell_volume;
  if (dim == 1) {
    vol_avg(1, 1) = energy(1, 1) = 1.0;  // keep the unused block harmless
    vol_avg(0, 1) = vol_avg(1, 0) = energy(0, 1) = energy(1, 0) = 0.0;
  }

  EffectiveTensor result;
  result.volume_average = vol_avg;
  result.energy_formula = energy;
  result.agreement = 0.0;
  for (int i = 0; i < dim; ++i)
    for (int j = 0; j < dim; ++j)
      result.agreement = std::max(result.agreement, std::abs(vol_avg(i, j) - energy(i, j)));
  if (result.agreement > agreement_tol)
    throw CertificationFailed("effective tensor: volume-average and energy formulas disagree by " +
                              std::to_string(result.agreement));

  result.certified = 0.5 * (energy + energy.transpose());
  if (dim == 1) {
    result.min_eigenvalue = result.certified(0, 0);
  } else {
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(result.certified);
    result.min_eigenvalue = es.eigenvalues().minCoeff();
  }
  if (!(result.min_eigenvalue > 0.0))
    throw CertificationFailed("effective tensor is not positive definite");
  return result;
}

QuadMatrixField compute_flux_decomposition(const std::vector<BrokenField>& N,
                                           const MaterialModel& material,
                                           const Eigen::Matrix2d& A0,
                                           CorrectorDiagnostics& diagnostics) {
  const BrokenMesh& mesh = *N.at(0).mesh;
  const int dim = mesh.dim;
  const int nq = element_quad_count(dim);
  const double cell_volume = region_volume(mesh, RegionFilter::all);

  QuadMatrixField B;
  B.quad_per_element = nq;
  B.values.reserve(mesh.elements.size() * nq);

  Eigen::Matrix2d mean = Eigen::Matrix2d::Zero();
  for (const MeshElement& e : mesh.elements) {
    const Eigen::Matrix2d A = material.tensor(e.region);
    for (int q = 0; q < nq; ++q) {
      double xi, eta, w;
      element_quad_point(dim, mesh.h, q, xi, eta, w);
      Eigen::Matrix2d Bq = corrected_flux(mesh, N, e, A, xi, eta) - A0;
      if (dim == 1) Bq(1, 1) = Bq(0, 1) = Bq(1, 0) = 0.0;
      mean += w * Bq;
      B.values.push_back(Bq);
    }
  }
  mean /= cell_volume;
  diagnostics.mean_B = mean.cwiseAbs().maxCoeff();

  // Corners of the interface: facet endpoints where facets of two different
  // normal directions meet. The exact flux is singular there.
  std::vector<Point> corners;
  if (dim == 2) {
    std::map<std::pair<long long, long long>, std::array<bool, 2>> endpoint_axes;
    auto key = [&](const Point& p) {
      return std::make_pair(static_cast<long long>(std::llround(p[0] / mesh.h * 4)),
                            static_cast<long long>(std::llround(p[1] / mesh.h * 4)));
    };
    for (const FacetPair& f : mesh.interface_facets) {
      const int axis = std::abs(f.normal[0]) > 0.5 ? 0 : 1;
      for (int k = 0; k < 2; ++k) endpoint_axes[key(mesh.dof_coords[f.plus_dofs[k]])][axis] = true;
    }
    for (const auto& [k, axes] : endpoint_axes)
      if (axes[0] && axes[1])
        corners.push_back({k.first * mesh.h / 4.0, k.second * mesh.h / 4.0});
  }
  auto corner_distance = [&](const Point& x) {
    double d = std::numeric_limits<double>::infinity();
    for (const Point& c : corners) d = std::min(d, std::hypot(x[0] - c[0], x[1] - c[1]));
    return d;
  };

  // interface relation and side agreement at facet quadrature points
  const int nqf = facet_quad_count(dim);
  const int nf = mesh.dofs_per_facet_side();
  double rel_far = 0.0, rel_global = 0.0, rel_l2 = 0.0;
  double jump_far = 0.0, jump_global = 0.0;
  for (const FacetPair& f : mesh.interface_facets) {
    const MeshElement& ep = mesh.elements[f.plus_element];
    const MeshElement& em = mesh.elements[f.minus_element];
    const Eigen::Vector2d nu(f.normal[0], f.normal[1]);
    for (int q = 0; q < nqf; ++q) {
      double s, w;
      facet_quad_point(dim, f.measure, q, s, w);
      const Point x = facet_point(mesh, f, s);
      const bool regular = corner_distance(x) > diagnostics.corner_margin;
      double xi, eta;
      ref_coords(mesh, ep, x, xi, eta);
      const Eigen::Matrix2d Bp =
          corrected_flux(mesh, N, ep, material.tensor(ep.region), xi, eta) - A0;
      ref_coords(mesh, em, x, xi, eta);
      const Eigen::Matrix2d Bm =
          corrected_flux(mesh, N, em, material.tensor(em.region), xi, eta) - A0;

      const double sh[2] = {1.0 - s, s};
      double res_pt = 0.0, jump_pt = 0.0;
      for (int i = 0; i < dim; ++i) {
        double jump_Ni = 0.0;
        for (int a = 0; a < nf; ++a)
          jump_Ni += sh[a] * (N[i].values[f.plus_dofs[a]] - N[i].values[f.minus_dofs[a]]);
        double flux = 0.0, flux_jump = 0.0;
        for (int j = 0; j < dim; ++j) {
          flux += (A0(i, j) + 0.5 * (Bp(i, j) + Bm(i, j))) * nu[j];
          flux_jump += (Bp(i, j) - Bm(i, j)) * nu[j];
        }
        res_pt = std::max(res_pt, std::abs(flux - material.alpha * jump_Ni));
        jump_pt = std::max(jump_pt, std::abs(flux_jump));
      }
      rel_global = std::max(rel_global, res_pt);
      jump_global = std::max(jump_global, jump_pt);
      rel_l2 += w * res_pt * res_pt;
      if (regular) {
        rel_far = std::max(rel_far, res_pt);
        jump_far = std::max(jump_far, jump_pt);
      }
    }
  }
  diagnostics.interface_relation_residual = rel_far;
  diagnostics.interface_relation_global = rel_global;
  diagnostics.interface_relation_l2 = std::sqrt(rel_l2);
  diagnostics.jump_B = jump_far;
  diagnostics.jump_B_global = jump_global;

  // Weak divergence residual of each row, tested against the periodic broken
  // basis: int B_i . grad u + alpha int [[N_i]][[u]] - A0_i . int [[u]] nu.
  const PeriodicMap pmap = make_periodic_map(mesh);
  const SparseMatrix penalty = assemble_interface_penalty(mesh, material.alpha);
  double weak_res = 0.0;
  const int nd = mesh.dofs_per_element();
  for (int i = 0; i < dim; ++i) {
    Eigen::VectorXd r = penalty * N[i].values;
    double gk[2];
    for (std::size_t ei = 0; ei < mesh.elements.size(); ++ei) {
      const MeshElement& e = mesh.elements[ei];
      for (int q = 0; q < nq; ++q) {
        double xi, eta, w;
        element_quad_point(dim, mesh.h, q, xi, eta, w);
        const Eigen::Matrix2d& Bq = B.at(ei, q);
        for (int k = 0; k < nd; ++k) {
          q1_shape_gradient(dim, k, xi, eta, mesh.h, gk);
          r[e.dofs[k]] += w * (Bq(i, 0) * gk[0] + Bq(i, 1) * gk[1]);
        }
      }
    }
    for (const FacetPair& f : mesh.interface_facets) {
      double a0nu = 0.0;
      for (int j = 0; j < dim; ++j) a0nu += A0(i, j) * f.normal[j];
      for (int q = 0; q < nqf; ++q) {
        double s, w;
        facet_quad_point(dim, f.measure, q, s, w);
        const double sh[2] = {1.0 - s, s};
        for (int a = 0; a < nf; ++a) {
          r[f.plus_dofs[a]] -= w * sh[a] * a0nu;
          r[f.minus_dofs[a]] += w * sh[a] * a0nu;
        }
      }
    }
    weak_res = std::max(weak_res, reduce_vector(r, pmap).cwiseAbs().maxCoeff());
  }
  diagnostics.weak_divergence_residual = weak_res;
  return B;
}

CellCorrectors build_cell_correctors(const CellGeometry& cell, const MaterialModel& material,
                                     double h, double linear_tol, double agreement_tol) {
  CellCorrectors out;
  out.traction_mesh =
      std::make_shared<const BrokenMesh>(build_cell_mesh(cell, h, /*periodic=*/false,
                                                         /*broken=*/true));
  out.periodic_mesh =
      std::make_shared<const BrokenMesh>(build_cell_mesh(cell, h, /*periodic=*/true,
                                                         /*broken=*/true));

  out.L = solve_cell_traction(out.traction_mesh, material, linear_tol);
  const CellMeasures cm = measures(cell);
  out.diagnostics.mean_L = integrate_value(out.L, RegionFilter::all);
  out.diagnostics.mean_L_error = std::abs(out.diagnostics.mean_L - cm.surf_inclusion);

  out.N = solve_cell_oscillation(out.periodic_mesh, material, linear_tol);
  const EffectiveTensor tensor = compute_effective_tensor(out.N, material, agreement_tol);
  out.A0 = tensor.certified;
  out.diagnostics.formula_agreement = tensor.agreement;
  out.diagnostics.min_eigenvalue = tensor.min_eigenvalue;
  out.B = compute_flux_decomposition(out.N, material, out.A0, out.diagnostics);
  return out;
}

ExpansionResidual verify_traction_expansion(const PavedDomain& paved,
                                            const MaterialModel& material, double h_cell,
                                            const std::function<double(const Point&)>& probe) {
  const BrokenMesh mesh = build_domain_mesh(paved, h_cell);
  Eigen::VectorXd probe_vec(mesh.dof_count);
  for (int d = 0; d < mesh.dof_count; ++d) probe_vec[d] = probe(mesh.dof_coords[d]);

  const Eigen::VectorXd trace = assemble_minus_boundary_source(mesh, 1.0);
  const Eigen::VectorXd volume =
      assemble_volume_load(mesh, RegionFilter::all, [](const Point&) { return 1.0; });
  const CellMeasures cm = measures(paved.cell);

  ExpansionResidual r;
  r.epsilon = paved.epsilon;
  r.residual = paved.epsilon * material.g * trace.dot(probe_vec) -
               cm.surf_inclusion * material.g * volume.dot(probe_vec);
  r.residual_over_eps = r.residual / paved.epsilon;
  return r;
}

ExpansionResidual verify_volume_expansion(const PavedDomain& paved, const MaterialModel& material,
                                          double h_cell,
                                          const std::function<double(const Point&)>& f,
                                          const std::function<double(const Point&)>& probe,
                                          bool check_cell_averages, double linear_tol) {
  const BrokenMesh mesh = build_domain_mesh(paved, h_cell);
  const CellMeasures cm = measures(paved.cell);
  const int nq = element_quad_count(mesh.dim);

  double pore_term = 0.0, full_term = 0.0;
  for (const MeshElement& e : mesh.elements) {
    for (int q = 0; q < nq; ++q) {
      double xi, eta, w;
      element_quad_point(mesh.dim, mesh.h, q, xi, eta, w);
      const Point x = element_point(mesh, e, xi, eta);
      const double v = w * f(x) * probe(x);
      full_term += v;
      if (e.region == Region::pore) pore_term += v;
    }
  }

  ExpansionResidual r;
  r.epsilon = paved.epsilon;
  r.residual = pore_term - cm.vol_pore * full_term;
  r.residual_over_eps = r.residual / paved.epsilon;

  if (check_cell_averages) {
    auto cell_mesh = std::make_shared<const BrokenMesh>(
        build_cell_mesh(paved.cell, h_cell, /*periodic=*/false, /*broken=*/true));
    UnfoldedForce force{f, paved.domain, paved.cell.dim, paved.epsilon};
    double worst = 0.0;
    for (const Index& p : paved.retained_cells) {
      const BrokenField M = solve_cell_volume_force(cell_mesh, material, force, p, linear_tol);
      const double mean_M = integrate_value(M, RegionFilter::all);
      // pore average of the unfolded force on this cell
      double target = 0.0;
      for (const MeshElement& e : cell_mesh->elements) {
        if (e.region != Region::pore) continue;
        for (int q = 0; q < nq; ++q) {
          double xi, eta, w;
          element_quad_point(cell_mesh->dim, cell_mesh->h, q, xi, eta, w);
          target += w * force(p, element_point(*cell_mesh, e, xi, eta));
        }
      }
      worst = std::max(worst, std::abs(mean_M - target));
    }
    r.cell_average_check = worst;
  }
  return r;
}

}  // namespace pnph
