// Independent brute-force reference implementations used as test oracles.
// Everything here is assembled from hand-derived local matrices and dense
// linear algebra; none of it shares code with the library's assembly or
// solver paths.
#pragma once

#include <cmath>
#include <cstdlib>
#include <functional>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "pnph/broken_mesh.hpp"
#include "pnph/pb_solver.hpp"

namespace oracle {

using pnph::BrokenMesh;
using pnph::FacetPair;
using pnph::MeshElement;
using pnph::Region;

// Seed for randomized property tests; PNPH_SEED overrides.
inline unsigned rng_seed() {
  if (const char* env = std::getenv("PNPH_SEED")) return static_cast<unsigned>(std::atoi(env));
  return 20240811u;
}

// --------------------------------------------------------------------------
// Hand-derived local matrices.

// 1D P1 on an interval of length h: stiffness (sigma/h)[[1,-1],[-1,1]],
// mass (h/6)[[2,1],[1,2]].
// 2D Q1 on an h x h square: stiffness (sigma/6)[[4,-1,-1,-2],...] (h-free),
// mass (h^2/36)[[4,2,2,1],...].
inline Eigen::MatrixXd local_stiffness(int dim, double h, double sigma) {
  if (dim == 1) {
    Eigen::MatrixXd k(2, 2);
    k << 1, -1, -1, 1;
    return sigma / h * k;
  }
  Eigen::MatrixXd k(4, 4);
  k << 4, -1, -1, -2,
      -1, 4, -2, -1,
      -1, -2, 4, -1,
      -2, -1, -1, 4;
  return sigma / 6.0 * k;
}

inline Eigen::MatrixXd local_mass(int dim, double h) {
  if (dim == 1) {
    Eigen::MatrixXd m(2, 2);
    m << 2, 1, 1, 2;
    return h / 6.0 * m;
  }
  Eigen::MatrixXd m(4, 4);
  m << 4, 2, 2, 1,
      2, 4, 1, 2,
      2, 1, 4, 2,
      1, 2, 2, 4;
  return h * h / 36.0 * m;
}

// Trace mass on a facet: the scalar 1 at a 1D interface point, (h/6)[[2,1],[1,2]]
// on a 2D edge of length h.
inline Eigen::MatrixXd local_trace_mass(int dim, double measure) {
  if (dim == 1) {
    return Eigen::MatrixXd::Ones(1, 1);
  }
  Eigen::MatrixXd t(2, 2);
  t << 2, 1, 1, 2;
  return measure / 6.0 * t;
}

// --------------------------------------------------------------------------
// Dense global operators.

inline Eigen::MatrixXd dense_stiffness(const BrokenMesh& mesh,
                                       const std::function<double(Region)>& sigma) {
  Eigen::MatrixXd K = Eigen::MatrixXd::Zero(mesh.dof_count, mesh.dof_count);
  const int nd = mesh.dofs_per_element();
  for (const MeshElement& e : mesh.elements) {
    const Eigen::MatrixXd k = local_stiffness(mesh.dim, mesh.h, sigma(e.region));
    for (int a = 0; a < nd; ++a)
      for (int b = 0; b < nd; ++b) K(e.dofs[a], e.dofs[b]) += k(a, b);
  }
  return K;
}

inline Eigen::MatrixXd dense_mass(const BrokenMesh& mesh,
                                  const std::function<bool(Region)>& select) {
  Eigen::MatrixXd M = Eigen::MatrixXd::Zero(mesh.dof_count, mesh.dof_count);
  const int nd = mesh.dofs_per_element();
  for (const MeshElement& e : mesh.elements) {
    if (!select(e.region)) continue;
    const Eigen::MatrixXd m = local_mass(mesh.dim, mesh.h);
    for (int a = 0; a < nd; ++a)
      for (int b = 0; b < nd; ++b) M(e.dofs[a], e.dofs[b]) += m(a, b);
  }
  return M;
}

inline Eigen::MatrixXd dense_penalty(const BrokenMesh& mesh, double weight) {
  Eigen::MatrixXd P = Eigen::MatrixXd::Zero(mesh.dof_count, mesh.dof_count);
  const int nf = mesh.dofs_per_facet_side();
  for (const FacetPair& f : mesh.interface_facets) {
    const Eigen::MatrixXd t = local_trace_mass(mesh.dim, f.measure);
    for (int a = 0; a < nf; ++a)
      for (int b = 0; b < nf; ++b) {
        const double v = weight * t(a, b);
        P(f.plus_dofs[a], f.plus_dofs[b]) += v;
        P(f.minus_dofs[a], f.minus_dofs[b]) += v;
        P(f.plus_dofs[a], f.minus_dofs[b]) -= v;
        P(f.minus_dofs[a], f.plus_dofs[b]) -= v;
      }
  }
  return P;
}

inline Eigen::VectorXd dense_minus_source(const BrokenMesh& mesh, double coefficient) {
  Eigen::VectorXd b = Eigen::VectorXd::Zero(mesh.dof_count);
  const int nf = mesh.dofs_per_facet_side();
  for (const FacetPair& f : mesh.interface_facets) {
    const double per_dof = mesh.dim == 1 ? 1.0 : 0.5 * f.measure;
    for (int a = 0; a < nf; ++a) b(f.minus_dofs[a]) += coefficient * per_dof;
  }
  return b;
}

// Dense prolongation of the periodic identification: column per retained DOF,
// slave rows copy their master's column.
inline Eigen::MatrixXd dense_periodic_prolongation(const BrokenMesh& mesh,
                                                   std::vector<int>& reduced_to_full) {
  std::vector<int> master_of(mesh.dof_count, -1);
  for (const auto& [slave, master] : mesh.periodic_pairs) master_of[slave] = master;
  std::vector<int> column(mesh.dof_count, -1);
  reduced_to_full.clear();
  int nred = 0;
  for (int d = 0; d < mesh.dof_count; ++d)
    if (master_of[d] < 0) {
      column[d] = nred++;
      reduced_to_full.push_back(d);
    }
  Eigen::MatrixXd P = Eigen::MatrixXd::Zero(mesh.dof_count, nred);
  for (int d = 0; d < mesh.dof_count; ++d)
    P(d, column[master_of[d] < 0 ? d : master_of[d]]) = 1.0;
  return P;
}

// --------------------------------------------------------------------------
// Independent shape evaluation (tensor products of 1D hats) for the oracle's
// nonlinear quadrature.

inline double hat(int k, double t) { return k == 0 ? 1.0 - t : t; }

inline double oracle_shape(int dim, int k, double xi, double eta) {
  if (dim == 1) return hat(k, xi);
  return hat(k % 2, xi) * hat(k / 2, eta);
}

// Two-point Gauss rule per axis, matching the discrete problem definition.
inline void oracle_gauss(int q, double& t, double& w) {
  const double c = 1.0 / (2.0 * std::sqrt(3.0));
  t = q == 0 ? 0.5 - c : 0.5 + c;
  w = 0.5;
}

// Dense damped-free Newton solve of the microscale problem. Dirichlet DOFs are
// eliminated by zeroing rows/columns with a unit diagonal. Returns the full
// DOF vector.
inline Eigen::VectorXd dense_newton_micro(const BrokenMesh& mesh, double sigma_solid,
                                          double sigma_pore, double alpha, double g,
                                          double epsilon, const std::vector<double>& charges,
                                          double kT, double tol = 1e-12, int max_iter = 60) {
  const int n = mesh.dof_count;
  Eigen::MatrixXd K = dense_stiffness(
      mesh, [&](Region r) { return r == Region::solid ? sigma_solid : sigma_pore; });
  K += dense_penalty(mesh, alpha / epsilon);
  Eigen::VectorXd load = dense_minus_source(mesh, epsilon * g);

  std::vector<char> fixed(n, 0);
  for (int d : mesh.dirichlet_dofs) fixed[d] = 1;
  for (int d = 0; d < n; ++d)
    if (fixed[d]) {
      K.row(d).setZero();
      K.col(d).setZero();
      K(d, d) = 1.0;
      load[d] = 0.0;
    }

  const int nd = mesh.dofs_per_element();
  const int nq1 = 2;

  auto ionic = [&](const Eigen::VectorXd& phi, Eigen::VectorXd& r, Eigen::MatrixXd& J) {
    for (const MeshElement& e : mesh.elements) {
      if (e.region != Region::pore) continue;
      for (int qx = 0; qx < nq1; ++qx)
        for (int qy = 0; qy < (mesh.dim == 1 ? 1 : nq1); ++qy) {
          double xi, wx, eta = 0.0, wy = 1.0;
          oracle_gauss(qx, xi, wx);
          if (mesh.dim > 1) oracle_gauss(qy, eta, wy);
          const double w = wx * wy * std::pow(mesh.h, mesh.dim);
          double phi_q = 0.0;
          for (int k = 0; k < nd; ++k)
            phi_q += oracle_shape(mesh.dim, k, xi, eta) * phi[e.dofs[k]];
          double dens = 0.0, slope = 0.0;
          for (double z : charges) {
            dens -= z * std::exp(-z * phi_q / kT);
            slope += z * z / kT * std::exp(-z * phi_q / kT);
          }
          for (int a = 0; a < nd; ++a) {
            const double sa = oracle_shape(mesh.dim, a, xi, eta);
            if (!fixed[e.dofs[a]]) r[e.dofs[a]] += w * dens * sa;
            for (int b = 0; b < nd; ++b)
              if (!fixed[e.dofs[a]] && !fixed[e.dofs[b]])
                J(e.dofs[a], e.dofs[b]) += w * slope * sa * oracle_shape(mesh.dim, b, xi, eta);
          }
        }
    }
  };

  Eigen::VectorXd phi = Eigen::VectorXd::Zero(n);
  for (int iter = 0; iter < max_iter; ++iter) {
    Eigen::VectorXd r = K * phi - load;
    Eigen::MatrixXd J = K;
    ionic(phi, r, J);
    for (int d = 0; d < n; ++d)
      if (fixed[d]) r[d] = phi[d];
    if (r.norm() <= tol) break;
    phi -= J.fullPivLu().solve(r);
  }
  return phi;
}

// Closed-form 1D effective coefficient for a piecewise-constant cell:
// serial sum of bulk resistivities plus two interface resistances.
inline double analytic_A0_1d(double sigma_pore, double sigma_solid, double a, double b,
                             double alpha) {
  const double bulk = (1.0 - (b - a)) / sigma_pore + (b - a) / sigma_solid;
  return 1.0 / (bulk + 2.0 / alpha);
}

}  // namespace oracle
