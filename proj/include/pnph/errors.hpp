#pragma once

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace pnph {

// Base class for all toolkit errors.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// No whole cell of the requested size fits into the domain.
struct EmptyPaving : Error {
  using Error::Error;
};

// Inclusion corners do not lie on the mesh lattice at the requested resolution.
struct MisalignedInclusion : Error {
  using Error::Error;
};

// The assembled system has a nontrivial kernel (missing constraint).
struct SingularSystem : Error {
  using Error::Error;
};

// Iterative linear solve failed to reach the requested tolerance.
struct NotConverged : Error {
  NotConverged(int iterations_, double residual_)
      : Error("linear solver did not converge: " + std::to_string(iterations_) +
              " iterations, residual " + std::to_string(residual_)),
        iterations(iterations_),
        residual(residual_) {}
  int iterations;
  double residual;
};

// Newton iteration exhausted its budget without meeting the residual tolerance.
struct NewtonDiverged : Error {
  NewtonDiverged(int iterations_, std::vector<double> history)
      : Error("Newton did not converge in " + std::to_string(iterations_) + " iterations"),
        iterations(iterations_),
        residual_history(std::move(history)) {}
  int iterations;
  std::vector<double> residual_history;
};

// The two effective-tensor formulas disagree or the tensor is not positive definite.
struct CertificationFailed : Error {
  using Error::Error;
};

// Point evaluation outside the meshed domain.
struct OutOfDomain : Error {
  using Error::Error;
};

// Two fields passed to a binary operation do not live on the same mesh.
struct MeshMismatch : Error {
  using Error::Error;
};

// Rate fit requested with fewer than two usable rows.
struct InsufficientData : Error {
  using Error::Error;
};

// Sampled monotonicity constant came out non-positive.
struct NonPositive : Error {
  using Error::Error;
};

// Configuration file failed to parse or validate; carries every violation found.
struct ConfigError : Error {
  ConfigError(std::string summary, std::vector<std::string> violations_)
      : Error(std::move(summary)), violations(std::move(violations_)) {}
  std::vector<std::string> violations;
};

}  // namespace pnph
