#pragma once

#include <string>
#include <vector>

#include "pnph/assembly.hpp"
#include "pnph/geometry.hpp"
#include "pnph/pb_solver.hpp"
#include "pnph/study.hpp"

namespace pnph {

// Flat INI-style configuration ([section] headers, `key = value` lines, `#`
// comments). Defaults mirror the worked example: the 2D quarter-inset cell
// with unit permittivities, alpha = 2, g = 1 and a symmetric 1:-1 ion pair.
struct ToolkitConfig {
  // [geometry]
  int dim = 2;
  Point inclusion_lower{0.25, 0.25};
  Point inclusion_upper{0.75, 0.75};
  double clearance = 0.25;
  Point domain_lower{0.0, 0.0};
  Point domain_upper{1.0, 1.0};
  double gap = 0.2;
  // [material]
  double sigma_solid = 1.0;
  double sigma_pore = 1.0;
  double alpha = 2.0;
  double g = 1.0;
  // [ions]
  std::vector<double> charges{1.0, -1.0};
  double kT = 1.0;
  double neutrality_tol = 1e-12;
  // [solver]
  double newton_tol = 1e-10;
  int newton_max_iter = 50;
  double exp_clamp = 50.0;
  int max_halvings = 20;
  double linear_tol = 1e-10;
  // [study]
  std::vector<double> epsilons{0.5, 0.25, 0.125};
  double h_cell = 1.0 / 16.0;
  double macro_h = 1.0 / 64.0;

  CellGeometry cell() const;
  MaterialModel material() const;
  IonSystem ions() const;
  Box domain() const;
  NewtonConfig newton() const;
  StudySetup study_setup(int threads = 1) const;
};

// Parses and fully validates a config; every violation is collected and
// reported together (ConfigError), not just the first.
ToolkitConfig parse_config(const std::string& path);
ToolkitConfig parse_config_text(const std::string& text, const std::string& origin = "<text>");

// Canonical serialization; parse(serialize(c)) reproduces c exactly.
std::string serialize_config(const ToolkitConfig& config);

}  // namespace pnph
