#include "pnph/config.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "pnph/errors.hpp"

namespace pnph {

CellGeometry ToolkitConfig::cell() const {
  return CellGeometry(dim, Box{inclusion_lower, inclusion_upper}, clearance);
}

MaterialModel ToolkitConfig::material() const {
  MaterialModel m(sigma_solid, sigma_pore, alpha, g);
  return m;
}

IonSystem ToolkitConfig::ions() const { return IonSystem(charges, kT, neutrality_tol); }

Box ToolkitConfig::domain() const {
  Box b{domain_lower, domain_upper};
  if (dim == 1) b.lower[1] = b.upper[1] = 0.0;
  return b;
}

NewtonConfig ToolkitConfig::newton() const {
  NewtonConfig n;
  n.abs_tol = newton_tol;
  n.max_iter = newton_max_iter;
  n.exp_clamp = exp_clamp;
  n.max_halvings = max_halvings;
  return n;
}

StudySetup ToolkitConfig::study_setup(int threads) const {
  StudySetup s{cell(),  material(), ions(),   domain(), gap,           epsilons,
               h_cell,  macro_h,    newton(), linear_tol, threads,     serialize_config(*this)};
  return s;
}

namespace {

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

struct Parser {
  std::string origin;
  std::vector<std::string> violations;
  ToolkitConfig cfg;
  int line_no = 0;
  std::string section;

  void fail(const std::string& msg) {
    violations.push_back(origin + ":" + std::to_string(line_no) + ": " + msg);
  }
  void fail_field(const std::string& field, const std::string& constraint) {
    violations.push_back(origin + ": [" + field + "] " + constraint);
  }

  bool parse_double(const std::string& text, double& out) {
    std::istringstream ss(text);
    char extra;
    if (ss >> out && !(ss >> extra)) return true;
    fail("cannot parse '" + text + "' as a number");
    return false;
  }

  bool parse_int(const std::string& text, int& out) {
    std::istringstream ss(text);
    char extra;
    if (ss >> out && !(ss >> extra)) return true;
    fail("cannot parse '" + text + "' as an integer");
    return false;
  }

  bool parse_list(const std::string& text, std::vector<double>& out) {
    std::istringstream ss(text);
    std::vector<double> vals;
    double v;
    while (ss >> v) vals.push_back(v);
    if (!ss.eof()) {
      fail("cannot parse '" + text + "' as a list of numbers");
      return false;
    }
    out = std::move(vals);
    return true;
  }

  bool parse_point(const std::string& text, Point& out, int dim) {
    std::vector<double> vals;
    if (!parse_list(text, vals)) return false;
    if (static_cast<int>(vals.size()) != dim) {
      fail("expected " + std::to_string(dim) + " coordinate(s) in '" + text + "'");
      return false;
    }
    out = {vals[0], vals.size() > 1 ? vals[1] : 0.0};
    return true;
  }

  void handle(const std::string& key, const std::string& value) {
    const std::string full = section + "." + key;
    if (section == "geometry") {
      if (key == "dim") parse_int(value, cfg.dim);
      else if (key == "inclusion_lower") parse_point(value, cfg.inclusion_lower, cfg.dim);
      else if (key == "inclusion_upper") parse_point(value, cfg.inclusion_upper, cfg.dim);
      else if (key == "clearance") parse_double(value, cfg.clearance);
      else if (key == "domain_lower") parse_point(value, cfg.domain_lower, cfg.dim);
      else if (key == "domain_upper") parse_point(value, cfg.domain_upper, cfg.dim);
      else if (key == "gap") parse_double(value, cfg.gap);
      else fail("unknown key '" + full + "'");
    } else if (section == "material") {
      if (key == "sigma_solid") parse_double(value, cfg.sigma_solid);
      else if (key == "sigma_pore") parse_double(value, cfg.sigma_pore);
      else if (key == "alpha") parse_double(value, cfg.alpha);
      else if (key == "g") parse_double(value, cfg.g);
      else fail("unknown key '" + full + "'");
    } else if (section == "ions") {
      if (key == "charges") parse_list(value, cfg.charges);
      else if (key == "kT") parse_double(value, cfg.kT);
      else if (key == "neutrality_tol") parse_double(value, cfg.neutrality_tol);
      else fail("unknown key '" + full + "'");
    } else if (section == "solver") {
      if (key == "newton_tol") parse_double(value, cfg.newton_tol);
      else if (key == "newton_max_iter") parse_int(value, cfg.newton_max_iter);
      else if (key == "exp_clamp") parse_double(value, cfg.exp_clamp);
      else if (key == "max_halvings") parse_int(value, cfg.max_halvings);
      else if (key == "linear_tol") parse_double(value, cfg.linear_tol);
      else fail("unknown key '" + full + "'");
    } else if (section == "study") {
      if (key == "epsilons") parse_list(value, cfg.epsilons);
      else if (key == "h_cell") parse_double(value, cfg.h_cell);
      else if (key == "macro_h") parse_double(value, cfg.macro_h);
      else fail("unknown key '" + full + "'");
    } else {
      fail("key '" + key + "' outside any known section");
    }
  }

  void validate() {
    // geometry
    if (cfg.dim != 1 && cfg.dim != 2) {
      fail_field("geometry.dim", "must be 1 or 2");
      return;  // nothing downstream is meaningful
    }
    if (cfg.dim == 1) {
      cfg.inclusion_lower[1] = cfg.inclusion_upper[1] = 0.0;
      cfg.domain_lower[1] = cfg.domain_upper[1] = 0.0;
    }
    try {
      (void)cfg.cell();
    } catch (const Error& e) {
      fail_field("geometry", e.what());
    }
    for (int a = 0; a < cfg.dim; ++a)
      if (!(cfg.domain_upper[a] > cfg.domain_lower[a]))
        fail_field("geometry.domain", "domain box is degenerate");
    if (cfg.gap < 0.0) fail_field("geometry.gap", "must be nonnegative");

    // material
    if (!(cfg.sigma_solid > 0.0)) fail_field("material.sigma_solid", "must be positive");
    if (!(cfg.sigma_pore > 0.0)) fail_field("material.sigma_pore", "must be positive");
    if (!(cfg.alpha > 0.0)) fail_field("material.alpha", "must be positive");

    // ions
    try {
      (void)cfg.ions();
    } catch (const Error& e) {
      fail_field("ions", e.what());
    }

    // solver
    if (!(cfg.newton_tol > 0.0)) fail_field("solver.newton_tol", "must be positive");
    if (cfg.newton_max_iter < 1) fail_field("solver.newton_max_iter", "must be at least 1");
    if (!(cfg.exp_clamp > 0.0)) fail_field("solver.exp_clamp", "must be positive");
    if (cfg.max_halvings < 0) fail_field("solver.max_halvings", "must be nonnegative");
    if (!(cfg.linear_tol > 0.0)) fail_field("solver.linear_tol", "must be positive");

    // study: resolutions and alignment used by the mesh builders
    if (cfg.epsilons.empty()) fail_field("study.epsilons", "must list at least one value");
    for (double e : cfg.epsilons) {
      if (!(e > 0.0)) {
        fail_field("study.epsilons", "all values must be positive");
        break;
      }
    }
    auto near_integer = [](double x) { return std::abs(x - std::round(x)) <= 1e-9; };
    if (!(cfg.h_cell > 0.0) || !near_integer(1.0 / cfg.h_cell)) {
      fail_field("study.h_cell", "1/h_cell must be a positive integer");
    } else {
      const double m = std::round(1.0 / cfg.h_cell);
      for (int a = 0; a < cfg.dim; ++a) {
        if (!near_integer(cfg.inclusion_lower[a] * m) || !near_integer(cfg.inclusion_upper[a] * m))
          fail_field("geometry.inclusion",
                     "corners must lie on the h_cell lattice (snap or refine h_cell)");
      }
    }
    if (!(cfg.macro_h > 0.0)) {
      fail_field("study.macro_h", "must be positive");
    } else {
      for (int a = 0; a < cfg.dim; ++a)
        if (!near_integer((cfg.domain_upper[a] - cfg.domain_lower[a]) / cfg.macro_h))
          fail_field("study.macro_h", "must divide every domain extent");
    }
    for (double e : cfg.epsilons) {
      if (!(e > 0.0)) continue;
      for (int a = 0; a < cfg.dim; ++a)
        if (!near_integer((cfg.domain_upper[a] - cfg.domain_lower[a]) / e))
          fail_field("study.epsilons",
                     "domain must be a union of whole cells at every epsilon");
    }
  }
};

}  // namespace

ToolkitConfig parse_config_text(const std::string& text, const std::string& origin) {
  Parser p;
  p.origin = origin;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    ++p.line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    auto trim = [](std::string s) {
      const auto b = s.find_first_not_of(" \t\r");
      const auto e = s.find_last_not_of(" \t\r");
      return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    };
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') {
        p.fail("malformed section header");
        continue;
      }
      p.section = trim(line.substr(1, line.size() - 2));
      if (p.section != "geometry" && p.section != "material" && p.section != "ions" &&
          p.section != "solver" && p.section != "study")
        p.fail("unknown section '" + p.section + "'");
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      p.fail("expected 'key = value'");
      continue;
    }
    p.handle(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  p.validate();
  if (!p.violations.empty()) {
    std::string summary = "configuration invalid (" + std::to_string(p.violations.size()) +
                          " problem(s)); first: " + p.violations.front();
    throw ConfigError(summary, p.violations);
  }
  return p.cfg;
}

ToolkitConfig parse_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path, {"cannot open " + path});
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str(), path);
}

std::string serialize_config(const ToolkitConfig& c) {
  std::ostringstream out;
  auto point = [&](const Point& p, int dim) {
    std::string s = fmt(p[0]);
    if (dim > 1) s += " " + fmt(p[1]);
    return s;
  };
  auto list = [&](const std::vector<double>& v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) s += (i ? " " : "") + fmt(v[i]);
    return s;
  };
  out << "[geometry]\n";
  out << "dim = " << c.dim << '\n';
  out << "inclusion_lower = " << point(c.inclusion_lower, c.dim) << '\n';
  out << "inclusion_upper = " << point(c.inclusion_upper, c.dim) << '\n';
  out << "clearance = " << fmt(c.clearance) << '\n';
  out << "domain_lower = " << point(c.domain_lower, c.dim) << '\n';
  out << "domain_upper = " << point(c.domain_upper, c.dim) << '\n';
  out << "gap = " << fmt(c.gap) << '\n';
  out << "\n[material]\n";
  out << "sigma_solid = " << fmt(c.sigma_solid) << '\n';
  out << "sigma_pore = " << fmt(c.sigma_pore) << '\n';
  out << "alpha = " << fmt(c.alpha) << '\n';
  out << "g = " << fmt(c.g) << '\n';
  out << "\n[ions]\n";
  out << "charges = " << list(c.charges) << '\n';
  out << "kT = " << fmt(c.kT) << '\n';
  out << "neutrality_tol = " << fmt(c.neutrality_tol) << '\n';
  out << "\n[solver]\n";
  out << "newton_tol = " << fmt(c.newton_tol) << '\n';
  out << "newton_max_iter = " << c.newton_max_iter << '\n';
  out << "exp_clamp = " << fmt(c.exp_clamp) << '\n';
  out << "max_halvings = " << c.max_halvings << '\n';
  out << "linear_tol = " << fmt(c.linear_tol) << '\n';
  out << "\n[study]\n";
  out << "epsilons = " << list(c.epsilons) << '\n';
  out << "h_cell = " << fmt(c.h_cell) << '\n';
  out << "macro_h = " << fmt(c.macro_h) << '\n';
  return out.str();
}

}  // namespace pnph
