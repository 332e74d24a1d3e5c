#include "pnph/cli.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "pnph/cell_problems.hpp"
#include "pnph/config.hpp"
#include "pnph/errors.hpp"
#include "pnph/study.hpp"

namespace pnph {

namespace {

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

struct CliOptions {
  std::string config_path;
  std::string out = ".";
  std::string dump_mesh;  // optional mesh dump path
  int threads = 1;
  bool verbose = false;
  double epsilon = 0.0;  // 0 = first value of the study list
};

void log_progress(const CliOptions& opts, const std::string& msg) {
  std::cerr << "[pnph] " << msg << "\n";
  (void)opts;
}

std::string out_file(const CliOptions& opts, const std::string& name) {
  std::filesystem::create_directories(opts.out);
  return (std::filesystem::path(opts.out) / name).string();
}

nlohmann::json a0_record(const ToolkitConfig& cfg, const CellCorrectors& correctors) {
  nlohmann::json j;
  j["dim"] = cfg.dim;
  nlohmann::json cell;
  cell["inclusion_lower"] = std::vector<double>(cfg.inclusion_lower.begin(),
                                                cfg.inclusion_lower.begin() + cfg.dim);
  cell["inclusion_upper"] = std::vector<double>(cfg.inclusion_upper.begin(),
                                                cfg.inclusion_upper.begin() + cfg.dim);
  cell["clearance"] = cfg.clearance;
  j["cell"] = cell;
  j["material"] = {{"sigma_solid", cfg.sigma_solid},
                   {"sigma_pore", cfg.sigma_pore},
                   {"alpha", cfg.alpha},
                   {"g", cfg.g}};
  std::vector<double> a0;
  for (int i = 0; i < cfg.dim; ++i)
    for (int k = 0; k < cfg.dim; ++k) a0.push_back(correctors.A0(i, k));
  j["A0"] = a0;
  j["certification"] = {
      {"eq318_vs_eq319", correctors.diagnostics.formula_agreement},
      {"mean_B", correctors.diagnostics.mean_B},
      {"interface_residual", correctors.diagnostics.interface_relation_residual},
      {"min_eigenvalue", correctors.diagnostics.min_eigenvalue}};
  return j;
}

int cmd_solve_cell(const CliOptions& opts, const ToolkitConfig& cfg) {
  log_progress(opts, "solving cell problems");
  const CellCorrectors correctors =
      build_cell_correctors(cfg.cell(), cfg.material(), cfg.h_cell, cfg.linear_tol);
  atomic_write(out_file(opts, "L.csv"), field_csv(correctors.L));
  for (int i = 0; i < cfg.dim; ++i)
    atomic_write(out_file(opts, "N" + std::to_string(i) + ".csv"), field_csv(correctors.N[i]));
  nlohmann::json j = a0_record(cfg, correctors);
  j["mean_L"] = correctors.diagnostics.mean_L;
  j["mean_L_error"] = correctors.diagnostics.mean_L_error;
  j["weak_divergence_residual"] = correctors.diagnostics.weak_divergence_residual;
  j["jump_B"] = correctors.diagnostics.jump_B;
  atomic_write(out_file(opts, "cell.json"), j.dump(2) + "\n");
  return 0;
}

int cmd_compute_a0(const CliOptions& opts, const ToolkitConfig& cfg) {
  log_progress(opts, "computing the effective tensor");
  const CellCorrectors correctors =
      build_cell_correctors(cfg.cell(), cfg.material(), cfg.h_cell, cfg.linear_tol);
  const std::string payload = a0_record(cfg, correctors).dump(2) + "\n";
  if (opts.out == "." || std::filesystem::is_directory(opts.out)) {
    atomic_write(out_file(opts, "a0.json"), payload);
  } else {
    atomic_write(opts.out, payload);
  }
  return 0;
}

int cmd_solve_micro(const CliOptions& opts, const ToolkitConfig& cfg) {
  const double eps = opts.epsilon > 0.0 ? opts.epsilon : cfg.epsilons.at(0);
  log_progress(opts, "solving the microscale problem at epsilon = " + fmt(eps));
  const PavedDomain paving = build_paving(cfg.domain(), eps, cfg.cell(), cfg.gap);
  auto mesh = std::make_shared<const BrokenMesh>(build_domain_mesh(paving, cfg.h_cell));
  if (!opts.dump_mesh.empty()) {
    std::ostringstream dump;
    write_mesh(*mesh, dump);
    atomic_write(opts.dump_mesh, dump.str());
  }
  const NewtonResult result =
      solve_micro_pb(mesh, cfg.material(), cfg.ions(), eps, cfg.newton(), cfg.linear_tol);
  if (result.clamp_active)
    std::cerr << "[pnph] warning: exponent clamp engaged; the solution is untrusted\n";
  log_progress(opts, "Newton converged in " + std::to_string(result.iterations) +
                         " iterations, residual " + fmt(result.final_residual));
  atomic_write(out_file(opts, "phi.csv"), field_csv(result.phi));
  atomic_write(out_file(opts, "concentrations.csv"),
               concentrations_csv(recover_concentrations(result.phi, cfg.ions())));
  return 0;
}

int cmd_solve_macro(const CliOptions& opts, const ToolkitConfig& cfg) {
  log_progress(opts, "solving cell problems for the effective tensor");
  const CellCorrectors correctors =
      build_cell_correctors(cfg.cell(), cfg.material(), cfg.h_cell, cfg.linear_tol);
  const CellMeasures cm = measures(cfg.cell());
  const int macro_cells = static_cast<int>(std::llround(cfg.domain().extent(0) / cfg.macro_h));
  auto mesh = std::make_shared<const BrokenMesh>(build_box_mesh(cfg.domain(), macro_cells));
  log_progress(opts, "solving the macroscale problem");
  const NewtonResult result =
      solve_macro_pb(mesh, correctors.A0, cm.vol_pore, cm.surf_inclusion * cfg.g, cfg.ions(),
                     cfg.newton(), cfg.linear_tol);
  if (result.clamp_active)
    std::cerr << "[pnph] warning: exponent clamp engaged; the solution is untrusted\n";
  atomic_write(out_file(opts, "phi0.csv"), field_csv(result.phi));
  atomic_write(out_file(opts, "concentrations.csv"),
               concentrations_csv(recover_concentrations(result.phi, cfg.ions())));
  return 0;
}

int cmd_converge(const CliOptions& opts, const ToolkitConfig& cfg) {
  log_progress(opts, "running the convergence sweep");
  const ConvergenceReport report = run_convergence_study(cfg.study_setup(opts.threads));
  std::ostringstream csv;
  write_report_csv(report, csv);
  atomic_write(out_file(opts, "report.csv"), csv.str());
  std::ostringstream json;
  write_report_json(report, serialize_config(cfg), json);
  atomic_write(out_file(opts, "report.json"), json.str());
  log_progress(opts, "fitted rate: " + fmt(report.fitted_rate));
  return 0;
}

int cmd_verify_lemmas(const CliOptions& opts, const ToolkitConfig& cfg) {
  const auto probe = [dim = cfg.dim](const Point& x) {
    double v = std::sin(M_PI * x[0]);
    if (dim > 1) v *= std::sin(M_PI * x[1]);
    return v;
  };
  const auto one = [](const Point&) { return 1.0; };

  std::ostringstream csv;
  csv << "lemma,f,epsilon,residual,residual_over_eps,cell_average_check\n";
  for (double eps : cfg.epsilons) {
    log_progress(opts, "expansion residuals at epsilon = " + fmt(eps));
    const PavedDomain paving = build_paving(cfg.domain(), eps, cfg.cell(), cfg.gap);
    const ExpansionResidual tr =
        verify_traction_expansion(paving, cfg.material(), cfg.h_cell, probe);
    csv << "traction,-," << fmt(eps) << ',' << fmt(tr.residual) << ','
        << fmt(tr.residual_over_eps) << ",-\n";
    const ExpansionResidual vc = verify_volume_expansion(paving, cfg.material(), cfg.h_cell, one,
                                                         probe, true, cfg.linear_tol);
    csv << "volume,const," << fmt(eps) << ',' << fmt(vc.residual) << ','
        << fmt(vc.residual_over_eps) << ',' << fmt(vc.cell_average_check) << '\n';
    const ExpansionResidual vp = verify_volume_expansion(paving, cfg.material(), cfg.h_cell,
                                                         probe, probe, false, cfg.linear_tol);
    csv << "volume,probe," << fmt(eps) << ',' << fmt(vp.residual) << ','
        << fmt(vp.residual_over_eps) << ",-\n";
  }
  atomic_write(out_file(opts, "lemmas.csv"), csv.str());
  return 0;
}

}  // namespace

void atomic_write(const std::string& path, const std::string& content) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("atomic_write: cannot open " + tmp);
    out << content;
    if (!out.flush()) throw Error("atomic_write: write to " + tmp + " failed");
  }
  std::filesystem::rename(tmp, path);
}

std::string field_csv(const BrokenField& field) {
  const BrokenMesh& mesh = *field.mesh;
  const std::vector<Region> regions = mesh.dof_regions();
  std::ostringstream out;
  out << (mesh.dim == 1 ? "dof_id,x,value,region\n" : "dof_id,x,y,value,region\n");
  for (int d = 0; d < mesh.dof_count; ++d) {
    out << d << ',' << fmt(mesh.dof_coords[d][0]);
    if (mesh.dim > 1) out << ',' << fmt(mesh.dof_coords[d][1]);
    out << ',' << fmt(field.values[d]) << ',' << region_name(regions[d]) << '\n';
  }
  return out.str();
}

std::string concentrations_csv(const std::vector<BrokenField>& species) {
  const BrokenMesh& mesh = *species.at(0).mesh;
  const std::vector<Region> regions = mesh.dof_regions();
  std::ostringstream out;
  out << "dof_id,x";
  if (mesh.dim > 1) out << ",y";
  for (std::size_t s = 0; s < species.size(); ++s) out << ",c" << s;
  out << ",region\n";
  for (int d = 0; d < mesh.dof_count; ++d) {
    out << d << ',' << fmt(mesh.dof_coords[d][0]);
    if (mesh.dim > 1) out << ',' << fmt(mesh.dof_coords[d][1]);
    for (const BrokenField& c : species) out << ',' << fmt(c.values[d]);
    out << ',' << region_name(regions[d]) << '\n';
  }
  return out.str();
}

int run_cli(int argc, const char* const* argv) {
  CLI::App app{"numerical homogenization toolkit for the discontinuous "
               "Poisson-Boltzmann transmission problem"};
  app.require_subcommand(1);

  CliOptions opts;
  auto add_common = [&](CLI::App* sub, bool with_epsilon = false) {
    sub->add_option("--config", opts.config_path, "configuration file")->required();
    sub->add_option("--out", opts.out, "output file or directory");
    sub->add_option("--threads", opts.threads, "worker thread count")->default_val(1);
    sub->add_flag("--verbose", opts.verbose, "extra progress output");
    if (with_epsilon) {
      sub->add_option("--epsilon", opts.epsilon, "override the cell size for this solve");
      sub->add_option("--dump-mesh", opts.dump_mesh, "write the domain mesh to this path");
    }
  };

  CLI::App* solve_cell = app.add_subcommand("solve-cell", "solve the unit-cell problems");
  add_common(solve_cell);
  CLI::App* compute_a0 = app.add_subcommand("compute-a0", "compute the certified effective tensor");
  add_common(compute_a0);
  CLI::App* solve_micro = app.add_subcommand("solve-micro", "solve the microscale problem");
  add_common(solve_micro, true);
  CLI::App* solve_macro = app.add_subcommand("solve-macro", "solve the homogenized problem");
  add_common(solve_macro);
  CLI::App* converge = app.add_subcommand("converge", "run the epsilon convergence sweep");
  add_common(converge);
  CLI::App* verify = app.add_subcommand("verify-lemmas", "run the expansion-lemma experiments");
  add_common(verify);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    std::ostringstream dummy;
    const int code = app.exit(e, dummy, dummy);
    std::cerr << dummy.str();
    return code == 0 ? 0 : 2;
  }

  try {
    const ToolkitConfig cfg = parse_config(opts.config_path);
    if (solve_cell->parsed()) return cmd_solve_cell(opts, cfg);
    if (compute_a0->parsed()) return cmd_compute_a0(opts, cfg);
    if (solve_micro->parsed()) return cmd_solve_micro(opts, cfg);
    if (solve_macro->parsed()) return cmd_solve_macro(opts, cfg);
    if (converge->parsed()) return cmd_converge(opts, cfg);
    if (verify->parsed()) return cmd_verify_lemmas(opts, cfg);
    std::cerr << "[pnph] unknown subcommand\n";
    return 2;
  } catch (const ConfigError& e) {
    std::cerr << "[pnph] config error: " << e.what() << "\n";
    for (const std::string& v : e.violations) std::cerr << "  - " << v << "\n";
    return 2;
  } catch (const EmptyPaving& e) {
    std::cerr << "[pnph] config error: " << e.what() << "\n";
    return 2;
  } catch (const MisalignedInclusion& e) {
    std::cerr << "[pnph] config error: " << e.what() << "\n";
    return 2;
  } catch (const Error& e) {
    std::cerr << "[pnph] solver error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace pnph
