#pragma once

#include <string>

#include "pnph/broken_mesh.hpp"
#include "pnph/pb_solver.hpp"

namespace pnph {

// Subcommand dispatch. Exit codes: 0 success, 1 solver failure, 2 config or
// usage error. All numeric output goes to files; progress goes to stderr.
int run_cli(int argc, const char* const* argv);

// Writes `content` to `path` via a temporary file and an atomic rename, so no
// output file is ever left partially written.
void atomic_write(const std::string& path, const std::string& content);

// Solution dump: dof_id,x[,y],value,region with a header line.
std::string field_csv(const BrokenField& field);
// One column per species: dof_id,x[,y],c0..cn,region.
std::string concentrations_csv(const std::vector<BrokenField>& species);

}  // namespace pnph
