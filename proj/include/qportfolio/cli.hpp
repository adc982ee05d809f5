#pragma once

// Command-line front end: one scenario per invocation, outputs assembled in
// memory and then written atomically.

#include <cstddef>
#include <iosfwd>
#include <string>
#include <vector>

#include "qportfolio/scenario.hpp"

namespace qportfolio {

enum ExitCode : int { exit_ok = 0, exit_validation = 1, exit_numerical = 2 };

struct OutputFile {
  std::string name;
  std::string content;
};

/// Runs the scenario's experiment and returns the files it would write. Deterministic in
/// (scenario, master_seed); `workers` only changes the speed.
std::vector<OutputFile> run_experiment(const Scenario& scenario, std::size_t workers);

/// Writes each file to dir/name through a temporary file and a rename.
void write_outputs(const std::string& dir, const std::vector<OutputFile>& files);

/// `qportfolio <subcommand> --scenario FILE [--seed N] [--out DIR] [--describe] [--workers N]`.
/// Returns 0 on success, 1 on invalid input, 2 on numerical failure.
int run_command(int argc, const char* const* argv, std::ostream& out, std::ostream& log);

/// "%.15e"
std::string format_number(double x);

}  // namespace qportfolio
