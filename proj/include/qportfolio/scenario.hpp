#pragma once

// Strict JSON scenario files. Every field is checked before anything runs and
// all problems are reported together, each prefixed with its dotted path.

#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "qportfolio/models.hpp"
#include "qportfolio/payoff.hpp"
#include "qportfolio/valuation.hpp"

namespace qportfolio {

struct ScheduleSpec {
  double t0 = 0.0;
  double t_end = 0.0;  // defaults to risk_neutral.T
  double dt = 1e-3;
};

struct SimulateSpec {
  std::size_t n_paths = 10000;
  Measure measure = Measure::physical;
  /// Moment rows written, evenly spread over the schedule (first and last step included).
  std::size_t rows = 101;
};

struct ForwardSpec {
  Measure measure = Measure::physical;
  std::size_t cells = 200;
  /// Per-axis bounds; empty picks [-1, 1] for the qubit and mean +- 6 stationary sd for the SHO.
  std::vector<double> lower;
  std::vector<double> upper;
  /// Width of the Gaussian initial density around initial_state.
  double initial_sigma = 0.1;
  /// Density snapshots written, evenly spread over the schedule.
  std::size_t snapshots = 5;
};

struct ValueSpec {
  Payoff payoff;
  std::vector<Route> routes;  // defaults: closed_form (SHO only), pde (<= 2 axes), mc
  std::size_t n_paths = 10000;
  /// Valuation time; defaults to schedule.t0.
  double t = 0.0;
  std::size_t pde_cells = 0;
  double pde_dt = 0.0;
  /// Qubit only: also report the frozen-diffusion Gaussian approximation.
  bool gaussian_approximation = false;
};

struct HedgeSpec {
  Payoff payoff;
  Route route = Route::closed_form;
  Measure path_measure = Measure::physical;
  std::size_t n_paths = 10000;
  std::size_t substeps = 1;
  /// Paths whose full ledgers are written; the error table always covers every path.
  std::size_t ledger_paths = 10;
  std::size_t histogram_bins = 20;
};

struct CollapseSpec {
  std::vector<double> z0_values;  // defaults to initial_state
  std::size_t n_paths = 10000;
  double collapse_threshold = 0.99;
};

using ExperimentSpec = std::variant<SimulateSpec, ForwardSpec, ValueSpec, HedgeSpec, CollapseSpec>;

/// simulate, solve-forward, value, hedge, collapse-stats (the CLI subcommand names).
std::string experiment_name(const ExperimentSpec& spec);

struct Scenario {
  Model model;
  std::optional<RiskNeutralSpec> risk_neutral;
  std::vector<double> initial_state;
  ScheduleSpec schedule;
  ExperimentSpec experiment;
  std::uint64_t master_seed = 42;
  std::string output_dir = ".";
};

/// Parses and validates; throws ValidationError listing every problem found.
Scenario parse_scenario(const std::string& text);

/// Resolved scenario (defaults applied) as canonical JSON text.
std::string describe_scenario(const Scenario& scenario);

/// 16 hex digits of FNV-1a over the canonical JSON without output_dir.
std::string scenario_hash(const Scenario& scenario);

/// Closest known key for an unknown one, or empty when nothing is close.
std::string suggest_key(const std::string& unknown, const std::vector<std::string>& known);

}  // namespace qportfolio
