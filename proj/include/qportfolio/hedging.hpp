#pragma once

// Discrete delta hedging. The portfolio holds the claim f, is short Delta_i
// units of each component s_i, and keeps the cash leg of every rebalance in a
// financing account B that accrues at rate r:
//   Pi = f - sum_i Delta_i s_i + B,   B(t0) = 0.
// Rebalancing swaps delta positions against B, so it never changes Pi.

#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "qportfolio/models.hpp"
#include "qportfolio/payoff.hpp"
#include "qportfolio/sde.hpp"
#include "qportfolio/valuation.hpp"

namespace qportfolio {

/// Pi = f - sum_i Delta_i s_i. Throws DomainError when the lengths differ.
double portfolio_value(double f_value, std::span<const double> deltas, std::span<const double> state);

struct HedgeOptions {
  /// closed_form (SHO only) or pde.
  Route route = Route::closed_form;
  /// Measure of the simulated paths; deltas always come from the risk-neutral valuation.
  Measure path_measure = Measure::physical;
  /// Euler-Maruyama steps per rebalancing interval. Runs whose dt * substeps agree share their paths.
  std::size_t substeps = 1;
  std::size_t workers = 1;
  /// Paths p < full_ledgers keep one row per step; the others keep step 0 and the terminal row.
  std::size_t full_ledgers = std::numeric_limits<std::size_t>::max();
  PdeOptions pde;
};

struct HedgeRow {
  std::size_t step = 0;
  double t = 0.0;
  State state{0.0, 0.0};
  double f = 0.0;
  State deltas{0.0, 0.0};  // held after this step's rebalance
  double pi_before = 0.0;  // before rebalancing
  double pi = 0.0;         // after rebalancing
  double financing = 0.0;  // B after rebalancing
};

struct HedgeLedger {
  std::size_t path = 0;
  std::size_t axes = 1;
  std::vector<HedgeRow> rows;
  double initial_pi = 0.0;
  double terminal_pi = 0.0;
  /// terminal_pi - initial_pi e^{r (T - t0)}
  double error = 0.0;
  bool absorbed = false;
  /// Non-empty when valuation failed and the path was aborted; error is then NaN.
  std::string failure;
};

/// One ledger per path. Path p draws its noise from stream (master_seed, p). One or two axes;
/// Delta payoffs are rejected because they have no pointwise terminal value.
std::vector<HedgeLedger> run_hedge(const Model& model, const RiskNeutralSpec& rn, const Payoff& payoff,
                                   std::span<const double> state0, const TimeSchedule& schedule,
                                   std::size_t n_paths, std::uint64_t master_seed, const HedgeOptions& options = {});

struct ErrorHistogram {
  std::vector<double> edges;  // bins + 1 entries
  std::vector<std::size_t> counts;
};

struct ReplicationReport {
  std::size_t paths = 0;
  std::size_t failed_paths = 0;
  double mean_error = 0.0;
  double mean_standard_error = 0.0;
  double rms_error = 0.0;
  double error_std = 0.0;
  std::size_t worst_path = 0;
  double worst_error = 0.0;
  ErrorHistogram histogram;
};

/// Statistics over the ledgers that completed. Throws DomainError for fewer than two ledgers.
ReplicationReport replication_report(std::span<const HedgeLedger> ledgers, std::size_t bins = 20);

}  // namespace qportfolio
