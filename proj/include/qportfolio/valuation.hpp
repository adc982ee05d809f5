#pragma once

// Three valuation routes for a terminal payoff (closed-form Gaussian,
// Monte Carlo Feynman-Kac, backward PDE) and finite-difference deltas.

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "qportfolio/grid.hpp"
#include "qportfolio/models.hpp"
#include "qportfolio/payoff.hpp"
#include "qportfolio/sde.hpp"

namespace qportfolio {

enum class Route { closed_form, monte_carlo, pde };

std::string to_string(Route route);
/// Inverse of to_string; throws DomainError for unknown names.
Route parse_route(const std::string& name);

struct ValuationResult {
  double value = 0.0;
  double standard_error = 0.0;
  Route route = Route::closed_form;
  Quantity quantity = Quantity::value;
  std::string model;
  double r = 0.0;
  double maturity = 0.0;
  std::vector<double> state;
  double t = 0.0;
};

struct McOptions {
  std::size_t n_paths = 10000;
  std::uint64_t master_seed = 0;
  double dt = 1e-3;
  std::size_t workers = 1;
};

struct PdeOptions {
  /// Cells per axis; 0 picks 800 (one SHO axis), 400 (two SHO axes) or 400 (qubit).
  std::size_t cells = 0;
  /// Time step; 0 picks a step from the horizon and the model's rates.
  double dt = 0.0;
  /// SHO half-width in stationary standard deviations beyond the payoff and state features.
  double width_sigmas = 6.0;
};

/// Common knobs for route dispatch.
struct RouteOptions {
  McOptions mc;
  PdeOptions pde;
};

/// Discounted Gaussian functional of the risk-neutral transition density; any number of axes.
ValuationResult value_closed_form_sho(const ShoParams& p, const RiskNeutralSpec& rn, const Payoff& payoff,
                                      std::span<const double> state, double t);

/// Discounted sample mean over risk-neutral paths. A state with k axes and dynamics of dimension d
/// (k a multiple of d) is simulated as k/d independent blocks; block b > 0 uses seed mix_seed(seed, b).
/// Delta payoffs use a product Gaussian kernel with bandwidth std * n^(-1/5) per axis.
ValuationResult value_mc(const Dynamics& dyn_rn, const RiskNeutralSpec& rn, const Payoff& payoff,
                         std::span<const double> state, double t, const McOptions& options);

/// Grid and time step the PDE route would use.
Grid pde_valuation_grid(const Model& model, const RiskNeutralSpec& rn, const Payoff& payoff,
                        std::span<const double> state, double t, const PdeOptions& options = {});
TimeSchedule pde_valuation_schedule(const Model& model, const RiskNeutralSpec& rn, double t,
                                    const PdeOptions& options = {});

/// Undiscounted g fields from the backward solve on the PDE route's grid, at the requested
/// schedule steps (ascending time).
std::vector<ValueField> pde_value_fields(const Model& model, const RiskNeutralSpec& rn, const Payoff& payoff,
                                         const Grid& grid, const TimeSchedule& schedule,
                                         std::vector<std::size_t> output_steps);

/// Backward solve from the payoff, interpolated at (state, t). One or two axes.
ValuationResult value_pde(const Model& model, const RiskNeutralSpec& rn, const Payoff& payoff,
                          std::span<const double> state, double t, const PdeOptions& options = {});

struct GaussianApproximation {
  ValuationResult approximation;
  ValuationResult pde;
  double discrepancy = 0.0;           // approximation - pde
  double relative_discrepancy = 0.0;  // |discrepancy| / |pde|
};

/// Diffusion frozen at the start, D = kappa (1 - z0^2)^2 / 2 per axis, then the Gaussian machinery
/// with mean z0 e^{r tau} and variance 2D (e^{2 r tau} - 1) / (2 r). Reports the PDE value alongside.
GaussianApproximation qubit_gaussian_approx_value(const QubitParams& p, const RiskNeutralSpec& rn,
                                                  const Payoff& payoff, std::span<const double> z0, double t,
                                                  const PdeOptions& options = {});

/// The approximation alone, without the reference PDE solve.
ValuationResult qubit_gaussian_approx_only(const QubitParams& p, const RiskNeutralSpec& rn, const Payoff& payoff,
                                           std::span<const double> z0, double t);

/// Value by the given route. The MC route uses the model's risk-neutral dynamics.
ValuationResult value_by_route(Route route, const Model& model, const RiskNeutralSpec& rn, const Payoff& payoff,
                               std::span<const double> state, double t, const RouteOptions& options = {});

/// Central differences (f(s + b e_i) - f(s - b e_i)) / (2 b) per axis. The MC route reuses its seed
/// for every bumped evaluation; the PDE route solves once and differences the interpolated field.
std::vector<double> deltas(Route route, const Model& model, const RiskNeutralSpec& rn, const Payoff& payoff,
                           std::span<const double> state, double t, std::span<const double> bump,
                           const RouteOptions& options = {});

/// Undiscounted E[payoff(X)] for independent X_i ~ N(mean_i, variance_i).
double gaussian_payoff_value(const Payoff& payoff, std::span<const double> mean, std::span<const double> variance);

/// Gradient of gaussian_payoff_value with respect to the means.
std::vector<double> gaussian_payoff_gradient(const Payoff& payoff, std::span<const double> mean,
                                             std::span<const double> variance);

}  // namespace qportfolio
