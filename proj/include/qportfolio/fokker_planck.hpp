#pragma once

// Finite-difference solvers on one- and two-axis product grids.
//
// Forward:  dP/dt = -sum_i d/ds_i F_i,  F_i = V_i P - d/ds_i (D_i P),  D_i = amplitude_i^2 / 2
//   cell-centred finite volumes; face fluxes are exponentially fitted
//   (Scharfetter-Gummel), so the operator is conservative and an M-matrix.
// Backward: dg/dt + sum_i [ mu_i dg/ds_i + D_i d2g/ds_i^2 ] = 0,  f = e^{-r(T-t)} g
//   node-based central differences with Il'in-Allen-Southwell fitting of the
//   diffusion coefficient (identical to plain central differences as the cell
//   Peclet number goes to zero).
//
// Time stepping is theta = 1/2 with two Rannacher start-up steps (four implicit
// half steps); two-axis problems alternate the order of the per-axis sweeps.

#include <cstddef>
#include <span>
#include <vector>

#include "qportfolio/grid.hpp"
#include "qportfolio/models.hpp"
#include "qportfolio/sde.hpp"

namespace qportfolio {

enum class EdgePolicy {
  zero_flux,   // forward: no probability crosses the outer face
  zero_value,  // density / value vanishes just outside the domain
  linear,      // backward: zero second derivative (drift-only one-sided update)
  // backward: paths stop on the outer face. Where the drift there points outward the face keeps
  // its terminal value (extrapolated from the two edge nodes); where it points inward this is `linear`.
  absorbing,
};

struct FpProblem {
  Dynamics dynamics;
  Grid grid;
  TimeSchedule schedule;
  /// Initial density (forward) or terminal values at schedule.t_end() (backward), one per node.
  std::vector<double> data;
  /// Per axis. Empty: zero_flux for forward solves, linear for backward solves.
  std::vector<EdgePolicy> edges;
  /// Schedule steps to report. Empty: first and last step.
  std::vector<std::size_t> output_steps;
};

enum class ValueForm { f, g };

/// Largest dt for which the explicit half of the theta step keeps densities nonnegative.
double forward_time_step_bound(const FpProblem& problem);

/// Densities at the requested output steps in increasing time. The initial data is normalised to unit mass.
std::vector<DensityGrid> solve_forward_fp(const FpProblem& problem);

/// Value fields at the requested output steps in increasing time; terminal data sits at schedule.t_end() == T.
std::vector<ValueField> solve_backward_valuation(const FpProblem& problem, const RiskNeutralSpec& rn, ValueForm form);

/// Product Gaussian sampled at the nodes and normalised to unit grid mass.
std::vector<double> gaussian_density(const Grid& grid, std::span<const double> mean, std::span<const double> sigma);

}  // namespace qportfolio
