#pragma once

// Terminal boundary values. A Delta payoff reads out a transition density
// (units 1 / state volume); the other kinds are plain values. The tag travels
// with every valuation result.

#include <span>
#include <string>
#include <variant>
#include <vector>

#include "qportfolio/grid.hpp"

namespace qportfolio {

/// Dirac mass at one terminal coordinate per axis.
struct DeltaPayoff {
  std::vector<double> points;
};

enum class StepDirection { above, below };

/// Product over axes of 1{s_i > a_i} (or 1{s_i < a_i}); an infinite threshold leaves its axis unconstrained.
struct StepPayoff {
  std::vector<double> thresholds;
  StepDirection direction = StepDirection::above;
};

/// Sum over axes of (s_i - K_i)^+.
struct CallPayoff {
  std::vector<double> strikes;
};

/// The same level at every terminal state.
struct ConstantPayoff {
  double level = 1.0;
  std::size_t axes = 1;
};

using Payoff = std::variant<DeltaPayoff, StepPayoff, CallPayoff, ConstantPayoff>;

enum class Quantity { density, value };

std::size_t payoff_axes(const Payoff& payoff);
std::string payoff_kind(const Payoff& payoff);
Quantity payoff_quantity(const Payoff& payoff);
std::string to_string(Quantity q);

/// Pointwise payoff. Throws DomainError for Delta payoffs, which have no pointwise value.
double payoff_value(const Payoff& payoff, std::span<const double> terminal);

/// Finite feature coordinates on an axis (delta point, threshold, strike); empty for none.
std::vector<double> payoff_features(const Payoff& payoff, std::size_t axis);

/// Terminal data on a grid: Delta mollified to a unit-mass Gaussian of width 2h per axis,
/// Step and Call averaged over each cell.
std::vector<double> terminal_values(const Payoff& payoff, const Grid& grid);

}  // namespace qportfolio
