#include "qportfolio/payoff.hpp"

#include <algorithm>
#include <cmath>

#include "qportfolio/errors.hpp"
#include "qportfolio/fokker_planck.hpp"

namespace qportfolio {

std::size_t payoff_axes(const Payoff& payoff) {
  return std::visit(
      [](const auto& p) -> std::size_t {
        using P = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<P, DeltaPayoff>) return p.points.size();
        else if constexpr (std::is_same_v<P, StepPayoff>) return p.thresholds.size();
        else if constexpr (std::is_same_v<P, CallPayoff>) return p.strikes.size();
        else return p.axes;
      },
      payoff);
}

std::string payoff_kind(const Payoff& payoff) {
  static constexpr const char* kNames[] = {"delta", "step", "call", "constant"};
  return kNames[payoff.index()];
}

Quantity payoff_quantity(const Payoff& payoff) {
  return std::holds_alternative<DeltaPayoff>(payoff) ? Quantity::density : Quantity::value;
}

std::string to_string(Quantity q) { return q == Quantity::density ? "density" : "value"; }

double payoff_value(const Payoff& payoff, std::span<const double> s) {
  if (s.size() != payoff_axes(payoff)) throw DomainError("payoff_value: state has the wrong number of axes");
  return std::visit(
      [&](const auto& p) -> double {
        using P = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<P, DeltaPayoff>) {
          throw DomainError("payoff_value: a delta payoff has no pointwise value");
        } else if constexpr (std::is_same_v<P, StepPayoff>) {
          for (std::size_t i = 0; i < s.size(); ++i) {
            const bool in = p.direction == StepDirection::above ? s[i] > p.thresholds[i] : s[i] < p.thresholds[i];
            if (!in) return 0.0;
          }
          return 1.0;
        } else if constexpr (std::is_same_v<P, CallPayoff>) {
          double sum = 0.0;
          for (std::size_t i = 0; i < s.size(); ++i) sum += std::max(s[i] - p.strikes[i], 0.0);
          return sum;
        } else {
          return p.level;
        }
      },
      payoff);
}

std::vector<double> payoff_features(const Payoff& payoff, std::size_t axis) {
  return std::visit(
      [&](const auto& p) -> std::vector<double> {
        using P = std::decay_t<decltype(p)>;
        double x = 0.0;
        if constexpr (std::is_same_v<P, DeltaPayoff>) x = p.points.at(axis);
        else if constexpr (std::is_same_v<P, StepPayoff>) x = p.thresholds.at(axis);
        else if constexpr (std::is_same_v<P, CallPayoff>) x = p.strikes.at(axis);
        else return {};
        if (!std::isfinite(x)) return {};
        return {x};
      },
      payoff);
}

namespace {

// Fraction of the cell [c - h/2, c + h/2] on the payoff side of the threshold.
double step_fraction(double centre, double h, double threshold, StepDirection dir) {
  if (std::isinf(threshold)) {
    const bool always = (threshold < 0) == (dir == StepDirection::above);
    return always ? 1.0 : 0.0;
  }
  const double above = std::clamp((centre + 0.5 * h - threshold) / h, 0.0, 1.0);
  return dir == StepDirection::above ? above : 1.0 - above;
}

// Cell average of (x - K)^+.
double call_average(double centre, double h, double strike) {
  const double left = centre - 0.5 * h;
  const double right = centre + 0.5 * h;
  if (strike <= left) return centre - strike;
  if (strike >= right) return 0.0;
  return (right - strike) * (right - strike) / (2.0 * h);
}

}  // namespace

std::vector<double> terminal_values(const Payoff& payoff, const Grid& grid) {
  if (payoff_axes(payoff) != grid.dimension()) throw DomainError("terminal_values: payoff axes do not match grid");
  std::vector<double> out(grid.size());
  if (const auto* delta = std::get_if<DeltaPayoff>(&payoff)) {
    std::vector<double> sigma;
    for (const auto& ax : grid.axes()) sigma.push_back(2.0 * ax.spacing());
    return gaussian_density(grid, delta->points, sigma);
  }
  for (std::size_t k = 0; k < grid.size(); ++k) {
    const auto c = grid.coordinates(k);
    double v = 0.0;
    if (const auto* step = std::get_if<StepPayoff>(&payoff)) {
      v = 1.0;
      for (std::size_t a = 0; a < c.size(); ++a)
        v *= step_fraction(c[a], grid.axis(a).spacing(), step->thresholds[a], step->direction);
    } else if (const auto* call = std::get_if<CallPayoff>(&payoff)) {
      for (std::size_t a = 0; a < c.size(); ++a) v += call_average(c[a], grid.axis(a).spacing(), call->strikes[a]);
    } else {
      v = std::get<ConstantPayoff>(payoff).level;
    }
    out[k] = v;
  }
  return out;
}

}  // namespace qportfolio
