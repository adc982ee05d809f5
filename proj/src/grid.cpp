#include "qportfolio/grid.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "qportfolio/errors.hpp"

namespace qportfolio {

Grid1D::Grid1D(double lower, double upper, std::size_t cells)
    : lower_(lower), upper_(upper), cells_(cells), h_(0.0) {
  if (!(upper > lower) || !std::isfinite(lower) || !std::isfinite(upper))
    throw DomainError("Grid1D: upper bound must exceed lower bound");
  if (cells < kMinCells) throw DomainError("Grid1D: at least " + std::to_string(kMinCells) + " cells per axis");
  h_ = (upper - lower) / static_cast<double>(cells);
}

Grid::Grid(std::vector<Grid1D> axes) : axes_(std::move(axes)), size_(1) {
  if (axes_.empty() || axes_.size() > 2) throw DomainError("Grid: one or two axes supported");
  for (const auto& a : axes_) size_ *= a.cells();
}

double Grid::cell_volume() const noexcept {
  double v = 1.0;
  for (const auto& a : axes_) v *= a.spacing();
  return v;
}

std::vector<double> Grid::coordinates(std::size_t k) const {
  std::vector<double> out;
  for (const auto& a : axes_) {
    out.push_back(a.node(k % a.cells()));
    k /= a.cells();
  }
  return out;
}

double grid_mass(const DensityGrid& density) {
  double sum = 0.0;
  for (double v : density.values) sum += v;
  return sum * density.grid.cell_volume();
}

double interpolate(const Grid& grid, std::span<const double> values, std::span<const double> state) {
  if (state.size() != grid.dimension()) throw DomainError("interpolate: state dimension does not match grid");
  if (values.size() != grid.size()) throw DomainError("interpolate: value count does not match grid");

  std::size_t base[2] = {0, 0};
  double weight[2] = {0.0, 0.0};
  for (std::size_t a = 0; a < grid.dimension(); ++a) {
    const auto& ax = grid.axis(a);
    const double s = state[a];
    if (!(s >= ax.lower() && s <= ax.upper()))
      throw DomainError("interpolate: state outside grid bounds on axis " + std::to_string(a));
    double pos = (s - ax.lower()) / ax.spacing() - 0.5;
    // a query on a node returns the node value exactly
    if (const double n = std::nearbyint(pos); std::abs(pos - n) < 1e-9) pos = n;
    const auto i = static_cast<std::size_t>(std::clamp(std::floor(pos), 0.0, static_cast<double>(ax.cells() - 2)));
    base[a] = i;
    weight[a] = pos - static_cast<double>(i);
  }
  if (grid.dimension() == 1) {
    return (1.0 - weight[0]) * values[base[0]] + weight[0] * values[base[0] + 1];
  }
  const std::size_t nx = grid.axis(0).cells();
  const std::size_t k = base[0] + nx * base[1];
  const double lo = (1.0 - weight[0]) * values[k] + weight[0] * values[k + 1];
  const double hi = (1.0 - weight[0]) * values[k + nx] + weight[0] * values[k + nx + 1];
  return (1.0 - weight[1]) * lo + weight[1] * hi;
}

double interpolate(const DensityGrid& density, std::span<const double> state) {
  return interpolate(density.grid, density.values, state);
}

double interpolate(const ValueField& field, std::span<const double> state) {
  return interpolate(field.grid, field.values, state);
}

}  // namespace qportfolio
