#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace qportfolio {

/// Uniform cell-centred axis: `cells` cells of width h on [lower, upper].
class Grid1D {
 public:
  Grid1D(double lower, double upper, std::size_t cells);

  double lower() const noexcept { return lower_; }
  double upper() const noexcept { return upper_; }
  std::size_t cells() const noexcept { return cells_; }
  double spacing() const noexcept { return h_; }
  double node(std::size_t i) const noexcept { return lower_ + (static_cast<double>(i) + 0.5) * h_; }
  /// Coordinate of the face between cells i-1 and i (face 0 is `lower`).
  double face(std::size_t i) const noexcept { return lower_ + static_cast<double>(i) * h_; }

  static constexpr std::size_t kMinCells = 16;

 private:
  double lower_;
  double upper_;
  std::size_t cells_;
  double h_;
};

/// Product of one or two axes; values are stored with axis 0 varying fastest.
class Grid {
 public:
  explicit Grid(std::vector<Grid1D> axes);

  std::size_t dimension() const noexcept { return axes_.size(); }
  const Grid1D& axis(std::size_t a) const { return axes_.at(a); }
  const std::vector<Grid1D>& axes() const noexcept { return axes_; }
  std::size_t size() const noexcept { return size_; }
  double cell_volume() const noexcept;
  std::size_t index(std::size_t i, std::size_t j = 0) const noexcept { return i + axes_[0].cells() * j; }
  /// Node coordinates of flat index k.
  std::vector<double> coordinates(std::size_t k) const;

 private:
  std::vector<Grid1D> axes_;
  std::size_t size_;
};

/// Probability density P(state, t) sampled at nodes.
struct DensityGrid {
  Grid grid;
  std::vector<double> values;
  double time = 0.0;
};

/// Valuation field at nodes: g (undiscounted) or f = e^{-r(T-t)} g (discounted).
struct ValueField {
  Grid grid;
  std::vector<double> values;
  double time = 0.0;
  bool discounted = false;
};

/// Sum of P times the cell volume.
double grid_mass(const DensityGrid& density);

/// Multilinear interpolation among the surrounding nodes. Throws DomainError outside [lower, upper].
/// In the outer half-cells the edge pair of nodes is extended linearly.
double interpolate(const Grid& grid, std::span<const double> values, std::span<const double> state);
double interpolate(const DensityGrid& density, std::span<const double> state);
double interpolate(const ValueField& field, std::span<const double> state);

}  // namespace qportfolio
