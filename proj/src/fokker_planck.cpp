#include "qportfolio/fokker_planck.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <string>

#include "qportfolio/errors.hpp"

namespace qportfolio {
namespace {

constexpr double kTheta = 0.5;
constexpr std::size_t kRannacherSteps = 2;
constexpr double kClipMassLimit = 1e-8;

// Bernoulli function w / (e^w - 1).
double bernoulli(double w) {
  if (w == 0.0) return 1.0;
  return w / std::expm1(w);
}

// (w/2) coth(w/2), the fitting factor of the central scheme.
double fitting_factor(double w) {
  if (std::abs(w) < 1e-8) return 1.0;
  const double half = 0.5 * std::abs(w);
  return half / std::tanh(half);
}

// Terminal-data extrapolation to the face beyond `edge`, `inner` being its neighbour.
double extrapolate_to_face(double edge, double inner) { return 1.5 * edge - 0.5 * inner; }

// Thomas solve of (I - w L) x = r in place for one short line.
void solve_line(const std::vector<double>& lo, const std::vector<double>& di, const std::vector<double>& up, double w,
                std::vector<double>& r) {
  const std::size_t m = r.size();
  std::vector<double> sp(m);
  double prev = 0.0;
  for (std::size_t j = 0; j < m; ++j) {
    const double a = j > 0 ? -w * lo[j] : 0.0;
    const double c = j + 1 < m ? -w * up[j] : 0.0;
    const double b = 1.0 - w * di[j] - a * prev;
    r[j] = (r[j] - (j > 0 ? a * r[j - 1] : 0.0)) / b;
    sp[j] = c / b;
    prev = sp[j];
  }
  for (std::size_t j = m - 1; j-- > 0;) r[j] -= sp[j] * r[j + 1];
}

// Values held on one outer face of an axis (one per line) and their weight in the edge node's
// equation. On a two-axis grid the face is a line along the other axis and moves with its sweeps;
// its own ends (the corners) are frozen.
struct Face {
  bool active = false;
  std::vector<double> coef;
  std::vector<double> value;
  std::vector<double> lo, di, up;  // along the other axis
  double corner_coef[2] = {0.0, 0.0};
  double corner_value[2] = {0.0, 0.0};

  void step(double dt, double theta) {
    const std::size_t m = value.size();
    const double ew = (1.0 - theta) * dt;
    std::vector<double> r(m);
    for (std::size_t j = 0; j < m; ++j) {
      double lv = di[j] * value[j];
      if (j > 0) lv += lo[j] * value[j - 1];
      if (j + 1 < m) lv += up[j] * value[j + 1];
      r[j] = value[j] + ew * lv;
    }
    r[0] += dt * corner_coef[0] * corner_value[0];
    r[m - 1] += dt * corner_coef[1] * corner_value[1];
    solve_line(lo, di, up, theta * dt, r);
    value = std::move(r);
  }
};

// Tridiagonal operator for every line along one axis: (L v)_j = lo_j v_{j-1} + di_j v_j + up_j v_{j+1}.
// Coefficients are stored at the flat grid index of their node.
struct AxisOperator {
  std::size_t axis = 0;
  std::size_t length = 0;  // nodes per line
  std::size_t lines = 0;
  std::size_t stride = 1;  // distance between consecutive nodes of a line in the flat array
  std::size_t line_step = 1;
  std::vector<double> lo, di, up;
  Face faces[2];  // lower, upper

  std::size_t at(std::size_t line, std::size_t j) const noexcept { return line * line_step + j * stride; }

  // LU factors of (I - w L), cached for the last implicit weight w.
  double factored_weight = -1.0;
  std::vector<double> sub, inv_pivot, super;
};

class SplitOperator {
 public:
  SplitOperator(std::vector<AxisOperator> axes, std::size_t size) : axes_(std::move(axes)), rhs_(size) {}

  // Advances `v` by dt with the given theta. `reverse` sweeps the axes in reverse order.
  void advance(std::vector<double>& v, double dt, double theta, bool reverse) {
    const std::size_t n = axes_.size();
    for (std::size_t s = 0; s < n; ++s) {
      const std::size_t a = reverse ? n - 1 - s : s;
      sweep(axes_[a], v, dt, theta);
      // faces of the other axis are lines along this one
      for (std::size_t b = 0; b < n; ++b)
        if (b != a)
          for (auto& face : axes_[b].faces)
            if (face.active) face.step(dt, theta);
    }
  }

  // Face values from the terminal data.
  void init_faces(const std::vector<double>& v) {
    for (auto& op : axes_) {
      for (std::size_t side = 0; side < 2; ++side) {
        Face& face = op.faces[side];
        if (!face.active) continue;
        const std::size_t edge = side == 0 ? 0 : op.length - 1;
        const std::size_t inner = side == 0 ? 1 : op.length - 2;
        for (std::size_t line = 0; line < op.lines; ++line)
          face.value[line] = extrapolate_to_face(v[op.at(line, edge)], v[op.at(line, inner)]);
        if (op.lines > 1) {
          const std::size_t m = op.lines;
          face.corner_value[0] = extrapolate_to_face(face.value[0], face.value[1]);
          face.corner_value[1] = extrapolate_to_face(face.value[m - 1], face.value[m - 2]);
        }
      }
    }
  }

  double max_outflow_rate() const {
    double worst = 0.0;
    for (const auto& a : axes_)
      for (double d : a.di) worst = std::max(worst, -d);
    return worst;
  }

 private:
  static void factor(AxisOperator& op, double w) {
    if (op.factored_weight == w) return;
    const std::size_t size = op.di.size();
    op.sub.assign(size, 0.0);
    op.inv_pivot.assign(size, 0.0);
    op.super.assign(size, 0.0);
    for (std::size_t line = 0; line < op.lines; ++line) {
      double prev_super = 0.0;
      for (std::size_t j = 0; j < op.length; ++j) {
        const std::size_t k = op.at(line, j);
        const double a = j > 0 ? -w * op.lo[k] : 0.0;
        const double c = j + 1 < op.length ? -w * op.up[k] : 0.0;
        const double b = 1.0 - w * op.di[k] - a * prev_super;
        op.sub[k] = a;
        op.inv_pivot[k] = 1.0 / b;
        op.super[k] = c / b;
        prev_super = op.super[k];
      }
    }
    op.factored_weight = w;
  }

  void sweep(AxisOperator& op, std::vector<double>& v, double dt, double theta) {
    const std::size_t m = op.length;
    const double ew = (1.0 - theta) * dt;
    factor(op, theta * dt);
    const double* lo = op.lo.data();
    const double* di = op.di.data();
    const double* up = op.up.data();
    const double* sub = op.sub.data();
    const double* ip = op.inv_pivot.data();
    const double* sp = op.super.data();
    double* r = rhs_.data();
    double* x = v.data();
    const Face& low = op.faces[0];
    const Face& high = op.faces[1];
    if (op.stride == 1) {
      for (std::size_t line = 0; line < op.lines; ++line) {
        const std::size_t s = op.at(line, 0);
        for (std::size_t j = 0; j < m; ++j) {
          const std::size_t k = s + j;
          double lv = di[k] * x[k];
          if (j > 0) lv += lo[k] * x[k - 1];
          if (j + 1 < m) lv += up[k] * x[k + 1];
          r[k] = x[k] + ew * lv;
        }
        if (low.active) r[s] += dt * low.coef[line] * low.value[line];
        if (high.active) r[s + m - 1] += dt * high.coef[line] * high.value[line];
        r[s] *= ip[s];
        for (std::size_t j = 1; j < m; ++j) r[s + j] = (r[s + j] - sub[s + j] * r[s + j - 1]) * ip[s + j];
        for (std::size_t j = m - 1; j-- > 0;) r[s + j] -= sp[s + j] * r[s + j + 1];
        for (std::size_t j = 0; j < m; ++j) x[s + j] = r[s + j];
      }
      return;
    }
    // Strided axis: lines are adjacent in memory, so run every line together row by row.
    const std::size_t L = op.lines;
    const std::size_t st = op.stride;
    for (std::size_t j = 0; j < m; ++j) {
      const std::size_t row = j * st;
      for (std::size_t l = 0; l < L; ++l) {
        const std::size_t k = row + l;
        double lv = di[k] * x[k];
        if (j > 0) lv += lo[k] * x[k - st];
        if (j + 1 < m) lv += up[k] * x[k + st];
        r[k] = x[k] + ew * lv;
      }
    }
    if (low.active)
      for (std::size_t l = 0; l < L; ++l) r[l] += dt * low.coef[l] * low.value[l];
    if (high.active)
      for (std::size_t l = 0; l < L; ++l) r[(m - 1) * st + l] += dt * high.coef[l] * high.value[l];
    for (std::size_t l = 0; l < L; ++l) r[l] *= ip[l];
    for (std::size_t j = 1; j < m; ++j) {
      const std::size_t row = j * st;
      for (std::size_t l = 0; l < L; ++l) r[row + l] = (r[row + l] - sub[row + l] * r[row + l - st]) * ip[row + l];
    }
    for (std::size_t j = m - 1; j-- > 0;) {
      const std::size_t row = j * st;
      for (std::size_t l = 0; l < L; ++l) r[row + l] -= sp[row + l] * r[row + l + st];
    }
    std::copy(rhs_.begin(), rhs_.end(), v.begin());
  }

  std::vector<AxisOperator> axes_;
  std::vector<double> rhs_;
};

AxisOperator line_layout(const Grid& grid, std::size_t axis) {
  AxisOperator op;
  op.axis = axis;
  op.length = grid.axis(axis).cells();
  op.lines = grid.size() / op.length;
  if (grid.dimension() == 1) {
    op.stride = 1;
    op.line_step = 0;
  } else if (axis == 0) {
    op.stride = 1;
    op.line_step = grid.axis(0).cells();
  } else {
    op.stride = grid.axis(0).cells();
    op.line_step = 1;
  }
  op.lo.assign(grid.size(), 0.0);
  op.di.assign(grid.size(), 0.0);
  op.up.assign(grid.size(), 0.0);
  return op;
}

// Coordinate of line `line` on the other axis.
double other_coordinate(const Grid& grid, std::size_t axis, std::size_t line) {
  if (grid.dimension() == 1) return 0.0;
  return grid.axis(1 - axis).node(line);
}

State make_state(std::size_t axis, double along, double other) {
  State s{0.0, 0.0};
  s[axis] = along;
  s[1 - axis] = other;
  return s;
}

std::vector<EdgePolicy> resolve_edges(const FpProblem& problem, EdgePolicy fallback) {
  if (problem.edges.empty()) return std::vector<EdgePolicy>(problem.grid.dimension(), fallback);
  if (problem.edges.size() != problem.grid.dimension())
    throw DomainError("FpProblem: one edge policy per axis required");
  return problem.edges;
}

void check_problem(const FpProblem& problem) {
  if (problem.dynamics.dimension != problem.grid.dimension())
    throw DomainError("FpProblem: dynamics dimension does not match grid dimension");
  if (problem.data.size() != problem.grid.size()) throw DomainError("FpProblem: data size does not match grid");
  for (double v : problem.data)
    if (!std::isfinite(v)) throw DomainError("FpProblem: data contains non-finite values");
}

std::vector<std::size_t> resolve_outputs(const FpProblem& problem) {
  std::vector<std::size_t> steps = problem.output_steps;
  if (steps.empty()) steps = {0, problem.schedule.n_steps()};
  std::sort(steps.begin(), steps.end());
  steps.erase(std::unique(steps.begin(), steps.end()), steps.end());
  if (steps.back() > problem.schedule.n_steps()) throw DomainError("FpProblem: output step beyond schedule");
  return steps;
}

SplitOperator forward_operator(const FpProblem& problem, const std::vector<EdgePolicy>& edges) {
  const Grid& grid = problem.grid;
  const Dynamics& dyn = problem.dynamics;
  std::vector<AxisOperator> ops;
  for (std::size_t axis = 0; axis < grid.dimension(); ++axis) {
    AxisOperator op = line_layout(grid, axis);
    const Grid1D& ax = grid.axis(axis);
    const double h = ax.spacing();
    const std::size_t m = op.length;
    std::vector<double> centre_d(m + 2);  // includes ghost centres at -1 and m
    std::vector<double> alpha(m + 1), beta(m + 1);
    for (std::size_t line = 0; line < op.lines; ++line) {
      const double other = other_coordinate(grid, axis, line);
      auto diffusion_at = [&](double z) {
        const double amp = dyn.diffusion_amplitude(make_state(axis, z, other))[axis];
        return 0.5 * amp * amp;
      };
      for (std::size_t j = 0; j < m + 2; ++j)
        centre_d[j] = diffusion_at(ax.lower() + (static_cast<double>(j) - 0.5) * h);
      for (std::size_t f = 0; f <= m; ++f) {
        const bool outer = f == 0 || f == m;
        if (outer && edges[axis] == EdgePolicy::zero_flux) {
          alpha[f] = beta[f] = 0.0;
          continue;
        }
        const double zf = ax.face(f);
        const double df = diffusion_at(zf);
        const double vf = dyn.drift(make_state(axis, zf, other))[axis];
        // face f sits between centre_d[f] (left) and centre_d[f + 1] (right)
        const double a = vf - (centre_d[f + 1] - centre_d[f]) / h;
        if (df > 0.0) {
          const double w = a * h / df;
          alpha[f] = df / h * bernoulli(-w);
          beta[f] = df / h * bernoulli(w);
        } else {
          alpha[f] = std::max(a, 0.0);
          beta[f] = std::max(-a, 0.0);
        }
      }
      for (std::size_t j = 0; j < m; ++j) {
        const std::size_t k = op.at(line, j);
        op.lo[k] = alpha[j] / h;
        op.di[k] = -(beta[j] + alpha[j + 1]) / h;
        op.up[k] = beta[j + 1] / h;
      }
    }
    ops.push_back(std::move(op));
  }
  return SplitOperator(std::move(ops), grid.size());
}

struct NodeStencil {
  double lo = 0.0, di = 0.0, up = 0.0;
  double face = 0.0;  // weight of the outer face value (absorbing edges only)
};

// Backward generator at node j of a line along `ax`; `state_at` maps a coordinate on this axis to the state.
template <class StateAt>
NodeStencil backward_stencil(const Dynamics& dyn, std::size_t axis, const Grid1D& ax, EdgePolicy policy,
                             std::size_t j, StateAt state_at) {
  const double h = ax.spacing();
  const std::size_t m = ax.cells();
  const State s = state_at(ax.node(j));
  const double mu = dyn.drift(s)[axis];
  const double amp = dyn.diffusion_amplitude(s)[axis];
  const double d = 0.5 * amp * amp;
  const bool low = j == 0;
  const bool high = j + 1 == m;
  NodeStencil st;
  if ((low || high) && policy == EdgePolicy::absorbing) {
    const double face_mu = dyn.drift(state_at(low ? ax.lower() : ax.upper()))[axis];
    if (low ? face_mu <= 0.0 : face_mu >= 0.0) {
      // face h/2 away: three-point second difference on the uneven stencil, drift upwinded towards the face
      const double near = 4.0 * d / (3.0 * h * h);
      st.di = -4.0 * d / (h * h);
      st.face = 8.0 * d / (3.0 * h * h);
      if (high) {
        st.lo = near;
        if (mu >= 0.0) {
          st.di -= 2.0 * mu / h;
          st.face += 2.0 * mu / h;
        } else {
          st.di += mu / h;
          st.lo -= mu / h;
        }
      } else {
        st.up = near;
        if (mu <= 0.0) {
          st.di += 2.0 * mu / h;
          st.face -= 2.0 * mu / h;
        } else {
          st.di -= mu / h;
          st.up += mu / h;
        }
      }
      return st;
    }
    policy = EdgePolicy::linear;
  }
  if ((low || high) && policy == EdgePolicy::linear) {
    // ghost = linear extrapolation: second difference vanishes, slope is one-sided
    if (low) {
      st.di = -mu / h;
      st.up = mu / h;
    } else {
      st.lo = -mu / h;
      st.di = mu / h;
    }
    return st;
  }
  const double rho = d > 0.0 ? d * fitting_factor(mu * h / d) : 0.5 * std::abs(mu) * h;
  st.lo = rho / (h * h) - mu / (2.0 * h);
  st.di = -2.0 * rho / (h * h);
  st.up = rho / (h * h) + mu / (2.0 * h);
  if ((low || high) && policy == EdgePolicy::zero_flux) {
    // mirrored ghost: zero slope at the edge
    if (low) st.up += st.lo;
    else st.lo += st.up;
  }
  // zero_value: ghost node is 0, its coefficient simply drops out
  if (low) st.lo = 0.0;
  if (high) st.up = 0.0;
  return st;
}

SplitOperator backward_operator(const FpProblem& problem, const std::vector<EdgePolicy>& edges) {
  const Grid& grid = problem.grid;
  const Dynamics& dyn = problem.dynamics;
  std::vector<AxisOperator> ops;
  for (std::size_t axis = 0; axis < grid.dimension(); ++axis) {
    AxisOperator op = line_layout(grid, axis);
    const Grid1D& ax = grid.axis(axis);
    const std::size_t m = op.length;
    if (edges[axis] == EdgePolicy::absorbing) {
      for (auto& face : op.faces) {
        face.active = true;
        face.coef.assign(op.lines, 0.0);
        face.value.assign(op.lines, 0.0);
      }
    }
    for (std::size_t line = 0; line < op.lines; ++line) {
      const double other = other_coordinate(grid, axis, line);
      auto state_at = [&](double c) { return make_state(axis, c, other); };
      for (std::size_t j = 0; j < m; ++j) {
        const NodeStencil st = backward_stencil(dyn, axis, ax, edges[axis], j, state_at);
        const std::size_t k = op.at(line, j);
        op.lo[k] = st.lo;
        op.di[k] = st.di;
        op.up[k] = st.up;
        if (j == 0 && op.faces[0].active) op.faces[0].coef[line] = st.face;
        if (j + 1 == m && op.faces[1].active) op.faces[1].coef[line] = st.face;
      }
    }
    if (grid.dimension() == 2 && edges[axis] == EdgePolicy::absorbing) {
      // each face is a line along the other axis at this axis' outer coordinate
      const std::size_t other_axis = 1 - axis;
      const Grid1D& bx = grid.axis(other_axis);
      for (std::size_t side = 0; side < 2; ++side) {
        Face& face = op.faces[side];
        const double at = side == 0 ? ax.lower() : ax.upper();
        auto state_at = [&](double c) { return make_state(other_axis, c, at); };
        const std::size_t n = bx.cells();
        face.lo.assign(n, 0.0);
        face.di.assign(n, 0.0);
        face.up.assign(n, 0.0);
        for (std::size_t j = 0; j < n; ++j) {
          const NodeStencil st = backward_stencil(dyn, other_axis, bx, edges[other_axis], j, state_at);
          face.lo[j] = st.lo;
          face.di[j] = st.di;
          face.up[j] = st.up;
          if (j == 0) face.corner_coef[0] = st.face;
          if (j + 1 == n) face.corner_coef[1] = st.face;
        }
      }
    }
    ops.push_back(std::move(op));
  }
  return SplitOperator(std::move(ops), grid.size());
}

// One schedule step; Rannacher start-up replaces the first steps by two implicit half steps.
void time_step(SplitOperator& op, std::vector<double>& v, double dt, std::size_t step_index) {
  const bool reverse = step_index % 2 == 1;
  if (step_index < kRannacherSteps) {
    op.advance(v, 0.5 * dt, 1.0, reverse);
    op.advance(v, 0.5 * dt, 1.0, !reverse);
  } else {
    op.advance(v, dt, kTheta, reverse);
  }
}

void enforce_nonnegative(std::vector<double>& v, double cell_volume, double target_mass, double time) {
  double negative = 0.0;
  double most_negative = 0.0;
  for (double x : v) {
    if (!std::isfinite(x)) throw SchemeError("solve_forward_fp: non-finite density at t=" + std::to_string(time));
    if (x < 0.0) {
      negative -= x;
      most_negative = std::min(most_negative, x);
    }
  }
  if (negative == 0.0) return;
  if (negative * cell_volume >= kClipMassLimit) {
    std::ostringstream os;
    os << "solve_forward_fp: negative density " << most_negative << " (clipped mass " << negative * cell_volume
       << ") at t=" << time;
    throw SchemeError(os.str());
  }
  double sum = 0.0;
  for (double& x : v) {
    x = std::max(x, 0.0);
    sum += x;
  }
  if (sum > 0.0) {
    const double scale = target_mass / (sum * cell_volume);
    for (double& x : v) x *= scale;
  }
}

}  // namespace

double forward_time_step_bound(const FpProblem& problem) {
  check_problem(problem);
  const auto edges = resolve_edges(problem, EdgePolicy::zero_flux);
  const double rate = forward_operator(problem, edges).max_outflow_rate();
  return rate > 0.0 ? 1.0 / ((1.0 - kTheta) * rate) : std::numeric_limits<double>::infinity();
}

std::vector<DensityGrid> solve_forward_fp(const FpProblem& problem) {
  check_problem(problem);
  const auto edges = resolve_edges(problem, EdgePolicy::zero_flux);
  for (auto e : edges)
    if (e == EdgePolicy::linear || e == EdgePolicy::absorbing)
      throw DomainError("solve_forward_fp: linear and absorbing edges apply to backward solves only");

  SplitOperator op = forward_operator(problem, edges);
  const double dt = problem.schedule.dt();
  const double rate = op.max_outflow_rate();
  const double bound = rate > 0.0 ? 1.0 / ((1.0 - kTheta) * rate) : std::numeric_limits<double>::infinity();
  if (dt > bound * (1.0 + 1e-12)) {
    std::ostringstream os;
    os << "solve_forward_fp: dt=" << dt << " exceeds the positivity bound dt <= " << bound;
    throw SchemeError(os.str());
  }

  const double volume = problem.grid.cell_volume();
  std::vector<double> v = problem.data;
  double sum = 0.0;
  for (double x : v) {
    if (x < 0.0) throw DomainError("solve_forward_fp: initial density must be nonnegative");
    sum += x;
  }
  if (!(sum > 0.0)) throw DomainError("solve_forward_fp: initial density has zero mass");
  for (double& x : v) x /= sum * volume;

  const auto outputs = resolve_outputs(problem);
  std::vector<DensityGrid> result;
  auto emit = [&](std::size_t k) {
    if (std::binary_search(outputs.begin(), outputs.end(), k))
      result.push_back(DensityGrid{problem.grid, v, problem.schedule.time(k)});
  };
  emit(0);
  for (std::size_t k = 0; k < problem.schedule.n_steps(); ++k) {
    double mass = 0.0;
    for (double x : v) mass += x;
    mass *= volume;
    time_step(op, v, dt, k);
    enforce_nonnegative(v, volume, mass, problem.schedule.time(k + 1));
    emit(k + 1);
  }
  return result;
}

std::vector<ValueField> solve_backward_valuation(const FpProblem& problem, const RiskNeutralSpec& rn, ValueForm form) {
  check_problem(problem);
  const double T = problem.schedule.t_end();
  if (std::abs(T - rn.maturity()) > 1e-12 * std::max(1.0, std::abs(T)))
    throw DomainError("solve_backward_valuation: schedule must end at the maturity T");
  const auto edges = resolve_edges(problem, EdgePolicy::linear);
  SplitOperator op = backward_operator(problem, edges);
  op.init_faces(problem.data);
  const double dt = problem.schedule.dt();
  const std::size_t n = problem.schedule.n_steps();
  const auto outputs = resolve_outputs(problem);

  std::vector<double> v = problem.data;
  std::vector<ValueField> result;
  auto emit = [&](std::size_t k) {
    if (!std::binary_search(outputs.begin(), outputs.end(), k)) return;
    const double t = problem.schedule.time(k);
    ValueField field{problem.grid, v, t, form == ValueForm::f};
    if (form == ValueForm::f) {
      const double discount = rn.discount(t);
      for (double& x : field.values) x *= discount;
    }
    result.push_back(std::move(field));
  };
  emit(n);
  for (std::size_t s = 0; s < n; ++s) {
    time_step(op, v, dt, s);
    for (double x : v)
      if (!std::isfinite(x))
        throw SchemeError("solve_backward_valuation: non-finite value at t=" + std::to_string(problem.schedule.time(n - s - 1)));
    emit(n - s - 1);
  }
  std::reverse(result.begin(), result.end());
  return result;
}

std::vector<double> gaussian_density(const Grid& grid, std::span<const double> mean, std::span<const double> sigma) {
  if (mean.size() != grid.dimension() || sigma.size() != grid.dimension())
    throw DomainError("gaussian_density: one mean and sigma per axis required");
  std::vector<double> out(grid.size(), 1.0);
  for (std::size_t k = 0; k < grid.size(); ++k) {
    const auto c = grid.coordinates(k);
    double e = 0.0;
    for (std::size_t a = 0; a < grid.dimension(); ++a) {
      if (!(sigma[a] > 0.0)) throw DomainError("gaussian_density: sigma must be > 0");
      const double z = (c[a] - mean[a]) / sigma[a];
      e += 0.5 * z * z;
    }
    out[k] = std::exp(-e);
  }
  double sum = 0.0;
  for (double x : out) sum += x;
  if (!(sum > 0.0)) throw DomainError("gaussian_density: Gaussian has no mass on the grid");
  const double scale = 1.0 / (sum * grid.cell_volume());
  for (double& x : out) x *= scale;
  return out;
}

}  // namespace qportfolio
