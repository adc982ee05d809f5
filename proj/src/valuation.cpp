#include "qportfolio/valuation.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "qportfolio/errors.hpp"
#include "qportfolio/fokker_planck.hpp"

namespace qportfolio {

namespace {

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

double normal_pdf(double x) { return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi); }

void require_before_maturity(const RiskNeutralSpec& rn, double t, const char* who) {
  if (!(t < rn.maturity())) throw DomainError(std::string(who) + ": valuation time t must be < T");
}

void require_axes(const Payoff& payoff, std::span<const double> state, const char* who) {
  if (state.empty()) throw DomainError(std::string(who) + ": empty state");
  if (payoff_axes(payoff) != state.size())
    throw DomainError(std::string(who) + ": payoff has " + std::to_string(payoff_axes(payoff)) +
                      " axes but the state has " + std::to_string(state.size()));
}

ValuationResult make_result(Route route, const Model& model, const RiskNeutralSpec& rn, const Payoff& payoff,
                            std::span<const double> state, double t) {
  ValuationResult out;
  out.route = route;
  out.quantity = payoff_quantity(payoff);
  out.model = model_name(model);
  out.r = rn.r();
  out.maturity = rn.maturity();
  out.state.assign(state.begin(), state.end());
  out.t = t;
  return out;
}

// Per-axis factors of the Step product: P(X_i on the payoff side of a_i).
double step_tail(double mean, double variance, double threshold, StepDirection dir) {
  double above = 0.0;
  if (variance > 0.0) {
    above = normal_cdf((mean - threshold) / std::sqrt(variance));
  } else {
    above = mean > threshold ? 1.0 : (mean == threshold ? 0.5 : 0.0);
  }
  return dir == StepDirection::above ? above : 1.0 - above;
}

double step_tail_slope(double mean, double variance, double threshold, StepDirection dir) {
  if (!(variance > 0.0) || std::isinf(threshold)) return 0.0;
  const double sd = std::sqrt(variance);
  const double slope = normal_pdf((mean - threshold) / sd) / sd;
  return dir == StepDirection::above ? slope : -slope;
}

double delta_kernel(double point, double mean, double variance) {
  if (!(variance > 0.0)) throw DomainError("delta payoff: the terminal law is degenerate (zero variance)");
  const double sd = std::sqrt(variance);
  return normal_pdf((point - mean) / sd) / sd;
}

double call_expectation(double mean, double variance, double strike) {
  if (!(variance > 0.0)) return std::max(mean - strike, 0.0);
  const double sd = std::sqrt(variance);
  const double d = (mean - strike) / sd;
  return (mean - strike) * normal_cdf(d) + sd * normal_pdf(d);
}

}  // namespace

std::string to_string(Route route) {
  switch (route) {
    case Route::closed_form: return "closed_form";
    case Route::monte_carlo: return "mc";
    case Route::pde: return "pde";
  }
  return "unknown";
}

Route parse_route(const std::string& name) {
  if (name == "closed_form") return Route::closed_form;
  if (name == "mc" || name == "monte_carlo") return Route::monte_carlo;
  if (name == "pde") return Route::pde;
  throw DomainError("unknown valuation route '" + name + "' (expected closed_form, mc or pde)");
}

double gaussian_payoff_value(const Payoff& payoff, std::span<const double> mean, std::span<const double> variance) {
  require_axes(payoff, mean, "gaussian_payoff_value");
  if (variance.size() != mean.size()) throw DomainError("gaussian_payoff_value: mean/variance size mismatch");
  const std::size_t k = mean.size();
  if (const auto* delta = std::get_if<DeltaPayoff>(&payoff)) {
    double v = 1.0;
    for (std::size_t i = 0; i < k; ++i) v *= delta_kernel(delta->points[i], mean[i], variance[i]);
    return v;
  }
  if (const auto* step = std::get_if<StepPayoff>(&payoff)) {
    double v = 1.0;
    for (std::size_t i = 0; i < k; ++i) v *= step_tail(mean[i], variance[i], step->thresholds[i], step->direction);
    return v;
  }
  if (const auto* call = std::get_if<CallPayoff>(&payoff)) {
    double v = 0.0;
    for (std::size_t i = 0; i < k; ++i) v += call_expectation(mean[i], variance[i], call->strikes[i]);
    return v;
  }
  return std::get<ConstantPayoff>(payoff).level;
}

std::vector<double> gaussian_payoff_gradient(const Payoff& payoff, std::span<const double> mean,
                                             std::span<const double> variance) {
  require_axes(payoff, mean, "gaussian_payoff_gradient");
  const std::size_t k = mean.size();
  std::vector<double> grad(k, 0.0);
  if (const auto* delta = std::get_if<DeltaPayoff>(&payoff)) {
    for (std::size_t i = 0; i < k; ++i) {
      double g = delta_kernel(delta->points[i], mean[i], variance[i]) * (delta->points[i] - mean[i]) / variance[i];
      for (std::size_t j = 0; j < k; ++j)
        if (j != i) g *= delta_kernel(delta->points[j], mean[j], variance[j]);
      grad[i] = g;
    }
  } else if (const auto* step = std::get_if<StepPayoff>(&payoff)) {
    for (std::size_t i = 0; i < k; ++i) {
      double g = step_tail_slope(mean[i], variance[i], step->thresholds[i], step->direction);
      for (std::size_t j = 0; j < k; ++j)
        if (j != i) g *= step_tail(mean[j], variance[j], step->thresholds[j], step->direction);
      grad[i] = g;
    }
  } else if (const auto* call = std::get_if<CallPayoff>(&payoff)) {
    for (std::size_t i = 0; i < k; ++i) {
      grad[i] = variance[i] > 0.0 ? normal_cdf((mean[i] - call->strikes[i]) / std::sqrt(variance[i]))
                                  : (mean[i] > call->strikes[i] ? 1.0 : 0.0);
    }
  }
  return grad;
}

ValuationResult value_closed_form_sho(const ShoParams& p, const RiskNeutralSpec& rn, const Payoff& payoff,
                                      std::span<const double> state, double t) {
  require_before_maturity(rn, t, "value_closed_form_sho");
  require_axes(payoff, state, "value_closed_form_sho");
  const double tau = rn.maturity() - t;
  const auto law = sho_transition_density(p, Measure::risk_neutral, rn.r(), state, tau);
  auto out = make_result(Route::closed_form, p, rn, payoff, state, t);
  out.value = rn.discount(t) * gaussian_payoff_value(payoff, law.mean, law.variance);
  return out;
}

ValuationResult value_mc(const Dynamics& dyn_rn, const RiskNeutralSpec& rn, const Payoff& payoff,
                         std::span<const double> state, double t, const McOptions& options) {
  require_before_maturity(rn, t, "value_mc");
  require_axes(payoff, state, "value_mc");
  if (options.n_paths < 100) throw DomainError("value_mc: n_paths must be >= 100 for a meaningful standard error");
  const std::size_t d = dyn_rn.dimension;
  const std::size_t k = state.size();
  if (d == 0 || k % d != 0) throw DomainError("value_mc: state axes must be a multiple of the dynamics dimension");

  const auto schedule = TimeSchedule::with_step(t, rn.maturity(), options.dt);
  const std::size_t n = options.n_paths;
  const std::size_t last = schedule.n_steps();
  EnsembleOptions ens_opts;
  ens_opts.record_steps = {last};
  ens_opts.workers = options.workers;

  std::vector<double> terminal(n * k);  // [path][axis]
  for (std::size_t b = 0; b < k / d; ++b) {
    State x0{0.0, 0.0};
    for (std::size_t c = 0; c < d; ++c) x0[c] = state[b * d + c];
    const std::uint64_t seed = b == 0 ? options.master_seed : mix_seed(options.master_seed, b);
    const auto ens = simulate_ensemble(dyn_rn, x0, schedule, n, seed, ens_opts);
    for (std::size_t p = 0; p < n; ++p)
      for (std::size_t c = 0; c < d; ++c) terminal[p * k + b * d + c] = ens.state(p, last, c);
  }

  std::vector<double> samples(n);
  if (const auto* delta = std::get_if<DeltaPayoff>(&payoff)) {
    std::vector<double> bandwidth(k);
    for (std::size_t a = 0; a < k; ++a) {
      std::vector<double> column(n);
      for (std::size_t p = 0; p < n; ++p) column[p] = terminal[p * k + a];
      const double sd = std::sqrt(sample_moments(column).variance);
      if (!(sd > 0.0)) throw DomainError("value_mc: delta payoff needs a non-degenerate terminal distribution");
      bandwidth[a] = sd * std::pow(static_cast<double>(n), -0.2);
    }
    for (std::size_t p = 0; p < n; ++p) {
      double v = 1.0;
      for (std::size_t a = 0; a < k; ++a) v *= delta_kernel(delta->points[a], terminal[p * k + a], bandwidth[a] * bandwidth[a]);
      samples[p] = v;
    }
  } else {
    for (std::size_t p = 0; p < n; ++p) samples[p] = payoff_value(payoff, std::span(terminal).subspan(p * k, k));
  }

  const auto m = sample_moments(samples);
  const double disc = rn.discount(t);
  ValuationResult out;
  out.route = Route::monte_carlo;
  out.quantity = payoff_quantity(payoff);
  out.model = dyn_rn.description;
  out.r = rn.r();
  out.maturity = rn.maturity();
  out.state.assign(state.begin(), state.end());
  out.t = t;
  out.value = disc * m.mean;
  out.standard_error = disc * m.mean_standard_error;
  return out;
}

Grid pde_valuation_grid(const Model& model, const RiskNeutralSpec& rn, const Payoff& payoff,
                        std::span<const double> state, double t, const PdeOptions& options) {
  require_before_maturity(rn, t, "value_pde");
  require_axes(payoff, state, "value_pde");
  const std::size_t k = state.size();
  if (k > 2) throw DomainError("value_pde: the PDE route supports at most 2 axes");
  std::vector<Grid1D> axes;
  if (const auto* sho = std::get_if<ShoParams>(&model)) {
    const std::size_t cells = options.cells > 0 ? options.cells : (k == 1 ? 800 : 400);
    const double tau = rn.maturity() - t;
    double sigma = std::sqrt(std::max(sho->n_thermal(), growth_variance(sho->diffusion_constant(), rn.r(), tau)));
    if (!(sigma > 0.0)) sigma = 1.0;
    const double growth = std::exp(rn.r() * tau);
    for (std::size_t a = 0; a < k; ++a) {
      std::vector<double> marks{0.0, state[a], state[a] * growth};
      for (double f : payoff_features(payoff, a)) marks.push_back(f);
      const auto [lo, hi] = std::minmax_element(marks.begin(), marks.end());
      axes.emplace_back(*lo - options.width_sigmas * sigma, *hi + options.width_sigmas * sigma, cells);
    }
  } else {
    const std::size_t cells = options.cells > 0 ? options.cells : 400;
    for (std::size_t a = 0; a < k; ++a) {
      if (!(std::abs(state[a]) <= 1.0)) throw DomainError("value_pde: qubit polarization must lie in [-1, 1]");
      axes.emplace_back(-1.0, 1.0, cells);
    }
  }
  return Grid(std::move(axes));
}

TimeSchedule pde_valuation_schedule(const Model& model, const RiskNeutralSpec& rn, double t,
                                    const PdeOptions& options) {
  require_before_maturity(rn, t, "value_pde");
  if (options.dt > 0.0) return TimeSchedule::with_step(t, rn.maturity(), options.dt);
  const double tau = rn.maturity() - t;
  const double rate = std::visit(
      [&](const auto& p) {
        using P = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<P, ShoParams>) return std::max({p.gamma(), std::abs(rn.r()), 1.0 / tau});
        else return std::max({p.measurement_rate(), std::abs(rn.r()), 1.0 / tau});
      },
      model);
  const auto steps = static_cast<std::size_t>(std::ceil(tau * rate / 1e-2));
  return TimeSchedule(t, rn.maturity(), std::max<std::size_t>(steps, 50));
}

std::vector<ValueField> pde_value_fields(const Model& model, const RiskNeutralSpec& rn, const Payoff& payoff,
                                         const Grid& grid, const TimeSchedule& schedule,
                                         std::vector<std::size_t> output_steps) {
  // qubit paths stop at +-1, where the drift r z can point out of the domain
  std::vector<EdgePolicy> edges;
  if (std::holds_alternative<QubitParams>(model)) edges.assign(grid.dimension(), EdgePolicy::absorbing);
  FpProblem problem{portfolio_dynamics(model, Measure::risk_neutral, rn.r(), grid.dimension()),
                    grid,
                    schedule,
                    terminal_values(payoff, grid),
                    std::move(edges),
                    std::move(output_steps)};
  return solve_backward_valuation(problem, rn, ValueForm::g);
}

ValuationResult value_pde(const Model& model, const RiskNeutralSpec& rn, const Payoff& payoff,
                          std::span<const double> state, double t, const PdeOptions& options) {
  const auto grid = pde_valuation_grid(model, rn, payoff, state, t, options);
  const auto schedule = pde_valuation_schedule(model, rn, t, options);
  const auto fields = pde_value_fields(model, rn, payoff, grid, schedule, {0});
  auto out = make_result(Route::pde, model, rn, payoff, state, t);
  out.value = rn.discount(t) * interpolate(fields.front(), state);
  return out;
}

ValuationResult qubit_gaussian_approx_only(const QubitParams& p, const RiskNeutralSpec& rn, const Payoff& payoff,
                                           std::span<const double> z0, double t) {
  require_before_maturity(rn, t, "qubit_gaussian_approx_value");
  require_axes(payoff, z0, "qubit_gaussian_approx_value");
  const double tau = rn.maturity() - t;
  const double kappa = p.measurement_rate();
  std::vector<double> mean;
  std::vector<double> variance;
  for (double z : z0) {
    if (!(std::abs(z) < 1.0)) throw DomainError("qubit_gaussian_approx_value: |z0| must be < 1");
    const double frozen = 0.5 * kappa * (1.0 - z * z) * (1.0 - z * z);
    mean.push_back(z * std::exp(rn.r() * tau));
    variance.push_back(growth_variance(frozen, rn.r(), tau));
  }
  auto out = make_result(Route::closed_form, p, rn, payoff, z0, t);
  out.value = rn.discount(t) * gaussian_payoff_value(payoff, mean, variance);
  return out;
}

GaussianApproximation qubit_gaussian_approx_value(const QubitParams& p, const RiskNeutralSpec& rn,
                                                  const Payoff& payoff, std::span<const double> z0, double t,
                                                  const PdeOptions& options) {
  GaussianApproximation out;
  out.approximation = qubit_gaussian_approx_only(p, rn, payoff, z0, t);
  out.pde = value_pde(p, rn, payoff, z0, t, options);
  out.discrepancy = out.approximation.value - out.pde.value;
  out.relative_discrepancy = std::abs(out.discrepancy) / std::abs(out.pde.value);
  return out;
}

ValuationResult value_by_route(Route route, const Model& model, const RiskNeutralSpec& rn, const Payoff& payoff,
                               std::span<const double> state, double t, const RouteOptions& options) {
  switch (route) {
    case Route::closed_form: {
      const auto* sho = std::get_if<ShoParams>(&model);
      if (sho == nullptr)
        throw DomainError("closed_form route: no exact closed form for the qubit model (use pde or mc)");
      return value_closed_form_sho(*sho, rn, payoff, state, t);
    }
    case Route::monte_carlo: {
      const std::size_t d = state.size() <= 2 ? state.size() : 1;
      if (d == 0) throw DomainError("value_mc: empty state");
      auto out = value_mc(portfolio_dynamics(model, Measure::risk_neutral, rn.r(), d), rn, payoff, state, t,
                          options.mc);
      out.model = model_name(model);
      return out;
    }
    case Route::pde:
      return value_pde(model, rn, payoff, state, t, options.pde);
  }
  throw DomainError("unknown route");
}

std::vector<double> deltas(Route route, const Model& model, const RiskNeutralSpec& rn, const Payoff& payoff,
                           std::span<const double> state, double t, std::span<const double> bump,
                           const RouteOptions& options) {
  if (bump.size() != state.size()) throw DomainError("deltas: one bump per axis required");
  for (double b : bump)
    if (!(b > 0.0)) throw DomainError("deltas: bumps must be > 0");
  const std::size_t k = state.size();
  std::vector<double> out(k);

  if (route == Route::pde) {
    const auto grid = pde_valuation_grid(model, rn, payoff, state, t, options.pde);
    for (std::size_t a = 0; a < k; ++a) {
      const auto& ax = grid.axis(a);
      const double margin = 2.0 * ax.spacing();
      if (state[a] - bump[a] < ax.lower() + margin || state[a] + bump[a] > ax.upper() - margin)
        throw DomainError("deltas: bumped state must stay 2 grid spacings inside the PDE domain");
    }
    const auto schedule = pde_valuation_schedule(model, rn, t, options.pde);
    const auto field = pde_value_fields(model, rn, payoff, grid, schedule, {0}).front();
    const double disc = rn.discount(t);
    for (std::size_t a = 0; a < k; ++a) {
      std::vector<double> up(state.begin(), state.end());
      std::vector<double> down = up;
      up[a] += bump[a];
      down[a] -= bump[a];
      out[a] = disc * (interpolate(field, up) - interpolate(field, down)) / (2.0 * bump[a]);
    }
    return out;
  }

  for (std::size_t a = 0; a < k; ++a) {
    std::vector<double> up(state.begin(), state.end());
    std::vector<double> down = up;
    up[a] += bump[a];
    down[a] -= bump[a];
    const double f_up = value_by_route(route, model, rn, payoff, up, t, options).value;
    const double f_down = value_by_route(route, model, rn, payoff, down, t, options).value;
    out[a] = (f_up - f_down) / (2.0 * bump[a]);
  }
  return out;
}

}  // namespace qportfolio
