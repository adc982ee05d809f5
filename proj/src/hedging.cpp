#include "qportfolio/hedging.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <optional>

#include "qportfolio/errors.hpp"
#include "qportfolio/fokker_planck.hpp"

namespace qportfolio {

double portfolio_value(double f_value, std::span<const double> deltas, std::span<const double> state) {
  if (deltas.size() != state.size()) throw DomainError("portfolio_value: deltas and state differ in length");
  double pi = f_value;
  for (std::size_t i = 0; i < state.size(); ++i) pi -= deltas[i] * state[i];
  return pi;
}

namespace {

// Option value and deltas at rebalancing step k.
class ValueOracle {
 public:
  virtual ~ValueOracle() = default;
  virtual void evaluate(const State& s, std::size_t k, double& f, State& deltas) const = 0;
};

class ClosedFormOracle final : public ValueOracle {
 public:
  ClosedFormOracle(ShoParams p, RiskNeutralSpec rn, Payoff payoff, TimeSchedule schedule, std::size_t axes)
      : p_(p), rn_(rn), payoff_(std::move(payoff)), schedule_(schedule), axes_(axes) {}

  void evaluate(const State& s, std::size_t k, double& f, State& deltas) const override {
    const double t = schedule_.time(k);
    const double tau = rn_.maturity() - t;
    const std::span<const double> x(s.data(), axes_);
    const auto law = sho_transition_density(p_, Measure::risk_neutral, rn_.r(), x, tau);
    const double disc = rn_.discount(t);
    f = disc * gaussian_payoff_value(payoff_, law.mean, law.variance);
    // d mean / d s = e^{r tau} = 1 / disc
    const auto grad = gaussian_payoff_gradient(payoff_, law.mean, law.variance);
    deltas = {0.0, 0.0};
    for (std::size_t a = 0; a < axes_; ++a) deltas[a] = grad[a];
  }

 private:
  ShoParams p_;
  RiskNeutralSpec rn_;
  Payoff payoff_;
  TimeSchedule schedule_;
  std::size_t axes_;
};

// Step and Call payoffs factor into per-axis pieces, so each axis gets its own one-axis backward solve.
class PdeOracle final : public ValueOracle {
 public:
  PdeOracle(const Model& model, const RiskNeutralSpec& rn, const Payoff& payoff, std::span<const double> state0,
            const TimeSchedule& schedule, const PdeOptions& options)
      : rn_(rn), schedule_(schedule), axes_(state0.size()) {
    if (const auto* c = std::get_if<ConstantPayoff>(&payoff)) {
      constant_ = c->level;
      return;
    }
    product_ = std::holds_alternative<StepPayoff>(payoff);
    const std::size_t n = schedule.n_steps();
    const std::size_t wanted = pde_valuation_schedule(model, rn, schedule.t0(), options).n_steps();
    const std::size_t refine = std::max<std::size_t>(1, (wanted + n - 1) / n);
    const TimeSchedule fine(schedule.t0(), schedule.t_end(), n * refine);
    std::vector<std::size_t> outputs;
    for (std::size_t k = 0; k < n; ++k) outputs.push_back(k * refine);
    for (std::size_t a = 0; a < axes_; ++a) {
      Payoff piece;
      if (const auto* step = std::get_if<StepPayoff>(&payoff)) piece = StepPayoff{{step->thresholds[a]}, step->direction};
      else piece = CallPayoff{{std::get<CallPayoff>(payoff).strikes[a]}};
      const std::vector<double> s{state0[a]};
      const Grid grid = pde_valuation_grid(model, rn, piece, s, schedule.t0(), options);
      fields_.push_back(pde_value_fields(model, rn, piece, grid, fine, outputs));
    }
  }

  void evaluate(const State& s, std::size_t k, double& f, State& deltas) const override {
    const double disc = rn_.discount(schedule_.time(k));
    deltas = {0.0, 0.0};
    if (constant_) {
      f = disc * *constant_;
      return;
    }
    State g{0.0, 0.0};
    State slope{0.0, 0.0};
    for (std::size_t a = 0; a < axes_; ++a) {
      const ValueField& field = fields_[a][k];
      const Grid1D& ax = field.grid.axis(0);
      const double x = s[a];
      const double lo = std::max(ax.lower(), x - ax.spacing());
      const double hi = std::min(ax.upper(), x + ax.spacing());
      g[a] = interpolate(field, std::span(&x, 1));
      slope[a] = (interpolate(field, std::span(&hi, 1)) - interpolate(field, std::span(&lo, 1))) / (hi - lo);
    }
    if (product_) {
      f = disc;
      for (std::size_t a = 0; a < axes_; ++a) f *= g[a];
      for (std::size_t a = 0; a < axes_; ++a) {
        double d = disc * slope[a];
        for (std::size_t b = 0; b < axes_; ++b)
          if (b != a) d *= g[b];
        deltas[a] = d;
      }
    } else {
      f = 0.0;
      for (std::size_t a = 0; a < axes_; ++a) {
        f += disc * g[a];
        deltas[a] = disc * slope[a];
      }
    }
  }

 private:
  RiskNeutralSpec rn_;
  TimeSchedule schedule_;
  std::size_t axes_;
  std::optional<double> constant_;
  bool product_ = false;
  std::vector<std::vector<ValueField>> fields_;  // [axis][rebalancing step]
};

std::unique_ptr<ValueOracle> make_oracle(const Model& model, const RiskNeutralSpec& rn, const Payoff& payoff,
                                         std::span<const double> state0, const TimeSchedule& schedule,
                                         const HedgeOptions& options) {
  switch (options.route) {
    case Route::closed_form: {
      const auto* sho = std::get_if<ShoParams>(&model);
      if (sho == nullptr) throw DomainError("run_hedge: the closed_form route needs the SHO model (use pde)");
      return std::make_unique<ClosedFormOracle>(*sho, rn, payoff, schedule, state0.size());
    }
    case Route::pde:
      return std::make_unique<PdeOracle>(model, rn, payoff, state0, schedule, options.pde);
    case Route::monte_carlo:
      break;
  }
  throw DomainError("run_hedge: Monte Carlo deltas are too noisy to hedge with (use closed_form or pde)");
}

double dot(const State& a, const State& b, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
  return s;
}

}  // namespace

std::vector<HedgeLedger> run_hedge(const Model& model, const RiskNeutralSpec& rn, const Payoff& payoff,
                                   std::span<const double> state0, const TimeSchedule& schedule,
                                   std::size_t n_paths, std::uint64_t master_seed, const HedgeOptions& options) {
  const std::size_t axes = state0.size();
  if (axes < 1 || axes > 2) throw DomainError("run_hedge: one or two axes supported");
  if (payoff_axes(payoff) != axes) throw DomainError("run_hedge: payoff axes do not match the state");
  if (std::holds_alternative<DeltaPayoff>(payoff))
    throw DomainError("run_hedge: a delta payoff has no pointwise terminal value to hedge");
  if (std::abs(schedule.t_end() - rn.maturity()) > 1e-12 * std::max(1.0, rn.maturity()))
    throw DomainError("run_hedge: schedule must end at the maturity T");
  if (n_paths == 0) throw DomainError("run_hedge: n_paths must be >= 1");
  if (options.substeps == 0) throw DomainError("run_hedge: substeps must be >= 1");

  const auto oracle = make_oracle(model, rn, payoff, state0, schedule, options);
  const Dynamics dyn = portfolio_dynamics(model, options.path_measure, rn.r(), axes);
  State x0{0.0, 0.0};
  for (std::size_t a = 0; a < axes; ++a) x0[a] = state0[a];
  for (std::size_t a = 0; a < axes; ++a)
    if (const auto& b = dyn.bounds[a]; b && (x0[a] < b->lower || x0[a] > b->upper))
      throw DomainError("run_hedge: initial state outside the model's state domain");

  const std::size_t n = schedule.n_steps();
  const double dt = schedule.dt();
  const double sde_dt = dt / static_cast<double>(options.substeps);
  const double root_dt = std::sqrt(sde_dt);
  const double growth = std::exp(rn.r() * dt);
  const double total_growth = std::exp(rn.r() * (schedule.t_end() - schedule.t0()));

  std::vector<HedgeLedger> ledgers(n_paths);
  parallel_for_chunks(n_paths, options.workers, [&](std::size_t begin, std::size_t end) {
    for (std::size_t p = begin; p < end; ++p) {
      HedgeLedger& ledger = ledgers[p];
      ledger.path = p;
      ledger.axes = axes;
      RandomStream stream(master_seed, p);
      State s = x0;
      State held{0.0, 0.0};
      double cash = 0.0;
      bool absorbed = false;
      try {
        for (std::size_t k = 0; k <= n; ++k) {
          HedgeRow row;
          row.step = k;
          row.t = schedule.time(k);
          row.state = s;
          if (k > 0) cash *= growth;
          if (k == n) {
            row.f = payoff_value(payoff, std::span<const double>(s.data(), axes));
            row.deltas = held;
            row.pi_before = row.pi = row.f - dot(held, s, axes) + cash;
            row.financing = cash;
            ledger.terminal_pi = row.pi;
            ledger.rows.push_back(row);
            break;
          }
          State target = held;
          if (absorbed) {
            row.f = rn.discount(row.t) * payoff_value(payoff, std::span<const double>(s.data(), axes));
          } else {
            oracle->evaluate(s, k, row.f, target);
          }
          if (k == 0) {
            held = target;
            row.pi_before = row.pi = row.f - dot(held, s, axes);
            ledger.initial_pi = row.pi;
          } else {
            row.pi_before = row.f - dot(held, s, axes) + cash;
            for (std::size_t a = 0; a < axes; ++a) cash += (target[a] - held[a]) * s[a];
            held = target;
            row.pi = row.f - dot(held, s, axes) + cash;
          }
          row.deltas = held;
          row.financing = cash;
          if (p < options.full_ledgers || k == 0) ledger.rows.push_back(row);

          for (std::size_t j = 0; j < options.substeps; ++j) {
            State dw{0.0, 0.0};
            for (std::size_t a = 0; a < axes; ++a) dw[a] = root_dt * stream.next_normal();
            if (absorbed) continue;
            if (euler_step(dyn, s, sde_dt, dw)) absorbed = true;
            for (std::size_t a = 0; a < axes; ++a)
              if (!std::isfinite(s[a]))
                throw IntegrationError("run_hedge: non-finite state", k * options.substeps + j, p);
          }
        }
        ledger.absorbed = absorbed;
        ledger.error = ledger.terminal_pi - ledger.initial_pi * total_growth;
      } catch (const std::exception& e) {
        ledger.failure = e.what();
        ledger.error = std::numeric_limits<double>::quiet_NaN();
      }
    }
  });
  return ledgers;
}

ReplicationReport replication_report(std::span<const HedgeLedger> ledgers, std::size_t bins) {
  if (ledgers.size() < 2) throw DomainError("replication_report: at least two ledgers required");
  if (bins == 0) throw DomainError("replication_report: bins must be >= 1");
  ReplicationReport out;
  out.paths = ledgers.size();
  std::vector<double> errors;
  double worst = -1.0;
  for (const auto& l : ledgers) {
    if (!l.failure.empty()) {
      ++out.failed_paths;
      continue;
    }
    errors.push_back(l.error);
    if (std::abs(l.error) > worst) {
      worst = std::abs(l.error);
      out.worst_path = l.path;
      out.worst_error = l.error;
    }
  }
  if (errors.size() < 2) throw DomainError("replication_report: fewer than two completed paths");
  const auto m = sample_moments(errors);
  out.mean_error = m.mean;
  out.mean_standard_error = m.mean_standard_error;
  out.error_std = std::sqrt(m.variance);
  double sq = 0.0;
  for (double e : errors) sq += e * e;
  out.rms_error = std::sqrt(sq / static_cast<double>(errors.size()));

  const auto [lo_it, hi_it] = std::minmax_element(errors.begin(), errors.end());
  double lo = *lo_it;
  double hi = *hi_it;
  if (hi == lo) {
    lo -= 0.5;
    hi += 0.5;
  }
  out.histogram.edges.resize(bins + 1);
  for (std::size_t b = 0; b <= bins; ++b)
    out.histogram.edges[b] = lo + (hi - lo) * static_cast<double>(b) / static_cast<double>(bins);
  out.histogram.counts.assign(bins, 0);
  for (double e : errors) {
    auto b = static_cast<std::size_t>((e - lo) / (hi - lo) * static_cast<double>(bins));
    ++out.histogram.counts[std::min(b, bins - 1)];
  }
  return out;
}

}  // namespace qportfolio
