// One PASS/FAIL line per acceptance criterion; exit status 1 if any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include "qportfolio/cli.hpp"
#include "qportfolio/fokker_planck.hpp"
#include "qportfolio/hedging.hpp"
#include "qportfolio/models.hpp"
#include "qportfolio/payoff.hpp"
#include "qportfolio/scenario.hpp"
#include "qportfolio/sde.hpp"
#include "qportfolio/valuation.hpp"

namespace qp = qportfolio;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

class Detail {
 public:
  template <typename... Args>
  Detail& add(const char* fmt, Args... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, fmt, args...);
    if (!text_.empty()) text_ += "; ";
    text_ += buf;
    return *this;
  }
  const std::string& str() const { return text_; }

 private:
  std::string text_;
};

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

double normal_pdf(double x, double mean, double var) {
  return std::exp(-0.5 * (x - mean) * (x - mean) / var) / std::sqrt(2.0 * std::numbers::pi * var);
}

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

qp::FpProblem forward_problem(qp::Dynamics dyn, qp::Grid grid, std::vector<double> centre, double sigma, double T,
                              double dt) {
  std::vector<double> sig(centre.size(), sigma);
  auto data = qp::gaussian_density(grid, centre, sig);
  qp::FpProblem prob{std::move(dyn), grid, qp::TimeSchedule::with_step(0.0, T, dt), std::move(data), {}, {}};
  const double bound = qp::forward_time_step_bound(prob);
  if (dt > 0.9 * bound) prob.schedule = qp::TimeSchedule::with_step(0.0, T, 0.9 * bound);
  return prob;
}

// Worst |mass(t) - 1| / max(t, 1) over the reported snapshots.
double mass_drift_rate(const std::vector<qp::DensityGrid>& out) {
  double worst = 0.0;
  for (const auto& d : out) worst = std::max(worst, std::abs(qp::grid_mass(d) - 1.0) / std::max(d.time, 1.0));
  return worst;
}

// Shared between AC2 and AC7.
std::vector<qp::DensityGrid> g_sho2d, g_qubit;

Outcome ac1_moments() {
  const auto start = std::chrono::steady_clock::now();
  qp::ShoParams p(1.0, 1.0);
  const std::vector<double> x0{2.0, 0.0};
  const double T = 5.0;
  qp::EnsembleOptions opt;
  opt.record_steps = {5000};
  auto ens = qp::simulate_ensemble(qp::sho_physical_dynamics(p), {x0[0], x0[1]}, qp::TimeSchedule(0, T, 5000), 100000,
                                   42, opt);
  auto m = qp::ensemble_moments(ens, 5000);
  const double elapsed = seconds_since(start);
  auto law = qp::sho_transition_density(p, qp::Measure::physical, 0.0, x0, T);
  Detail d;
  bool ok = elapsed <= 30.0;
  for (std::size_t a = 0; a < 2; ++a) {
    const double zm = (m.mean[a] - law.mean[a]) / m.mean_standard_error[a];
    const double zv = (m.variance[a] - law.variance[a]) / m.variance_standard_error[a];
    ok = ok && std::abs(zm) <= 3.0 && std::abs(zv) <= 3.0;
    d.add("axis %zu mean %.5f vs %.5f (z=%.2f), var %.5f vs %.5f (z=%.2f)", a, m.mean[a], law.mean[a], zm,
          m.variance[a], law.variance[a], zv);
  }
  d.add("%.1f s", elapsed);
  return {ok, d.str()};
}

// L1 between a density and a histogram of the same samples, plus the L1 after merging
// `block` x `block` cells and the expected L1 of pure sampling noise at full resolution.
struct HistogramComparison {
  double l1 = 0.0;
  double coarse_l1 = 0.0;
  double noise_floor = 0.0;
};

HistogramComparison compare_2d(const qp::DensityGrid& density, const std::vector<double>& counts, double n,
                               std::size_t block) {
  const auto& g = density.grid;
  const std::size_t nx = g.axis(0).cells(), ny = g.axis(1).cells();
  const double vol = g.cell_volume();
  HistogramComparison c;
  std::vector<double> pc((nx / block) * (ny / block), 0.0), hc(pc.size(), 0.0);
  for (std::size_t j = 0; j < ny; ++j)
    for (std::size_t i = 0; i < nx; ++i) {
      const std::size_t k = g.index(i, j);
      const double p = density.values[k] * vol, h = counts[k] / n;
      c.l1 += std::abs(p - h);
      c.noise_floor += std::sqrt(2.0 * std::max(p, 0.0) * (1.0 - p) / (std::numbers::pi * n));
      const std::size_t b = (i / block) + (nx / block) * (j / block);
      pc[b] += p;
      hc[b] += h;
    }
  for (std::size_t b = 0; b < pc.size(); ++b) c.coarse_l1 += std::abs(pc[b] - hc[b]);
  return c;
}

Outcome ac2_forward_vs_mc() {
  Detail d;
  bool ok = true;

  // SHO, two quadratures, 200 x 200 cells
  {
    qp::ShoParams p(1.0, 1.0);
    const auto dyn = qp::sho_physical_dynamics(p);
    qp::Grid g({qp::Grid1D(-6, 6, 200), qp::Grid1D(-6, 6, 200)});
    const double T = 2.0, sigma0 = 0.1;
    auto prob = forward_problem(dyn, g, {2.0, 0.0}, sigma0, T, 0.01);
    prob.output_steps.clear();
    for (std::size_t k = 0; k <= prob.schedule.n_steps(); k += prob.schedule.n_steps() / 4) prob.output_steps.push_back(k);
    if (prob.output_steps.back() != prob.schedule.n_steps()) prob.output_steps.push_back(prob.schedule.n_steps());
    g_sho2d = qp::solve_forward_fp(prob);

    const std::size_t n = 100000;
    const qp::TimeSchedule sched(0, T, 2000);
    std::vector<double> counts(g.size(), 0.0);
    const double h = g.axis(0).spacing(), root_dt = std::sqrt(sched.dt());
    for (std::size_t path = 0; path < n; ++path) {
      qp::State s{2.0 + sigma0 * qp::RandomStream::normal_at(901, path, 0),
                  sigma0 * qp::RandomStream::normal_at(901, path, 1)};
      qp::RandomStream w(902, path);
      for (std::size_t k = 0; k < sched.n_steps(); ++k) {
        qp::State dw{root_dt * w.next_normal(), root_dt * w.next_normal()};
        qp::euler_step(dyn, s, sched.dt(), dw);
      }
      if (std::abs(s[0]) >= 6.0 || std::abs(s[1]) >= 6.0) continue;
      counts[g.index(static_cast<std::size_t>((s[0] + 6.0) / h), static_cast<std::size_t>((s[1] + 6.0) / h))] += 1.0;
    }
    const auto c = compare_2d(g_sho2d.back(), counts, static_cast<double>(n), 10);
    ok = ok && c.coarse_l1 <= 0.05;
    d.add("SHO 2D: L1 %.4f on 200x200 bins (sampling noise alone gives %.4f), %.4f on 20x20 bins", c.l1,
          c.noise_floor, c.coarse_l1);
  }

  // qubit, 400 cells, kappa T = 10
  {
    const auto dyn = qp::qubit_physical_dynamics(qp::QubitParams::from_rate(1.0));
    qp::Grid g({qp::Grid1D(-1, 1, 400)});
    const double T = 10.0, sigma0 = 0.1;
    auto prob = forward_problem(dyn, g, {0.0}, sigma0, T, 1e-3);
    prob.output_steps.clear();
    for (std::size_t k = 0; k <= prob.schedule.n_steps(); k += prob.schedule.n_steps() / 10) prob.output_steps.push_back(k);
    if (prob.output_steps.back() != prob.schedule.n_steps()) prob.output_steps.push_back(prob.schedule.n_steps());
    g_qubit = qp::solve_forward_fp(prob);
    const auto& end = g_qubit.back();
    const double h = g.axis(0).spacing();
    double outer = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i)
      if (std::abs(g.axis(0).node(i)) > 0.9) outer += end.values[i] * h;

    const std::size_t n = 100000;
    const qp::TimeSchedule sched(0, T, 10000);
    std::vector<double> hist(g.size(), 0.0);
    const double root_dt = std::sqrt(sched.dt());
    std::size_t outer_paths = 0;
    for (std::size_t path = 0; path < n; ++path) {
      qp::State s{std::clamp(sigma0 * qp::RandomStream::normal_at(903, path, 0), -0.999, 0.999), 0.0};
      qp::RandomStream w(904, path);
      for (std::size_t k = 0; k < sched.n_steps(); ++k)
        if (qp::euler_step(dyn, s, sched.dt(), {root_dt * w.next_normal(), 0.0})) break;
      if (std::abs(s[0]) > 0.9) {
        ++outer_paths;
        continue;
      }
      hist[std::min<std::size_t>(static_cast<std::size_t>((s[0] + 1.0) / h), g.size() - 1)] += 1.0 / n;
    }
    double l1 = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i)
      if (std::abs(g.axis(0).node(i)) <= 0.9) l1 += std::abs(end.values[i] * h - hist[i]);
    ok = ok && outer >= 0.98 && l1 <= 0.05;
    d.add("qubit: grid mass at |z|>0.9 %.6f (MC %.6f), interior L1 %.3e", outer,
          static_cast<double>(outer_paths) / n, l1);
  }
  return {ok, d.str()};
}

Outcome ac3_route_panel() {
  const auto start = std::chrono::steady_clock::now();
  qp::ShoParams p(1.0, 1.0);
  const std::vector<qp::Payoff> payoffs{qp::DeltaPayoff{{0.5}}, qp::StepPayoff{{0.5}}, qp::CallPayoff{{0.5}}};
  double worst_pde = 0.0, worst_mc_excess = 0.0;
  std::size_t cases = 0, failures = 0;
  std::string first_failure;
  std::uint64_t seed = 300;
  for (double r : {0.0, 0.05}) {
    qp::RiskNeutralSpec rn(r, 1.0);
    for (int i = 0; i < 10; ++i) {
      const std::vector<double> s{-1.8 + 0.4 * i};
      for (const auto& payoff : payoffs) {
        qp::RouteOptions opt;
        opt.mc.n_paths = 100000;
        opt.mc.master_seed = seed++;
        opt.mc.dt = 1e-2;
        const auto cf = qp::value_by_route(qp::Route::closed_form, p, rn, payoff, s, 0.0, opt);
        const auto pde = qp::value_by_route(qp::Route::pde, p, rn, payoff, s, 0.0, opt);
        const auto mc = qp::value_by_route(qp::Route::monte_carlo, p, rn, payoff, s, 0.0, opt);
        const double rel = std::abs(pde.value - cf.value) / std::abs(cf.value);
        const double band = std::max(3.0 * mc.standard_error, 0.005 * std::abs(cf.value));
        const double excess = std::abs(mc.value - cf.value) / band;
        worst_pde = std::max(worst_pde, rel);
        worst_mc_excess = std::max(worst_mc_excess, excess);
        ++cases;
        if (rel > 0.01 || excess > 1.0) {
          if (failures++ == 0) {
            char buf[200];
            std::snprintf(buf, sizeof buf, "%s r=%.2f x=%.1f cf=%.6g pde=%.6g mc=%.6g+-%.2g",
                          qp::payoff_kind(payoff).c_str(), r, s[0], cf.value, pde.value, mc.value, mc.standard_error);
            first_failure = buf;
          }
        }
      }
    }
  }
  const double elapsed = seconds_since(start);
  Detail d;
  d.add("%zu cases, worst |pde-cf|/cf %.4f%%, worst |mc-cf|/band %.2f, %.1f s", cases, 100.0 * worst_pde,
        worst_mc_excess, elapsed);
  if (failures) d.add("%zu outside tolerance, first: %s", failures, first_failure.c_str());
  return {failures == 0 && elapsed <= 120.0, d.str()};
}

Outcome ac4_discount_identity() {
  struct Case {
    std::string name;
    qp::Model model;
    qp::RiskNeutralSpec rn;
    qp::Payoff payoff;
    std::vector<double> state;
  };
  const std::vector<Case> cases{
      {"sho step", qp::ShoParams(1.0, 1.0), qp::RiskNeutralSpec(0.05, 1.0), qp::StepPayoff{{1.0}}, {1.0}},
      {"sho call", qp::ShoParams(2.0, 0.5), qp::RiskNeutralSpec(0.05, 2.0), qp::CallPayoff{{0.3}}, {0.0}},
      {"sho 2D step", qp::ShoParams(1.0, 1.0), qp::RiskNeutralSpec(0.05, 1.0), qp::StepPayoff{{0.5, -INFINITY}},
       {0.7, -0.4}},
      {"sho delta", qp::ShoParams(1.0, 1.0), qp::RiskNeutralSpec(0.05, 1.0), qp::DeltaPayoff{{0.5}}, {0.0}},
      {"qubit step", qp::QubitParams::from_rate(1.0), qp::RiskNeutralSpec(0.05, 10.0), qp::StepPayoff{{0.0}}, {0.4}},
      {"qubit call", qp::QubitParams::from_rate(1.0), qp::RiskNeutralSpec(0.2, 1.0), qp::CallPayoff{{0.5}}, {0.7}},
      {"qubit 2D step", qp::QubitParams::from_rate(1.0), qp::RiskNeutralSpec(0.05, 1.0), qp::StepPayoff{{0.0, 0.0}},
       {0.2, -0.1}},
  };
  double worst = 0.0;
  std::size_t nodes = 0;
  for (const auto& c : cases) {
    const auto grid = qp::pde_valuation_grid(c.model, c.rn, c.payoff, c.state, 0.0);
    const auto sched = qp::pde_valuation_schedule(c.model, c.rn, 0.0);
    const auto axes = c.state.size();
    std::vector<qp::EdgePolicy> edges;
    if (std::holds_alternative<qp::QubitParams>(c.model)) edges.assign(axes, qp::EdgePolicy::absorbing);
    std::vector<std::size_t> steps;
    for (std::size_t k = 0; k <= sched.n_steps(); k += std::max<std::size_t>(1, sched.n_steps() / 8)) steps.push_back(k);
    qp::FpProblem prob{qp::portfolio_dynamics(c.model, qp::Measure::risk_neutral, c.rn.r(), axes), grid, sched,
                       qp::terminal_values(c.payoff, grid), edges, steps};
    if (std::holds_alternative<qp::DeltaPayoff>(c.payoff)) {
      // the PDE route's mollified start; any smooth terminal data exercises the identity
      std::vector<double> sigma(axes, 4.0 * grid.axis(0).spacing());
      prob.data = qp::gaussian_density(grid, std::get<qp::DeltaPayoff>(c.payoff).points, sigma);
    }
    const auto f = qp::solve_backward_valuation(prob, c.rn, qp::ValueForm::f);
    const auto g = qp::solve_backward_valuation(prob, c.rn, qp::ValueForm::g);
    for (std::size_t s = 0; s < f.size(); ++s) {
      const double disc = c.rn.discount(g[s].time);
      for (std::size_t k = 0; k < grid.size(); ++k) {
        const double expect = disc * g[s].values[k];
        const double err = std::abs(f[s].values[k] - expect);
        worst = std::max(worst, expect == 0.0 ? (err == 0.0 ? 0.0 : INFINITY) : err / std::abs(expect));
        ++nodes;
      }
    }
  }
  Detail d;
  d.add("%zu scenarios, %zu node values, worst relative |f - e^{-r(T-t)} g| %.3g", cases.size(), nodes, worst);
  return {worst <= 1e-12, d.str()};
}

// Closed-form scale function of the measured qubit: S'(z) = (1 - z^2)^2.
double collapse_oracle(double z0) {
  auto S = [](double z) { return z - 2.0 * z * z * z / 3.0 + z * z * z * z * z / 5.0; };
  return (S(z0) - S(-1.0)) / (S(1.0) - S(-1.0));
}

Outcome ac5_qubit_absorption() {
  const auto q = qp::QubitParams::from_rate(1.0);
  const auto dyn = qp::qubit_physical_dynamics(q);
  const qp::TimeSchedule sched(0, 10.0, 10000);
  qp::EnsembleOptions opt;
  opt.record_steps = {sched.n_steps()};
  Detail d;
  bool ok = true;
  for (double z0 : {0.0, 0.4, 0.8}) {
    const auto ens = qp::simulate_ensemble(dyn, {z0, 0.0}, sched, 10000, 42, opt);
    std::size_t plus = 0, undecided = 0;
    for (std::size_t p = 0; p < ens.n_paths(); ++p) {
      const double z = ens.state(p, sched.n_steps(), 0);
      plus += z > 0.0;
      undecided += std::abs(z) <= 0.99;
    }
    const double n = static_cast<double>(ens.n_paths());
    const double frac = plus / n;
    const double oracle = collapse_oracle(z0);
    const double se = std::sqrt(oracle * (1.0 - oracle) / n);
    const double library = qp::qubit_absorption_probability(z0);
    ok = ok && std::abs(frac - oracle) <= 3.0 * se && std::abs(library - oracle) <= 1e-8;
    if (z0 == 0.0) ok = ok && std::abs(frac - 0.5) <= 3.0 * se;
    d.add("z0=%.1f: +1 fraction %.4f vs %.5f (z=%.2f), %zu undecided", z0, frac, oracle, (frac - oracle) / se,
          undecided);
  }
  return {ok, d.str()};
}

Outcome ac6_hedging() {
  qp::ShoParams p(1.0, 1.0);
  qp::RiskNeutralSpec rn(0.05, 1.0);
  const qp::Payoff payoff = qp::StepPayoff{{1.0}};
  const std::vector<double> x0{1.0};
  const std::size_t n = 1000;
  Detail d;

  qp::HedgeOptions base;
  base.full_ledgers = 0;
  const auto ledgers = qp::run_hedge(p, rn, payoff, x0, qp::TimeSchedule(0, 1, 1000), n, 42, base);
  const auto rep = qp::replication_report(ledgers);
  const bool mean_ok = rep.failed_paths == 0 && std::abs(rep.mean_error) <= 3.0 * rep.mean_standard_error;
  d.add("mean error %.5f +- %.5f (%s)", rep.mean_error, rep.mean_standard_error, mean_ok ? "ok" : "too large");

  // both runs share their paths: 4 and 1 Euler substeps of 2.5e-3
  qp::HedgeOptions coarse = base, fine = base;
  coarse.substeps = 4;
  const double rms_coarse = qp::replication_report(qp::run_hedge(p, rn, payoff, x0, qp::TimeSchedule(0, 1, 100), n, 42, coarse)).rms_error;
  const double rms_fine = qp::replication_report(qp::run_hedge(p, rn, payoff, x0, qp::TimeSchedule(0, 1, 400), n, 42, fine)).rms_error;
  const double ratio = rms_coarse / rms_fine;
  const bool ratio_ok = ratio >= 1.6 && ratio <= 2.6;
  d.add("RMS dt=1e-2 %.5f, dt=2.5e-3 %.5f, ratio %.3f (%s)", rms_coarse, rms_fine, ratio,
        ratio_ok ? "ok" : "outside [1.6, 2.6]; the step delta is singular at the threshold near maturity, "
                          "so the RMS error falls like dt^(1/4) and quartering dt gives about 4^(1/4) = 1.41");

  qp::HedgeOptions rn_paths = base;
  rn_paths.path_measure = qp::Measure::risk_neutral;
  const double rms_rn = qp::replication_report(qp::run_hedge(p, rn, payoff, x0, qp::TimeSchedule(0, 1, 1000), n, 42, rn_paths)).rms_error;
  const double measure_gap = std::abs(rep.rms_error - rms_rn) / std::min(rep.rms_error, rms_rn);
  const bool measure_ok = measure_gap <= 0.25;
  d.add("RMS physical %.5f vs risk-neutral %.5f, gap %.1f%% (%s)", rep.rms_error, rms_rn, 100.0 * measure_gap,
        measure_ok ? "ok" : "over 25%");

  // the same ratio for a call, whose delta stays bounded
  const qp::Payoff call = qp::CallPayoff{{1.0}};
  const double call_ratio =
      qp::replication_report(qp::run_hedge(p, rn, call, x0, qp::TimeSchedule(0, 1, 100), n, 42, coarse)).rms_error /
      qp::replication_report(qp::run_hedge(p, rn, call, x0, qp::TimeSchedule(0, 1, 400), n, 42, fine)).rms_error;
  d.add("reference: call payoff ratio %.3f", call_ratio);
  return {mean_ok && ratio_ok && measure_ok, d.str()};
}

Outcome ac7_conservation_and_convergence() {
  Detail d;
  bool ok = true;

  qp::ShoParams p(1.0, 1.0);
  const auto axis = qp::sho_axis_dynamics(p, qp::Measure::physical, 0.0);
  {
    qp::Grid g({qp::Grid1D(-6, 6, 200)});
    auto prob = forward_problem(axis, g, {2.0}, 0.1, 5.0, 0.01);
    prob.output_steps.clear();
    for (std::size_t k = 0; k <= prob.schedule.n_steps(); k += 50) prob.output_steps.push_back(k);
    const double sho1 = mass_drift_rate(qp::solve_forward_fp(prob));
    const double sho2 = mass_drift_rate(g_sho2d);
    const double qubit = mass_drift_rate(g_qubit);
    ok = ok && sho1 <= 1e-6 && sho2 <= 1e-6 && qubit <= 1e-6;
    d.add("mass drift per unit time: SHO 1D %.2g, SHO 2D %.2g, qubit %.2g", sho1, sho2, qubit);
  }

  // forward: OU law from a Gaussian start
  {
    std::vector<double> err;
    for (std::size_t cells : {40u, 80u, 160u}) {
      qp::Grid g({qp::Grid1D(-6, 6, cells)});
      auto end = qp::solve_forward_fp(forward_problem(axis, g, {1.0}, 0.5, 1.0, 1e-3)).back();
      const double mean = std::exp(-0.5), var = 0.25 * std::exp(-1.0) + 1.0 - std::exp(-1.0);
      double e = 0;
      for (std::size_t i = 0; i < cells; ++i)
        e = std::max(e, std::abs(end.values[i] - normal_pdf(g.axis(0).node(i), mean, var)));
      err.push_back(e);
    }
    const double r1 = err[0] / err[1], r2 = err[1] / err[2];
    ok = ok && r1 >= 3.2 && r1 <= 4.8 && r2 >= 3.2 && r2 <= 4.8;
    d.add("forward halving factors %.2f %.2f", r1, r2);
  }

  // backward: discounted call on the risk-neutral OU law
  {
    const double r = 0.05, tau = 1.0, strike = 0.3;
    qp::RiskNeutralSpec rn(r, tau);
    const auto dyn = qp::sho_axis_dynamics(p, qp::Measure::risk_neutral, r);
    const double sd = std::sqrt((std::exp(2 * r * tau) - 1.0) / (2 * r));
    auto exact = [&](double x) {
      const double m = x * std::exp(r * tau), z = (m - strike) / sd;
      return std::exp(-r * tau) * ((m - strike) * normal_cdf(z) + sd * normal_pdf(z, 0, 1));
    };
    std::vector<double> err;
    for (std::size_t cells : {50u, 100u, 200u}) {
      qp::Grid g({qp::Grid1D(-6.2, 6.2, cells)});
      qp::FpProblem prob{dyn, g, qp::TimeSchedule(0, tau, 2000), qp::terminal_values(qp::CallPayoff{{strike}}, g), {}, {}};
      auto f0 = qp::solve_backward_valuation(prob, rn, qp::ValueForm::f).front();
      double e = 0;
      for (std::size_t i = 0; i < cells; ++i)
        if (std::abs(g.axis(0).node(i)) < 3.0) e = std::max(e, std::abs(f0.values[i] - exact(g.axis(0).node(i))));
      err.push_back(e);
    }
    const double r1 = err[0] / err[1], r2 = err[1] / err[2];
    ok = ok && r1 >= 3.2 && r1 <= 4.8 && r2 >= 3.2 && r2 <= 4.8;
    d.add("backward halving factors %.2f %.2f", r1, r2);
  }
  return {ok, d.str()};
}

Outcome ac8_determinism() {
  namespace fs = std::filesystem;
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(QPORTFOLIO_SCENARIO_DIR))
    if (e.path().extension() == ".json") files.push_back(e.path());
  std::sort(files.begin(), files.end());
  Detail d;
  bool ok = !files.empty();
  std::size_t bytes = 0;
  for (const auto& path : files) {
    std::ifstream in(path);
    std::stringstream ss;
    ss << in.rdbuf();
    const auto scenario = qp::parse_scenario(ss.str());
    const auto a = qp::run_experiment(scenario, 1);
    const auto b = qp::run_experiment(scenario, 1);
    const auto c = qp::run_experiment(scenario, 4);
    bool same = a.size() == b.size() && a.size() == c.size();
    for (std::size_t i = 0; same && i < a.size(); ++i) {
      same = a[i].name == b[i].name && a[i].content == b[i].content && a[i].name == c[i].name &&
             a[i].content == c[i].content;
      bytes += a[i].content.size();
    }
    if (!same) d.add("%s differs", path.filename().string().c_str());
    ok = ok && same;
  }
  d.add("%zu scenarios re-run with 1, 1 and 4 workers, %zu bytes compared", files.size(), bytes);
  return {ok, d.str()};
}

Outcome ac9_gaussian_approximation() {
  const auto q = qp::QubitParams::from_rate(1.0);
  const std::vector<double> z0{0.2};
  Detail d;
  bool ok = true;
  double last = INFINITY, at_tenth = INFINITY;
  for (double horizon : {1.0, 0.3, 0.1, 0.03}) {
    const auto g = qp::qubit_gaussian_approx_value(q, qp::RiskNeutralSpec(0.05, horizon), qp::StepPayoff{{0.0}}, z0, 0.0);
    ok = ok && g.relative_discrepancy < last;
    last = g.relative_discrepancy;
    if (horizon == 0.1) at_tenth = g.relative_discrepancy;
    d.add("kappa tau=%.2f: approx %.5f, pde %.5f, error %.2f%%", horizon, g.approximation.value, g.pde.value,
          100.0 * g.relative_discrepancy);
  }
  ok = ok && at_tenth <= 0.02;
  return {ok, d.str()};
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
      {"AC1 SHO moment reproduction", ac1_moments},
      {"AC2 forward solver vs Monte Carlo", ac2_forward_vs_mc},
      {"AC3 three-route valuation agreement", ac3_route_panel},
      {"AC4 discount identity", ac4_discount_identity},
      {"AC5 qubit absorption", ac5_qubit_absorption},
      {"AC6 hedging replication", ac6_hedging},
      {"AC7 conservation and convergence", ac7_conservation_and_convergence},
      {"AC8 determinism", ac8_determinism},
      {"AC9 qubit Gaussian approximation", ac9_gaussian_approximation},
  };
  int failed = 0;
  for (const auto& [name, check] : criteria) {
    Outcome o;
    try {
      o = check();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failed += !o.pass;
    std::printf("%s %s: %s\n", o.pass ? "PASS" : "FAIL", name, o.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria failed\n", failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
