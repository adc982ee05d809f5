#include "qportfolio/errors.hpp"
#include "qportfolio/models.hpp"
#include "qportfolio/payoff.hpp"
#include "qportfolio/valuation.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <vector>

namespace qportfolio {
namespace {

double normal_pdf(double x, double mean, double var) {
  return std::exp(-0.5 * (x - mean) * (x - mean) / var) / std::sqrt(2.0 * std::numbers::pi * var);
}

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

// Risk-neutral law of one SHO quadrature after tau: mean x e^{r tau}, variance 2D (e^{2 r tau} - 1) / (2 r).
struct Law {
  double mean;
  double var;
};

Law rn_law(double D, double r, double x, double tau) {
  double var = r == 0.0 ? 2 * D * tau : 2 * D * (std::exp(2 * r * tau) - 1) / (2 * r);
  return {x * std::exp(r * tau), var};
}

double call_expectation(const Law& l, double k) {
  const double sd = std::sqrt(l.var), d = (l.mean - k) / sd;
  return (l.mean - k) * normal_cdf(d) + sd * normal_pdf(d, 0, 1);
}

McOptions mc(std::size_t n, std::uint64_t seed, double dt = 1e-3) {
  McOptions o;
  o.n_paths = n;
  o.master_seed = seed;
  o.dt = dt;
  return o;
}

TEST(Routes, NamesRoundTrip) {
  for (Route r : {Route::closed_form, Route::monte_carlo, Route::pde}) EXPECT_EQ(parse_route(to_string(r)), r);
  EXPECT_EQ(parse_route("monte_carlo"), Route::monte_carlo);
  EXPECT_THROW(parse_route("binomial"), DomainError);
}

TEST(ClosedForm, StepAtMeanEndpointIsHalf) {
  ShoParams p(1.0, 1.0);
  RiskNeutralSpec rn(0.0, 1.0);
  std::vector<double> s{0.7};
  auto v = value_closed_form_sho(p, rn, StepPayoff{{0.7}}, s, 0.0);
  EXPECT_NEAR(v.value, 0.5, 1e-15);
  EXPECT_EQ(v.quantity, Quantity::value);
  EXPECT_EQ(v.route, Route::closed_form);
}

TEST(ClosedForm, DeltaKernelLimit) {
  ShoParams p(1.0, 1.0);
  RiskNeutralSpec rn(0.05, 1.0);
  std::vector<double> at{0.0}, away{1.0};
  double last = 0;
  for (double tau : {1e-2, 1e-3, 1e-4}) {
    auto v = value_closed_form_sho(p, rn, DeltaPayoff{{0.0}}, at, 1.0 - tau);
    EXPECT_GT(v.value, last);
    EXPECT_NEAR(v.value, 1.0 / std::sqrt(2 * std::numbers::pi * tau), 0.01 / std::sqrt(tau));
    EXPECT_EQ(v.quantity, Quantity::density);
    last = v.value;
  }
  EXPECT_LT(value_closed_form_sho(p, rn, DeltaPayoff{{0.0}}, away, 1.0 - 1e-4).value, 1e-100);
}

TEST(ClosedForm, DeltaMatchesMonteCarloKde) {
  ShoParams p(1.0, 1.0);
  RiskNeutralSpec rn(0.05, 1.0);
  std::vector<double> s{1.0};
  auto law = rn_law(0.5, 0.05, 1.0, 1.0);
  auto cf = value_closed_form_sho(p, rn, DeltaPayoff{{0.0}}, s, 0.0);
  EXPECT_NEAR(cf.value, std::exp(-0.05) * normal_pdf(0.0, law.mean, law.var), 1e-14);
  auto kde = value_mc(sho_axis_dynamics(p, Measure::risk_neutral, 0.05), rn, DeltaPayoff{{0.0}}, s, 0.0,
                      mc(1000000, 17, 1e-2));
  EXPECT_NEAR(kde.value, cf.value, 0.05 * cf.value);
  EXPECT_EQ(kde.quantity, Quantity::density);
}

TEST(ClosedForm, CallAndTwoAxisProducts) {
  ShoParams p(2.0, 0.5);
  RiskNeutralSpec rn(0.05, 2.0);
  std::vector<double> s{0.4, -0.2};
  auto lx = rn_law(0.5, 0.05, 0.4, 1.5), ly = rn_law(0.5, 0.05, -0.2, 1.5);
  const double disc = std::exp(-0.05 * 1.5);
  auto call = value_closed_form_sho(p, rn, CallPayoff{{0.1, 0.3}}, s, 0.5);
  EXPECT_NEAR(call.value, disc * (call_expectation(lx, 0.1) + call_expectation(ly, 0.3)), 1e-13);
  auto step = value_closed_form_sho(p, rn, StepPayoff{{0.1, 0.3}, StepDirection::below}, s, 0.5);
  EXPECT_NEAR(step.value,
              disc * normal_cdf((0.1 - lx.mean) / std::sqrt(lx.var)) * normal_cdf((0.3 - ly.mean) / std::sqrt(ly.var)),
              1e-14);
  auto one_axis = value_closed_form_sho(p, rn, StepPayoff{{0.1, -INFINITY}}, s, 0.5);
  EXPECT_NEAR(one_axis.value, disc * normal_cdf((lx.mean - 0.1) / std::sqrt(lx.var)), 1e-14);
}

TEST(ClosedForm, Errors) {
  ShoParams p(1.0, 1.0);
  RiskNeutralSpec rn(0.05, 1.0);
  std::vector<double> s{0.0};
  EXPECT_THROW(value_closed_form_sho(p, rn, StepPayoff{{0.0}}, s, 1.0), DomainError);
  EXPECT_THROW(value_closed_form_sho(p, rn, StepPayoff{{0.0}}, s, 1.5), DomainError);
  std::vector<double> two{0.0, 0.0};
  EXPECT_THROW(value_closed_form_sho(p, rn, StepPayoff{{0.0}}, two, 0.0), DomainError);
  // no noise: the delta payoff has no density to read
  EXPECT_THROW(value_closed_form_sho(ShoParams(1.0, 0.0), rn, DeltaPayoff{{0.0}}, s, 0.0), DomainError);
}

TEST(MonteCarlo, SureEventHasNoSpread) {
  ShoParams p(1.0, 1.0);
  RiskNeutralSpec rn(0.05, 1.0);
  std::vector<double> s{0.0};
  auto v = value_mc(sho_axis_dynamics(p, Measure::risk_neutral, 0.05), rn, StepPayoff{{-6.0 * 1.1}}, s, 0.0,
                    mc(10000, 3));
  EXPECT_NEAR(v.value, std::exp(-0.05), 1e-15);
  EXPECT_EQ(v.standard_error, 0.0);
}

TEST(MonteCarlo, DriftlessStepAtStartIsHalf) {
  ShoParams p(1.0, 1.0);
  RiskNeutralSpec rn(0.0, 1.0);
  std::vector<double> s{0.25};
  auto v = value_mc(sho_axis_dynamics(p, Measure::risk_neutral, 0.0), rn, StepPayoff{{0.25}}, s, 0.0, mc(20000, 4));
  EXPECT_GT(v.standard_error, 0.0);
  EXPECT_LE(std::abs(v.value - 0.5), 3.0 * v.standard_error);
}

TEST(MonteCarlo, RefusesTinyEnsembles) {
  ShoParams p(1.0, 1.0);
  RiskNeutralSpec rn(0.0, 1.0);
  std::vector<double> s{0.0};
  EXPECT_THROW(value_mc(sho_axis_dynamics(p, Measure::risk_neutral, 0.0), rn, StepPayoff{{0.0}}, s, 0.0, mc(99, 1)),
               DomainError);
}

TEST(MonteCarlo, QubitStepAgreesWithPde) {
  auto q = QubitParams::from_rate(1.0);
  RiskNeutralSpec rn(0.0, 10.0);
  std::vector<double> z{0.4};
  StepPayoff step{{0.0}};
  auto m = value_mc(qubit_risk_neutral_dynamics(q, rn), rn, step, z, 0.0, mc(10000, 5));
  auto d = value_pde(q, rn, step, z, 0.0);
  EXPECT_LE(std::abs(m.value - d.value), std::max(3.0 * m.standard_error, 0.01));
  // a martingale absorbed at the edges ends at +1 with probability (1 + z0) / 2
  EXPECT_NEAR(d.value, 0.7, 0.01);
}

TEST(MonteCarlo, StandardErrorScaling) {
  ShoParams p(1.0, 1.0);
  RiskNeutralSpec rn(0.05, 1.0);
  std::vector<double> s{0.0};
  auto dyn = sho_axis_dynamics(p, Measure::risk_neutral, 0.05);
  auto a = value_mc(dyn, rn, CallPayoff{{0.2}}, s, 0.0, mc(10000, 6));
  auto b = value_mc(dyn, rn, CallPayoff{{0.2}}, s, 0.0, mc(40000, 6));
  double ratio = a.standard_error / b.standard_error;
  EXPECT_GE(ratio, 2.0 * 0.8);
  EXPECT_LE(ratio, 2.0 * 1.2);
}

TEST(MonteCarlo, WorkersDoNotChangeTheEstimate) {
  ShoParams p(1.0, 1.0);
  RiskNeutralSpec rn(0.05, 1.0);
  std::vector<double> s{0.3, -0.1};
  auto dyn = sho_risk_neutral_dynamics(p, rn);
  auto o1 = mc(2000, 9);
  auto o4 = o1;
  o4.workers = 4;
  auto a = value_mc(dyn, rn, StepPayoff{{0.0, 0.0}}, s, 0.0, o1);
  auto b = value_mc(dyn, rn, StepPayoff{{0.0, 0.0}}, s, 0.0, o4);
  EXPECT_EQ(a.value, b.value);
  EXPECT_EQ(a.standard_error, b.standard_error);
}

TEST(Pde, ConstantPayoffIsDiscountedExactly) {
  RiskNeutralSpec rn(0.05, 2.0);
  std::vector<double> one{0.3}, two{0.3, -0.4};
  for (const Model& model : {Model(ShoParams(1.0, 1.0)), Model(QubitParams::from_rate(1.0))}) {
    auto a = value_pde(model, rn, ConstantPayoff{2.5, 1}, one, 0.5);
    EXPECT_NEAR(a.value, 2.5 * std::exp(-0.05 * 1.5), 1e-10) << model_name(model);
    auto b = value_pde(model, rn, ConstantPayoff{2.5, 2}, two, 0.5);
    EXPECT_NEAR(b.value, 2.5 * std::exp(-0.05 * 1.5), 1e-10) << model_name(model);
  }
  auto cf = value_closed_form_sho(ShoParams(1.0, 1.0), rn, ConstantPayoff{1.0, 1}, one, 0.5);
  EXPECT_DOUBLE_EQ(cf.value, rn.discount(0.5));
}

TEST(Pde, ShoStepMatchesClosedForm) {
  ShoParams p(1.0, 1.0);
  RiskNeutralSpec rn(0.05, 1.0);
  for (double x : {-1.0, 0.0, 0.8}) {
    for (double a : {-0.5, 0.5, 1.5}) {
      std::vector<double> s{x};
      auto cf = value_closed_form_sho(p, rn, StepPayoff{{a}}, s, 0.0);
      auto pde = value_pde(p, rn, StepPayoff{{a}}, s, 0.0);
      EXPECT_NEAR(pde.value, cf.value, 0.01 * cf.value) << x << " " << a;
    }
  }
  std::vector<double> s2{0.2, -0.3};
  auto cf = value_closed_form_sho(p, rn, StepPayoff{{0.0, 0.1}}, s2, 0.0);
  auto pde = value_pde(p, rn, StepPayoff{{0.0, 0.1}}, s2, 0.0);
  EXPECT_NEAR(pde.value, cf.value, 0.01 * cf.value);
}

TEST(Pde, QubitDeltaMatchesMonteCarloKde) {
  auto q = QubitParams::from_rate(1.0);
  RiskNeutralSpec rn(0.05, 0.5);
  std::vector<double> z{0.5};
  auto pde = value_pde(q, rn, DeltaPayoff{{0.9}}, z, 0.0);
  auto kde = value_mc(qubit_risk_neutral_dynamics(q, rn), rn, DeltaPayoff{{0.9}}, z, 0.0, mc(1000000, 8));
  EXPECT_EQ(pde.quantity, Quantity::density);
  EXPECT_NEAR(pde.value, kde.value, 0.05 * kde.value);
}

TEST(Pde, RejectsThreeAxes) {
  std::vector<double> s{0.0, 0.0, 0.0};
  EXPECT_THROW(value_pde(ShoParams(1, 1), RiskNeutralSpec(0, 1), StepPayoff{{0, 0, 0}}, s, 0.0), DomainError);
}

TEST(GaussianApprox, FrozenDiffusionAtTheCentre) {
  const double kappa = 1.5, r = 0.05, T = 0.4;
  auto q = QubitParams::from_rate(kappa);
  RiskNeutralSpec rn(r, T);
  std::vector<double> z{0.0};
  auto v = qubit_gaussian_approx_only(q, rn, DeltaPayoff{{0.3}}, z, 0.0);
  const double var = 2 * (kappa / 2) * (std::exp(2 * r * T) - 1) / (2 * r);
  EXPECT_NEAR(v.value, std::exp(-r * T) * normal_pdf(0.3, 0.0, var), 1e-13);
}

TEST(GaussianApprox, NearTheEdgesTheStepIsAlmostCertain) {
  auto q = QubitParams::from_rate(1.0);
  RiskNeutralSpec rn(0.05, 1.0);
  std::vector<double> up{0.9999}, down{-0.9999};
  EXPECT_NEAR(qubit_gaussian_approx_only(q, rn, StepPayoff{{0.0}}, up, 0.0).value, std::exp(-0.05), 1e-12);
  EXPECT_NEAR(qubit_gaussian_approx_only(q, rn, StepPayoff{{0.0}}, down, 0.0).value, 0.0, 1e-12);
  std::vector<double> edge{1.0};
  EXPECT_THROW(qubit_gaussian_approx_only(q, rn, StepPayoff{{0.0}}, edge, 0.0), DomainError);
}

TEST(GaussianApprox, ShortHorizonAgreesWithPde) {
  auto q = QubitParams::from_rate(1.0);
  RiskNeutralSpec rn(0.05, 0.1);
  std::vector<double> z{0.2};
  auto g = qubit_gaussian_approx_value(q, rn, StepPayoff{{0.0}}, z, 0.0);
  EXPECT_LE(g.relative_discrepancy, 0.02);
  EXPECT_NEAR(g.discrepancy, g.approximation.value - g.pde.value, 1e-15);
}

TEST(GaussianApprox, ErrorShrinksWithTheHorizon) {
  auto q = QubitParams::from_rate(1.0);
  std::vector<double> z{0.2};
  double last = INFINITY;
  for (double tau : {1.0, 0.3, 0.1, 0.03}) {
    RiskNeutralSpec rn(0.05, tau);
    auto g = qubit_gaussian_approx_value(q, rn, StepPayoff{{0.0}}, z, 0.0);
    EXPECT_LT(g.relative_discrepancy, last) << "tau=" << tau;
    last = g.relative_discrepancy;
  }
}

TEST(ValueByRoute, QubitHasNoClosedForm) {
  std::vector<double> z{0.2};
  EXPECT_THROW(value_by_route(Route::closed_form, QubitParams::from_rate(1.0), RiskNeutralSpec(0, 1),
                              StepPayoff{{0.0}}, z, 0.0),
               DomainError);
}

TEST(ValueByRoute, QubitPdeAgreesWithMonteCarlo) {
  auto q = QubitParams::from_rate(1.0);
  RiskNeutralSpec rn(0.05, 1.0);
  RouteOptions opt;
  opt.mc = mc(10000, 12);
  for (double z0 : {-0.5, 0.0, 0.3, 0.7}) {
    for (const Payoff& payoff : {Payoff(StepPayoff{{0.2}}), Payoff(CallPayoff{{0.0}})}) {
      std::vector<double> z{z0};
      auto pde = value_by_route(Route::pde, q, rn, payoff, z, 0.0, opt);
      auto m = value_by_route(Route::monte_carlo, q, rn, payoff, z, 0.0, opt);
      EXPECT_LE(std::abs(pde.value - m.value), std::max(3.0 * m.standard_error, 0.01 * std::abs(pde.value)))
          << payoff_kind(payoff) << " z0=" << z0;
    }
  }
}

TEST(ValueByRoute, StepIsMonotoneInThreshold) {
  ShoParams p(1.0, 1.0);
  RiskNeutralSpec rn(0.05, 1.0);
  std::vector<double> s{0.1};
  RouteOptions opt;
  opt.mc = mc(5000, 13);
  for (Route route : {Route::closed_form, Route::monte_carlo, Route::pde}) {
    double last = INFINITY;
    for (double a : {-1.5, -0.5, 0.0, 0.5, 1.5}) {
      double v = value_by_route(route, p, rn, StepPayoff{{a}}, s, 0.0, opt).value;
      EXPECT_LE(v, last) << to_string(route) << " a=" << a;
      last = v;
    }
  }
}

TEST(Deltas, DeepInTheMoneyCallIsOne) {
  ShoParams p(1.0, 1.0);
  RiskNeutralSpec rn(0.0, 1.0);
  const double x = 0.5, sd = 1.0;  // 2 D tau = 1
  std::vector<double> s{x}, bump{0.05};
  RouteOptions opt;
  opt.mc = mc(10000, 14);
  for (Route route : {Route::closed_form, Route::pde, Route::monte_carlo}) {
    auto d = deltas(route, p, rn, CallPayoff{{x - 6.0 * sd}}, s, 0.0, bump, opt);
    ASSERT_EQ(d.size(), 1u);
    EXPECT_NEAR(d[0], 1.0, 0.02) << to_string(route);
  }
}

TEST(Deltas, SymmetricStepIsKernelDensity) {
  ShoParams p(1.0, 1.0);
  RiskNeutralSpec rn(0.0, 1.0);
  std::vector<double> s{0.3}, bump{0.02};
  const double expected = normal_pdf(0.3, 0.3, 1.0);
  for (Route route : {Route::closed_form, Route::pde}) {
    auto d = deltas(route, p, rn, StepPayoff{{0.3}}, s, 0.0, bump);
    EXPECT_NEAR(d[0], expected, 0.01 * expected) << to_string(route);
  }
}

TEST(Deltas, ConstantPayoffHasNoDelta) {
  RiskNeutralSpec rn(0.05, 1.0);
  std::vector<double> s{0.3, 0.1}, bump{0.05, 0.05};
  RouteOptions opt;
  opt.mc = mc(1000, 15);
  for (Route route : {Route::closed_form, Route::pde, Route::monte_carlo}) {
    auto d = deltas(route, ShoParams(1, 1), rn, ConstantPayoff{1.0, 2}, s, 0.0, bump, opt);
    EXPECT_NEAR(d[0], 0.0, 1e-8) << to_string(route);
    EXPECT_NEAR(d[1], 0.0, 1e-8) << to_string(route);
  }
  auto q = deltas(Route::pde, QubitParams::from_rate(1.0), rn, ConstantPayoff{1.0, 2}, s, 0.0, bump);
  EXPECT_NEAR(q[0], 0.0, 1e-8);
}

TEST(Deltas, BumpValidation) {
  std::vector<double> s{0.0}, zero{0.0}, wide{5.0};
  ShoParams p(1, 1);
  RiskNeutralSpec rn(0.0, 1.0);
  EXPECT_THROW(deltas(Route::closed_form, p, rn, StepPayoff{{0.0}}, s, 0.0, zero), DomainError);
  auto q = QubitParams::from_rate(1.0);
  // 400 cells on [-1, 1]: the bumped state must stay below 1 - 2h = 0.99
  std::vector<double> z{0.95}, ok{0.035}, b{0.045};
  EXPECT_NO_THROW(deltas(Route::pde, q, rn, StepPayoff{{0.0}}, z, 0.0, ok));
  EXPECT_THROW(deltas(Route::pde, q, rn, StepPayoff{{0.0}}, z, 0.0, b), DomainError);
}

TEST(GaussianFunctional, GradientMatchesDifferences) {
  std::vector<double> mean{0.2, -0.4}, var{0.8, 1.3};
  for (const Payoff& payoff : {Payoff(StepPayoff{{0.1, -0.2}}), Payoff(CallPayoff{{0.0, 0.5}}),
                               Payoff(DeltaPayoff{{0.3, 0.1}})}) {
    auto grad = gaussian_payoff_gradient(payoff, mean, var);
    for (std::size_t a = 0; a < 2; ++a) {
      const double h = 1e-5;
      auto up = mean, dn = mean;
      up[a] += h;
      dn[a] -= h;
      double fd = (gaussian_payoff_value(payoff, up, var) - gaussian_payoff_value(payoff, dn, var)) / (2 * h);
      EXPECT_NEAR(grad[a], fd, 1e-7) << payoff_kind(payoff) << " axis " << a;
    }
  }
}

TEST(Payoffs, PointwiseValuesAndTerminalData) {
  std::vector<double> s{0.5, -1.0};
  EXPECT_EQ(payoff_value(StepPayoff{{0.0, -2.0}}, s), 1.0);
  EXPECT_EQ(payoff_value(StepPayoff{{0.0, 0.0}}, s), 0.0);
  EXPECT_EQ(payoff_value(StepPayoff{{1.0, 0.0}, StepDirection::below}, s), 1.0);
  EXPECT_DOUBLE_EQ(payoff_value(CallPayoff{{0.0, -2.0}}, s), 1.5);
  EXPECT_EQ(payoff_value(ConstantPayoff{3.0, 2}, s), 3.0);
  EXPECT_THROW(payoff_value(DeltaPayoff{{0.0, 0.0}}, s), DomainError);
  EXPECT_EQ(payoff_quantity(DeltaPayoff{{0.0}}), Quantity::density);
  EXPECT_EQ(payoff_kind(CallPayoff{{0.0}}), "call");

  Grid g({Grid1D(-1, 1, 20)});
  auto dv = terminal_values(DeltaPayoff{{0.0}}, g);
  double mass = 0;
  for (double v : dv) mass += v * g.cell_volume();
  EXPECT_NEAR(mass, 1.0, 1e-12);
  // the cell straddling the threshold gets its covered fraction
  auto sv = terminal_values(StepPayoff{{0.025}}, g);
  EXPECT_NEAR(sv[10], 0.75, 1e-12);
  EXPECT_EQ(sv[9], 0.0);
  EXPECT_EQ(sv[11], 1.0);
}

}  // namespace
}  // namespace qportfolio
