#include "qportfolio/models.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <cmath>
#include <limits>
#include <sstream>

#include "qportfolio/errors.hpp"

namespace qportfolio {

double thermal_occupation(double x) {
  if (!(x > 0.0)) throw DomainError("thermal_occupation: hbar*omega/(k_B T) must be > 0");
  return 1.0 / std::expm1(x);
}

ShoParams::ShoParams(double gamma, double n_thermal, double omega)
    : gamma_(gamma), n_thermal_(n_thermal), omega_(omega) {
  if (!(gamma > 0.0) || !std::isfinite(gamma)) throw DomainError("ShoParams: gamma must be > 0");
  if (!(n_thermal >= 0.0) || !std::isfinite(n_thermal)) throw DomainError("ShoParams: n_thermal must be >= 0");
}

QubitParams::QubitParams(double phi_flux, double theta_shift) : phi_flux_(phi_flux), theta_shift_(theta_shift) {
  if (!(phi_flux > 0.0) || !std::isfinite(phi_flux)) throw DomainError("QubitParams: phi_flux must be > 0");
  if (!(theta_shift > 0.0) || !std::isfinite(theta_shift)) throw DomainError("QubitParams: theta_shift must be > 0");
}

QubitParams QubitParams::from_rate(double kappa, double theta_shift) {
  return QubitParams(kappa / (theta_shift * theta_shift), theta_shift);
}

std::string model_name(const Model& model) { return std::holds_alternative<ShoParams>(model) ? "sho" : "qubit"; }

RiskNeutralSpec::RiskNeutralSpec(double r, double maturity) : r_(r), maturity_(maturity) {
  if (!std::isfinite(r)) throw DomainError("RiskNeutralSpec: r must be finite");
  if (!(maturity > 0.0) || !std::isfinite(maturity)) throw DomainError("RiskNeutralSpec: T must be > 0");
}

double RiskNeutralSpec::discount(double t) const noexcept { return std::exp(-r_ * (maturity_ - t)); }

namespace {

std::string describe(const char* name, std::initializer_list<std::pair<const char*, double>> params) {
  std::ostringstream os;
  os.precision(17);
  os << name << "(";
  bool first = true;
  for (const auto& [key, value] : params) {
    os << (first ? "" : ", ") << key << "=" << value;
    first = false;
  }
  os << ")";
  return os.str();
}

}  // namespace

Dynamics sho_axis_dynamics(const ShoParams& p, Measure measure, double r) {
  const double rate = measure == Measure::physical ? -0.5 * p.gamma() : r;
  const double amplitude = std::sqrt(2.0 * p.diffusion_constant());
  Dynamics dyn;
  dyn.dimension = 1;
  dyn.drift = [rate](const State& s) { return State{rate * s[0], 0.0}; };
  dyn.diffusion_amplitude = [amplitude](const State&) { return State{amplitude, 0.0}; };
  dyn.linear_form = LinearAdditiveForm{{rate, 0.0}, {amplitude, 0.0}};
  dyn.description = measure == Measure::physical
                        ? describe("sho_physical", {{"gamma", p.gamma()}, {"n", p.n_thermal()}})
                        : describe("sho_risk_neutral", {{"gamma", p.gamma()}, {"n", p.n_thermal()}, {"r", r}});
  return dyn;
}

Dynamics sho_physical_dynamics(const ShoParams& p) {
  const double rate = -0.5 * p.gamma();
  const double amplitude = std::sqrt(2.0 * p.diffusion_constant());
  Dynamics dyn;
  dyn.dimension = 2;
  dyn.drift = [rate](const State& s) { return State{rate * s[0], rate * s[1]}; };
  dyn.diffusion_amplitude = [amplitude](const State&) { return State{amplitude, amplitude}; };
  dyn.linear_form = LinearAdditiveForm{{rate, rate}, {amplitude, amplitude}};
  dyn.description = describe("sho_physical", {{"gamma", p.gamma()}, {"n", p.n_thermal()}});
  return dyn;
}

Dynamics sho_risk_neutral_dynamics(const ShoParams& p, const RiskNeutralSpec& rn) {
  const double r = rn.r();
  const double amplitude = std::sqrt(2.0 * p.diffusion_constant());
  Dynamics dyn;
  dyn.dimension = 2;
  dyn.drift = [r](const State& s) { return State{r * s[0], r * s[1]}; };
  dyn.diffusion_amplitude = [amplitude](const State&) { return State{amplitude, amplitude}; };
  dyn.linear_form = LinearAdditiveForm{{r, r}, {amplitude, amplitude}};
  dyn.description = describe("sho_risk_neutral", {{"gamma", p.gamma()}, {"n", p.n_thermal()}, {"r", r}});
  return dyn;
}

double growth_variance(double diffusion_constant, double r, double elapsed) {
  if (std::abs(r) * elapsed < 1e-8) return 2.0 * diffusion_constant * elapsed;
  return 2.0 * diffusion_constant * std::expm1(2.0 * r * elapsed) / (2.0 * r);
}

GaussianSpec sho_transition_density(const ShoParams& p, Measure measure, double r, std::span<const double> x0,
                                    double elapsed) {
  if (!(elapsed >= 0.0)) throw DomainError("sho_transition_density: elapsed time must be >= 0");
  GaussianSpec out;
  double factor = 0.0;
  double variance = 0.0;
  if (measure == Measure::physical) {
    factor = std::exp(-0.5 * p.gamma() * elapsed);
    variance = -p.n_thermal() * std::expm1(-p.gamma() * elapsed);
  } else {
    factor = std::exp(r * elapsed);
    variance = growth_variance(p.diffusion_constant(), r, elapsed);
  }
  for (double x : x0) {
    out.mean.push_back(x * factor);
    out.variance.push_back(variance);
  }
  return out;
}

Dynamics qubit_axis_dynamics(const QubitParams& p, Measure measure, double r) {
  const double kappa = p.measurement_rate();
  const double root_kappa = std::sqrt(kappa);
  Dynamics dyn;
  dyn.dimension = 1;
  if (measure == Measure::physical) {
    dyn.drift = [kappa](const State& s) {
      const double z = s[0];
      return State{kappa * 2.0 * z * (1.0 - z * z), 0.0};
    };
    dyn.description = describe("qubit_physical", {{"kappa", kappa}});
  } else {
    dyn.drift = [r](const State& s) { return State{r * s[0], 0.0}; };
    dyn.description = describe("qubit_risk_neutral", {{"kappa", kappa}, {"r", r}});
  }
  dyn.diffusion_amplitude = [root_kappa](const State& s) {
    const double z = s[0];
    return State{root_kappa * std::max(0.0, 1.0 - z * z), 0.0};
  };
  dyn.bounds[0] = StateBounds{-1.0, 1.0, BoundaryPolicy::clamp_absorb};
  return dyn;
}

Dynamics qubit_physical_dynamics(const QubitParams& p) { return qubit_axis_dynamics(p, Measure::physical, 0.0); }

Dynamics qubit_risk_neutral_dynamics(const QubitParams& p, const RiskNeutralSpec& rn) {
  return qubit_axis_dynamics(p, Measure::risk_neutral, rn.r());
}

double scale_function_exit_probability(const std::function<double(double)>& drift,
                                       const std::function<double(double)>& diffusion_coefficient, double lower,
                                       double upper, double reference, double z0) {
  using boost::math::quadrature::gauss_kronrod;
  if (!(z0 > lower && z0 < upper)) throw DomainError("scale_function_exit_probability: z0 must lie inside (lower, upper)");
  constexpr unsigned kMaxDepth = 20;
  constexpr double kTolerance = 1e-11;

  auto ratio = [&](double u) {
    const double d = diffusion_coefficient(u);
    return d > 0.0 ? drift(u) / d : std::numeric_limits<double>::infinity();
  };
  double worst_inner_error = 0.0;
  auto scale_density = [&](double z) {
    double error = 0.0;
    const double exponent = gauss_kronrod<double, 31>::integrate(ratio, reference, z, kMaxDepth, kTolerance, &error);
    const double density = std::exp(-exponent);
    // error in S' is about S' * error; negligible where S' underflows
    if (std::isfinite(exponent)) worst_inner_error = std::max(worst_inner_error, density * error);
    return density;
  };

  double err_num = 0.0;
  double err_den = 0.0;
  const double numerator = gauss_kronrod<double, 61>::integrate(scale_density, lower, z0, kMaxDepth, kTolerance, &err_num);
  const double denominator =
      gauss_kronrod<double, 61>::integrate(scale_density, lower, upper, kMaxDepth, kTolerance, &err_den);

  if (!std::isfinite(numerator) || !std::isfinite(denominator) || !(denominator > 0.0))
    throw OracleError("scale-function quadrature produced a non-finite or non-positive normalisation");
  const double rel = std::max(err_num / std::max(numerator, 1e-300), err_den / denominator);
  if (rel > 1e-8 || worst_inner_error > 1e-8 * denominator / (upper - lower))
    throw OracleError("scale-function quadrature did not converge (relative error estimate " + std::to_string(rel) +
                      ")");
  return numerator / denominator;
}

double qubit_absorption_probability(double z0) {
  if (!(std::abs(z0) < 1.0)) throw DomainError("qubit_absorption_probability: |z0| must be < 1");
  // kappa multiplies both coefficients and cancels from V/D
  auto drift = [](double z) { return 2.0 * z * (1.0 - z * z); };
  auto diffusion = [](double z) {
    const double w = 1.0 - z * z;
    return 0.5 * w * w;
  };
  return scale_function_exit_probability(drift, diffusion, -1.0, 1.0, 0.0, z0);
}

Dynamics portfolio_dynamics(const Model& model, Measure measure, double r, std::size_t n_axes) {
  if (n_axes < 1 || n_axes > 2) throw DomainError("portfolio_dynamics: 1 or 2 axes supported");
  const Dynamics axis = std::visit(
      [&](const auto& p) -> Dynamics {
        using P = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<P, ShoParams>) {
          return sho_axis_dynamics(p, measure, r);
        } else {
          return qubit_axis_dynamics(p, measure, r);
        }
      },
      model);
  return n_axes == 1 ? axis : product_dynamics(axis, axis);
}

}  // namespace qportfolio
