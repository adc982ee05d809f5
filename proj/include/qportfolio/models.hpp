#pragma once

// Damped harmonic-oscillator quadratures and continuously measured qubit
// polarization: physical and risk-neutral dynamics, closed-form Gaussian
// transition densities, and the scale-function absorption oracle.

#include <functional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "qportfolio/sde.hpp"

namespace qportfolio {

/// Mean bath occupation 1/(e^x - 1) for x = hbar*omega/(k_B T) > 0.
double thermal_occupation(double hbar_omega_over_kT);

class ShoParams {
 public:
  /// gamma > 0, n_thermal >= 0. omega only feeds thermal_occupation and never enters the dynamics.
  ShoParams(double gamma, double n_thermal, double omega = 1.0);

  double gamma() const noexcept { return gamma_; }
  double n_thermal() const noexcept { return n_thermal_; }
  double omega() const noexcept { return omega_; }
  /// D = gamma * n / 2
  double diffusion_constant() const noexcept { return 0.5 * gamma_ * n_thermal_; }

 private:
  double gamma_;
  double n_thermal_;
  double omega_;
};

class QubitParams {
 public:
  /// phi_flux in photons per unit time, theta_shift in radians; both > 0.
  QubitParams(double phi_flux, double theta_shift);

  double phi_flux() const noexcept { return phi_flux_; }
  double theta_shift() const noexcept { return theta_shift_; }
  /// kappa = phi * theta^2
  double measurement_rate() const noexcept { return phi_flux_ * theta_shift_ * theta_shift_; }

  /// Parameters with the given measurement rate at the typical per-photon shift of 1e-6 rad.
  static QubitParams from_rate(double kappa, double theta_shift = 1e-6);

 private:
  double phi_flux_;
  double theta_shift_;
};

using Model = std::variant<ShoParams, QubitParams>;

std::string model_name(const Model& model);

/// Independent Gaussian components.
struct GaussianSpec {
  std::vector<double> mean;
  std::vector<double> variance;
};

/// Wanted growth rate r of the hedged portfolio and maturity T.
class RiskNeutralSpec {
 public:
  RiskNeutralSpec(double r, double maturity);

  double r() const noexcept { return r_; }
  double maturity() const noexcept { return maturity_; }
  /// e^{-r (T - t)}
  double discount(double t) const noexcept;

 private:
  double r_;
  double maturity_;
};

enum class Measure { physical, risk_neutral };

// --- damped oscillator ------------------------------------------------------

/// dx = -(gamma/2) x dt + sqrt(2D) dW_x, same for y, independent noises.
Dynamics sho_physical_dynamics(const ShoParams& p);
/// dx = r x dt + sqrt(2D) dW_x, same for y.
Dynamics sho_risk_neutral_dynamics(const ShoParams& p, const RiskNeutralSpec& rn);
/// One quadrature of either measure.
Dynamics sho_axis_dynamics(const ShoParams& p, Measure measure, double r);

/// Per-component Gaussian law of the quadratures after `elapsed`, started from x0.
GaussianSpec sho_transition_density(const ShoParams& p, Measure measure, double r, std::span<const double> x0,
                                    double elapsed);

/// Variance sqrt(2D)^2 (e^{2 r t} - 1)/(2 r) of additive noise under linear growth r; 2 D t for |r| t < 1e-8.
double growth_variance(double diffusion_constant, double r, double elapsed);

// --- measured qubit -----------------------------------------------------------

/// dz = kappa 2 z (1 - z^2) dt + sqrt(kappa) (1 - z^2) dW on [-1, 1], clamp-absorb.
Dynamics qubit_physical_dynamics(const QubitParams& p);
/// dz = r z dt + sqrt(kappa) (1 - z^2) dW on [-1, 1], clamp-absorb.
Dynamics qubit_risk_neutral_dynamics(const QubitParams& p, const RiskNeutralSpec& rn);
Dynamics qubit_axis_dynamics(const QubitParams& p, Measure measure, double r);

/// Probability that the physical qubit diffusion started at z0 collapses to +1.
/// Scale-function ratio evaluated by nested adaptive Gauss-Kronrod quadrature.
double qubit_absorption_probability(double z0);

/// Exit probability through `upper` for dX = V dt + sqrt(2 D) dW on (lower, upper):
/// (S(z0) - S(lower)) / (S(upper) - S(lower)), S'(z) = exp(-int_ref^z V/D).
double scale_function_exit_probability(const std::function<double(double)>& drift,
                                       const std::function<double(double)>& diffusion_coefficient, double lower,
                                       double upper, double reference, double z0);

// --- per-model helpers -----------------------------------------------------

/// Dynamics of an n_axes-component portfolio (n_axes in {1, 2}) of independent copies of the model.
Dynamics portfolio_dynamics(const Model& model, Measure measure, double r, std::size_t n_axes);

}  // namespace qportfolio
