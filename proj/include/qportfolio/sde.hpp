#pragma once

// Generic Ito SDE machinery: time schedules, drift/diffusion descriptions,
// Euler-Maruyama integration and deterministic path ensembles.

#include <array>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "qportfolio/random_stream.hpp"

namespace qportfolio {

/// Uniform grid of times t0 + k*dt, k = 0..n_steps.
class TimeSchedule {
 public:
  TimeSchedule(double t0, double t_end, std::size_t n_steps);

  /// Schedule whose step is as close to dt as an integer step count allows.
  static TimeSchedule with_step(double t0, double t_end, double dt);

  double t0() const noexcept { return t0_; }
  double t_end() const noexcept { return t_end_; }
  std::size_t n_steps() const noexcept { return n_steps_; }
  double dt() const noexcept { return dt_; }
  double time(std::size_t k) const noexcept { return t0_ + static_cast<double>(k) * dt_; }

 private:
  double t0_;
  double t_end_;
  std::size_t n_steps_;
  double dt_;
};

/// Up to two state components; unused components stay at zero.
using State = std::array<double, 2>;

enum class BoundaryPolicy { none, clamp_absorb };

struct StateBounds {
  double lower;
  double upper;
  BoundaryPolicy policy = BoundaryPolicy::clamp_absorb;
};

/// drift_i = rate_i * x_i, constant amplitude_i. Lets the integrator skip the function calls.
struct LinearAdditiveForm {
  State rate{0.0, 0.0};
  State amplitude{0.0, 0.0};
};

/// dX_i = drift_i(X) dt + diffusion_amplitude_i(X) dW_i with independent W_i.
struct Dynamics {
  std::size_t dimension = 1;
  std::function<State(const State&)> drift;
  std::function<State(const State&)> diffusion_amplitude;
  std::array<std::optional<StateBounds>, 2> bounds{};
  std::string description;
  /// Must agree with drift/diffusion_amplitude when set.
  std::optional<LinearAdditiveForm> linear_form;
};

/// Dynamics with constant-zero drift and diffusion.
Dynamics frozen_dynamics(std::size_t dimension);

/// Two independent one-dimensional dynamics as one two-dimensional system.
Dynamics product_dynamics(const Dynamics& first, const Dynamics& second);

struct Path {
  std::vector<State> states;  // n_steps + 1 entries
  bool absorbed = false;
  std::size_t absorbed_step = 0;
};

/// Single Euler-Maruyama step from `state`; returns true when a clamp-absorb bound was hit.
/// `increments` holds the Wiener increments, one per component.
bool euler_step(const Dynamics& dyn, State& state, double dt, const State& increments);

/// Integrates one path. Throws IntegrationError (with step index) on a non-finite state.
Path euler_maruyama(const Dynamics& dyn, const State& x0, const TimeSchedule& schedule,
                    RandomStream& stream);

struct EnsembleOptions {
  /// Steps to keep in memory. Empty keeps every step; step 0 is always kept.
  std::vector<std::size_t> record_steps;
  std::size_t workers = 1;
};

class PathEnsemble {
 public:
  PathEnsemble(TimeSchedule schedule, std::size_t n_paths, std::size_t dimension,
               std::vector<std::size_t> recorded_steps, std::uint64_t master_seed,
               std::string dynamics_description);

  const TimeSchedule& schedule() const noexcept { return schedule_; }
  std::size_t n_paths() const noexcept { return n_paths_; }
  std::size_t dimension() const noexcept { return dimension_; }
  const std::vector<std::size_t>& recorded_steps() const noexcept { return recorded_steps_; }
  std::uint64_t master_seed() const noexcept { return master_seed_; }
  const std::string& dynamics_description() const noexcept { return description_; }

  bool is_recorded(std::size_t step) const noexcept;
  /// Component `component` of path `path` at schedule step `step` (must be recorded).
  double state(std::size_t path, std::size_t step, std::size_t component) const;

  bool absorbed(std::size_t path) const noexcept { return absorbed_[path] != 0; }
  std::size_t absorbed_step(std::size_t path) const noexcept { return absorbed_step_[path]; }

 private:
  friend PathEnsemble simulate_ensemble(const Dynamics&, const State&, const TimeSchedule&,
                                        std::size_t, std::uint64_t, const EnsembleOptions&);

  std::size_t slot(std::size_t step) const;

  TimeSchedule schedule_;
  std::size_t n_paths_;
  std::size_t dimension_;
  std::vector<std::size_t> recorded_steps_;
  std::vector<double> states_;  // [path][slot][component]
  std::vector<std::uint8_t> absorbed_;
  std::vector<std::size_t> absorbed_step_;
  std::uint64_t master_seed_;
  std::string description_;
};

/// Path p uses stream (master_seed, p); output does not depend on options.workers.
PathEnsemble simulate_ensemble(const Dynamics& dyn, const State& x0, const TimeSchedule& schedule,
                               std::size_t n_paths, std::uint64_t master_seed,
                               const EnsembleOptions& options = {});

struct EnsembleMoments {
  std::vector<double> mean;
  std::vector<double> variance;  // unbiased
  std::vector<double> mean_standard_error;
  std::vector<double> variance_standard_error;
};

EnsembleMoments ensemble_moments(const PathEnsemble& ensemble, std::size_t step);

/// Mean/variance with standard errors of a plain sample.
struct SampleMoments {
  double mean = 0.0;
  double variance = 0.0;
  double mean_standard_error = 0.0;
  double variance_standard_error = 0.0;
};

SampleMoments sample_moments(std::span<const double> values);

/// Runs fn(begin, end) over [0, n) split into contiguous chunks on `workers` threads.
void parallel_for_chunks(std::size_t n, std::size_t workers,
                         const std::function<void(std::size_t, std::size_t)>& fn);

}  // namespace qportfolio
