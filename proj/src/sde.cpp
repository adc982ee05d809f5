#include "qportfolio/sde.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <mutex>
#include <thread>

#include "qportfolio/errors.hpp"

namespace qportfolio {

TimeSchedule::TimeSchedule(double t0, double t_end, std::size_t n_steps)
    : t0_(t0), t_end_(t_end), n_steps_(n_steps), dt_(0.0) {
  if (n_steps == 0) throw DomainError("TimeSchedule: n_steps must be positive");
  if (!(t_end > t0)) throw DomainError("TimeSchedule: t_end must exceed t0");
  dt_ = (t_end - t0) / static_cast<double>(n_steps);
}

TimeSchedule TimeSchedule::with_step(double t0, double t_end, double dt) {
  if (!(dt > 0.0)) throw DomainError("TimeSchedule: dt must be > 0");
  const double steps = std::round((t_end - t0) / dt);
  return TimeSchedule(t0, t_end, static_cast<std::size_t>(std::max(1.0, steps)));
}

Dynamics frozen_dynamics(std::size_t dimension) {
  Dynamics dyn;
  dyn.dimension = dimension;
  dyn.drift = [](const State&) { return State{0.0, 0.0}; };
  dyn.diffusion_amplitude = [](const State&) { return State{0.0, 0.0}; };
  dyn.description = "frozen";
  dyn.linear_form = LinearAdditiveForm{};
  return dyn;
}

Dynamics product_dynamics(const Dynamics& first, const Dynamics& second) {
  if (first.dimension != 1 || second.dimension != 1)
    throw DomainError("product_dynamics: both factors must be one-dimensional");
  Dynamics dyn;
  dyn.dimension = 2;
  dyn.drift = [a = first.drift, b = second.drift](const State& s) {
    return State{a({s[0], 0.0})[0], b({s[1], 0.0})[0]};
  };
  dyn.diffusion_amplitude = [a = first.diffusion_amplitude, b = second.diffusion_amplitude](const State& s) {
    return State{a({s[0], 0.0})[0], b({s[1], 0.0})[0]};
  };
  dyn.bounds = {first.bounds[0], second.bounds[0]};
  if (first.linear_form && second.linear_form) {
    dyn.linear_form = LinearAdditiveForm{{first.linear_form->rate[0], second.linear_form->rate[0]},
                                         {first.linear_form->amplitude[0], second.linear_form->amplitude[0]}};
  }
  dyn.description = first.description + " x " + second.description;
  return dyn;
}

bool euler_step(const Dynamics& dyn, State& state, double dt, const State& increments) {
  State drift;
  State amplitude;
  if (dyn.linear_form) {
    for (std::size_t c = 0; c < 2; ++c) drift[c] = dyn.linear_form->rate[c] * state[c];
    amplitude = dyn.linear_form->amplitude;
  } else {
    drift = dyn.drift(state);
    amplitude = dyn.diffusion_amplitude(state);
  }
  bool hit = false;
  for (std::size_t c = 0; c < dyn.dimension; ++c) {
    double next = state[c] + drift[c] * dt + amplitude[c] * increments[c];
    if (const auto& b = dyn.bounds[c]; b && b->policy == BoundaryPolicy::clamp_absorb) {
      if (next >= b->upper) {
        next = b->upper;
        hit = true;
      } else if (next <= b->lower) {
        next = b->lower;
        hit = true;
      }
    }
    state[c] = next;
  }
  return hit;
}

namespace {

void check_initial_state(const Dynamics& dyn, const State& x0) {
  if (dyn.dimension < 1 || dyn.dimension > 2) throw DomainError("Dynamics: dimension must be 1 or 2");
  for (std::size_t c = 0; c < dyn.dimension; ++c) {
    if (!std::isfinite(x0[c])) throw DomainError("initial state is not finite");
    if (const auto& b = dyn.bounds[c]; b && (x0[c] < b->lower || x0[c] > b->upper))
      throw DomainError("initial state outside the dynamics' state domain");
  }
}

// Integrates one path, handing every state (step, value) to `record`.
template <typename Record>
void integrate(const Dynamics& dyn, State x, const TimeSchedule& schedule, RandomStream& stream,
               bool& absorbed, std::size_t& absorbed_step, Record&& record) {
  const double dt = schedule.dt();
  const double sqrt_dt = std::sqrt(dt);
  absorbed = false;
  absorbed_step = 0;
  record(0, x);
  for (std::size_t k = 0; k < schedule.n_steps(); ++k) {
    if (!absorbed) {
      State dw{0.0, 0.0};
      for (std::size_t c = 0; c < dyn.dimension; ++c) dw[c] = sqrt_dt * stream.next_normal();
      if (euler_step(dyn, x, dt, dw)) {
        absorbed = true;
        absorbed_step = k + 1;
      }
      for (std::size_t c = 0; c < dyn.dimension; ++c) {
        if (!std::isfinite(x[c]))
          throw IntegrationError("euler_maruyama: non-finite state at step " + std::to_string(k + 1), k + 1);
      }
    }
    record(k + 1, x);
  }
}

}  // namespace

Path euler_maruyama(const Dynamics& dyn, const State& x0, const TimeSchedule& schedule, RandomStream& stream) {
  check_initial_state(dyn, x0);
  Path path;
  path.states.resize(schedule.n_steps() + 1);
  integrate(dyn, x0, schedule, stream, path.absorbed, path.absorbed_step,
            [&](std::size_t k, const State& s) { path.states[k] = s; });
  return path;
}

PathEnsemble::PathEnsemble(TimeSchedule schedule, std::size_t n_paths, std::size_t dimension,
                           std::vector<std::size_t> recorded_steps, std::uint64_t master_seed,
                           std::string dynamics_description)
    : schedule_(schedule),
      n_paths_(n_paths),
      dimension_(dimension),
      recorded_steps_(std::move(recorded_steps)),
      states_(n_paths * recorded_steps_.size() * dimension, 0.0),
      absorbed_(n_paths, 0),
      absorbed_step_(n_paths, 0),
      master_seed_(master_seed),
      description_(std::move(dynamics_description)) {}

bool PathEnsemble::is_recorded(std::size_t step) const noexcept {
  return std::binary_search(recorded_steps_.begin(), recorded_steps_.end(), step);
}

std::size_t PathEnsemble::slot(std::size_t step) const {
  auto it = std::lower_bound(recorded_steps_.begin(), recorded_steps_.end(), step);
  if (it == recorded_steps_.end() || *it != step)
    throw DomainError("PathEnsemble: step " + std::to_string(step) + " was not recorded");
  return static_cast<std::size_t>(it - recorded_steps_.begin());
}

double PathEnsemble::state(std::size_t path, std::size_t step, std::size_t component) const {
  if (path >= n_paths_ || component >= dimension_) throw DomainError("PathEnsemble: index out of range");
  return states_[(path * recorded_steps_.size() + slot(step)) * dimension_ + component];
}

void parallel_for_chunks(std::size_t n, std::size_t workers,
                         const std::function<void(std::size_t, std::size_t)>& fn) {
  workers = std::clamp<std::size_t>(workers, 1, std::max<std::size_t>(n, 1));
  if (workers == 1) {
    fn(0, n);
    return;
  }
  std::vector<std::thread> threads;
  std::exception_ptr failure;
  std::mutex failure_mutex;
  const std::size_t chunk = (n + workers - 1) / workers;
  for (std::size_t w = 0; w < workers; ++w) {
    const std::size_t begin = w * chunk;
    const std::size_t end = std::min(n, begin + chunk);
    if (begin >= end) break;
    threads.emplace_back([&, begin, end] {
      try {
        fn(begin, end);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
      }
    });
  }
  for (auto& t : threads) t.join();
  if (failure) std::rethrow_exception(failure);
}

PathEnsemble simulate_ensemble(const Dynamics& dyn, const State& x0, const TimeSchedule& schedule,
                               std::size_t n_paths, std::uint64_t master_seed, const EnsembleOptions& options) {
  if (n_paths == 0) throw DomainError("simulate_ensemble: n_paths must be >= 1");
  check_initial_state(dyn, x0);

  std::vector<std::size_t> steps = options.record_steps;
  if (steps.empty()) {
    steps.resize(schedule.n_steps() + 1);
    for (std::size_t k = 0; k < steps.size(); ++k) steps[k] = k;
  }
  steps.push_back(0);
  std::sort(steps.begin(), steps.end());
  steps.erase(std::unique(steps.begin(), steps.end()), steps.end());
  if (steps.back() > schedule.n_steps()) throw DomainError("simulate_ensemble: record step beyond schedule");

  PathEnsemble ens(schedule, n_paths, dyn.dimension, steps, master_seed, dyn.description);
  const std::size_t slots = steps.size();
  const std::size_t dim = dyn.dimension;

  // step -> slot lookup, -1 when not recorded
  std::vector<std::ptrdiff_t> slot_of(schedule.n_steps() + 1, -1);
  for (std::size_t i = 0; i < slots; ++i) slot_of[steps[i]] = static_cast<std::ptrdiff_t>(i);

  parallel_for_chunks(n_paths, options.workers, [&](std::size_t begin, std::size_t end) {
    for (std::size_t p = begin; p < end; ++p) {
      RandomStream stream(master_seed, p);
      double* row = ens.states_.data() + p * slots * dim;
      bool absorbed = false;
      std::size_t absorbed_step = 0;
      try {
        integrate(dyn, x0, schedule, stream, absorbed, absorbed_step, [&](std::size_t k, const State& s) {
          if (const auto slot = slot_of[k]; slot >= 0) {
            for (std::size_t c = 0; c < dim; ++c) row[static_cast<std::size_t>(slot) * dim + c] = s[c];
          }
        });
      } catch (const IntegrationError& e) {
        throw IntegrationError(std::string(e.what()) + " (path " + std::to_string(p) + ")", e.step(), p);
      }
      ens.absorbed_[p] = absorbed ? 1 : 0;
      ens.absorbed_step_[p] = absorbed_step;
    }
  });
  return ens;
}

SampleMoments sample_moments(std::span<const double> values) {
  const std::size_t n = values.size();
  if (n < 2) throw DomainError("sample_moments: at least two samples required for a variance");
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= static_cast<double>(n);
  double m2 = 0.0;
  double m4 = 0.0;
  for (double v : values) {
    const double d = v - mean;
    const double d2 = d * d;
    m2 += d2;
    m4 += d2 * d2;
  }
  const double nd = static_cast<double>(n);
  SampleMoments out;
  out.mean = mean;
  out.variance = m2 / (nd - 1.0);
  out.mean_standard_error = std::sqrt(out.variance / nd);
  // Var(s^2) ~ (mu4 - sigma^4) / n
  const double mu4 = m4 / nd;
  const double sigma2 = m2 / nd;
  out.variance_standard_error = std::sqrt(std::max(0.0, mu4 - sigma2 * sigma2) / nd);
  return out;
}

EnsembleMoments ensemble_moments(const PathEnsemble& ensemble, std::size_t step) {
  if (step > ensemble.schedule().n_steps()) throw DomainError("ensemble_moments: step beyond schedule");
  if (ensemble.n_paths() < 2) throw DomainError("ensemble_moments: variance undefined for fewer than 2 paths");
  EnsembleMoments out;
  std::vector<double> column(ensemble.n_paths());
  for (std::size_t c = 0; c < ensemble.dimension(); ++c) {
    for (std::size_t p = 0; p < ensemble.n_paths(); ++p) column[p] = ensemble.state(p, step, c);
    const auto m = sample_moments(column);
    out.mean.push_back(m.mean);
    out.variance.push_back(m.variance);
    out.mean_standard_error.push_back(m.mean_standard_error);
    out.variance_standard_error.push_back(m.variance_standard_error);
  }
  return out;
}

}  // namespace qportfolio
