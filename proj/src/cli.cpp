#include "qportfolio/cli.hpp"

#include <unistd.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

#include "CLI11.hpp"
#include "json.hpp"
#include "qportfolio/errors.hpp"
#include "qportfolio/fokker_planck.hpp"
#include "qportfolio/hedging.hpp"

namespace qportfolio {

using nlohmann::json;

std::string format_number(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.15e", x);
  return buf;
}

namespace {

// CSV with '#' metadata lines, a column-name row and %.15e numbers.
class CsvBuilder {
 public:
  CsvBuilder(const std::string& command, const Scenario& s, const std::vector<std::string>& columns) {
    head_ += "# qportfolio " + command + "\n";
    head_ += "# scenario_hash=" + scenario_hash(s) + " master_seed=" + std::to_string(s.master_seed) + "\n";
    head_ += "# model=" + model_name(s.model) + "\n";
    for (const auto& c : columns) names_ += (names_.empty() ? "" : ",") + c;
  }

  /// Extra metadata; always lands above the column row.
  void comment(const std::string& line) { head_ += "# " + line + "\n"; }

  CsvBuilder& cell(double x) { return raw(format_number(x)); }
  CsvBuilder& cell(std::size_t n) { return raw(std::to_string(n)); }
  CsvBuilder& cell(const std::string& s) { return raw(s); }
  void end_row() {
    body_ += "\n";
    fresh_ = true;
  }
  std::string str() const { return head_ + "# columns: " + names_ + "\n" + names_ + "\n" + body_; }

 private:
  CsvBuilder& raw(const std::string& s) {
    if (!fresh_) body_ += ",";
    body_ += s;
    fresh_ = false;
    return *this;
  }
  std::string head_;
  std::string names_;
  std::string body_;
  bool fresh_ = true;
};

json metadata(const std::string& command, const Scenario& s) {
  return {{"command", command}, {"scenario_hash", scenario_hash(s)}, {"master_seed", s.master_seed}, {"model", model_name(s.model)}};
}

std::string dump(const json& j) { return j.dump(2) + "\n"; }

// Values JSON cannot hold (NaN, inf) are written as strings.
json number_json(double x) {
  if (std::isfinite(x)) return x;
  return std::isnan(x) ? "nan" : (x > 0 ? "inf" : "-inf");
}

double rate_of(const Scenario& s) { return s.risk_neutral ? s.risk_neutral->r() : 0.0; }

TimeSchedule scenario_schedule(const Scenario& s) {
  return TimeSchedule::with_step(s.schedule.t0, s.schedule.t_end, s.schedule.dt);
}

std::vector<std::size_t> spread_steps(std::size_t n_steps, std::size_t count) {
  std::vector<std::size_t> steps;
  for (std::size_t i = 0; i < count; ++i)
    steps.push_back(static_cast<std::size_t>(std::llround(static_cast<double>(i) * static_cast<double>(n_steps) /
                                                          static_cast<double>(count - 1))));
  std::sort(steps.begin(), steps.end());
  steps.erase(std::unique(steps.begin(), steps.end()), steps.end());
  return steps;
}

State to_state(const std::vector<double>& v) {
  State s{0.0, 0.0};
  for (std::size_t i = 0; i < v.size() && i < 2; ++i) s[i] = v[i];
  return s;
}

std::vector<OutputFile> run_simulate(const Scenario& s, const SimulateSpec& spec, std::size_t workers) {
  const std::size_t axes = s.initial_state.size();
  const auto dyn = portfolio_dynamics(s.model, spec.measure, rate_of(s), axes);
  const auto schedule = scenario_schedule(s);
  EnsembleOptions opts;
  opts.record_steps = spread_steps(schedule.n_steps(), spec.rows);
  opts.workers = workers;
  const auto ens = simulate_ensemble(dyn, to_state(s.initial_state), schedule, spec.n_paths, s.master_seed, opts);

  const auto* sho = std::get_if<ShoParams>(&s.model);
  std::vector<std::string> cols{"step", "t"};
  for (std::size_t c = 0; c < axes; ++c) {
    const std::string k = std::to_string(c);
    for (const char* name : {"mean_", "mean_se_", "variance_", "variance_se_"}) cols.push_back(name + k);
    if (sho) {
      cols.push_back("exact_mean_" + k);
      cols.push_back("exact_variance_" + k);
    }
  }
  if (!sho) cols.push_back("absorbed_fraction");
  CsvBuilder csv("simulate", s, cols);
  csv.comment("dynamics=" + dyn.description + " n_paths=" + std::to_string(spec.n_paths));
  for (std::size_t step : ens.recorded_steps()) {
    const auto m = ensemble_moments(ens, step);
    const double t = schedule.time(step);
    csv.cell(step).cell(t);
    std::optional<GaussianSpec> exact;
    if (sho) exact = sho_transition_density(*sho, spec.measure, rate_of(s), s.initial_state, t - schedule.t0());
    for (std::size_t c = 0; c < axes; ++c) {
      csv.cell(m.mean[c]).cell(m.mean_standard_error[c]).cell(m.variance[c]).cell(m.variance_standard_error[c]);
      if (exact) csv.cell(exact->mean[c]).cell(exact->variance[c]);
    }
    if (!sho) {
      std::size_t absorbed = 0;
      for (std::size_t p = 0; p < ens.n_paths(); ++p)
        if (ens.absorbed(p) && ens.absorbed_step(p) <= step) ++absorbed;
      csv.cell(static_cast<double>(absorbed) / static_cast<double>(ens.n_paths()));
    }
    csv.end_row();
  }
  return {{"moments.csv", csv.str()}};
}

Grid forward_grid(const Scenario& s, const ForwardSpec& spec) {
  std::vector<Grid1D> axes;
  const std::size_t k = s.initial_state.size();
  if (std::holds_alternative<QubitParams>(s.model)) {
    for (std::size_t a = 0; a < k; ++a) axes.emplace_back(-1.0, 1.0, spec.cells);
    return Grid(std::move(axes));
  }
  if (!spec.lower.empty()) {
    for (std::size_t a = 0; a < k; ++a) axes.emplace_back(spec.lower[a], spec.upper[a], spec.cells);
    return Grid(std::move(axes));
  }
  const auto& p = std::get<ShoParams>(s.model);
  const double elapsed = s.schedule.t_end - s.schedule.t0;
  const auto law = sho_transition_density(p, spec.measure, rate_of(s), s.initial_state, elapsed);
  double sigma = std::sqrt(std::max(p.n_thermal(), law.variance[0]));
  if (!(sigma > 0.0)) sigma = 1.0;
  sigma = std::max(sigma, spec.initial_sigma);
  for (std::size_t a = 0; a < k; ++a) {
    const double lo = std::min({0.0, s.initial_state[a], law.mean[a]});
    const double hi = std::max({0.0, s.initial_state[a], law.mean[a]});
    axes.emplace_back(lo - 6.0 * sigma, hi + 6.0 * sigma, spec.cells);
  }
  return Grid(std::move(axes));
}

std::vector<OutputFile> run_solve_forward(const Scenario& s, const ForwardSpec& spec) {
  const std::size_t axes = s.initial_state.size();
  const Grid grid = forward_grid(s, spec);
  const auto schedule = scenario_schedule(s);
  const std::vector<double> sigma(axes, spec.initial_sigma);
  FpProblem problem{portfolio_dynamics(s.model, spec.measure, rate_of(s), axes),
                    grid,
                    schedule,
                    gaussian_density(grid, s.initial_state, sigma),
                    {},
                    spread_steps(schedule.n_steps(), spec.snapshots)};
  const auto snapshots = solve_forward_fp(problem);

  std::vector<std::string> cols{"snapshot", "t"};
  for (std::size_t a = 0; a < axes; ++a) cols.push_back("s" + std::to_string(a));
  cols.push_back("density");
  CsvBuilder csv("solve-forward", s, cols);
  csv.comment("grid cells per axis=" + std::to_string(spec.cells) + " dt=" + format_number(schedule.dt()));
  json summary = metadata("solve-forward", s);
  summary["snapshots"] = json::array();
  const double volume = grid.cell_volume();
  for (std::size_t i = 0; i < snapshots.size(); ++i) {
    const auto& d = snapshots[i];
    std::vector<double> mean(axes, 0.0), second(axes, 0.0);
    double beyond = 0.0;
    for (std::size_t k = 0; k < grid.size(); ++k) {
      const auto c = grid.coordinates(k);
      csv.cell(i).cell(d.time);
      for (double x : c) csv.cell(x);
      csv.cell(d.values[k]);
      csv.end_row();
      const double w = d.values[k] * volume;
      bool outer = true;
      for (std::size_t a = 0; a < axes; ++a) {
        mean[a] += w * c[a];
        second[a] += w * c[a] * c[a];
        outer = outer && std::abs(c[a]) > 0.9;
      }
      if (outer) beyond += w;
    }
    const double mass = grid_mass(d);
    json snap = {{"t", d.time}, {"mass", mass}};
    json m = json::array(), v = json::array();
    for (std::size_t a = 0; a < axes; ++a) {
      m.push_back(mean[a] / mass);
      v.push_back(second[a] / mass - (mean[a] / mass) * (mean[a] / mass));
    }
    snap["mean"] = m;
    snap["variance"] = v;
    if (std::holds_alternative<QubitParams>(s.model)) snap["mass_beyond_0.9"] = beyond;
    summary["snapshots"].push_back(snap);
  }
  return {{"density.csv", csv.str()}, {"forward_summary.json", dump(summary)}};
}

json result_json(const ValuationResult& r) {
  return {{"value", number_json(r.value)},
          {"standard_error", r.standard_error},
          {"route", to_string(r.route)},
          {"quantity", to_string(r.quantity)},
          {"model", r.model},
          {"state", r.state},
          {"t", r.t},
          {"T", r.maturity},
          {"r", r.r}};
}

std::vector<OutputFile> run_value(const Scenario& s, const ValueSpec& spec, std::size_t workers) {
  const RiskNeutralSpec& rn = *s.risk_neutral;
  RouteOptions options;
  options.mc.n_paths = spec.n_paths;
  options.mc.master_seed = s.master_seed;
  options.mc.dt = s.schedule.dt;
  options.mc.workers = workers;
  options.pde.cells = spec.pde_cells;
  options.pde.dt = spec.pde_dt;

  std::vector<ValuationResult> results;
  for (Route r : spec.routes) results.push_back(value_by_route(r, s.model, rn, spec.payoff, s.initial_state, spec.t, options));

  json out = metadata("value", s);
  out["payoff"] = payoff_kind(spec.payoff);
  out["results"] = json::array();
  for (const auto& r : results) out["results"].push_back(result_json(r));

  CsvBuilder csv("value", s, {"route_a", "route_b", "value_a", "value_b", "difference", "relative_difference", "combined_standard_error"});
  out["diffs"] = json::array();
  for (std::size_t i = 0; i < results.size(); ++i) {
    for (std::size_t j = i + 1; j < results.size(); ++j) {
      const auto& a = results[i];
      const auto& b = results[j];
      const double diff = a.value - b.value;
      const double rel = std::abs(diff) / std::max(std::abs(a.value), std::abs(b.value));
      const double se = std::hypot(a.standard_error, b.standard_error);
      out["diffs"].push_back({{"a", to_string(a.route)}, {"b", to_string(b.route)}, {"difference", number_json(diff)},
                              {"relative_difference", number_json(rel)}, {"combined_standard_error", se}});
      csv.cell(to_string(a.route)).cell(to_string(b.route)).cell(a.value).cell(b.value).cell(diff).cell(rel).cell(se);
      csv.end_row();
    }
  }

  if (spec.gaussian_approximation) {
    const auto& q = std::get<QubitParams>(s.model);
    const auto approx = qubit_gaussian_approx_only(q, rn, spec.payoff, s.initial_state, spec.t);
    ValuationResult pde;
    auto it = std::find_if(results.begin(), results.end(), [](const auto& r) { return r.route == Route::pde; });
    pde = it != results.end() ? *it : value_pde(s.model, rn, spec.payoff, s.initial_state, spec.t, options.pde);
    const double diff = approx.value - pde.value;
    out["gaussian_approximation"] = {{"value", number_json(approx.value)},
                                     {"pde_value", number_json(pde.value)},
                                     {"discrepancy", number_json(diff)},
                                     {"relative_discrepancy", number_json(std::abs(diff) / std::abs(pde.value))}};
  }
  return {{"valuation.json", dump(out)}, {"diffs.csv", csv.str()}};
}

std::vector<OutputFile> run_hedge_experiment(const Scenario& s, const HedgeSpec& spec, std::size_t workers) {
  const RiskNeutralSpec& rn = *s.risk_neutral;
  const auto schedule = scenario_schedule(s);
  HedgeOptions opts;
  opts.route = spec.route;
  opts.path_measure = spec.path_measure;
  opts.substeps = spec.substeps;
  opts.workers = workers;
  opts.full_ledgers = spec.ledger_paths;
  const auto ledgers = run_hedge(s.model, rn, spec.payoff, s.initial_state, schedule, spec.n_paths, s.master_seed, opts);
  const std::size_t axes = s.initial_state.size();

  std::vector<std::string> cols{"path", "step", "t"};
  for (std::size_t a = 0; a < axes; ++a) cols.push_back("s" + std::to_string(a));
  cols.push_back("f");
  for (std::size_t a = 0; a < axes; ++a) cols.push_back("delta" + std::to_string(a));
  for (const char* c : {"pi_before", "pi", "financing"}) cols.push_back(c);
  CsvBuilder rows("hedge", s, cols);
  for (std::size_t p = 0; p < std::min(spec.ledger_paths, ledgers.size()); ++p) {
    for (const auto& row : ledgers[p].rows) {
      rows.cell(p).cell(row.step).cell(row.t);
      for (std::size_t a = 0; a < axes; ++a) rows.cell(row.state[a]);
      rows.cell(row.f);
      for (std::size_t a = 0; a < axes; ++a) rows.cell(row.deltas[a]);
      rows.cell(row.pi_before).cell(row.pi).cell(row.financing);
      rows.end_row();
    }
  }

  CsvBuilder errors("hedge", s, {"path", "initial_pi", "terminal_pi", "error", "absorbed", "failure"});
  for (const auto& l : ledgers) {
    errors.cell(l.path).cell(l.initial_pi).cell(l.terminal_pi).cell(l.error).cell(std::size_t{l.absorbed ? 1u : 0u});
    std::string why = l.failure;
    std::replace(why.begin(), why.end(), ',', ';');
    errors.cell(why);
    errors.end_row();
  }

  const auto rep = replication_report(ledgers, spec.histogram_bins);
  json report = metadata("hedge", s);
  report["paths"] = rep.paths;
  report["failed_paths"] = rep.failed_paths;
  report["mean_error"] = rep.mean_error;
  report["mean_standard_error"] = rep.mean_standard_error;
  report["rms_error"] = rep.rms_error;
  report["error_std"] = rep.error_std;
  report["worst_path"] = rep.worst_path;
  report["worst_error"] = rep.worst_error;
  report["initial_value"] = ledgers.front().rows.front().f;
  report["histogram"] = {{"edges", rep.histogram.edges}, {"counts", rep.histogram.counts}};
  return {{"ledgers.csv", rows.str()}, {"errors.csv", errors.str()}, {"report.json", dump(report)}};
}

std::vector<OutputFile> run_collapse(const Scenario& s, const CollapseSpec& spec, std::size_t workers) {
  const auto& q = std::get<QubitParams>(s.model);
  const auto dyn = qubit_physical_dynamics(q);
  const auto schedule = scenario_schedule(s);
  EnsembleOptions opts;
  opts.record_steps = {schedule.n_steps()};
  opts.workers = workers;
  const double kappa_t = q.measurement_rate() * (schedule.t_end() - schedule.t0());
  CsvBuilder csv("collapse-stats", s,
                 {"z0", "n_paths", "fraction_plus", "binomial_standard_error", "oracle_probability", "z_score",
                  "collapsed_fraction", "absorbed_fraction"});
  csv.comment("kappa_T=" + format_number(kappa_t) + " collapse_threshold=" + format_number(spec.collapse_threshold));
  for (double z0 : spec.z0_values) {
    const auto ens = simulate_ensemble(dyn, State{z0, 0.0}, schedule, spec.n_paths, s.master_seed, opts);
    std::size_t plus = 0, collapsed = 0, absorbed = 0;
    for (std::size_t p = 0; p < ens.n_paths(); ++p) {
      const double z = ens.state(p, schedule.n_steps(), 0);
      if (z > 0.0) ++plus;
      if (std::abs(z) > spec.collapse_threshold) ++collapsed;
      if (ens.absorbed(p)) ++absorbed;
    }
    const double n = static_cast<double>(ens.n_paths());
    const double oracle = qubit_absorption_probability(z0);
    const double se = std::sqrt(oracle * (1.0 - oracle) / n);
    const double frac = static_cast<double>(plus) / n;
    csv.cell(z0).cell(ens.n_paths()).cell(frac).cell(se).cell(oracle).cell(se > 0.0 ? (frac - oracle) / se : 0.0);
    csv.cell(static_cast<double>(collapsed) / n).cell(static_cast<double>(absorbed) / n);
    csv.end_row();
  }
  return {{"collapse.csv", csv.str()}};
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError({"cannot read scenario file '" + path + "'"});
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

}  // namespace

std::vector<OutputFile> run_experiment(const Scenario& scenario, std::size_t workers) {
  workers = std::max<std::size_t>(workers, 1);
  return std::visit(
      [&](const auto& spec) -> std::vector<OutputFile> {
        using X = std::decay_t<decltype(spec)>;
        if constexpr (std::is_same_v<X, SimulateSpec>) return run_simulate(scenario, spec, workers);
        else if constexpr (std::is_same_v<X, ForwardSpec>) return run_solve_forward(scenario, spec);
        else if constexpr (std::is_same_v<X, ValueSpec>) return run_value(scenario, spec, workers);
        else if constexpr (std::is_same_v<X, HedgeSpec>) return run_hedge_experiment(scenario, spec, workers);
        else return run_collapse(scenario, spec, workers);
      },
      scenario.experiment);
}

void write_outputs(const std::string& dir, const std::vector<OutputFile>& files) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  for (const auto& f : files) {
    const fs::path target = fs::path(dir) / f.name;
    const fs::path tmp = fs::path(dir) / ("." + f.name + ".tmp" + std::to_string(::getpid()));
    {
      std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
      out << f.content;
      out.flush();
      if (!out) {
        std::error_code ec;
        fs::remove(tmp, ec);
        throw std::runtime_error("cannot write " + tmp.string());
      }
    }
    fs::rename(tmp, target);
  }
}

int run_command(int argc, const char* const* argv, std::ostream& out, std::ostream& log) {
  CLI::App app{"Risk-neutral valuation and hedging of SHO and qubit portfolios"};
  app.require_subcommand(1);
  std::string scenario_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out_dir;
  bool describe = false;
  std::size_t workers = std::max(1u, std::thread::hardware_concurrency());

  const std::vector<std::pair<std::string, std::string>> commands{
      {"simulate", "Path ensemble and moments table"},
      {"solve-forward", "Forward Fokker-Planck density snapshots"},
      {"value", "Valuation by each requested route with cross-route differences"},
      {"hedge", "Delta-hedging ledgers and replication report"},
      {"collapse-stats", "Qubit collapse fractions against the absorption oracle"}};
  for (const auto& [name, help] : commands) {
    auto* sub = app.add_subcommand(name, help);
    sub->add_option("--scenario", scenario_path, "Scenario JSON file")->required();
    sub->add_option("--seed", seed, "Override master_seed");
    sub->add_option("--out", out_dir, "Override output_dir");
    sub->add_flag("--describe", describe, "Print the resolved scenario and exit");
    sub->add_option("--workers", workers, "Worker threads (results do not depend on it)")->check(CLI::PositiveNumber);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return exit_ok;
  } catch (const CLI::ParseError& e) {
    log << "error: " << e.what() << "\n";
    return exit_validation;
  }
  const std::string command = app.get_subcommands().front()->get_name();

  try {
    Scenario scenario = parse_scenario(read_file(scenario_path));
    if (seed) scenario.master_seed = *seed;
    if (out_dir) scenario.output_dir = *out_dir;
    if (experiment_name(scenario.experiment) != command)
      throw ValidationError({"experiment.type: scenario is a '" + experiment_name(scenario.experiment) +
                             "' experiment but the subcommand is '" + command + "'"});
    if (describe) {
      out << describe_scenario(scenario);
      return exit_ok;
    }
    const auto files = run_experiment(scenario, workers);
    write_outputs(scenario.output_dir, files);
    for (const auto& f : files) log << "wrote " << (std::filesystem::path(scenario.output_dir) / f.name).string() << "\n";
    return exit_ok;
  } catch (const ValidationError& e) {
    for (const auto& issue : e.issues()) log << "invalid scenario: " << issue << "\n";
    return exit_validation;
  } catch (const DomainError& e) {
    log << "invalid input: " << e.what() << "\n";
    return exit_validation;
  } catch (const NumericalError& e) {
    log << "numerical failure: " << e.what() << "\n";
    return exit_numerical;
  } catch (const std::exception& e) {
    log << "failure: " << e.what() << "\n";
    return exit_numerical;
  }
}

}  // namespace qportfolio
