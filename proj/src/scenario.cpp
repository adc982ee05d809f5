#include "qportfolio/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <set>

#include "json.hpp"
#include "qportfolio/errors.hpp"

namespace qportfolio {

using nlohmann::json;

namespace {

std::size_t edit_distance(const std::string& a, const std::string& b) {
  std::vector<std::size_t> row(b.size() + 1);
  for (std::size_t j = 0; j <= b.size(); ++j) row[j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    std::size_t diag = row[0];
    row[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j) {
      const std::size_t up = row[j];
      row[j] = std::min({row[j] + 1, row[j - 1] + 1, diag + (a[i - 1] == b[j - 1] ? 0 : 1)});
      diag = up;
    }
  }
  return row[b.size()];
}

std::string join_path(const std::string& base, const std::string& key) {
  return base.empty() ? key : base + "." + key;
}

// Reads one JSON object, remembering which keys were consumed.
class Reader {
 public:
  Reader(const json* obj, std::string path, std::vector<std::string>& issues)
      : obj_(obj), path_(std::move(path)), issues_(issues) {}

  bool present() const { return obj_ != nullptr; }
  const std::string& path() const { return path_; }

  void issue(const std::string& key, const std::string& message) {
    issues_.push_back(join_path(path_, key) + ": " + message);
  }

  bool has(const std::string& key) {
    known_.insert(key);
    return obj_ != nullptr && obj_->contains(key);
  }

  std::optional<double> number(const std::string& key, bool required = false) {
    const json* v = get(key, required);
    if (v == nullptr) return std::nullopt;
    if (!v->is_number()) return fail<double>(key, "must be a number");
    const double x = v->get<double>();
    if (!std::isfinite(x)) return fail<double>(key, "must be finite");
    return x;
  }

  std::optional<std::size_t> count(const std::string& key, bool required = false) {
    const json* v = get(key, required);
    if (v == nullptr) return std::nullopt;
    if (!v->is_number_integer() || (v->is_number_integer() && !v->is_number_unsigned() && v->get<long long>() < 0))
      return fail<std::size_t>(key, "must be a nonnegative integer");
    return v->get<std::size_t>();
  }

  std::optional<std::uint64_t> seed(const std::string& key) {
    const json* v = get(key, false);
    if (v == nullptr) return std::nullopt;
    if (!v->is_number_unsigned()) return fail<std::uint64_t>(key, "must be a nonnegative integer");
    return v->get<std::uint64_t>();
  }

  std::optional<bool> boolean(const std::string& key) {
    const json* v = get(key, false);
    if (v == nullptr) return std::nullopt;
    if (!v->is_boolean()) return fail<bool>(key, "must be true or false");
    return v->get<bool>();
  }

  std::optional<std::string> text(const std::string& key, bool required = false) {
    const json* v = get(key, required);
    if (v == nullptr) return std::nullopt;
    if (!v->is_string()) return fail<std::string>(key, "must be a string");
    return v->get<std::string>();
  }

  /// Array of numbers; with allow_infinite the strings "inf" and "-inf" are accepted too.
  std::optional<std::vector<double>> numbers(const std::string& key, bool required = false, bool allow_infinite = false) {
    const json* v = get(key, required);
    if (v == nullptr) return std::nullopt;
    if (!v->is_array() || v->empty()) return fail<std::vector<double>>(key, "must be a non-empty array of numbers");
    std::vector<double> out;
    for (std::size_t i = 0; i < v->size(); ++i) {
      const json& e = (*v)[i];
      const std::string where = key + "[" + std::to_string(i) + "]";
      if (e.is_number() && std::isfinite(e.get<double>())) {
        out.push_back(e.get<double>());
      } else if (allow_infinite && e.is_string() && (e == "inf" || e == "-inf")) {
        out.push_back(e == "inf" ? std::numeric_limits<double>::infinity() : -std::numeric_limits<double>::infinity());
      } else {
        issue(where, allow_infinite ? "must be a finite number, \"inf\" or \"-inf\"" : "must be a finite number");
        return std::nullopt;
      }
    }
    return out;
  }

  std::optional<std::vector<std::string>> texts(const std::string& key) {
    const json* v = get(key, false);
    if (v == nullptr) return std::nullopt;
    if (!v->is_array() || v->empty()) return fail<std::vector<std::string>>(key, "must be a non-empty array of strings");
    std::vector<std::string> out;
    for (const auto& e : *v) {
      if (!e.is_string()) return fail<std::vector<std::string>>(key, "must be a non-empty array of strings");
      out.push_back(e.get<std::string>());
    }
    return out;
  }

  Reader object(const std::string& key, bool required = false) {
    const json* v = get(key, required);
    if (v != nullptr && !v->is_object()) {
      issue(key, "must be an object");
      v = nullptr;
    }
    return Reader(v, join_path(path_, key), issues_);
  }

  /// Reports keys that were never asked for.
  void finish() {
    if (obj_ == nullptr) return;
    const std::vector<std::string> known(known_.begin(), known_.end());
    for (const auto& item : obj_->items()) {
      if (known_.count(item.key())) continue;
      std::string message = "unknown key";
      if (const auto hint = suggest_key(item.key(), known); !hint.empty()) message += " (did you mean \"" + hint + "\"?)";
      issue(item.key(), message);
    }
  }

 private:
  const json* get(const std::string& key, bool required) {
    known_.insert(key);
    if (obj_ == nullptr || !obj_->contains(key)) {
      if (required) issue(key, "missing required key");
      return nullptr;
    }
    return &obj_->at(key);
  }

  template <typename T>
  std::optional<T> fail(const std::string& key, const std::string& message) {
    issue(key, message);
    return std::nullopt;
  }

  const json* obj_;
  std::string path_;
  std::vector<std::string>& issues_;
  std::set<std::string> known_;
};

std::optional<Measure> parse_measure(Reader& r, const std::string& key) {
  const auto name = r.text(key);
  if (!name) return std::nullopt;
  if (*name == "physical") return Measure::physical;
  if (*name == "risk_neutral") return Measure::risk_neutral;
  r.issue(key, "must be \"physical\" or \"risk_neutral\"");
  return std::nullopt;
}

std::string measure_name(Measure m) { return m == Measure::physical ? "physical" : "risk_neutral"; }

std::optional<Payoff> parse_payoff(Reader r, std::size_t axes) {
  if (!r.present()) return std::nullopt;
  const auto type = r.text("type", true);
  std::optional<Payoff> out;
  auto check_axes = [&](const std::string& key, std::size_t n) {
    if (n != axes) {
      r.issue(key, "needs one entry per state axis (" + std::to_string(axes) + ")");
      return false;
    }
    return true;
  };
  if (type == "delta") {
    if (auto pts = r.numbers("points", true); pts && check_axes("points", pts->size())) out = DeltaPayoff{*pts};
  } else if (type == "step") {
    auto thr = r.numbers("thresholds", true, true);
    StepDirection dir = StepDirection::above;
    if (auto d = r.text("direction")) {
      if (*d == "below") dir = StepDirection::below;
      else if (*d != "above") r.issue("direction", "must be \"above\" or \"below\"");
    }
    if (thr && check_axes("thresholds", thr->size())) out = StepPayoff{*thr, dir};
  } else if (type == "call") {
    if (auto k = r.numbers("strikes", true); k && check_axes("strikes", k->size())) out = CallPayoff{*k};
  } else if (type == "constant") {
    const double level = r.number("level").value_or(1.0);
    out = ConstantPayoff{level, axes};
  } else if (type) {
    r.issue("type", "must be one of delta, step, call, constant");
  }
  r.finish();
  return out;
}

json payoff_json(const Payoff& payoff) {
  auto axis_values = [](const std::vector<double>& v) {
    json a = json::array();
    for (double x : v) {
      if (std::isinf(x)) a.push_back(x > 0 ? "inf" : "-inf");
      else a.push_back(x);
    }
    return a;
  };
  return std::visit(
      [&](const auto& p) -> json {
        using P = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<P, DeltaPayoff>) return {{"type", "delta"}, {"points", p.points}};
        else if constexpr (std::is_same_v<P, StepPayoff>)
          return {{"type", "step"},
                  {"thresholds", axis_values(p.thresholds)},
                  {"direction", p.direction == StepDirection::above ? "above" : "below"}};
        else if constexpr (std::is_same_v<P, CallPayoff>) return {{"type", "call"}, {"strikes", p.strikes}};
        else return {{"type", "constant"}, {"level", p.level}};
      },
      payoff);
}

json scenario_json(const Scenario& s) {
  json j;
  if (const auto* sho = std::get_if<ShoParams>(&s.model)) {
    j["model"] = {{"type", "sho"}, {"gamma", sho->gamma()}, {"n_thermal", sho->n_thermal()}, {"omega", sho->omega()}};
  } else {
    const auto& q = std::get<QubitParams>(s.model);
    j["model"] = {{"type", "qubit"}, {"phi_flux", q.phi_flux()}, {"theta_shift", q.theta_shift()}};
  }
  if (s.risk_neutral) j["risk_neutral"] = {{"r", s.risk_neutral->r()}, {"T", s.risk_neutral->maturity()}};
  j["initial_state"] = s.initial_state;
  j["schedule"] = {{"t0", s.schedule.t0}, {"t_end", s.schedule.t_end}, {"dt", s.schedule.dt}};
  json e;
  e["type"] = experiment_name(s.experiment);
  std::visit(
      [&](const auto& x) {
        using X = std::decay_t<decltype(x)>;
        if constexpr (std::is_same_v<X, SimulateSpec>) {
          e["n_paths"] = x.n_paths;
          e["measure"] = measure_name(x.measure);
          e["rows"] = x.rows;
        } else if constexpr (std::is_same_v<X, ForwardSpec>) {
          e["measure"] = measure_name(x.measure);
          e["cells"] = x.cells;
          e["lower"] = x.lower;
          e["upper"] = x.upper;
          e["initial_sigma"] = x.initial_sigma;
          e["snapshots"] = x.snapshots;
        } else if constexpr (std::is_same_v<X, ValueSpec>) {
          e["payoff"] = payoff_json(x.payoff);
          json routes = json::array();
          for (auto r : x.routes) routes.push_back(to_string(r));
          e["routes"] = routes;
          e["n_paths"] = x.n_paths;
          e["t"] = x.t;
          e["pde_cells"] = x.pde_cells;
          e["pde_dt"] = x.pde_dt;
          e["gaussian_approximation"] = x.gaussian_approximation;
        } else if constexpr (std::is_same_v<X, HedgeSpec>) {
          e["payoff"] = payoff_json(x.payoff);
          e["route"] = to_string(x.route);
          e["path_measure"] = measure_name(x.path_measure);
          e["n_paths"] = x.n_paths;
          e["substeps"] = x.substeps;
          e["ledger_paths"] = x.ledger_paths;
          e["histogram_bins"] = x.histogram_bins;
        } else {
          e["z0_values"] = x.z0_values;
          e["n_paths"] = x.n_paths;
          e["collapse_threshold"] = x.collapse_threshold;
        }
      },
      s.experiment);
  j["experiment"] = e;
  j["master_seed"] = s.master_seed;
  j["output_dir"] = s.output_dir;
  return j;
}

}  // namespace

std::string suggest_key(const std::string& unknown, const std::vector<std::string>& known) {
  std::string best;
  std::size_t best_score = std::numeric_limits<std::size_t>::max();
  for (const auto& k : known) {
    // a known key embedded in the unknown one (gamma_rate -> gamma) wins outright
    if (unknown.find(k) != std::string::npos || k.find(unknown) != std::string::npos) {
      const std::size_t score = edit_distance(unknown, k) / 4;
      if (score < best_score) {
        best_score = score;
        best = k;
      }
      continue;
    }
    const std::size_t d = edit_distance(unknown, k);
    if (d <= std::max<std::size_t>(2, k.size() / 3) && d < best_score) {
      best_score = d;
      best = k;
    }
  }
  return best;
}

std::string experiment_name(const ExperimentSpec& spec) {
  static constexpr const char* kNames[] = {"simulate", "solve-forward", "value", "hedge", "collapse-stats"};
  return kNames[spec.index()];
}

Scenario parse_scenario(const std::string& text) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ValidationError({std::string("scenario is not valid JSON: ") + e.what()});
  }
  if (!root.is_object()) throw ValidationError({"scenario must be a JSON object"});

  std::vector<std::string> issues;
  Reader top(&root, "", issues);

  // model
  std::optional<Model> model;
  {
    Reader m = top.object("model", true);
    if (m.present()) {
      const auto type = m.text("type", true);
      if (type == "sho") {
        const auto gamma = m.number("gamma", true);
        const auto n = m.number("n_thermal", true);
        const auto omega = m.number("omega");
        bool ok = gamma && n;
        if (gamma && !(*gamma > 0.0)) ok = false, m.issue("gamma", "must be > 0");
        if (n && !(*n >= 0.0)) ok = false, m.issue("n_thermal", "must be >= 0");
        if (omega && !(*omega > 0.0)) ok = false, m.issue("omega", "must be > 0");
        if (ok) model = ShoParams(*gamma, *n, omega.value_or(1.0));
      } else if (type == "qubit") {
        const auto kappa = m.number("kappa");
        const auto phi = m.number("phi_flux");
        const auto theta = m.number("theta_shift");
        bool ok = true;
        if (kappa && !(*kappa > 0.0)) ok = false, m.issue("kappa", "must be > 0");
        if (phi && !(*phi > 0.0)) ok = false, m.issue("phi_flux", "must be > 0");
        if (theta && !(*theta > 0.0)) ok = false, m.issue("theta_shift", "must be > 0");
        if (kappa && phi) {
          ok = false;
          m.issue("kappa", "give either kappa or phi_flux, not both");
        } else if (!kappa && !phi) {
          ok = false;
          if (!m.has("kappa") && !m.has("phi_flux")) m.issue("phi_flux", "missing required key (or give kappa)");
        } else if (phi && !theta && !m.has("theta_shift")) {
          ok = false;
          m.issue("theta_shift", "missing required key");
        }
        if (ok) model = kappa ? QubitParams::from_rate(*kappa, theta.value_or(1e-6)) : QubitParams(*phi, *theta);
      } else if (type) {
        m.issue("type", "must be \"sho\" or \"qubit\"");
      }
      m.finish();
    }
  }
  const bool is_qubit = model && std::holds_alternative<QubitParams>(*model);

  // risk-neutral spec
  std::optional<RiskNeutralSpec> rn;
  {
    Reader r = top.object("risk_neutral");
    if (r.present()) {
      const auto rate = r.number("r", true);
      const auto T = r.number("T", true);
      if (T && !(*T > 0.0)) r.issue("T", "must be > 0");
      else if (rate && T) rn = RiskNeutralSpec(*rate, *T);
      r.finish();
    }
  }

  // initial state
  std::vector<double> state;
  if (auto s = top.numbers("initial_state", true)) {
    state = *s;
    if (is_qubit)
      for (std::size_t i = 0; i < state.size(); ++i)
        if (std::abs(state[i]) > 1.0) top.issue("initial_state[" + std::to_string(i) + "]", "qubit polarization must lie in [-1, 1]");
  }

  // schedule
  ScheduleSpec schedule;
  bool have_t_end = false;
  {
    Reader r = top.object("schedule");
    if (auto v = r.number("t0")) schedule.t0 = *v;
    if (auto v = r.number("dt")) {
      if (*v > 0.0) schedule.dt = *v;
      else r.issue("dt", "must be > 0");
    }
    if (auto v = r.number("t_end")) {
      schedule.t_end = *v;
      have_t_end = true;
      if (rn && std::abs(*v - rn->maturity()) > 1e-12 * std::max(1.0, rn->maturity()))
        r.issue("t_end", "must equal risk_neutral.T when both are given");
    }
    if (!have_t_end && rn) {
      schedule.t_end = rn->maturity();
      have_t_end = true;
    }
    if (!have_t_end) r.issue("t_end", "missing required key (or give risk_neutral.T)");
    else if (!(schedule.t_end > schedule.t0)) r.issue("t_end", "must be > t0");
    else if (schedule.dt > schedule.t_end - schedule.t0) r.issue("dt", "must not exceed t_end - t0");
    r.finish();
  }

  std::uint64_t seed = top.seed("master_seed").value_or(42);
  std::string output_dir = top.text("output_dir").value_or(".");

  // experiment
  std::optional<ExperimentSpec> experiment;
  {
    Reader e = top.object("experiment", true);
    if (e.present()) {
      const auto type = e.text("type", true);
      auto positive_count = [&](const std::string& key, std::size_t fallback, std::size_t minimum) {
        const auto v = e.count(key);
        if (v && *v < minimum) e.issue(key, "must be >= " + std::to_string(minimum));
        return v.value_or(fallback);
      };
      auto need_rn = [&](const std::string& why) {
        if (!rn) top.issue("risk_neutral", "required for " + why);
      };
      auto axes_limit = [&](std::size_t limit, const std::string& why) {
        if (state.size() > limit) top.issue("initial_state", "at most " + std::to_string(limit) + " axes for " + why);
      };
      if (type == "simulate") {
        SimulateSpec x;
        x.n_paths = positive_count("n_paths", x.n_paths, 2);
        if (auto m = parse_measure(e, "measure")) x.measure = *m;
        x.rows = positive_count("rows", x.rows, 2);
        if (x.measure == Measure::risk_neutral) need_rn("risk-neutral paths");
        axes_limit(2, "simulate");
        experiment = x;
      } else if (type == "solve-forward" || type == "solve_forward") {
        ForwardSpec x;
        if (auto m = parse_measure(e, "measure")) x.measure = *m;
        x.cells = positive_count("cells", x.cells, Grid1D::kMinCells);
        if (auto v = e.numbers("lower")) x.lower = *v;
        if (auto v = e.numbers("upper")) x.upper = *v;
        if (x.lower.size() != x.upper.size()) e.issue("upper", "give lower and upper together, one entry per axis");
        else if (!x.lower.empty() && x.lower.size() != state.size()) e.issue("lower", "needs one entry per state axis");
        for (std::size_t i = 0; i < std::min(x.lower.size(), x.upper.size()); ++i)
          if (!(x.upper[i] > x.lower[i])) e.issue("upper", "must exceed lower on every axis");
        if (is_qubit && !x.lower.empty()) e.issue("lower", "the qubit axis is always [-1, 1]");
        if (auto v = e.number("initial_sigma")) {
          if (*v > 0.0) x.initial_sigma = *v;
          else e.issue("initial_sigma", "must be > 0");
        }
        x.snapshots = positive_count("snapshots", x.snapshots, 2);
        if (x.measure == Measure::risk_neutral) need_rn("risk-neutral dynamics");
        axes_limit(2, "solve-forward");
        experiment = x;
      } else if (type == "value") {
        ValueSpec x;
        need_rn("value");
        const auto payoff = parse_payoff(e.object("payoff", true), state.size());
        if (auto names = e.texts("routes")) {
          for (const auto& n : *names) {
            try {
              x.routes.push_back(parse_route(n));
            } catch (const DomainError& err) {
              e.issue("routes", err.what());
            }
          }
        } else {
          if (!is_qubit) x.routes.push_back(Route::closed_form);
          if (state.size() <= 2) x.routes.push_back(Route::pde);
          x.routes.push_back(Route::monte_carlo);
        }
        for (auto r : x.routes) {
          if (r == Route::closed_form && is_qubit)
            e.issue("routes", "closed_form has no exact qubit solution (use gaussian_approximation)");
          if (r == Route::pde && state.size() > 2) e.issue("routes", "pde supports at most 2 axes");
        }
        x.n_paths = positive_count("n_paths", x.n_paths, 100);
        x.t = e.number("t").value_or(schedule.t0);
        if (rn && !(x.t < rn->maturity())) e.issue("t", "must be < risk_neutral.T");
        x.pde_cells = e.count("pde_cells").value_or(0);
        if (x.pde_cells != 0 && x.pde_cells < Grid1D::kMinCells) e.issue("pde_cells", "must be 0 (automatic) or >= 16");
        if (auto v = e.number("pde_dt")) {
          if (*v >= 0.0) x.pde_dt = *v;
          else e.issue("pde_dt", "must be >= 0");
        }
        x.gaussian_approximation = e.boolean("gaussian_approximation").value_or(false);
        if (x.gaussian_approximation && !is_qubit) e.issue("gaussian_approximation", "applies to the qubit model only");
        if (x.gaussian_approximation)
          for (double z : state)
            if (!(std::abs(z) < 1.0)) top.issue("initial_state", "the Gaussian approximation needs |z0| < 1");
        if (payoff) {
          x.payoff = *payoff;
          experiment = x;
        }
      } else if (type == "hedge") {
        HedgeSpec x;
        need_rn("hedge");
        const auto payoff = parse_payoff(e.object("payoff", true), state.size());
        if (payoff && std::holds_alternative<DeltaPayoff>(*payoff))
          e.issue("payoff.type", "a delta payoff cannot be hedged (no pointwise terminal value)");
        if (auto name = e.text("route")) {
          try {
            x.route = parse_route(*name);
          } catch (const DomainError& err) {
            e.issue("route", err.what());
          }
        } else if (is_qubit) {
          x.route = Route::pde;
        }
        if (x.route == Route::monte_carlo) e.issue("route", "must be closed_form or pde");
        if (x.route == Route::closed_form && is_qubit) e.issue("route", "closed_form needs the sho model");
        if (auto m = parse_measure(e, "path_measure")) x.path_measure = *m;
        x.n_paths = positive_count("n_paths", x.n_paths, 2);
        x.substeps = positive_count("substeps", x.substeps, 1);
        x.ledger_paths = e.count("ledger_paths").value_or(x.ledger_paths);
        x.histogram_bins = positive_count("histogram_bins", x.histogram_bins, 1);
        axes_limit(2, "hedge");
        if (payoff) {
          x.payoff = *payoff;
          experiment = x;
        }
      } else if (type == "collapse-stats" || type == "collapse_stats") {
        CollapseSpec x;
        if (!is_qubit && model) top.issue("model.type", "collapse-stats needs the qubit model");
        x.z0_values = e.numbers("z0_values").value_or(state);
        for (double z : x.z0_values)
          if (!(std::abs(z) < 1.0)) e.issue("z0_values", "every start must satisfy |z0| < 1");
        x.n_paths = positive_count("n_paths", x.n_paths, 2);
        if (auto v = e.number("collapse_threshold")) {
          if (*v > 0.0 && *v < 1.0) x.collapse_threshold = *v;
          else e.issue("collapse_threshold", "must lie in (0, 1)");
        }
        experiment = x;
      } else if (type) {
        e.issue("type", "must be one of simulate, solve-forward, value, hedge, collapse-stats");
      }
      e.finish();
    }
  }
  top.finish();

  if (!issues.empty() || !model || !experiment) {
    if (issues.empty()) issues.push_back("scenario is incomplete");
    throw ValidationError(std::move(issues));
  }
  return Scenario{*model, rn, state, schedule, *experiment, seed, output_dir};
}

std::string describe_scenario(const Scenario& scenario) { return scenario_json(scenario).dump(2) + "\n"; }

std::string scenario_hash(const Scenario& scenario) {
  json j = scenario_json(scenario);
  j.erase("output_dir");
  const std::string text = j.dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace qportfolio
