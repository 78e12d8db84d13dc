#pragma once

// Command-line front end: simulate, bifurcate, critical, sweep.
//
// Exit codes: 0 success, 1 numerical failure, 2 argument or config error.

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "dimer/dimer.hpp"

namespace dimer::cli {

inline constexpr const char* kConfigEnv = "DIMER_HYSTERESIS_CONFIG";

/// Raised for bad flag values or inconsistent configurations (exit 2).
class UsageError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

struct SimulateOptions {
  double r = 1.0;
  double nu = 0.5;
  double z0 = 0.01;
  double theta0 = 0.0;
  double T = 4000.0;
  std::string schedule = "triangular";
  double eta_start = -1.0;
  std::optional<double> eta_peak;
  std::string knots;
  std::string rhs_mode = "hamiltonian";
  std::string method = "rk45";
  double dt = 1e-3;
  double abs_tol = 1e-9;
  double rel_tol = 1e-9;
  int stride = 1;
  double omega = 1.0;
  double Omega = 0.0;
  std::string out;
  std::string plot;

  ModelParams params() const {
    ModelParams p{r, nu, rhs_mode_from_string(rhs_mode)};
    p.validate();
    return p;
  }

  EtaSchedule eta_schedule() const {
    switch (schedule_kind_from_string(schedule)) {
      case ScheduleKind::constant:
        return EtaSchedule::constant(eta_start, T);
      case ScheduleKind::triangular:
        if (!eta_peak) throw UsageError("--eta-peak is required for a triangular schedule");
        return EtaSchedule::triangular(eta_start, *eta_peak, T);
      case ScheduleKind::piecewise_linear: {
        // "tau:eta,tau:eta,..."
        std::vector<Knot> ks;
        for (const std::string& item : io::detail::split(knots, ',')) {
          const auto colon = item.find(':');
          if (colon == std::string::npos) throw UsageError("--knots expects tau:eta pairs");
          ks.push_back({io::detail::parse_double(io::detail::trim(item.substr(0, colon)), "knot tau"),
                        io::detail::parse_double(io::detail::trim(item.substr(colon + 1)), "knot eta")});
        }
        return EtaSchedule::piecewise_linear(std::move(ks));
      }
    }
    throw UsageError("unknown schedule");
  }

  IntegratorConfig integrator() const {
    IntegratorConfig c;
    c.method = method_from_string(method);
    c.dt = dt;
    c.abs_tol = abs_tol;
    c.rel_tol = rel_tol;
    c.sample_stride = stride;
    c.validate();
    return c;
  }

  PhysicalContext context() const {
    PhysicalContext ctx;
    ctx.omega = omega;
    ctx.Omega = Omega;
    ctx.validate();
    return ctx;
  }

  io::json to_json() const {
    io::json j = {{"r", r},           {"nu", nu},         {"z0", z0},
                  {"theta0", theta0}, {"T", T},           {"schedule", schedule},
                  {"eta-start", eta_start},               {"rhs-mode", rhs_mode},
                  {"method", method}, {"dt", dt},         {"abs-tol", abs_tol},
                  {"rel-tol", rel_tol}, {"stride", stride}, {"omega", omega},
                  {"Omega", Omega}};
    j["eta-peak"] = eta_peak ? io::json(*eta_peak) : io::json(nullptr);
    if (!knots.empty()) j["knots"] = knots;
    return j;
  }
};

inline void add_simulate_flags(CLI::App* app, SimulateOptions& o) {
  app->add_option("--r", o.r, "nonlinearity power r > 0");
  app->add_option("--nu", o.nu, "damping constant");
  app->add_option("--z0", o.z0, "initial population imbalance");
  app->add_option("--theta0", o.theta0, "initial relative phase");
  app->add_option("--T", o.T, "schedule duration in rescaled time");
  app->add_option("--schedule", o.schedule, "constant | triangular | piecewise_linear");
  app->add_option("--eta-start", o.eta_start, "eta at tau = 0 (and tau = T for triangular)");
  app->add_option("--eta-peak", o.eta_peak, "eta at tau = T/2 (triangular)");
  app->add_option("--knots", o.knots, "piecewise-linear knots tau:eta,tau:eta,...");
  app->add_option("--rhs-mode", o.rhs_mode, "hamiltonian | as_printed");
  app->add_option("--method", o.method, "rk45 | rk4");
  app->add_option("--dt", o.dt, "fixed step (rk4) or initial step (rk45)");
  app->add_option("--abs-tol", o.abs_tol, "adaptive absolute tolerance");
  app->add_option("--rel-tol", o.rel_tol, "adaptive relative tolerance");
  app->add_option("--stride", o.stride, "output samples per unit tau");
  app->add_option("--omega", o.omega, "level half-splitting (for E)");
  app->add_option("--Omega", o.Omega, "level mean (for E)");
}

namespace detail {

inline std::set<std::string> long_names(const CLI::App* app) {
  std::set<std::string> names;
  for (const CLI::Option* opt : app->get_options()) {
    for (const std::string& n : opt->get_lnames()) names.insert(n);
  }
  names.erase("help");
  return names;
}

/// Fills options of `sub` that were not given on the command line.
inline void apply_config(CLI::App* sub, const std::map<std::string, std::string>& values) {
  for (const auto& [key, value] : values) {
    CLI::Option* opt = nullptr;
    try {
      opt = sub->get_option("--" + key);
    } catch (const CLI::OptionNotFound&) {
      continue;  // belongs to another subcommand
    }
    if (opt->count() > 0) continue;
    if (opt->get_type_size() == 0) {
      if (value == "true" || value == "1") opt->add_result("true");
      else if (value != "false" && value != "0") throw UsageError("config key '" + key + "' is a flag");
    } else {
      opt->add_result(value);
    }
    opt->run_callback();
  }
}

inline std::ostream& open_or(std::ofstream& file, const std::string& path, std::ostream& fallback) {
  if (path.empty() || path == "-") return fallback;
  file.open(path);
  if (!file) throw std::runtime_error("cannot open '" + path + "' for writing");
  return file;
}

inline std::string sidecar_path(const std::string& csv_path) {
  const auto dot = csv_path.find_last_of('.');
  const auto slash = csv_path.find_last_of('/');
  if (dot == std::string::npos || (slash != std::string::npos && dot < slash)) return csv_path + ".json";
  return csv_path.substr(0, dot) + ".json";
}

}  // namespace detail

inline int run(int argc, const char* const* argv, std::ostream& out = std::cout,
               std::ostream& err = std::cerr) {
  CLI::App app{"Damped two-mode condensate: dynamics, bifurcations and hysteresis", "dimer"};
  app.require_subcommand(1);
  std::string config_path;
  app.add_option("--config", config_path, "key = value config file (default: $" +
                                               std::string(kConfigEnv) + ")");

  SimulateOptions sim;
  CLI::App* simulate = app.add_subcommand("simulate", "integrate the damped equations of motion");
  add_simulate_flags(simulate, sim);
  simulate->add_option("--out", sim.out, "trajectory CSV path (default stdout)");
  simulate->add_option("--plot", sim.plot, "SVG plot path");

  double bif_r = 1.0, eta_min = 0.5, eta_max = 4.0;
  int steps = 500;
  bool repulsive = false;
  std::string bif_out, bif_plot;
  CLI::App* bifurcate = app.add_subcommand("bifurcate", "trace stationary branches against |eta|");
  bifurcate->add_option("--r", bif_r, "nonlinearity power");
  bifurcate->add_option("--eta-min", eta_min, "smallest |eta|");
  bifurcate->add_option("--eta-max", eta_max, "largest |eta|");
  bifurcate->add_option("--steps", steps, "grid points in |eta|");
  bifurcate->add_flag("--repulsive", repulsive, "trace eta > 0 instead of eta < 0");
  bifurcate->add_option("--out", bif_out, "branch CSV path (default stdout)");
  bifurcate->add_option("--plot", bif_plot, "SVG plot path");

  std::vector<double> crit_r;
  CLI::App* critical = app.add_subcommand("critical", "print eta*, eta+ and the pitchfork type");
  critical->add_option("--r", crit_r, "nonlinearity power (repeatable)")->required();

  SimulateOptions swp;
  swp.eta_start = -3.0;
  double r_min = 3.0, r_max = 4.0, tol = 1e-4;
  bool hysteresis = false;
  int grid = 64;
  CLI::App* sweep = app.add_subcommand("sweep", "locate r_threshold, or run a hysteresis sweep");
  sweep->add_option("--r-min", r_min, "lower bracket for the threshold search");
  sweep->add_option("--r-max", r_max, "upper bracket for the threshold search");
  sweep->add_option("--tol", tol, "bisection tolerance in r");
  sweep->add_flag("--hysteresis", hysteresis, "run the ramp-up/ramp-down protocol instead");
  add_simulate_flags(sweep, swp);
  sweep->add_option("--grid", grid, "number of |eta| bins");
  sweep->add_option("--out", swp.out, "report JSON path (default stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    if (code != 0) err << app.help();
    return code == 0 ? 0 : 2;
  }

  CLI::App* active = app.get_subcommands().front();

  // Configuration: explicit --config, else the environment variable.
  try {
    if (config_path.empty()) {
      if (const char* env = std::getenv(kConfigEnv)) config_path = env;
    }
    if (!config_path.empty()) {
      std::ifstream cfg(config_path);
      if (!cfg) throw UsageError("cannot read config file '" + config_path + "'");
      std::set<std::string> allowed;
      for (const CLI::App* sub : {simulate, bifurcate, critical, sweep}) {
        const auto names = detail::long_names(sub);
        allowed.insert(names.begin(), names.end());
      }
      detail::apply_config(active, io::parse_config(cfg, allowed));
    }
  } catch (const std::exception& e) {
    err << "dimer: " << e.what() << '\n';
    return 2;
  }

  // Build and validate inputs (exit 2 on failure), then run (exit 1 on failure).
  auto usage_failure = [&](const std::exception& e) {
    err << "dimer " << active->get_name() << ": " << e.what() << "\n\n" << active->help();
    return 2;
  };
  auto numeric_failure = [&](const std::exception& e) {
    if (dynamic_cast<const DomainError*>(&e)) return usage_failure(e);
    err << "dimer " << active->get_name() << ": " << e.what() << '\n';
    return 1;
  };

  if (active == simulate) {
    ModelParams params;
    EtaSchedule schedule;
    IntegratorConfig config;
    PhysicalContext ctx;
    try {
      params = sim.params();
      schedule = sim.eta_schedule();
      config = sim.integrator();
      ctx = sim.context();
    } catch (const std::exception& e) {
      return usage_failure(e);
    }
    try {
      const Trajectory traj = integrate({sim.z0, sim.theta0}, params, schedule, config, ctx);
      std::ofstream file;
      io::write_trajectory_csv(detail::open_or(file, sim.out, out), traj);
      if (!sim.plot.empty()) {
        std::ofstream svg(sim.plot);
        if (!svg) throw std::runtime_error("cannot open '" + sim.plot + "' for writing");
        io::write_trajectory_svg(svg, traj);
      }
    } catch (const std::exception& e) {
      return numeric_failure(e);
    }
    return 0;
  }

  if (active == bifurcate) {
    if (eta_min < 0.0 && eta_max <= 0.0) {
      // Signed attractive couplings given directly.
      const double lo = -eta_max, hi = -eta_min;
      eta_min = lo;
      eta_max = hi;
    }
    if (!(bif_r > 0.0) || !(eta_min >= 0.0 && eta_max > eta_min) || steps < 2) {
      return usage_failure(UsageError("need r > 0, 0 <= eta-min < eta-max and steps >= 2"));
    }
    try {
      const BifurcationDiagram d =
          trace_branches(bif_r, {eta_min, eta_max}, steps,
                         repulsive ? CouplingSign::repulsive : CouplingSign::attractive);
      const io::json cfg = {{"r", bif_r},   {"eta-min", eta_min}, {"eta-max", eta_max},
                            {"steps", steps}, {"repulsive", repulsive}};
      std::ofstream file;
      io::write_branches_csv(detail::open_or(file, bif_out, out), d);
      const io::json meta = io::diagram_json(d, cfg);
      if (bif_out.empty() || bif_out == "-") {
        err << meta.dump() << '\n';
      } else {
        std::ofstream side(detail::sidecar_path(bif_out));
        if (!side) throw std::runtime_error("cannot write JSON sidecar");
        side << meta.dump(2) << '\n';
      }
      if (!bif_plot.empty()) {
        std::ofstream svg(bif_plot);
        if (!svg) throw std::runtime_error("cannot open '" + bif_plot + "' for writing");
        io::write_diagram_svg(svg, d);
      }
    } catch (const std::exception& e) {
      return numeric_failure(e);
    }
    return 0;
  }

  if (active == critical) {
    for (double r : crit_r) {
      if (!(r > 0.0)) return usage_failure(UsageError("--r must be positive"));
    }
    try {
      for (double r : crit_r) out << io::critical_json(r).dump() << '\n';
    } catch (const std::exception& e) {
      return numeric_failure(e);
    }
    return 0;
  }

  // sweep
  if (!hysteresis) {
    if (!(r_min > 0.0 && r_max > r_min && tol > 0.0)) {
      return usage_failure(UsageError("need 0 < r-min < r-max and tol > 0"));
    }
    try {
      const double rt = find_r_threshold(r_min, r_max, tol);
      const io::json j = {{"r_threshold", rt},
                          {"config", {{"r-min", r_min}, {"r-max", r_max}, {"tol", tol}}}};
      out << j.dump() << '\n';
    } catch (const std::exception& e) {
      return numeric_failure(e);
    }
    return 0;
  }

  ModelParams params;
  EtaSchedule schedule;
  IntegratorConfig config;
  try {
    params = swp.params();
    schedule = swp.eta_schedule();
    config = swp.integrator();
    if (grid < 16) throw UsageError("--grid must be at least 16");
  } catch (const std::exception& e) {
    return usage_failure(e);
  }
  try {
    const HysteresisReport rep = run_sweep({swp.z0, swp.theta0}, params, schedule, config, grid);
    io::json cfg = swp.to_json();
    cfg["grid"] = grid;
    std::ofstream file;
    detail::open_or(file, swp.out, out) << io::report_json(rep, cfg).dump(2) << '\n';
  } catch (const std::exception& e) {
    return numeric_failure(e);
  }
  return 0;
}

}  // namespace dimer::cli
