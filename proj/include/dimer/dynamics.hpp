#pragma once

// Damped two-mode equations of motion under a time-dependent eta(tau) and the
// Runge-Kutta integrators that produce trajectories.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "dimer/core.hpp"

namespace dimer {

struct Derivative {
  double dz = 0.0;
  double dtheta = 0.0;
};

/// Right-hand side of the damped flow. The damping term nu * theta' is
/// substituted explicitly with theta' = dH/dz.
inline Derivative vector_field(const PhaseState& s, double eta, const ModelParams& params) {
  const Gradient g = grad_hamiltonian(s, eta, params.r);
  Derivative d;
  d.dtheta = g.dH_dz;
  if (params.rhs_mode == RhsMode::hamiltonian) {
    // dE/dtau = -(omega/2) nu (dH/dz)^2 <= 0
    d.dz = -g.dH_dtheta + params.nu * g.dH_dz;
  } else {
    d.dz = -std::sqrt(1.0 - s.z * s.z) * std::sin(s.theta) - params.nu * g.dH_dz;
  }
  return d;
}

enum class Method { rk4_fixed, rk45_adaptive };

inline const char* to_string(Method m) {
  return m == Method::rk4_fixed ? "rk4_fixed" : "rk45_adaptive";
}

inline Method method_from_string(const std::string& s) {
  if (s == "rk4" || s == "rk4_fixed" || s == "rk4-fixed") return Method::rk4_fixed;
  if (s == "rk45" || s == "rk45_adaptive" || s == "rk45-adaptive") return Method::rk45_adaptive;
  throw DomainError("unknown integration method '" + s + "'");
}

struct IntegratorConfig {
  Method method = Method::rk45_adaptive;
  double dt = 1e-3;  // fixed step (rk4) or initial step (rk45)
  double abs_tol = 1e-9;
  double rel_tol = 1e-9;
  int sample_stride = 1;  // output samples per unit tau
  double min_step = 1e-12;
  double max_step = 0.1;
  std::size_t max_clamps = 100;

  void validate() const {
    if (!(dt > 0.0)) throw DomainError("dt must be positive");
    if (!(abs_tol > 0.0) || !(rel_tol > 0.0)) throw DomainError("tolerances must be positive");
    if (sample_stride < 1) throw DomainError("sample_stride must be at least 1");
    if (!(min_step > 0.0) || !(max_step >= min_step)) throw DomainError("invalid step bounds");
  }
};

struct Sample {
  double tau = 0.0;
  double eta = 0.0;
  double z = 0.0;
  double theta = 0.0;  // unwrapped
  double H = 0.0;
  double E = 0.0;

  friend bool operator==(const Sample&, const Sample&) = default;
};

struct Trajectory {
  std::vector<Sample> samples;
  ModelParams params;
  EtaSchedule schedule;
  std::size_t clamp_events = 0;
  std::size_t accepted_steps = 0;
  std::size_t rejected_steps = 0;
};

namespace rk {

using State = std::array<double, 2>;

inline State axpy(const State& y, double h, std::initializer_list<std::pair<double, const State*>> terms) {
  State out = y;
  for (const auto& [w, k] : terms) {
    out[0] += h * w * (*k)[0];
    out[1] += h * w * (*k)[1];
  }
  return out;
}

/// Classical fourth-order step. `f(t, y)` returns dy/dt.
template <class F>
State rk4_step(F&& f, double t, const State& y, double h) {
  const State k1 = f(t, y);
  const State k2 = f(t + 0.5 * h, axpy(y, h, {{0.5, &k1}}));
  const State k3 = f(t + 0.5 * h, axpy(y, h, {{0.5, &k2}}));
  const State k4 = f(t + h, axpy(y, h, {{1.0, &k3}}));
  return axpy(y, h, {{1.0 / 6.0, &k1}, {1.0 / 3.0, &k2}, {1.0 / 3.0, &k3}, {1.0 / 6.0, &k4}});
}

struct EmbeddedResult {
  State y;      // fifth-order solution
  State error;  // difference to the embedded fourth-order solution
};

/// Dormand-Prince 5(4) step.
template <class F>
EmbeddedResult dopri5_step(F&& f, double t, const State& y, double h) {
  constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
  constexpr double a21 = 1.0 / 5;
  constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
  constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
  constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                   a54 = -212.0 / 729;
  constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247,
                   a64 = 49.0 / 176, a65 = -5103.0 / 18656;
  constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192, b5 = -2187.0 / 6784,
                   b6 = 11.0 / 84;
  constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920,
                   e5 = -17253.0 / 339200, e6 = 22.0 / 525, e7 = -1.0 / 40;

  const State k1 = f(t, y);
  const State k2 = f(t + c2 * h, axpy(y, h, {{a21, &k1}}));
  const State k3 = f(t + c3 * h, axpy(y, h, {{a31, &k1}, {a32, &k2}}));
  const State k4 = f(t + c4 * h, axpy(y, h, {{a41, &k1}, {a42, &k2}, {a43, &k3}}));
  const State k5 = f(t + c5 * h, axpy(y, h, {{a51, &k1}, {a52, &k2}, {a53, &k3}, {a54, &k4}}));
  const State k6 =
      f(t + h, axpy(y, h, {{a61, &k1}, {a62, &k2}, {a63, &k3}, {a64, &k4}, {a65, &k5}}));
  const State y5 = axpy(y, h, {{b1, &k1}, {b3, &k3}, {b4, &k4}, {b5, &k5}, {b6, &k6}});
  const State k7 = f(t + h, y5);
  const State err = axpy(State{0.0, 0.0}, h,
                         {{e1, &k1}, {e3, &k3}, {e4, &k4}, {e5, &k5}, {e6, &k6}, {e7, &k7}});
  return {y5, err};
}

}  // namespace rk

namespace detail {

class Stepper {
public:
  Stepper(const ModelParams& params, const EtaSchedule& schedule, const IntegratorConfig& config)
      : params_(params), schedule_(schedule), config_(config) {}

  std::size_t clamp_events = 0;
  std::size_t accepted = 0;
  std::size_t rejected = 0;

  /// Advances `y` from `t0` to exactly `t1`.
  void advance(double t0, double t1, rk::State& y) {
    if (config_.method == Method::rk4_fixed) {
      const double span = t1 - t0;
      const auto n = static_cast<long>(std::max(1.0, std::ceil(span / config_.dt - 1e-9)));
      const double h = span / static_cast<double>(n);
      for (long i = 0; i < n; ++i) {
        const double ta = t0 + static_cast<double>(i) * h;
        const double tb = (i + 1 == n) ? t1 : t0 + static_cast<double>(i + 1) * h;
        fixed_substep(ta, tb, y);
      }
    } else {
      adaptive(t0, t1, y);
    }
  }

private:
  rk::State rhs(double t, const rk::State& y, bool clamp) const {
    PhaseState s{y[0], y[1]};
    if (clamp) s.z = std::clamp(s.z, -1.0 + kClampEps, 1.0 - kClampEps);
    const double tau = std::clamp(t, 0.0, schedule_.T);
    const Derivative d = vector_field(s, eval_schedule(schedule_, tau), params_);
    return {d.dz, d.dtheta};
  }

  static bool inside(const rk::State& y) {
    return std::abs(y[0]) <= 1.0 - kClampEps && std::isfinite(y[0]) && std::isfinite(y[1]);
  }

  void clamp_state(rk::State& y) {
    y[0] = std::clamp(y[0], -1.0 + kClampEps, 1.0 - kClampEps);
    ++clamp_events;
    if (clamp_events > config_.max_clamps) {
      throw SingularityError("trajectory clamped at the |z| = 1 boundary more than " +
                             std::to_string(config_.max_clamps) + " times");
    }
  }

  std::optional<rk::State> try_rk4(double t, const rk::State& y, double h, bool clamp) const {
    try {
      rk::State next = rk::rk4_step([&](double tt, const rk::State& yy) { return rhs(tt, yy, clamp); },
                                    t, y, h);
      if (!clamp && !inside(next)) return std::nullopt;
      return next;
    } catch (const SingularityError&) {
      return std::nullopt;
    }
  }

  void fixed_substep(double ta, double tb, rk::State& y) {
    const double h = tb - ta;
    if (auto next = try_rk4(ta, y, h, false)) {
      y = *next;
      ++accepted;
      return;
    }
    ++rejected;
    if (h * 0.5 < config_.min_step) {
      auto next = try_rk4(ta, y, h, true);
      if (!next) throw SingularityError("non-finite state while clamping");
      y = *next;
      clamp_state(y);
      ++accepted;
      return;
    }
    const double mid = ta + 0.5 * h;
    fixed_substep(ta, mid, y);
    fixed_substep(mid, tb, y);
  }

  void adaptive(double t0, double t1, rk::State& y) {
    double t = t0;
    double h = std::min(h_, config_.max_step);
    bool last_rejected = false;
    while (t < t1) {
      const bool final_step = (t + h >= t1);
      const double step = final_step ? t1 - t : h;
      std::optional<rk::EmbeddedResult> res;
      try {
        res = rk::dopri5_step([&](double tt, const rk::State& yy) { return rhs(tt, yy, false); },
                              t, y, step);
        if (!inside(res->y)) res.reset();
      } catch (const SingularityError&) {
        res.reset();
      }

      if (!res) {
        // Left the admissible region: halve, and clamp only at the minimum step.
        ++rejected;
        last_rejected = true;
        h = 0.5 * step;
        if (h < config_.min_step) {
          auto next = try_rk4(t, y, config_.min_step, true);
          if (!next) throw SingularityError("non-finite state while clamping");
          y = *next;
          clamp_state(y);
          t += config_.min_step;
          h = config_.min_step;
        }
        continue;
      }

      double err = 0.0;
      for (int i = 0; i < 2; ++i) {
        // theta is a phase: its magnitude grows without bound but its
        // precision requirement does not, so it gets an absolute scale.
        const double mag = i == 0 ? std::max(std::abs(y[0]), std::abs(res->y[0])) : 1.0;
        const double scale = config_.abs_tol + config_.rel_tol * mag;
        err = std::max(err, std::abs(res->error[i]) / scale);
      }
      err /= std::max(step, 1e-300);

      if (err <= 1.0) {
        t = final_step ? t1 : t + step;
        y = res->y;
        ++accepted;
        double factor = err == 0.0 ? 5.0 : 0.9 * std::pow(err, -0.25);
        factor = std::clamp(factor, 0.2, last_rejected ? 1.0 : 5.0);
        // A truncated final step says nothing about the preferred step size.
        if (!final_step || factor < 1.0) h = std::min(step * factor, config_.max_step);
        last_rejected = false;
      } else {
        ++rejected;
        last_rejected = true;
        h = step * std::max(0.2, 0.9 * std::pow(err, -0.25));
        if (h < config_.min_step) {
          throw StepFailureError("adaptive step fell below the minimum step " +
                                 std::to_string(config_.min_step) + " at tau = " +
                                 std::to_string(t));
        }
      }
    }
    h_ = h;
  }

  const ModelParams& params_;
  const EtaSchedule& schedule_;
  const IntegratorConfig& config_;
  double h_ = config_.dt;
};

}  // namespace detail

/// Integrates the damped flow over `tau_span` and records `sample_stride`
/// samples per unit tau, plus the endpoint. Each sample carries eta, H and E.
inline Trajectory integrate(const PhaseState& initial, const ModelParams& params,
                            const EtaSchedule& schedule, const IntegratorConfig& config,
                            std::pair<double, double> tau_span,
                            const PhysicalContext& ctx = PhysicalContext{}) {
  params.validate();
  schedule.validate();
  config.validate();
  ctx.validate();
  const auto [tau0, tau1] = tau_span;
  if (!(tau0 >= 0.0 && tau1 <= schedule.T && tau0 < tau1)) {
    throw DomainError("tau_span must satisfy 0 <= tau0 < tau1 <= T");
  }
  if (!(std::abs(initial.z) <= 1.0)) throw DomainError("initial |z| must not exceed 1");

  Trajectory traj;
  traj.params = params;
  traj.schedule = schedule;

  rk::State y{initial.z, initial.theta};
  if (std::abs(y[0]) > 1.0 - kClampEps) {
    y[0] = std::clamp(y[0], -1.0 + kClampEps, 1.0 - kClampEps);
    ++traj.clamp_events;
  }

  auto record = [&](double tau) {
    const double eta = eval_schedule(schedule, tau);
    const PhaseState s{y[0], y[1]};
    const double H = hamiltonian(s, eta, params.r);
    traj.samples.push_back({tau, eta, s.z, s.theta, H, energy_functional(H, ctx)});
  };

  detail::Stepper stepper(params, schedule, config);
  stepper.clamp_events = traj.clamp_events;

  const double spacing = 1.0 / static_cast<double>(config.sample_stride);
  const auto intervals = static_cast<long>(std::floor((tau1 - tau0) / spacing + 1e-9));
  traj.samples.reserve(static_cast<std::size_t>(intervals) + 2);
  record(tau0);
  double t = tau0;
  for (long k = 1; k <= intervals; ++k) {
    const double next = std::min(tau0 + static_cast<double>(k) * spacing, tau1);
    if (!(next > t)) continue;
    stepper.advance(t, next, y);
    t = next;
    record(t);
  }
  if (t < tau1) {
    stepper.advance(t, tau1, y);
    record(tau1);
  }

  traj.clamp_events = stepper.clamp_events;
  traj.accepted_steps = stepper.accepted;
  traj.rejected_steps = stepper.rejected;
  return traj;
}

/// Integrates over the whole schedule domain [0, T].
inline Trajectory integrate(const PhaseState& initial, const ModelParams& params,
                            const EtaSchedule& schedule, const IntegratorConfig& config,
                            const PhysicalContext& ctx = PhysicalContext{}) {
  return integrate(initial, params, schedule, config, {0.0, schedule.T}, ctx);
}

}  // namespace dimer
