#pragma once

// Two-mode model with (r+1)-body power-law nonlinearity: domain types, the
// (z, theta) Hamiltonian and its gradient, the energy functional and the
// eta(tau) schedules.

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace dimer {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Argument outside the domain of an operation.
class DomainError : public Error {
public:
  using Error::Error;
};

/// Evaluation too close to the |z| = 1 boundary where dH/dz diverges.
class SingularityError : public Error {
public:
  using Error::Error;
};

/// Adaptive step control fell below the minimum step.
class StepFailureError : public Error {
public:
  using Error::Error;
};

/// Iterative solver did not converge.
class NoConvergenceError : public Error {
public:
  using Error::Error;
};

/// A hysteresis bin received no samples.
class GridCoverageError : public Error {
public:
  using Error::Error;
};

/// Pitchfork classification requested too close to the threshold power.
class ThresholdProximityError : public Error {
public:
  using Error::Error;
};

/// Dynamics and gradients are restricted to |z| <= 1 - kClampEps.
inline constexpr double kClampEps = 1e-9;

/// Right-hand side convention of the damped equations of motion.
///
/// `hamiltonian` keeps theta' = dH/dz, z' = -dH/dtheta for nu = 0 (so H is
/// conserved) and adds damping with the sign that drives E = Omega - omega H / 2
/// downhill. `as_printed` uses the literal z' = -sqrt(1-z^2) sin(theta) - nu theta'.
enum class RhsMode { hamiltonian, as_printed };

inline const char* to_string(RhsMode mode) {
  return mode == RhsMode::hamiltonian ? "hamiltonian" : "as_printed";
}

inline RhsMode rhs_mode_from_string(const std::string& s) {
  if (s == "hamiltonian") return RhsMode::hamiltonian;
  if (s == "as_printed" || s == "as-printed") return RhsMode::as_printed;
  throw DomainError("unknown rhs mode '" + s + "'");
}

struct ModelParams {
  double r = 1.0;   // nonlinearity power, any positive real
  double nu = 0.0;  // damping constant
  RhsMode rhs_mode = RhsMode::hamiltonian;

  void validate() const {
    if (!(r > 0.0) || !std::isfinite(r)) throw DomainError("r must be a finite positive number");
    if (!(nu >= 0.0) || !std::isfinite(nu)) throw DomainError("nu must be finite and non-negative");
  }
};

/// Population imbalance and relative phase. theta is kept unwrapped.
struct PhaseState {
  double z = 0.0;
  double theta = 0.0;

  friend bool operator==(const PhaseState&, const PhaseState&) = default;
};

/// Scalars of the underlying double-well problem that enter the reduced model.
struct PhysicalContext {
  double omega = 1.0;  // half splitting of the linear doublet
  double Omega = 0.0;  // mean of the doublet levels
  double c = 1.0;      // single-well overlap constant
  double g = 0.0;      // (r+1)-body coupling factor

  void validate() const {
    if (!(omega > 0.0)) throw DomainError("omega must be positive");
  }
};

/// Wraps an angle to (-pi, pi].
inline double wrap_phase(double theta) {
  constexpr double two_pi = 2.0 * std::numbers::pi;
  double w = std::remainder(theta, two_pi);
  if (w <= -std::numbers::pi) w += two_pi;
  return w;
}

namespace detail {

inline void require_power(double r) {
  if (!(r > 0.0) || !std::isfinite(r)) throw DomainError("r must be a finite positive number");
}

inline void require_interior(double z) {
  if (!(std::abs(z) <= 1.0 - kClampEps)) {
    throw SingularityError("|z| = " + std::to_string(std::abs(z)) +
                           " is within the clamp distance of the |z| = 1 singularity");
  }
}

/// (1+z)^r - (1-z)^r without cancellation for small |z|. Odd in z.
inline double power_difference(double z, double r) {
  if (z == 0.0) return 0.0;
  const double a = std::abs(z);
  const double d = std::pow(1.0 - a, r) * std::expm1(2.0 * r * std::atanh(a));
  return z < 0.0 ? -d : d;
}

}  // namespace detail

/// H = 2 sqrt(1-z^2) cos(theta) - eta [(1+z)^(r+1) + (1-z)^(r+1)] / (2^r (r+1))
inline double hamiltonian(const PhaseState& s, double eta, double r) {
  detail::require_power(r);
  if (!(std::abs(s.z) <= 1.0)) throw DomainError("|z| must not exceed 1");
  const double z = s.z;
  const double kinetic = 2.0 * std::sqrt(1.0 - z * z) * std::cos(s.theta);
  const double nonlinear =
      (std::pow(1.0 + z, r + 1.0) + std::pow(1.0 - z, r + 1.0)) / (std::pow(2.0, r) * (r + 1.0));
  return kinetic - eta * nonlinear;
}

struct Gradient {
  double dH_dz = 0.0;
  double dH_dtheta = 0.0;
};

inline Gradient grad_hamiltonian(const PhaseState& s, double eta, double r) {
  detail::require_power(r);
  detail::require_interior(s.z);
  const double z = s.z;
  const double root = std::sqrt(1.0 - z * z);
  Gradient g;
  g.dH_dz = -2.0 * z * std::cos(s.theta) / root -
            eta / std::pow(2.0, r) * detail::power_difference(z, r);
  g.dH_dtheta = -2.0 * root * std::sin(s.theta);
  return g;
}

/// E = Omega - omega H / 2
inline double energy_functional(double H, const PhysicalContext& ctx) {
  return ctx.Omega - 0.5 * ctx.omega * H;
}

/// eta = c g / omega
inline double effective_eta(const PhysicalContext& ctx) {
  if (!(ctx.omega > 0.0)) throw DomainError("omega must be positive");
  return ctx.c * ctx.g / ctx.omega;
}

struct Amplitudes {
  double p = 0.0;  // |a_R|
  double q = 0.0;  // |a_L|
};

inline Amplitudes amplitudes_from_state(const PhaseState& s) {
  const double z = std::clamp(s.z, -1.0, 1.0);
  return {std::sqrt(0.5 * (1.0 + z)), std::sqrt(0.5 * (1.0 - z))};
}

enum class ScheduleKind { constant, triangular, piecewise_linear };

inline const char* to_string(ScheduleKind kind) {
  switch (kind) {
    case ScheduleKind::constant: return "constant";
    case ScheduleKind::triangular: return "triangular";
    case ScheduleKind::piecewise_linear: return "piecewise_linear";
  }
  return "?";
}

inline ScheduleKind schedule_kind_from_string(const std::string& s) {
  if (s == "constant") return ScheduleKind::constant;
  if (s == "triangular") return ScheduleKind::triangular;
  if (s == "piecewise_linear" || s == "piecewise-linear") return ScheduleKind::piecewise_linear;
  throw DomainError("unknown schedule kind '" + s + "'");
}

struct Knot {
  double tau = 0.0;
  double eta = 0.0;
};

/// Time-dependent effective coupling eta(tau) on [0, T].
struct EtaSchedule {
  ScheduleKind kind = ScheduleKind::constant;
  double eta_start = 0.0;
  double eta_peak = 0.0;
  double T = 1.0;
  std::vector<Knot> knots;

  static EtaSchedule constant(double eta, double T) {
    EtaSchedule s{ScheduleKind::constant, eta, eta, T, {}};
    s.validate();
    return s;
  }

  /// Linear ramp eta_start -> eta_peak on [0, T/2] and back on [T/2, T].
  static EtaSchedule triangular(double eta_start, double eta_peak, double T) {
    EtaSchedule s{ScheduleKind::triangular, eta_start, eta_peak, T, {}};
    s.validate();
    return s;
  }

  static EtaSchedule piecewise_linear(std::vector<Knot> knots) {
    if (knots.size() < 2) throw DomainError("piecewise-linear schedule needs at least two knots");
    EtaSchedule s{ScheduleKind::piecewise_linear, knots.front().eta, knots.front().eta,
                  knots.back().tau, std::move(knots)};
    s.validate();
    return s;
  }

  void validate() const {
    if (!(T > 0.0) || !std::isfinite(T)) throw DomainError("schedule duration T must be positive");
    if (kind == ScheduleKind::piecewise_linear) {
      if (knots.size() < 2) throw DomainError("piecewise-linear schedule needs at least two knots");
      if (knots.front().tau != 0.0 || knots.back().tau != T)
        throw DomainError("piecewise-linear knots must span [0, T]");
      for (std::size_t i = 1; i < knots.size(); ++i) {
        if (!(knots[i].tau > knots[i - 1].tau))
          throw DomainError("piecewise-linear knots must be strictly increasing in tau");
      }
    }
  }
};

inline double eval_schedule(const EtaSchedule& s, double tau) {
  if (!(tau >= 0.0 && tau <= s.T)) {
    throw DomainError("tau = " + std::to_string(tau) + " outside schedule domain [0, " +
                      std::to_string(s.T) + "]");
  }
  switch (s.kind) {
    case ScheduleKind::constant:
      return s.eta_start;
    case ScheduleKind::triangular:
      return s.eta_start + (s.eta_peak - s.eta_start) * (1.0 - std::abs(2.0 * tau / s.T - 1.0));
    case ScheduleKind::piecewise_linear: {
      const auto& k = s.knots;
      auto it = std::upper_bound(k.begin(), k.end(), tau,
                                 [](double t, const Knot& knot) { return t < knot.tau; });
      if (it == k.end()) return k.back().eta;
      const Knot& hi = *it;
      const Knot& lo = *(it - 1);
      const double w = (tau - lo.tau) / (hi.tau - lo.tau);
      return lo.eta + w * (hi.eta - lo.eta);
    }
  }
  return s.eta_start;
}

}  // namespace dimer
