#pragma once

// Ramp-up / ramp-down protocol: one integration over a triangular eta(tau),
// forward and backward passes binned on a common |eta| grid, and the loop
// measured between them.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "dimer/bifurcation.hpp"
#include "dimer/core.hpp"
#include "dimer/dynamics.hpp"

namespace dimer {

/// Loop area (in z * |eta| units) above which hysteresis is reported.
inline constexpr double kAreaThreshold = 0.05;
/// Forward/backward |z| gap that marks a bin as part of the window.
inline constexpr double kZGapThreshold = 0.1;

struct TracePoint {
  double abs_eta = 0.0;
  double z_avg = 0.0;  // mean |z| of the samples in the bin
};

struct CriticalReference {
  double eta_star = 0.0;
  std::optional<double> eta_plus;
};

struct HysteresisReport {
  double r = 0.0;
  double nu = 0.0;
  std::vector<TracePoint> forward_trace;
  std::vector<TracePoint> backward_trace;
  double loop_area = 0.0;
  bool detected = false;
  std::optional<std::pair<double, double>> window;
  CriticalReference reference;
  PhaseState final_state;
  std::size_t clamp_events = 0;
};

/// (eta+, eta*) for a subcritical pitchfork, nothing for a supercritical one.
inline std::optional<std::pair<double, double>> predict_window(double r) {
  if (classify_pitchfork(r) == PitchforkType::supercritical) return std::nullopt;
  const std::optional<double> plus = find_eta_plus(r);
  if (!plus) return std::nullopt;
  return std::pair{*plus, find_eta_star(r)};
}

/// Length of the intersection of two intervals divided by the length of `reference`.
inline double window_overlap_fraction(std::pair<double, double> measured,
                                      std::pair<double, double> reference) {
  const double len = reference.second - reference.first;
  if (!(len > 0.0)) return 0.0;
  const double lo = std::max(measured.first, reference.first);
  const double hi = std::min(measured.second, reference.second);
  return std::max(0.0, hi - lo) / len;
}

namespace detail {

inline double trapezoid_gap(const std::vector<TracePoint>& fwd, const std::vector<TracePoint>& bwd) {
  double area = 0.0;
  for (std::size_t i = 1; i < fwd.size(); ++i) {
    const double a = std::abs(fwd[i - 1].z_avg - bwd[i - 1].z_avg);
    const double b = std::abs(fwd[i].z_avg - bwd[i].z_avg);
    area += 0.5 * (a + b) * (fwd[i].abs_eta - fwd[i - 1].abs_eta);
  }
  return area;
}

/// Longest run (at least two bins) where the gap exceeds the threshold.
inline std::optional<std::pair<double, double>> gap_window(const std::vector<TracePoint>& fwd,
                                                           const std::vector<TracePoint>& bwd) {
  std::size_t best_begin = 0, best_len = 0;
  std::size_t run_begin = 0, run_len = 0;
  for (std::size_t i = 0; i < fwd.size(); ++i) {
    if (std::abs(fwd[i].z_avg - bwd[i].z_avg) > kZGapThreshold) {
      if (run_len == 0) run_begin = i;
      ++run_len;
      if (run_len > best_len) {
        best_len = run_len;
        best_begin = run_begin;
      }
    } else {
      run_len = 0;
    }
  }
  if (best_len < 2) return std::nullopt;
  const double lo = fwd[best_begin].abs_eta;
  const double hi = fwd[best_begin + best_len - 1].abs_eta;
  if (!(hi > lo)) return std::nullopt;
  return std::pair{lo, hi};
}

}  // namespace detail

/// Integrates the whole ramp, bins |z| by |eta| separately for tau < T/2
/// (forward) and tau > T/2 (backward), and measures the loop between them.
inline HysteresisReport run_sweep(const PhaseState& initial, const ModelParams& params,
                                  const EtaSchedule& schedule, const IntegratorConfig& config,
                                  int grid_size) {
  if (schedule.kind == ScheduleKind::piecewise_linear) {
    throw DomainError("hysteresis sweep needs a triangular (or constant) schedule");
  }
  if (grid_size < 16) throw DomainError("grid_size must be at least 16");
  const auto bins = static_cast<std::size_t>(grid_size);

  const Trajectory traj = integrate(initial, params, schedule, config);

  HysteresisReport rep;
  rep.r = params.r;
  rep.nu = params.nu;
  rep.reference.eta_star = find_eta_star(params.r);
  rep.reference.eta_plus = find_eta_plus(params.r);
  rep.final_state = {traj.samples.back().z, traj.samples.back().theta};
  rep.clamp_events = traj.clamp_events;

  const double a = std::abs(schedule.eta_start);
  const double b = std::abs(schedule.kind == ScheduleKind::constant ? schedule.eta_start
                                                                    : schedule.eta_peak);
  const double lo = std::min(a, b), hi = std::max(a, b);
  const double half = 0.5 * schedule.T;

  std::vector<double> sum_f(bins, 0.0), sum_b(bins, 0.0);
  std::vector<std::size_t> n_f(bins, 0), n_b(bins, 0);
  const bool degenerate = !(hi > lo);
  for (const Sample& s : traj.samples) {
    if (s.tau == half) continue;
    std::size_t idx = 0;
    if (!degenerate) {
      const double u = (std::abs(s.eta) - lo) / (hi - lo) * static_cast<double>(bins);
      idx = static_cast<std::size_t>(std::clamp(std::floor(u), 0.0, static_cast<double>(bins - 1)));
    }
    if (s.tau < half) {
      sum_f[idx] += std::abs(s.z);
      ++n_f[idx];
    } else {
      sum_b[idx] += std::abs(s.z);
      ++n_b[idx];
    }
  }

  const double width = (hi - lo) / static_cast<double>(bins);
  for (std::size_t i = 0; i < bins; ++i) {
    const std::size_t src = degenerate ? 0 : i;
    if (n_f[src] == 0 || n_b[src] == 0) {
      throw GridCoverageError("hysteresis bin " + std::to_string(i) +
                              " received no samples; lower grid_size or raise sample_stride");
    }
    const double centre = lo + (static_cast<double>(i) + 0.5) * width;
    rep.forward_trace.push_back({centre, sum_f[src] / static_cast<double>(n_f[src])});
    rep.backward_trace.push_back({centre, sum_b[src] / static_cast<double>(n_b[src])});
  }

  rep.loop_area = detail::trapezoid_gap(rep.forward_trace, rep.backward_trace);
  rep.detected = rep.loop_area > kAreaThreshold;
  rep.window = detail::gap_window(rep.forward_trace, rep.backward_trace);
  return rep;
}

}  // namespace dimer
