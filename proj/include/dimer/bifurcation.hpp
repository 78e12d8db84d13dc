#pragma once

// Stationary states of the undamped flow, their stability, the branch
// diagram in eta, and the critical values eta*, eta+ and r_threshold.

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <cstddef>
#include <limits>
#include <numbers>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "dimer/core.hpp"
#include "dimer/dynamics.hpp"

namespace dimer {

/// Stationary phase: theta* = 0 or theta* = pi.
enum class PhaseBranch { zero, pi };

inline double theta_of(PhaseBranch b) { return b == PhaseBranch::zero ? 0.0 : std::numbers::pi; }
inline double cos_of(PhaseBranch b) { return b == PhaseBranch::zero ? 1.0 : -1.0; }

enum class Stability { stable, unstable, marginal };
enum class FixedPointKind { symmetric, asymmetric };
enum class PitchforkType { supercritical, subcritical };

inline const char* to_string(Stability s) {
  switch (s) {
    case Stability::stable: return "stable";
    case Stability::unstable: return "unstable";
    case Stability::marginal: return "marginal";
  }
  return "?";
}
inline const char* to_string(FixedPointKind k) {
  return k == FixedPointKind::symmetric ? "symmetric" : "asymmetric";
}
inline const char* to_string(PitchforkType t) {
  return t == PitchforkType::supercritical ? "supercritical" : "subcritical";
}

/// Rows (z', theta'), columns (d/dz, d/dtheta).
using Jacobian = std::array<std::array<double, 2>, 2>;
using Spectrum = std::array<std::complex<double>, 2>;

inline constexpr double kEigenEps = 1e-8;

struct FixedPoint {
  double z_star = 0.0;
  double theta_star = 0.0;
  PhaseBranch branch = PhaseBranch::zero;
  double eta = 0.0;
  Stability stability = Stability::marginal;
  Spectrum eigenvalues{};
  FixedPointKind kind = FixedPointKind::symmetric;
};

/// (3 + sqrt 13) / 2, where the cubic coefficient of the pitchfork normal form vanishes.
inline double r_threshold() { return 0.5 * (3.0 + std::sqrt(13.0)); }

/// G(z) = dH/dz at theta = theta*: zero exactly at the stationary imbalances.
inline double stationary_residual(double z, PhaseBranch branch, double eta, double r) {
  detail::require_power(r);
  detail::require_interior(z);
  return -2.0 * z * cos_of(branch) / std::sqrt(1.0 - z * z) -
         eta / std::pow(2.0, r) * detail::power_difference(z, r);
}

/// dG/dz.
inline double stationary_slope(double z, PhaseBranch branch, double eta, double r) {
  detail::require_power(r);
  detail::require_interior(z);
  const double w = 1.0 - z * z;
  return -2.0 * cos_of(branch) / (w * std::sqrt(w)) -
         eta / std::pow(2.0, r) * r * (std::pow(1.0 + z, r - 1.0) + std::pow(1.0 - z, r - 1.0));
}

/// d^2G/dz^2.
inline double stationary_curvature(double z, PhaseBranch branch, double eta, double r) {
  detail::require_power(r);
  detail::require_interior(z);
  const double w = 1.0 - z * z;
  return -6.0 * z * cos_of(branch) / (w * w * std::sqrt(w)) -
         eta / std::pow(2.0, r) * r * (r - 1.0) *
             (std::pow(1.0 + z, r - 2.0) - std::pow(1.0 - z, r - 2.0));
}

/// The coupling magnitude at which z (0 < z < 1) is an asymmetric
/// stationary imbalance: eta = -m on theta* = 0, eta = +m on theta* = pi.
inline double asymmetric_root_curve(double z, double r) {
  detail::require_power(r);
  detail::require_interior(z);
  return std::pow(2.0, r) * 2.0 * z / (std::sqrt(1.0 - z * z) * detail::power_difference(z, r));
}

inline Spectrum eigenvalues(const Jacobian& j) {
  const double tr = j[0][0] + j[1][1];
  const double det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
  const std::complex<double> disc = std::sqrt(std::complex<double>(0.25 * tr * tr - det, 0.0));
  const std::complex<double> half(0.5 * tr, 0.0);
  return {half + disc, half - disc};
}

/// Central finite-difference Jacobian (step 1e-6) of `vector_field` in the
/// configured rhs mode and damping.
inline Jacobian jacobian_at(const PhaseState& s, double eta, const ModelParams& params) {
  params.validate();
  const double room = 1.0 - kClampEps - std::abs(s.z);
  if (!(room > 0.0)) throw SingularityError("Jacobian requested at the |z| = 1 singularity");
  const double h = std::min(1e-6, 0.5 * room);
  auto f = [&](double z, double theta) { return vector_field({z, theta}, eta, params); };
  const Derivative zp = f(s.z + h, s.theta), zm = f(s.z - h, s.theta);
  const Derivative tp = f(s.z, s.theta + h), tm = f(s.z, s.theta - h);
  Jacobian j{};
  j[0][0] = (zp.dz - zm.dz) / (2.0 * h);
  j[0][1] = (tp.dz - tm.dz) / (2.0 * h);
  j[1][0] = (zp.dtheta - zm.dtheta) / (2.0 * h);
  j[1][1] = (tp.dtheta - tm.dtheta) / (2.0 * h);
  return j;
}

/// Linear classification. With nu = 0 a nonzero imaginary pair is a center
/// of the Hamiltonian flow and counts as stable.
inline Stability classify_stability(const Jacobian& j, double nu = 0.0) {
  const Spectrum ev = eigenvalues(j);
  const double det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
  const double re_max = std::max(ev[0].real(), ev[1].real());
  const double re_min = std::min(ev[0].real(), ev[1].real());
  if (re_max > kEigenEps) return Stability::unstable;
  if (std::abs(det) <= kEigenEps) return Stability::marginal;
  if (re_max < -kEigenEps) return Stability::stable;
  const bool imaginary_pair = std::abs(re_max) <= kEigenEps && std::abs(re_min) <= kEigenEps &&
                              std::abs(ev[0].imag()) > kEigenEps;
  if (imaginary_pair && nu == 0.0) return Stability::stable;
  return Stability::marginal;
}

namespace detail {

/// Bisection down to adjacent doubles; `flo` is G(lo).
template <class F>
double bisect(F&& g, double lo, double hi, double flo) {
  for (int it = 0; it < 400; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (!(mid > lo && mid < hi)) break;
    const double fm = g(mid);
    if (fm == 0.0) return mid;
    if ((fm < 0.0) == (flo < 0.0)) {
      lo = mid;
      flo = fm;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

/// Golden-section minimisation of |g| on [lo, hi].
template <class F>
double minimize_abs(F&& g, double lo, double hi) {
  const double inv_phi = 0.5 * (std::sqrt(5.0) - 1.0);
  double a = lo, b = hi;
  double c = b - inv_phi * (b - a), d = a + inv_phi * (b - a);
  double fc = std::abs(g(c)), fd = std::abs(g(d));
  for (int it = 0; it < 200 && (b - a) > 1e-15; ++it) {
    if (fc < fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - inv_phi * (b - a);
      fc = std::abs(g(c));
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + inv_phi * (b - a);
      fd = std::abs(g(d));
    }
  }
  return 0.5 * (a + b);
}

inline constexpr std::size_t kRootGrid = 10000;

/// Positive roots of G on one phase branch: sign changes on a uniform grid
/// over (0, 1 - eps], plus tangent roots found as local minima of |G|.
inline std::vector<double> positive_roots(PhaseBranch branch, double eta, double r,
                                          std::size_t grid = kRootGrid) {
  auto g = [&](double z) { return stationary_residual(z, branch, eta, r); };
  const double zmax = 1.0 - kClampEps;
  const double dz = zmax / static_cast<double>(grid);
  std::vector<double> zs(grid + 1), gs(grid + 1);
  for (std::size_t i = 1; i <= grid; ++i) {
    zs[i] = (i == grid) ? zmax : dz * static_cast<double>(i);
    gs[i] = g(zs[i]);
  }
  // G(0) = 0; its sign just above zero follows the slope at the origin.
  zs[0] = 1e-6 * dz;
  gs[0] = g(zs[0]);

  std::vector<double> roots;
  for (std::size_t i = 0; i < grid; ++i) {
    if (gs[i] == 0.0) {
      roots.push_back(zs[i]);
    } else if ((gs[i] < 0.0) != (gs[i + 1] < 0.0) && gs[i + 1] != 0.0) {
      roots.push_back(bisect(g, zs[i], zs[i + 1], gs[i]));
    }
  }
  if (gs[grid] == 0.0) roots.push_back(zs[grid]);

  for (std::size_t i = 1; i < grid; ++i) {
    const double a = std::abs(gs[i]);
    if (!(a < std::abs(gs[i - 1]) && a < std::abs(gs[i + 1]))) continue;
    if ((gs[i - 1] < 0.0) != (gs[i] < 0.0) || (gs[i] < 0.0) != (gs[i + 1] < 0.0)) continue;
    const double zt = minimize_abs(g, zs[i - 1], zs[i + 1]);
    if (std::abs(g(zt)) > 1e-10) continue;
    const bool seen = std::any_of(roots.begin(), roots.end(),
                                  [&](double z0) { return std::abs(z0 - zt) < 2.0 * dz; });
    if (!seen) roots.push_back(zt);
  }
  std::sort(roots.begin(), roots.end());
  return roots;
}

inline FixedPoint make_fixed_point(double z, PhaseBranch branch, double eta,
                                   const ModelParams& params) {
  FixedPoint fp;
  fp.z_star = z;
  fp.branch = branch;
  fp.theta_star = theta_of(branch);
  fp.eta = eta;
  fp.kind = (z == 0.0) ? FixedPointKind::symmetric : FixedPointKind::asymmetric;
  const Jacobian j = jacobian_at({z, fp.theta_star}, eta, params);
  fp.eigenvalues = eigenvalues(j);
  fp.stability = classify_stability(j, params.nu);
  return fp;
}

}  // namespace detail

/// All stationary states at coupling `eta`, both phase branches, ordered by
/// branch then z. Stability uses `params` (nu and rhs mode); `params.r` is
/// overridden by `r`.
inline std::vector<FixedPoint> find_fixed_points(double eta, double r, ModelParams params) {
  detail::require_power(r);
  params.r = r;
  std::vector<FixedPoint> out;
  for (PhaseBranch branch : {PhaseBranch::zero, PhaseBranch::pi}) {
    const std::vector<double> pos = detail::positive_roots(branch, eta, r);
    for (auto it = pos.rbegin(); it != pos.rend(); ++it) {
      out.push_back(detail::make_fixed_point(-*it, branch, eta, params));
    }
    out.push_back(detail::make_fixed_point(0.0, branch, eta, params));
    for (double z : pos) out.push_back(detail::make_fixed_point(z, branch, eta, params));
  }
  return out;
}

inline std::vector<FixedPoint> find_fixed_points(double eta, double r) {
  return find_fixed_points(eta, r, ModelParams{r, 0.0, RhsMode::hamiltonian});
}

/// Pitchfork coupling magnitude 2^r / r.
inline double find_eta_star(double r) {
  detail::require_power(r);
  return std::pow(2.0, r) / r;
}

/// The |eta| at which dG/dz at z = 0 (theta* = 0, attractive side) changes
/// sign, located by bisection on a central-difference slope.
inline double find_eta_star_numeric(double r) {
  detail::require_power(r);
  constexpr double h = 1e-6;
  auto slope = [&](double m) {
    return (stationary_residual(h, PhaseBranch::zero, -m, r) -
            stationary_residual(-h, PhaseBranch::zero, -m, r)) /
           (2.0 * h);
  };
  double lo = 0.0, hi = 1.0;
  const double slo = slope(lo);
  while (slope(hi) < 0.0) {
    lo = hi;
    hi *= 2.0;
    if (hi > 1e300) throw NoConvergenceError("no sign change of dG/dz at z = 0");
  }
  return detail::bisect(slope, lo, hi, slo);
}

namespace detail {

struct CurveMinimum {
  double z = 0.0;
  double m = std::numeric_limits<double>::infinity();
};

/// Minimum of the asymmetric root curve on a log-spaced grid z in [1e-7, 1).
inline CurveMinimum scan_root_curve(double r, std::size_t n = 4000) {
  CurveMinimum best;
  for (std::size_t k = 0; k < n; ++k) {
    double z = std::pow(10.0, -7.0 + 7.0 * static_cast<double>(k) / static_cast<double>(n - 1));
    z = std::min(z, 1.0 - 1e-6);
    const double m = asymmetric_root_curve(z, r);
    if (m < best.m) best = {z, m};
  }
  return best;
}

// Relative margin below eta* that separates a real dip of the root curve
// from rounding noise in its evaluation.
inline constexpr double kDipMargin = 2e-14;

}  // namespace detail

/// Saddle-node coupling magnitude eta+, present only when the pitchfork is
/// subcritical. Solves G = 0, dG/dz = 0 (z != 0, theta* = 0) by damped
/// Newton from the minimum of the scanned root curve.
inline std::optional<double> find_eta_plus(double r) {
  detail::require_power(r);
  const double eta_star = find_eta_star(r);
  const detail::CurveMinimum seed = detail::scan_root_curve(r);
  if (!(seed.m < eta_star * (1.0 - detail::kDipMargin))) return std::nullopt;

  const PhaseBranch b = PhaseBranch::zero;
  double z = seed.z;
  double eta = -seed.m;
  auto residual = [&](double zz, double ee) {
    return std::array<double, 2>{stationary_residual(zz, b, ee, r),
                                 stationary_slope(zz, b, ee, r)};
  };
  auto norm = [](const std::array<double, 2>& f) { return std::hypot(f[0], f[1]); };
  std::array<double, 2> f = residual(z, eta);
  for (int it = 0; it < 100 && norm(f) > 1e-13; ++it) {
    const double p = std::pow(2.0, r);
    const double dG_deta = -detail::power_difference(z, r) / p;
    const double dGz_deta =
        -r * (std::pow(1.0 + z, r - 1.0) + std::pow(1.0 - z, r - 1.0)) / p;
    const double j00 = f[1], j01 = dG_deta;
    const double j10 = stationary_curvature(z, b, eta, r), j11 = dGz_deta;
    const double det = j00 * j11 - j01 * j10;
    if (det == 0.0 || !std::isfinite(det)) break;
    const double dz = (f[0] * j11 - j01 * f[1]) / det;
    const double de = (j00 * f[1] - j10 * f[0]) / det;
    double lambda = 1.0;
    bool improved = false;
    for (int ls = 0; ls < 40; ++ls) {
      const double zn = z - lambda * dz, en = eta - lambda * de;
      if (zn > 0.0 && zn < 1.0 - kClampEps) {
        const auto fn = residual(zn, en);
        if (norm(fn) < norm(f)) {
          z = zn;
          eta = en;
          f = fn;
          improved = true;
          break;
        }
      }
      lambda *= 0.5;
    }
    if (!improved) break;
  }
  if (!(std::abs(f[0]) < 1e-10 && std::abs(f[1]) < 1e-10) || !(z > 0.1 * seed.z)) {
    throw NoConvergenceError("saddle-node Newton iteration stalled for r = " + std::to_string(r));
  }
  const double eta_plus = -eta;
  if (!(eta_plus > 0.0 && eta_plus < eta_star)) {
    throw NoConvergenceError("saddle-node solution outside (0, eta*) for r = " + std::to_string(r));
  }
  return eta_plus;
}

/// 1 - (r-1)(r-2)/3; negative exactly when the pitchfork is subcritical.
/// The series of G at z = 0 on eta = -eta* is -(this) z^3 + O(z^5).
inline double pitchfork_cubic_coefficient(double r) { return 1.0 - (r - 1.0) * (r - 2.0) / 3.0; }

/// Behavioural classification: subcritical iff asymmetric stationary states
/// exist at some |eta| below eta* (attractive side, theta* = 0).
inline PitchforkType classify_pitchfork(double r) {
  detail::require_power(r);
  if (std::abs(r - r_threshold()) < 1e-6) {
    throw ThresholdProximityError("r = " + std::to_string(r) +
                                  " is within 1e-6 of the threshold power");
  }
  const double eta_star = find_eta_star(r);
  const double probe = eta_star - 1e-3 * eta_star;
  if (!detail::positive_roots(PhaseBranch::zero, -probe, r).empty()) {
    return PitchforkType::subcritical;
  }
  // Near the threshold the fold sits closer than the probe to eta*.
  const detail::CurveMinimum dip = detail::scan_root_curve(r);
  return dip.m < eta_star * (1.0 - detail::kDipMargin) ? PitchforkType::subcritical
                                                       : PitchforkType::supercritical;
}

/// Bisection on r with classify_pitchfork for the supercritical/subcritical boundary.
inline double find_r_threshold(double r_lo, double r_hi, double tol) {
  if (!(r_lo > 0.0 && r_hi > r_lo && tol > 0.0)) throw DomainError("need 0 < r_lo < r_hi, tol > 0");
  if (classify_pitchfork(r_lo) != PitchforkType::supercritical ||
      classify_pitchfork(r_hi) != PitchforkType::subcritical) {
    throw DomainError("[r_lo, r_hi] does not bracket the supercritical/subcritical boundary");
  }
  while (r_hi - r_lo > tol) {
    const double mid = 0.5 * (r_lo + r_hi);
    PitchforkType t;
    try {
      t = classify_pitchfork(mid);
    } catch (const ThresholdProximityError&) {
      return mid;
    }
    (t == PitchforkType::subcritical ? r_hi : r_lo) = mid;
  }
  return 0.5 * (r_lo + r_hi);
}

struct BranchPoint {
  double eta = 0.0;
  double z_star = 0.0;
  Stability stability = Stability::marginal;
};

struct Branch {
  FixedPointKind kind = FixedPointKind::symmetric;
  double theta_star = 0.0;
  std::vector<BranchPoint> points;
};

struct BifurcationDiagram {
  double r = 1.0;
  std::vector<Branch> branches;
  double eta_star = 0.0;
  std::optional<double> eta_plus;
  PitchforkType classification = PitchforkType::supercritical;
};

enum class CouplingSign { attractive, repulsive };

/// Fixed points on an |eta| grid of `steps` points, stitched into branches by
/// nearest predicted z. A branch stops when no point lies within five grid
/// spacings (scaled by the branch's local |dz/deta|) of its prediction.
inline BifurcationDiagram trace_branches(double r, std::pair<double, double> abs_eta_range,
                                         int steps,
                                         CouplingSign sign = CouplingSign::attractive) {
  detail::require_power(r);
  if (steps < 2) throw DomainError("steps must be at least 2");
  const auto [lo, hi] = abs_eta_range;
  if (!(lo >= 0.0 && hi > lo)) throw DomainError("need 0 <= eta_min < eta_max");

  BifurcationDiagram diagram;
  diagram.r = r;
  diagram.eta_star = find_eta_star(r);
  diagram.classification = classify_pitchfork(r);
  diagram.eta_plus = find_eta_plus(r);

  const double spacing = (hi - lo) / static_cast<double>(steps - 1);
  const double s = sign == CouplingSign::attractive ? -1.0 : 1.0;

  std::vector<std::size_t> open;  // indices of branches still being extended
  for (int k = 0; k < steps; ++k) {
    const double m = (k + 1 == steps) ? hi : lo + spacing * static_cast<double>(k);
    const double eta = s * m;
    const std::vector<FixedPoint> fps = find_fixed_points(eta, r);

    struct Candidate {
      double cost;
      std::size_t branch;
      std::size_t point;
    };
    std::vector<Candidate> candidates;
    for (std::size_t bi : open) {
      const Branch& br = diagram.branches[bi];
      const BranchPoint& last = br.points.back();
      double predicted = last.z_star;
      double slope = 0.0;
      if (br.points.size() >= 2) {
        const BranchPoint& prev = br.points[br.points.size() - 2];
        slope = (last.z_star - prev.z_star) / (std::abs(last.eta) - std::abs(prev.eta));
        predicted += slope * (m - std::abs(last.eta));
      }
      // dz/d|eta| from the implicit function theorem; large next to a birth point.
      const PhaseBranch pb = br.theta_star == 0.0 ? PhaseBranch::zero : PhaseBranch::pi;
      const double gz = stationary_slope(last.z_star, pb, last.eta, r);
      const double implicit = std::abs(detail::power_difference(last.z_star, r) /
                                       (std::pow(2.0, r) * gz));
      const double steepness = std::isfinite(implicit) ? std::max(std::abs(slope), implicit) : 1.0 / spacing;
      const double tol = 5.0 * spacing * std::max(1.0, steepness);
      for (std::size_t pi = 0; pi < fps.size(); ++pi) {
        const FixedPoint& fp = fps[pi];
        if (fp.kind != br.kind || fp.theta_star != br.theta_star) continue;
        if (fp.kind == FixedPointKind::asymmetric && (fp.z_star > 0.0) != (last.z_star > 0.0))
          continue;
        const double d = std::abs(fp.z_star - predicted);
        if (d <= tol) candidates.push_back({d, bi, pi});
      }
    }
    std::sort(candidates.begin(), candidates.end(), [](const Candidate& a, const Candidate& b) {
      if (a.cost != b.cost) return a.cost < b.cost;
      if (a.branch != b.branch) return a.branch < b.branch;
      return a.point < b.point;
    });

    std::vector<bool> point_used(fps.size(), false);
    std::vector<std::size_t> next_open;
    std::vector<bool> branch_used(diagram.branches.size(), false);
    for (const Candidate& c : candidates) {
      if (point_used[c.point] || branch_used[c.branch]) continue;
      point_used[c.point] = true;
      branch_used[c.branch] = true;
      const FixedPoint& fp = fps[c.point];
      diagram.branches[c.branch].points.push_back({eta, fp.z_star, fp.stability});
      next_open.push_back(c.branch);
    }
    for (std::size_t pi = 0; pi < fps.size(); ++pi) {
      if (point_used[pi]) continue;
      const FixedPoint& fp = fps[pi];
      Branch br;
      br.kind = fp.kind;
      br.theta_star = fp.theta_star;
      br.points.push_back({eta, fp.z_star, fp.stability});
      diagram.branches.push_back(std::move(br));
      next_open.push_back(diagram.branches.size() - 1);
    }
    std::sort(next_open.begin(), next_open.end());
    open = std::move(next_open);
  }
  return diagram;
}

}  // namespace dimer
