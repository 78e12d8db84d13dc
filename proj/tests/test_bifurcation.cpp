#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include <gtest/gtest.h>

#include "dimer/bifurcation.hpp"
#include "oracles.hpp"

using namespace dimer;

namespace {

constexpr double pi = std::numbers::pi;

std::vector<FixedPoint> asymmetric(const std::vector<FixedPoint>& fps, PhaseBranch b) {
  std::vector<FixedPoint> out;
  for (const FixedPoint& fp : fps) {
    if (fp.kind == FixedPointKind::asymmetric && fp.branch == b) out.push_back(fp);
  }
  return out;
}

}  // namespace

TEST(Residual, Examples) {
  for (double r : {0.7, 1.0, 5.0}) {
    EXPECT_EQ(stationary_residual(0.0, PhaseBranch::zero, -3.0, r), 0.0);
    EXPECT_EQ(stationary_residual(0.0, PhaseBranch::pi, 2.0, r), 0.0);
  }
  EXPECT_NEAR(stationary_residual(0.5, PhaseBranch::zero, 0.0, 1.0), -1.0 / std::sqrt(0.75), 1e-14);
  EXPECT_NEAR(stationary_residual(0.5, PhaseBranch::zero, 0.0, 1.0), -1.1547, 1e-4);
  // |eta| = 3 > 2 gives a nontrivial root
  EXPECT_EQ(oracle::positive_roots(1.0, -3.0, 1.0, 10000).size(), 1u);
}

TEST(Residual, MatchesOracleAndDerivatives) {
  const double h = 1e-6;
  for (double r : {0.8, 2.5, 5.0}) {
    for (double z : {-0.9, -0.3, 0.05, 0.6}) {
      for (PhaseBranch b : {PhaseBranch::zero, PhaseBranch::pi}) {
        const double c = cos_of(b);
        EXPECT_NEAR(stationary_residual(z, b, -2.0, r), oracle::residual(z, c, -2.0, r), 1e-12);
        const double fd1 = (oracle::residual(z + h, c, -2.0, r) - oracle::residual(z - h, c, -2.0, r)) / (2 * h);
        EXPECT_NEAR(stationary_slope(z, b, -2.0, r), fd1, 1e-6 * std::max(1.0, std::abs(fd1)));
        const double h2 = 1e-4;
        const double fd2 = (oracle::residual(z + h2, c, -2.0, r) - 2 * oracle::residual(z, c, -2.0, r) +
                            oracle::residual(z - h2, c, -2.0, r)) / (h2 * h2);
        EXPECT_NEAR(stationary_curvature(z, b, -2.0, r), fd2, 1e-4 * std::max(1.0, std::abs(fd2)));
      }
    }
  }
}

TEST(FixedPoints, BelowPitchforkOnlySymmetric) {
  const auto fps = find_fixed_points(-1.0, 1.0);
  EXPECT_TRUE(asymmetric(fps, PhaseBranch::zero).empty());
  int symmetric = 0;
  for (const FixedPoint& fp : fps) {
    if (fp.kind == FixedPointKind::symmetric) {
      ++symmetric;
      EXPECT_EQ(fp.z_star, 0.0);
    }
  }
  EXPECT_EQ(symmetric, 2);
}

TEST(FixedPoints, AbovePitchforkR1) {
  const auto fps = find_fixed_points(-3.0, 1.0);
  const auto asym = asymmetric(fps, PhaseBranch::zero);
  ASSERT_EQ(asym.size(), 2u);
  for (const FixedPoint& fp : asym) {
    EXPECT_NEAR(std::abs(fp.z_star), std::sqrt(5.0) / 3.0, 1e-10);
    EXPECT_EQ(fp.stability, Stability::stable);
  }
  for (const FixedPoint& fp : fps) {
    if (fp.kind == FixedPointKind::symmetric && fp.branch == PhaseBranch::zero) {
      EXPECT_EQ(fp.stability, Stability::unstable);
    }
  }
}

TEST(FixedPoints, InsideHysteresisWindowR5) {
  const auto fps = find_fixed_points(-5.0, 5.0);
  const auto asym = asymmetric(fps, PhaseBranch::zero);
  ASSERT_EQ(asym.size(), 4u);
  int stable = 0, unstable = 0;
  for (const FixedPoint& fp : asym) {
    if (fp.stability == Stability::stable) {
      ++stable;
      EXPECT_NEAR(std::abs(fp.z_star), 0.87577, 1e-4);
    } else if (fp.stability == Stability::unstable) {
      ++unstable;
      EXPECT_NEAR(std::abs(fp.z_star), 0.46871, 1e-4);
    }
  }
  EXPECT_EQ(stable, 2);
  EXPECT_EQ(unstable, 2);
  for (const FixedPoint& fp : fps) {
    if (fp.kind == FixedPointKind::symmetric && fp.branch == PhaseBranch::zero) {
      EXPECT_EQ(fp.stability, Stability::stable);
    }
  }
}

TEST(FixedPoints, InvariantsOnRandomDraws) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> ur(0.5, 8.0), ue(-12.0, 4.0);
  for (int i = 0; i < 40; ++i) {
    const double r = ur(rng), eta = ue(rng);
    const auto fps = find_fixed_points(eta, r);
    for (const FixedPoint& fp : fps) {
      EXPECT_LT(std::abs(stationary_residual(fp.z_star, fp.branch, eta, r)), 1e-10);
      EXPECT_EQ(fp.kind == FixedPointKind::symmetric, fp.z_star == 0.0);
      EXPECT_EQ(fp.theta_star, theta_of(fp.branch));
      const Derivative d = vector_field({fp.z_star, fp.theta_star}, eta, {r, 0.0});
      EXPECT_LT(std::hypot(d.dz, d.dtheta), 1e-9);
      if (fp.kind == FixedPointKind::asymmetric) {
        const auto mirror = std::find_if(fps.begin(), fps.end(), [&](const FixedPoint& o) {
          return o.branch == fp.branch && o.z_star == -fp.z_star;
        });
        ASSERT_NE(mirror, fps.end());
        EXPECT_EQ(mirror->stability, fp.stability);
        for (int k = 0; k < 2; ++k) {
          EXPECT_NEAR(std::abs(mirror->eigenvalues[k] - fp.eigenvalues[k]), 0.0,
                      1e-6 * std::max(1.0, std::abs(fp.eigenvalues[k])));
        }
      }
    }
  }
}

TEST(FixedPoints, OracleEquivalence) {
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> ur(0.5, 8.0), ue(-12.0, 4.0);
  for (int i = 0; i < 50; ++i) {
    const double r = ur(rng), eta = ue(rng);
    const auto fps = find_fixed_points(eta, r);
    for (PhaseBranch b : {PhaseBranch::zero, PhaseBranch::pi}) {
      std::vector<double> got;
      for (const FixedPoint& fp : asymmetric(fps, b)) {
        if (fp.z_star > 0.0) got.push_back(fp.z_star);
      }
      std::sort(got.begin(), got.end());
      const auto want = oracle::positive_roots(cos_of(b), eta, r, 100000);
      ASSERT_EQ(got.size(), want.size()) << "r=" << r << " eta=" << eta;
      for (std::size_t k = 0; k < got.size(); ++k) EXPECT_NEAR(got[k], want[k], 1e-9);
    }
  }
}

TEST(Jacobian, Examples) {
  const Jacobian j = jacobian_at({0.0, 0.0}, 0.0, {1.0, 0.0});
  EXPECT_NEAR(j[0][0], 0.0, 1e-8);
  EXPECT_NEAR(j[1][1], 0.0, 1e-8);
  EXPECT_NEAR(j[0][1], 2.0, 1e-8);
  EXPECT_NEAR(j[1][0], -2.0, 1e-8);
  EXPECT_EQ(classify_stability(j), Stability::stable);

  const Jacobian p = jacobian_at({0.0, 0.0}, -2.0, {1.0, 0.0});
  const Spectrum ev = eigenvalues(p);
  EXPECT_LT(std::abs(ev[0]), 1e-4);
  EXPECT_LT(std::abs(ev[1]), 1e-4);
  EXPECT_EQ(classify_stability(p), Stability::marginal);
  EXPECT_THROW(jacobian_at({1.0, 0.0}, -1.0, {1.0, 0.0}), SingularityError);
}

TEST(Jacobian, DampingMakesCentresAttracting) {
  const Jacobian j = jacobian_at({0.0, 0.0}, -1.0, {1.0, 0.5});
  EXPECT_EQ(classify_stability(j, 0.5), Stability::stable);
  const Spectrum ev = eigenvalues(j);
  EXPECT_LT(ev[0].real(), -1e-3);
  EXPECT_LT(ev[1].real(), -1e-3);
}

TEST(Stability, Examples) {
  EXPECT_EQ(classify_stability(Jacobian{{{0.0, 2.0}, {-2.0, 0.0}}}), Stability::stable);       // +-2i
  EXPECT_EQ(classify_stability(Jacobian{{{0.0, 2.0}, {2.0, 0.0}}}), Stability::unstable);      // +-2
  EXPECT_EQ(classify_stability(Jacobian{{{0.0, 0.0}, {0.0, 0.0}}}), Stability::marginal);      // 0, 0
  EXPECT_EQ(classify_stability(Jacobian{{{-1.0, 0.0}, {0.0, -2.0}}}), Stability::stable);
  EXPECT_EQ(classify_stability(Jacobian{{{0.0, 2.0}, {-2.0, 0.0}}}, 0.3), Stability::marginal);
}

TEST(EtaStar, ClosedForm) {
  EXPECT_EQ(find_eta_star(1.0), 2.0);
  EXPECT_EQ(find_eta_star(5.0), 6.4);
  EXPECT_EQ(find_eta_star(2.0), 2.0);
}

TEST(EtaStar, NumericCrossCheck) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> ur(0.5, 8.0);
  for (int i = 0; i < 20; ++i) {
    const double r = ur(rng);
    EXPECT_EQ(find_eta_star(r), std::pow(2.0, r) / r);
    EXPECT_NEAR(find_eta_star_numeric(r), find_eta_star(r), 1e-6) << r;
  }
}

TEST(EtaPlus, KnownValues) {
  const auto e4 = find_eta_plus(4.0);
  const auto e5 = find_eta_plus(5.0);
  ASSERT_TRUE(e4 && e5);
  EXPECT_NEAR(*e4, 3.67, 0.01);
  EXPECT_NEAR(*e5, 4.41, 0.01);
  EXPECT_FALSE(find_eta_plus(2.0));
  EXPECT_FALSE(find_eta_plus(1.0));
  EXPECT_FALSE(find_eta_plus(3.0));
}

TEST(EtaPlus, AgreesWithGridScan) {
  for (double r : {3.5, 4.0, 5.0, 6.5}) {
    const auto got = find_eta_plus(r);
    const auto want = oracle::saddle_node_scan(r, find_eta_star(r) * (1.0 - 1e-9));
    ASSERT_TRUE(got && want) << r;
    EXPECT_NEAR(*got, *want, 1e-3) << r;
  }
  EXPECT_FALSE(oracle::saddle_node_scan(2.0, find_eta_star(2.0) * (1.0 - 1e-9)));
}

TEST(EtaPlus, OrderingAndDoubleRoot) {
  for (double r = 3.35; r < 8.0; r += 0.35) {
    const auto e = find_eta_plus(r);
    ASSERT_TRUE(e) << r;
    EXPECT_GT(*e, 0.0);
    EXPECT_LT(*e, find_eta_star(r));
  }
}

TEST(Pitchfork, CubicCoefficientFromStencil) {
  for (double r : {1.0, 2.0, 3.0, 3.3, 4.0, 5.0, 6.3}) {
    const double eta = -find_eta_star(r);
    const double g3 = oracle::third_derivative_at_zero(
        [&](double z) { return oracle::residual(z, 1.0, eta, r); }, 1e-2);
    EXPECT_NEAR(-g3 / 6.0, pitchfork_cubic_coefficient(r), 2e-3 * std::max(1.0, std::abs(g3))) << r;
  }
}

TEST(Pitchfork, Classification) {
  EXPECT_EQ(classify_pitchfork(1.0), PitchforkType::supercritical);
  EXPECT_EQ(classify_pitchfork(2.0), PitchforkType::supercritical);
  EXPECT_EQ(classify_pitchfork(5.0), PitchforkType::subcritical);
  const double rt = r_threshold();
  for (double d : {1e-3, 1e-4, 1e-5}) {
    EXPECT_EQ(classify_pitchfork(rt - d), PitchforkType::supercritical) << d;
    EXPECT_EQ(classify_pitchfork(rt + d), PitchforkType::subcritical) << d;
  }
  EXPECT_THROW(classify_pitchfork(rt + 5e-7), ThresholdProximityError);
}

TEST(Pitchfork, AgreesWithCubicSign) {
  for (double r = 0.6; r < 8.0; r += 0.2) {
    if (std::abs(r - r_threshold()) < 1e-3) continue;
    const bool sub = classify_pitchfork(r) == PitchforkType::subcritical;
    EXPECT_EQ(sub, pitchfork_cubic_coefficient(r) < 0.0) << r;
  }
}

TEST(Pitchfork, ThresholdBisection) {
  EXPECT_NEAR(find_r_threshold(3.0, 4.0, 1e-4), 0.5 * (3.0 + std::sqrt(13.0)), 1e-4);
  EXPECT_NEAR(find_r_threshold(1.0, 6.0, 1e-6), r_threshold(), 1e-5);
  EXPECT_THROW(find_r_threshold(4.0, 5.0, 1e-4), DomainError);
}

TEST(Trace, R1Diagram) {
  const BifurcationDiagram d = trace_branches(1.0, {0.5, 4.0}, 500);
  EXPECT_EQ(d.eta_star, 2.0);
  EXPECT_FALSE(d.eta_plus);
  EXPECT_EQ(d.classification, PitchforkType::supercritical);
  int sym0 = 0, asym0 = 0;
  for (const Branch& b : d.branches) {
    if (b.theta_star != 0.0) continue;
    if (b.kind == FixedPointKind::symmetric) {
      ++sym0;
      ASSERT_EQ(b.points.size(), 500u);
      for (const BranchPoint& p : b.points) {
        if (-p.eta < 1.99) {
          EXPECT_EQ(p.stability, Stability::stable);
        }
        if (-p.eta > 2.01) {
          EXPECT_EQ(p.stability, Stability::unstable);
        }
      }
    } else {
      ++asym0;
      EXPECT_GT(-b.points.front().eta, 2.0);
      EXPECT_LT(-b.points.front().eta, 2.0 + 0.02);
      EXPECT_EQ(b.points.back().eta, -4.0);
      for (const BranchPoint& p : b.points) {
        if (-p.eta > 2.01) {
          EXPECT_EQ(p.stability, Stability::stable);
        }
      }
    }
  }
  EXPECT_EQ(sym0, 1);
  EXPECT_EQ(asym0, 2);
}

TEST(Trace, R5Diagram) {
  const BifurcationDiagram d = trace_branches(5.0, {3.0, 8.0}, 500);
  EXPECT_EQ(d.classification, PitchforkType::subcritical);
  ASSERT_TRUE(d.eta_plus);
  int stable_pairs = 0, unstable_pairs = 0;
  for (const Branch& b : d.branches) {
    if (b.theta_star != 0.0) continue;
    if (b.kind == FixedPointKind::symmetric) {
      for (const BranchPoint& p : b.points) {
        if (-p.eta < 6.39) {
          EXPECT_EQ(p.stability, Stability::stable);
        }
        if (-p.eta > 6.41) {
          EXPECT_EQ(p.stability, Stability::unstable);
        }
      }
      continue;
    }
    const BranchPoint& mid = b.points[b.points.size() / 2];
    if (mid.stability == Stability::stable) {
      ++stable_pairs;
      EXPECT_NEAR(-b.points.front().eta, 4.41, 0.02);
      EXPECT_EQ(b.points.back().eta, -8.0);
    } else {
      ++unstable_pairs;
      EXPECT_NEAR(-b.points.front().eta, 4.41, 0.02);
      EXPECT_NEAR(-b.points.back().eta, 6.4, 0.02);
      EXPECT_LT(std::abs(b.points.back().z_star), 0.1);
    }
  }
  EXPECT_EQ(stable_pairs, 2);
  EXPECT_EQ(unstable_pairs, 2);
}

TEST(Trace, NoBifurcationInRange) {
  for (double r : {2.0, 5.0}) {
    const double top = 0.9 * std::min(find_eta_star(r), find_eta_plus(r).value_or(find_eta_star(r)));
    const BifurcationDiagram d = trace_branches(r, {0.1, top}, 50);
    int zero_branches = 0;
    for (const Branch& b : d.branches) {
      if (b.theta_star != 0.0) continue;
      ++zero_branches;
      EXPECT_EQ(b.kind, FixedPointKind::symmetric);
      for (const BranchPoint& p : b.points) EXPECT_EQ(p.stability, Stability::stable);
    }
    EXPECT_EQ(zero_branches, 1);
  }
}

TEST(Trace, RejectsBadGrid) {
  EXPECT_THROW(trace_branches(1.0, {0.5, 4.0}, 1), DomainError);
  EXPECT_THROW(trace_branches(1.0, {4.0, 0.5}, 10), DomainError);
}

TEST(Phase, BranchHelpers) {
  EXPECT_EQ(theta_of(PhaseBranch::pi), pi);
  EXPECT_EQ(cos_of(PhaseBranch::pi), -1.0);
}
