#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <map>
#include <numbers>

#include "support/fixtures.hpp"
#include "tsns/dynamics/diagnostics.hpp"
#include "tsns/dynamics/drift_spec.hpp"
#include "tsns/dynamics/integrator.hpp"
#include "tsns/dynamics/trajectory_io.hpp"

using namespace tsns;
using tsns::testing::random_divfree;
using tsns::testing::random_field;
using tsns::testing::rel_diff;

namespace {

const Complex I{0.0, 1.0};

/// Lattice sum  -sum_{k+l=n} (a(k) . (-i l)) w(l) |n|^{-s} |l|^{s}  over the
/// dealiased output set, with a(k) = i k_perp f(k) |k|^{-2-t}.  No transforms.
SpectralField transport_oracle(const SpectralField& f, const SpectralField& g, double s = 0.0, double t = 0.0) {
  const TorusGrid& grid = g.grid();
  const int K = grid.max_wavenumber(), M = grid.dealias_radius();
  std::map<std::pair<int, int>, Complex> acc;
  for (int k1 = -K; k1 <= K; ++k1)
    for (int k2 = -K; k2 <= K; ++k2) {
      if (!grid.contains({k1, k2})) continue;
      const Complex fk = f.coefficient({k1, k2});
      if (fk == Complex{}) continue;
      const double kk = std::hypot(double(k1), double(k2));
      const Complex a1 = I * double(-k2) * fk * std::pow(kk, -2.0 - t), a2 = I * double(k1) * fk * std::pow(kk, -2.0 - t);
      for (int l1 = -K; l1 <= K; ++l1)
        for (int l2 = -K; l2 <= K; ++l2) {
          if (!grid.contains({l1, l2})) continue;
          const int n1 = k1 + l1, n2 = k2 + l2;
          if ((n1 == 0 && n2 == 0) || std::max(std::abs(n1), std::abs(n2)) > M) continue;
          const Complex gl = g.coefficient({l1, l2});
          if (gl == Complex{}) continue;
          const double ln = std::hypot(double(l1), double(l2)), nn = std::hypot(double(n1), double(n2));
          acc[{n1, n2}] += -(a1 * (-I * double(l1)) + a2 * (-I * double(l2))) * gl * std::pow(ln, s) * std::pow(nn, -s);
        }
    }
  SpectralField out = SpectralField::scalar(grid);
  for (const auto& [n, v] : acc) out.set_coefficient({n.first, n.second}, v);
  return out;
}

SpectralField two_mode(const TorusGrid& g) {
  SpectralField w = SpectralField::scalar(g);
  w.set_coefficient({1, 0}, 1.0);
  w.set_coefficient({0, 2}, 1.0);
  return w;
}

SpectralField small_support(const TorusGrid& g, std::uint64_t seed, int radius) {
  SpectralField f = random_field(g, Rank::scalar, seed, Support::dealiased);
  const auto& m = g.modes();
  return apply_symbol(f, [&](std::size_t s) {
    return std::max(std::abs(m.k1[s]), std::abs(m.k2[s])) <= radius ? 1.0 : 0.0;
  });
}

DriftSpec spec(DriftKind kind, Level level, double alpha = 1.0) {
  DriftSpec d;
  d.kind = kind;
  d.level = level;
  d.alpha = alpha;
  return d;
}

}  // namespace

// ---------------------------------------------------------------------------
// Drifts.

TEST(NsDrift, SkewSymmetricOnDealiasedFields) {
  const TorusGrid g(64);
  for (std::uint64_t i = 0; i < 100; ++i) {
    const SpectralField w = random_field(g, Rank::scalar, 100 + i, Support::dealiased);
    const SpectralField f = ns_drift(w);
    EXPECT_LE(std::abs(inner(w, f)) / (l2_norm(w) * l2_norm(f)), 1e-10);
    const SpectralField vh = random_field(g, Rank::scalar, 300 + i, Support::dealiased, 0.0);
    const SpectralField h = hat_twisted_drift(vh, 1.0);
    EXPECT_LE(std::abs(inner(vh, h)) / (l2_norm(vh) * l2_norm(h)), 1e-10);
  }
}

TEST(NsDrift, ZeroShearAndTwoModeOracle) {
  const TorusGrid g(16);
  EXPECT_EQ(l2_norm(ns_drift(SpectralField::scalar(g))), 0.0);
  SpectralField shear = SpectralField::scalar(g);
  shear.set_coefficient({1, 0}, 1.0);
  EXPECT_LE(l2_norm(ns_drift(shear)), 1e-15);
  const SpectralField w = two_mode(g);
  const SpectralField oracle = transport_oracle(w, w);
  EXPECT_GT(l2_norm(oracle), 0.1);
  EXPECT_LE(rel_diff(ns_drift(w), oracle), 1e-13);
  const SpectralField r = small_support(g, 5, 3);
  EXPECT_LE(rel_diff(ns_drift(r), transport_oracle(r, r)), 1e-12);
}

TEST(NsDrift, NonFiniteInputRaisesBlowup) {
  const TorusGrid g(16);
  SpectralField w = random_field(g, Rank::scalar, 1, Support::dealiased);
  w.set_coefficient({1, 1}, Complex{NAN, 0.0});
  EXPECT_THROW(ns_drift(w), BlowupDetected);
}

TEST(TwistedDrift, AlphaZeroOracleAndTwoPaths) {
  const TorusGrid g(16);
  const SpectralField v = small_support(g, 7, 3);
  EXPECT_LE(rel_diff(twisted_drift(v, 0.0), ns_drift(v)), 1e-14);
  for (double alpha : {0.5, 1.0, 1.7}) {
    EXPECT_LE(rel_diff(twisted_drift(v, alpha), transport_oracle(v, v, alpha)), 1e-12) << alpha;
    const SpectralField via_hat = fractional_power(hat_twisted_drift(fractional_power(v, alpha), alpha), -alpha);
    EXPECT_LE(rel_diff(twisted_drift(v, alpha), via_hat), 1e-10) << alpha;
  }
}

TEST(TwistedDrift, HatFormConservation) {
  const TorusGrid g(32);
  for (std::uint64_t i = 0; i < 20; ++i) {
    const SpectralField v = random_field(g, Rank::scalar, 40 + i, Support::dealiased, 1.5);
    const SpectralField vh = fractional_power(v, 1.3);
    const SpectralField f = hat_twisted_drift(vh, 1.3);
    EXPECT_LE(std::abs(inner(vh, f)) / (l2_norm(vh) * l2_norm(f)), 1e-10);
  }
}

TEST(GeneralizedDrift, EndpointsOfTheFamily) {
  const TorusGrid g(32);
  const SpectralField w = random_field(g, Rank::scalar, 9, Support::dealiased);
  const SpectralField u = biot_savart(w);
  // beta = alpha: Navier-Stokes, and its curl is the vorticity drift
  EXPECT_LE(rel_diff(generalized_drift(u, 1.2, 1.2), velocity_ns_drift(u)), 1e-14);
  EXPECT_LE(rel_diff(curl(velocity_ns_drift(u)), ns_drift(w)), 1e-10);
  // beta = 0 with u = |grad|^alpha v: |grad|^alpha of the velocity twisted drift
  const SpectralField v = random_divfree(g, 10, Support::dealiased, 2.0);
  const double alpha = 1.4;
  EXPECT_LE(rel_diff(generalized_drift(fractional_power(v, alpha), 0.0, alpha),
                     fractional_power(velocity_twisted_drift(v, alpha), alpha)),
            1e-10);
  EXPECT_THROW(generalized_drift(u, 1.5, 1.0), std::invalid_argument);
  EXPECT_THROW(generalized_drift(u, -0.1, 1.0), std::invalid_argument);
}

TEST(GeneralizedDrift, ShearModeAndZero) {
  const TorusGrid g(16);
  SpectralField u = SpectralField::vector(g);
  u.set_coefficient({1, 0}, 1.0, 1);  // u = (0, 2 cos x1): (u . grad) u = u2 d2 u = 0
  EXPECT_LE(l2_norm(generalized_drift(u, 0.5, 1.0)), 1e-15);
  EXPECT_EQ(l2_norm(generalized_drift(SpectralField::vector(g), 0.5, 1.0)), 0.0);
}

TEST(Commutator, AlphaZeroAndTwoPathAgreement) {
  const TorusGrid g(16);
  const SpectralField u = random_divfree(g, 11, Support::dealiased);
  EXPECT_EQ(l2_norm(commutator_g(u, 0.0)), 0.0);
  EXPECT_LE(l2_norm(commutator_g_direct(u, 0.0)), 1e-15);
  for (double alpha : {0.5, 1.0, 1.5}) {
    const SpectralField a = commutator_g(u, alpha), b = commutator_g_direct(u, alpha);
    EXPECT_GT(l2_norm(a), 1e-3);
    EXPECT_LE(rel_diff(a, b), 1e-10) << alpha;
  }
}

TEST(Commutator, EqualsNsMinusTwistedVelocityDrifts) {
  const TorusGrid g(32);
  const SpectralField u = random_divfree(g, 12, Support::dealiased);
  EXPECT_LE(rel_diff(commutator_g(u, 1.0), velocity_ns_drift(u) - velocity_twisted_drift(u, 1.0)), 1e-13);
}

TEST(Commutator, VanishesOnASingleShell) {
  // |grad|^alpha u = 5^alpha u and P (u . grad) u = 0 for a field on |k| = 5
  const TorusGrid g(32);
  const std::vector<Wavenumber> ring = {{3, 4}, {4, 3}, {5, 0}, {0, 5}, {4, -3}, {3, -4}};
  auto shell_field = [&](double extra) {
    SpectralField u = SpectralField::vector(g);
    for (std::size_t i = 0; i < ring.size(); ++i) {
      const Wavenumber k = ring[i];
      const double kn = std::hypot(double(k.k1), double(k.k2));
      const Complex c = Complex{1.0 + double(i), 0.5 * double(i)};
      u.set_coefficient(k, -double(k.k2) / kn * c, 0);
      u.set_coefficient(k, double(k.k1) / kn * c, 1);
    }
    u.set_coefficient({1, 1}, Complex{-extra, 0.0}, 0);
    u.set_coefficient({1, 1}, Complex{extra, 0.0}, 1);
    return u;
  };
  const SpectralField u = shell_field(0.0);
  ASSERT_TRUE(is_divergence_free(u));
  EXPECT_LE(l2_norm(commutator_g(u, 1.0)), 1e-12 * l2_norm(u));
  EXPECT_LE(l2_norm(commutator_g_direct(u, 1.0)), 1e-12 * l2_norm(u));
  const SpectralField v = shell_field(2.0);
  const SpectralField G = commutator_g_direct(v, 1.0);
  EXPECT_GT(l2_norm(G), 1e-2);
  EXPECT_LE(rel_diff(commutator_g(v, 1.0), G), 1e-10);
}

TEST(Commutator, RejectsCompressibleInput) {
  const TorusGrid g(16);
  const SpectralField grad = gradient(random_field(g, Rank::scalar, 3));
  EXPECT_THROW(commutator_g(grad, 1.0), std::invalid_argument);
  EXPECT_THROW(commutator_g_direct(grad, 1.0), std::invalid_argument);
  EXPECT_THROW(rough_commutator(grad, 1.0, 1.0), std::invalid_argument);
}

TEST(RoughProbe, ConstantWeightsMatchSmoothSlope) {
  const TorusGrid g(128);
  const SpectralField u = random_divfree(g, 14, Support::dealiased, 1.9);
  const StatReport r = rough_commutator_probe(u, 1.0, 1.0, true);
  EXPECT_NEAR(r.get("rough_slope"), r.get("smooth_slope"), 1e-8);
  // a constant weight commutes: C_Q = G_{alpha+1-gamma} exactly
  EXPECT_LE(rel_diff(rough_commutator(u, 1.0, 1.0, true, 2.0), commutator_g(u, 1.0)), 1e-12);
}

TEST(RoughProbe, RoughSymbolDecaysSlower) {
  const TorusGrid g(128);
  const double alpha = 1.0, beta = alpha - 0.05;
  const auto& m = g.modes();
  RngStream rng(3, 0, StreamPurpose::phases);
  SpectralField zeta = SpectralField::scalar(g);
  for (std::size_t s : m.canonical_dealiased) {
    const double ph = 2.0 * std::numbers::pi * rng.uniform();
    zeta.set_coefficient(g.wavenumber(s), std::polar(std::pow(m.norm[s], -beta - 1.0), ph));
  }
  const StatReport r = rough_commutator_probe(polarize(zeta), alpha, 1.0);
  EXPECT_GE(r.get("rough_slope") - r.get("smooth_slope"), 0.3);
}

TEST(RoughProbe, ZeroFieldGivesZeroReport) {
  const TorusGrid g(32);
  const StatReport r = rough_commutator_probe(SpectralField::vector(g), 1.0, 1.0);
  EXPECT_EQ(r.get("rough_total"), 0.0);
}

// ---------------------------------------------------------------------------
// Cutoffs.

TEST(Cutoffs, ProfileShape) {
  EXPECT_EQ(chi0(0.0), 1.0);
  EXPECT_EQ(chi0(1.0), 1.0);
  EXPECT_EQ(chi0(2.0), 0.0);
  EXPECT_EQ(chi0(7.0), 0.0);
  EXPECT_DOUBLE_EQ(chi0(1.5), 0.5);
  double prev = 1.0, lip = 0.0;
  for (int i = 0; i <= 3000; ++i) {
    const double x = i * 1e-3;
    const double c = chi0(x);
    EXPECT_GE(c, 0.0);
    EXPECT_LE(c, 1.0);
    EXPECT_LE(c, prev);
    if (i > 0) lip = std::max(lip, (prev - c) / 1e-3);
    prev = c;
    const double h = 1e-6;
    if (x > 1e-3) {
      EXPECT_NEAR(chi0_derivative(x), (chi0(x + h) - chi0(x - h)) / (2 * h), 1e-6);
    }
  }
  EXPECT_LE(lip, chi0_lipschitz + 1e-9);
  EXPECT_NEAR(lip, chi0_lipschitz, 1e-4);
}

TEST(Cutoffs, ZeroFieldAndFarField) {
  const TorusGrid g(32);
  CutoffSpec cs;
  cs.R = 2.0;
  auto [c0, s0] = evaluate_cutoffs(SpectralField::vector(g), cs);
  EXPECT_EQ(c0, 1.0);
  EXPECT_EQ(s0, 1.0);
  SpectralField u = random_divfree(g, 2);
  u *= 3.0 * cs.R / holder_norm(u, cs.alpha - cs.kappa);
  EXPECT_EQ(evaluate_cutoffs(u, cs).first, 0.0);
}

TEST(Cutoffs, BothEqualOneBelowTheRadius) {
  const TorusGrid g(32);
  CutoffSpec cs;
  cs.R = 1.0;
  for (std::uint64_t i = 0; i < 20; ++i) {
    SpectralField u = random_divfree(g, 50 + i, Support::retained, 0.5 + 0.1 * double(i));
    u *= (0.2 + 0.04 * double(i)) * cs.R / holder_norm(u, cs.alpha - cs.kappa);
    const auto [c, s] = evaluate_cutoffs(u, cs);
    EXPECT_EQ(c, 1.0);
    EXPECT_EQ(s, 1.0);
  }
}

TEST(Cutoffs, LipschitzContinuity) {
  const TorusGrid g(32);
  CutoffSpec cs;
  cs.R = 1.0;
  for (std::uint64_t i = 0; i < 50; ++i) {
    SpectralField f = random_divfree(g, 70 + i), h = random_divfree(g, 170 + i);
    f *= 2.5 * (double(i % 7) + 1.0) / 7.0 / holder_norm(f, 0.95);
    h *= 2.5 * (double(i % 5) + 1.0) / 5.0 / holder_norm(h, 0.95);
    const double lhs = std::abs(evaluate_cutoffs(f, cs).first - evaluate_cutoffs(h, cs).first);
    const double rhs = chi0_lipschitz / cs.R * std::abs(holder_norm(f, 0.95) - holder_norm(h, 0.95));
    EXPECT_LE(lhs, rhs + 1e-15);
  }
}

TEST(Cutoffs, SmoothCutoffDerivativeMatchesFiniteDifference) {
  const TorusGrid g(32);
  CutoffSpec cs;
  SpectralField w = random_field(g, Rank::scalar, 4, Support::dealiased);
  const SpectralField v = random_field(g, Rank::scalar, 5, Support::dealiased);
  // place w on the slope of chi^sm
  const double c = besov_normaliser(g, cs);
  const double P = besov_pp_power(velocity_of(w, Level::vorticity, cs.alpha), cs.alpha - 2 * cs.kappa, cs.p);
  cs.R = std::pow(c * P / 1.4, 1.0 / cs.p);
  const double eps = 1e-6;
  const double fd = (chi_smooth(w + eps * v, Level::vorticity, cs, cs.R) - chi_smooth(w - eps * v, Level::vorticity, cs, cs.R)) / (2 * eps);
  const double an = chi_smooth_derivative(w, v, Level::vorticity, cs, cs.R);
  EXPECT_NE(an, 0.0);
  EXPECT_NEAR(an, fd, 1e-6 * std::max(1.0, std::abs(an)));
}

// ---------------------------------------------------------------------------
// Drift specs.

TEST(DriftSpec, ValidationAndParsing) {
  DriftSpec d = spec(DriftKind::generalized, Level::velocity, 1.0);
  d.beta = 1.5;
  EXPECT_THROW(d.validate(), std::invalid_argument);
  d.beta = 0.5;
  EXPECT_NO_THROW(d.validate());
  d.level = Level::hat;
  EXPECT_THROW(d.validate(), std::invalid_argument);
  DriftSpec s = spec(DriftKind::interpolated, Level::vorticity);
  s.s = 1.2;
  EXPECT_THROW(s.validate(), std::invalid_argument);
  EXPECT_THROW(spec(DriftKind::forcing, Level::hat).validate(), std::invalid_argument);
  double beta = 0.0;
  EXPECT_EQ(drift_kind_from_string("generalized:0.75", &beta), DriftKind::generalized);
  EXPECT_EQ(beta, 0.75);
  EXPECT_EQ(drift_kind_from_string("ns"), DriftKind::navier_stokes);
  EXPECT_EQ(drift_kind_from_string("twisted"), DriftKind::twisted);
  EXPECT_EQ(drift_kind_from_string("linear"), DriftKind::linear);
  EXPECT_THROW(drift_kind_from_string("euler"), std::invalid_argument);
}

TEST(DriftSpec, InterpolatedEndpointsAndDerivatives) {
  const TorusGrid g(32);
  for (Level level : {Level::vorticity, Level::hat, Level::velocity}) {
    const SpectralField x = level == Level::velocity ? random_divfree(g, 6, Support::dealiased)
                                                     : random_field(g, Rank::scalar, 6, Support::dealiased);
    DriftSpec d = spec(DriftKind::interpolated, level, 1.0);
    const SpectralField ns = evaluate_drift(spec(DriftKind::navier_stokes, level), x);
    const SpectralField tw = evaluate_drift(spec(DriftKind::twisted, level), x);
    EXPECT_LE(rel_diff(evaluate_drift(d.with_s(0.0), x), ns), 1e-14);
    EXPECT_LE(rel_diff(evaluate_drift(d.with_s(1.0), x), tw), 1e-14);
    EXPECT_LE(rel_diff(drift_s_derivative(d.with_s(0.3), x), tw - ns), 1e-14);
    // Euler identity and zero state
    const DriftSpec dm = d.with_s(0.4);
    EXPECT_LE(rel_diff(drift_derivative(dm, x, x), 2.0 * evaluate_drift(dm, x)), 1e-13);
    EXPECT_EQ(l2_norm(drift_derivative(dm, SpectralField(g, x.rank()), x)), 0.0);
  }
}

TEST(DriftSpec, DerivativeIncludesCutoffTerm) {
  const TorusGrid g(32);
  const SpectralField x = random_field(g, Rank::scalar, 8, Support::dealiased);
  const SpectralField v = random_field(g, Rank::scalar, 9, Support::dealiased);
  DriftSpec d = spec(DriftKind::interpolated, Level::vorticity);
  d.s = 0.5;
  CutoffSpec cs;
  const double c = besov_normaliser(g, cs);
  const double P = besov_pp_power(biot_savart(x), cs.alpha - 2 * cs.kappa, cs.p);
  cs.R = 0.5 * std::pow(c * P / 1.5, 1.0 / cs.p);  // 2R sits on the slope
  d.cutoff = cs;
  ASSERT_GT(drift_cutoff(d, x), 0.0);
  ASSERT_LT(drift_cutoff(d, x), 1.0);
  std::vector<double> err;
  for (double eps : {1e-3, 1e-4, 1e-5}) {
    const SpectralField fd = (evaluate_drift(d, x + eps * v) - evaluate_drift(d, x - eps * v)) * (0.5 / eps);
    err.push_back(rel_diff(fd, drift_derivative(d, x, v)));
  }
  EXPECT_LE(err[1], 1e-6);
  EXPECT_LT(err[1], err[0]);
}

// ---------------------------------------------------------------------------
// Stepping.

TEST(Step, DriftFreeNoiselessIsSemigroup) {
  const TorusGrid g(32);
  const NoiseSpec ns{1.0, 0.8, Level::vorticity};
  const SpectralField x = random_field(g, Rank::scalar, 3);
  const SpectralField y = step(x, spec(DriftKind::linear, Level::vorticity), ns, 0.01);
  EXPECT_LE(rel_diff(y, semigroup_apply(x, 0.01, 0.8)), 1e-15);
  EXPECT_THROW(step(x, spec(DriftKind::linear, Level::vorticity), ns, 0.0), std::invalid_argument);
}

TEST(Step, ConstantForcingIsTheExactDuhamelIntegral) {
  const TorusGrid g(16);
  const NoiseSpec ns{1.0, 1.0, Level::hat};
  DriftSpec d = spec(DriftKind::forcing, Level::hat);
  d.s = 1.0;
  d.forcing = random_field(g, Rank::scalar, 4);
  const SpectralField x = random_field(g, Rank::scalar, 5);
  const double dt = 0.05;
  const SpectralField y = step(x, d, ns, dt);
  const auto& m = g.modes();
  for (std::size_t s : m.retained_slots) {
    const double lam = m.norm[s] * m.norm[s];
    const Complex exact = std::exp(-lam * dt) * x.component(0)[s] + (1.0 - std::exp(-lam * dt)) / lam * d.forcing.component(0)[s];
    EXPECT_NEAR(std::abs(y.component(0)[s] - exact), 0.0, 1e-15);
  }
}

TEST(Step, DeterministicSelfConvergenceIsFirstOrder) {
  const TorusGrid g(32);
  const NoiseSpec ns{1.0, 1.0, Level::vorticity};
  const SpectralField w0 = random_field(g, Rank::scalar, 6, Support::dealiased, 1.5);
  const DriftSpec d = spec(DriftKind::navier_stokes, Level::vorticity);
  SimulationInputs in;
  in.noiseless = true;
  auto endpoint = [&](double dt) { return simulate(w0, ns, d, {dt, 0.25}, 0, 0, in).final_state(); };
  const SpectralField ref = endpoint(1.0 / 8192);
  std::vector<double> dts, errs;
  for (double dt : {1.0 / 128, 1.0 / 256, 1.0 / 512}) {
    dts.push_back(dt);
    errs.push_back(l2_norm(endpoint(dt) - ref));
  }
  const double order = stats::fit_loglog(dts, errs).slope;
  EXPECT_NEAR(order, 1.0, 0.1);
}

TEST(Step, EtdRk2IsSecondOrder) {
  const TorusGrid g(32);
  const NoiseSpec ns{1.0, 1.0, Level::vorticity};
  const SpectralField w0 = random_field(g, Rank::scalar, 6, Support::dealiased, 1.5);
  const DriftSpec d = spec(DriftKind::navier_stokes, Level::vorticity);
  SimulationInputs in;
  in.noiseless = true;
  auto endpoint = [&](double dt) {
    IntegratorConfig c{dt, 0.25};
    c.scheme = Scheme::etdrk2;
    return simulate(w0, ns, d, c, 0, 0, in).final_state();
  };
  const SpectralField ref = endpoint(1.0 / 8192);
  std::vector<double> dts, errs;
  for (double dt : {1.0 / 128, 1.0 / 256, 1.0 / 512}) {
    dts.push_back(dt);
    errs.push_back(l2_norm(endpoint(dt) - ref));
  }
  EXPECT_NEAR(stats::fit_loglog(dts, errs).slope, 2.0, 0.1);
}

TEST(Step, DriftFreeNoisyStepMatchesOuLaw) {
  const TorusGrid g(8);
  const NoiseSpec ns{1.0, 1.0, Level::velocity};
  const SpectralField x0 = random_divfree(g, 2);
  const DriftSpec lin = spec(DriftKind::linear, Level::velocity);
  const double dt = 0.2;
  const StepCoefficients c(g, ns, dt);
  const auto& m = g.modes();
  const auto& slots = m.canonical_dealiased;
  std::vector<std::vector<double>> pw(slots.size());
  for (std::uint32_t t = 0; t < 20000; ++t) {
    NoiseRecord rec = generate_noise_record(g, dt, 1, 77, t);
    const SpectralField y = step(x0, lin, c, {&rec.dW[0], &rec.Z[0], nullptr}) - semigroup_apply(x0, dt, 1.0);
    for (std::size_t i = 0; i < slots.size(); ++i)
      pw[i].push_back(std::norm(y.component(0)[slots[i]]) + std::norm(y.component(1)[slots[i]]));
  }
  const double z = stats::normal_quantile(1.0 - 0.005 / double(slots.size()));
  for (std::size_t i = 0; i < slots.size(); ++i) {
    const double k = m.norm[slots[i]];
    const double expected = ns.stationary_variance(k) * -std::expm1(-2.0 * k * k * dt);
    EXPECT_NEAR(stats::mean(pw[i]), expected, z * stats::standard_error(pw[i]));
  }
}

TEST(Step, HatTwistedDriftKeepsEnergyAtDriftLevel) {
  const TorusGrid g(32);
  const DriftSpec d = spec(DriftKind::twisted, Level::hat);
  RngStream rng(1, 0, StreamPurpose::initial);
  SpectralField x = sample_gaussian_field({1.0, Level::hat}, g, rng, Support::dealiased);
  const NoiseSpec ns{1.0, 1.0, Level::hat};
  const StepCoefficients c(g, ns, 1e-3);
  for (int q = 0; q < 20; ++q) {
    const SpectralField f = evaluate_drift(d, x);
    EXPECT_LE(std::abs(inner(x, f)) / (l2_norm(x) * l2_norm(f)), 1e-10);
    NoiseRecord rec = generate_noise_record(g, 1e-3, 1, 9, std::uint32_t(q));
    x = step(x, d, c, {&rec.dW[0], &rec.Z[0], nullptr});
  }
}

// ---------------------------------------------------------------------------
// Simulation.

TEST(Simulate, ReplayAndRecordedNoise) {
  const TorusGrid g(32);
  const NoiseSpec ns{1.0, 1.0, Level::vorticity};
  const DriftSpec d = spec(DriftKind::navier_stokes, Level::vorticity);
  const SpectralField w0 = random_field(g, Rank::scalar, 1, Support::dealiased);
  const IntegratorConfig cfg{1e-3, 0.05};
  const auto a = simulate(w0, ns, d, cfg, 5), b = simulate(w0, ns, d, cfg, 5), c = simulate(w0, ns, d, cfg, 6);
  ASSERT_EQ(a.states.size(), 51u);
  for (std::size_t i = 0; i < a.states.size(); ++i) EXPECT_TRUE(a.states[i] == b.states[i]);
  EXPECT_FALSE(a.final_state() == c.final_state());
  ASSERT_TRUE(a.noise_record.has_value());
  EXPECT_EQ(a.noise_record->steps(), 50u);
  SimulationInputs in;
  in.noise = &*a.noise_record;
  const auto r = simulate(w0, ns, d, cfg, 999, 0, in);
  EXPECT_TRUE(r.final_state() == a.final_state());
}

TEST(Simulate, StrideAndInputChecks) {
  const TorusGrid g(16);
  const NoiseSpec ns{1.0, 1.0, Level::hat};
  const DriftSpec d = spec(DriftKind::twisted, Level::hat);
  const SpectralField x0 = random_field(g, Rank::scalar, 2, Support::dealiased);
  IntegratorConfig cfg{0.01, 0.1};
  cfg.record_stride = 3;
  const auto t = simulate(x0, ns, d, cfg, 1);
  EXPECT_EQ(t.step_index, (std::vector<std::size_t>{0, 3, 6, 9, 10}));
  EXPECT_THROW(simulate(random_divfree(g, 1), ns, d, cfg, 1), std::invalid_argument);
  EXPECT_THROW(simulate(x0, ns, d, {0.03, 0.1}, 1), std::invalid_argument);
  const NoiseRecord short_rec = generate_noise_record(g, 0.01, 4, 1);
  SimulationInputs in;
  in.noise = &short_rec;
  EXPECT_THROW(simulate(x0, ns, d, cfg, 1, 0, in), std::invalid_argument);
}

TEST(Simulate, BlowupIsDetected) {
  const TorusGrid g(16);
  const NoiseSpec ns{1.0, 1.0, Level::vorticity};
  const DriftSpec d = spec(DriftKind::navier_stokes, Level::vorticity);
  const SpectralField w0 = 50.0 * random_field(g, Rank::scalar, 2, Support::dealiased);
  IntegratorConfig cfg{0.01, 0.1};
  cfg.blowup_threshold = 1.0;
  EXPECT_THROW(simulate(w0, ns, d, cfg, 1), BlowupDetected);
  SimulationInputs in;
  in.throw_on_blowup = false;
  const auto t = simulate(w0, ns, d, cfg, 1, 0, in);
  EXPECT_TRUE(t.blew_up);
  EXPECT_FALSE(t.blowup_message.empty());
}

TEST(Simulate, LinearDriftMarginalMatchesExactOu) {
  const TorusGrid g(8);
  const NoiseSpec ns{1.0, 1.0, Level::hat};
  const DriftSpec lin = spec(DriftKind::linear, Level::hat);
  const SpectralField x0 = random_field(g, Rank::scalar, 3, Support::dealiased);
  const std::size_t slot = g.modes().canonical_dealiased[2];
  std::vector<double> a, b;
  IntegratorConfig cfg{0.05, 0.5};
  cfg.record_stride = 0;
  cfg.record_noise = false;
  for (std::uint32_t t = 0; t < 4000; ++t) {
    a.push_back(simulate(x0, ns, lin, cfg, 31, t).final_state().component(0)[slot].real());
    RngStream rng(32, t, StreamPurpose::test);
    b.push_back(ou_exact_step(x0, 0.5, ns, rng, Support::dealiased).component(0)[slot].real());
  }
  EXPECT_GT(stats::ks_two_sample(a, b).p_value, 1e-3);
}

// ---------------------------------------------------------------------------
// Diagnostics and persistence.

TEST(Enstrophy, DeterministicBudgetCloses) {
  const TorusGrid g(32);
  const NoiseSpec ns{1.0, 1.0, Level::vorticity};
  const SpectralField w0 = 2.0 * random_field(g, Rank::scalar, 4, Support::dealiased, 1.5);
  SimulationInputs in;
  in.noiseless = true;
  std::vector<double> res;
  for (double dt : {2e-3, 1e-3}) {
    const auto traj = simulate(w0, ns, spec(DriftKind::navier_stokes, Level::vorticity), {dt, 0.1}, 0, 0, in);
    const StatReport r = enstrophy_diagnostic(traj);
    EXPECT_LE(r.get("max_transfer"), 1e-10);
    res.push_back(r.get("relative_residual"));
  }
  EXPECT_LE(res[1], 1e-2);
  EXPECT_LT(res[1], 0.7 * res[0]);
}

TEST(Enstrophy, NoisyInjectionMatchesExpectation) {
  const TorusGrid g(32);
  const NoiseSpec ns{1.0, 1.0, Level::vorticity};
  RngStream rng(2, 0, StreamPurpose::initial);
  const SpectralField w0 = sample_gaussian_field({1.0, Level::vorticity}, g, rng, Support::dealiased);
  const auto traj = simulate(w0, ns, spec(DriftKind::navier_stokes, Level::vorticity), {1e-3, 0.5}, 3);
  const StatReport r = enstrophy_diagnostic(traj);
  EXPECT_LE(r.get("max_transfer"), 1e-10);
  EXPECT_LE(std::abs(r.get("injection_z")), 3.0);
  EXPECT_THROW(enstrophy_diagnostic(simulate(random_field(g, Rank::scalar, 1), ns,
                                             spec(DriftKind::twisted, Level::hat), {1e-3, 0.01}, 1)),
               std::invalid_argument);
}

TEST(TrajectoryIo, DirectoryLayoutRoundTrip) {
  namespace fs = std::filesystem;
  const TorusGrid g(16);
  const NoiseSpec ns{1.0, 1.0, Level::vorticity};
  const auto traj = simulate(random_field(g, Rank::scalar, 1, Support::dealiased), ns,
                             spec(DriftKind::navier_stokes, Level::vorticity), {0.01, 0.05}, 4);
  const fs::path dir = fs::temp_directory_path() / "tsns_traj_test";
  fs::remove_all(dir);
  io::save_trajectory(traj, dir.string());
  EXPECT_TRUE(fs::exists(dir / "manifest.json"));
  EXPECT_TRUE(fs::exists(dir / "diagnostics.csv"));
  Level level;
  const SpectralField last = io::load_field((dir / "states" / io::state_filename(5)).string(), &level);
  EXPECT_EQ(level, Level::vorticity);
  EXPECT_TRUE(last == traj.final_state());
  std::ifstream is(dir / "noise.tsnoise", std::ios::binary);
  NoiseSpec back;
  const NoiseRecord rec = io::read_noise(is, &back);
  EXPECT_EQ(rec.steps(), 5u);
  EXPECT_TRUE(rec.dW[4] == traj.noise_record->dW[4]);
  EXPECT_EQ(back.level, Level::vorticity);
  fs::remove_all(dir);
}
