#include <gtest/gtest.h>

#include <cmath>

#include "support/fixtures.hpp"
#include "tsns/linearized/propagator.hpp"

using namespace tsns;
using tsns::testing::random_divfree;
using tsns::testing::random_field;
using tsns::testing::rel_diff;

namespace {

DriftSpec spec(DriftKind kind, Level level, double alpha = 1.0) {
  DriftSpec d;
  d.kind = kind;
  d.level = level;
  d.alpha = alpha;
  return d;
}

TrajectoryRecord ns_run(int n, double dt, double T, bool noiseless, std::uint64_t seed = 3) {
  const TorusGrid g(n);
  const NoiseSpec ns{1.0, 1.0, Level::vorticity};
  RngStream rng(seed, 0, StreamPurpose::initial);
  const SpectralField w0 = sample_gaussian_field({1.0, Level::vorticity}, g, rng, Support::dealiased);
  SimulationInputs in;
  in.noiseless = noiseless;
  IntegratorConfig cfg{dt, T};
  cfg.record_noise = false;
  return simulate(w0, ns, spec(DriftKind::navier_stokes, Level::vorticity), cfg, seed, 0, in);
}

LinearizationPath zero_path(int n, double dt, std::size_t steps, Level level = Level::vorticity, double gamma = 1.0) {
  const TorusGrid g(n);
  const SpectralField z(g, rank_of(level));
  return LinearizationPath(std::vector<SpectralField>(steps + 1, z), spec(DriftKind::linear, level),
                           NoiseSpec{1.0, gamma, level}, dt);
}

}  // namespace

TEST(DfApply, EulerIdentityAndZeroBase) {
  const TorusGrid g(32);
  const SpectralField w = random_field(g, Rank::scalar, 1, Support::dealiased);
  const SpectralField u = random_divfree(g, 2, Support::dealiased);
  for (auto [d, x] : {std::pair{spec(DriftKind::navier_stokes, Level::vorticity), w},
                      std::pair{spec(DriftKind::twisted, Level::hat, 1.3), w},
                      std::pair{spec(DriftKind::navier_stokes, Level::velocity), u},
                      std::pair{spec(DriftKind::twisted, Level::velocity), u}}) {
    EXPECT_LE(rel_diff(df_apply(d, x, x), 2.0 * evaluate_drift(d, x)), 1e-13);
    EXPECT_EQ(l2_norm(df_apply(d, SpectralField(g, x.rank()), x)), 0.0);
  }
  EXPECT_THROW(df_apply(spec(DriftKind::navier_stokes, Level::vorticity), w, u), std::invalid_argument);
}

TEST(DfApply, FiniteDifferenceSlopeIsOne) {
  const TorusGrid g(32);
  const DriftSpec d = spec(DriftKind::navier_stokes, Level::vorticity);
  const SpectralField u = random_field(g, Rank::scalar, 3, Support::dealiased);
  const SpectralField v = random_field(g, Rank::scalar, 4, Support::dealiased);
  const SpectralField Fu = evaluate_drift(d, u), J = df_apply(d, u, v);
  std::vector<double> eps, err;
  for (double e : {1e-3, 1e-4, 1e-5, 1e-6}) {
    eps.push_back(e);
    err.push_back(l2_norm((evaluate_drift(d, u + e * v) - Fu) * (1.0 / e) - J));
  }
  EXPECT_NEAR(stats::fit_loglog(eps, err, 10.0).slope, 1.0, 0.05);
}

TEST(Propagator, IdentityFlowAndLinearity) {
  const TrajectoryRecord traj = ns_run(32, 1e-3, 0.05, false);
  const LinearizationPath path(traj);
  const TorusGrid& g = path.grid();
  const SpectralField v = random_field(g, Rank::scalar, 5, Support::dealiased);
  const SpectralField w = random_field(g, Rank::scalar, 6, Support::dealiased);
  EXPECT_TRUE(propagate_j(path, 0.02, 0.02, v) == v);
  const SpectralField direct = propagate_j(path, 0.01, 0.05, v);
  const SpectralField composed = propagate_j(path, 0.03, 0.05, propagate_j(path, 0.01, 0.03, v));
  EXPECT_LE(rel_diff(composed, direct), 10.0 * path.dt());
  const SpectralField lin = propagate_j(path, 0.0, 0.05, 2.0 * v - 3.0 * w);
  EXPECT_LE(rel_diff(lin, 2.0 * propagate_j(path, 0.0, 0.05, v) - 3.0 * propagate_j(path, 0.0, 0.05, w)), 1e-10);
  EXPECT_THROW(propagate_j(path, 0.0105, 0.02, v), std::invalid_argument);
  EXPECT_THROW(propagate_j(path, 0.03, 0.02, v), std::invalid_argument);
  EXPECT_THROW(propagate_j(path, 0.0, 0.06, v), std::invalid_argument);
}

TEST(Propagator, OperatorIsLinearAtEveryCachedState) {
  const TorusGrid g(32);
  const NoiseSpec ns{1.0, 1.0, Level::vorticity};
  DriftSpec d = spec(DriftKind::interpolated, Level::vorticity);
  d.s = 0.4;
  CutoffSpec cs;
  cs.R = 0.5;  // puts every state on the slope of the smooth cutoff
  d.cutoff = cs;
  std::vector<SpectralField> states;
  for (std::uint64_t i = 0; i < 4; ++i) states.push_back(random_field(g, Rank::scalar, 40 + i, Support::dealiased));
  const LinearizationPath path(states, d, ns, 1e-3);
  const SpectralField a = random_field(g, Rank::scalar, 7, Support::dealiased);
  const SpectralField b = random_field(g, Rank::scalar, 8, Support::dealiased);
  for (std::size_t q = 0; q < states.size(); ++q) {
    EXPECT_LE(rel_diff(path.apply(q, a + b), path.apply(q, a) + path.apply(q, b)), 1e-10);
    EXPECT_LE(rel_diff(path.apply(q, a), drift_derivative(d, states[q], a)), 1e-12);
  }
}

TEST(Propagator, LinearPathIsTheSemigroupBitForBit) {
  const LinearizationPath path = zero_path(32, 1e-3, 100);
  const SpectralField v = random_field(path.grid(), Rank::scalar, 9);
  EXPECT_TRUE(propagate_j(path, 0.01, 0.07, v) == semigroup_apply(v, 0.07 - 0.01, 1.0));
  EXPECT_TRUE(propagate_steps(path, 10, 70, v) == semigroup_apply(v, 60 * 1e-3, 1.0));
}

TEST(Propagator, JacobianMatchesFiniteDifferenceOfTheFlow) {
  const TrajectoryRecord base = ns_run(32, 2e-3, 0.1, true);
  const LinearizationPath path(base);
  const SpectralField v = random_field(path.grid(), Rank::scalar, 10, Support::dealiased);
  const SpectralField Jv = propagate_j(path, 0.0, 0.1, v);
  SimulationInputs in;
  in.noiseless = true;
  IntegratorConfig cfg = base.integrator;
  cfg.record_stride = 0;
  std::vector<double> eps, err;
  for (double e : {1e-2, 1e-3, 1e-4, 1e-5}) {
    const SpectralField xe = simulate(base.states[0] + e * v, base.noise, base.drift, cfg, 0, 0, in).final_state();
    eps.push_back(e);
    err.push_back(rel_diff((xe - base.final_state()) * (1.0 / e), Jv));
  }
  EXPECT_GE(stats::fit_loglog(eps, err, 10.0).slope, 0.8);
  EXPECT_LE(err.back(), 1e-3);
}

TEST(GainProbe, ZeroPathIsFlatAboveTheSmoothingScale) {
  // lags from N_max^{-2 gamma} = 1/64 to 1
  const LinearizationPath path = zero_path(32, 1.0 / 256, 256);
  GainProbeOptions opt;
  opt.lags = {4, 8, 16, 32, 64, 128, 256};
  const StatReport r = regularity_gain_probe(path, 0.25, 0.5, opt);
  EXPECT_LE(std::abs(r.get("fit_slope")), 0.2);
  EXPECT_TRUE(r.find_verdict("bounded").pass);
  EXPECT_EQ(r.rows.size(), 7u);
}

TEST(GainProbe, NoGainRequestedGivesBoundedRatio) {
  const LinearizationPath path = zero_path(32, 1.0 / 256, 64);
  const StatReport r = regularity_gain_probe(path, 0.0, 1.0);
  EXPECT_LE(r.get("max_ratio"), 1.0 + 1e-12);
  EXPECT_TRUE(r.find_verdict("bounded").pass);
}

TEST(GainProbe, NavierStokesPathStaysBounded) {
  const TrajectoryRecord traj = ns_run(32, 1.0 / 1024, 0.5, false);
  const LinearizationPath path(traj);
  const StatReport r = regularity_gain_probe(path, 0.25, 0.5);
  EXPECT_TRUE(r.find_verdict("bounded").pass) << r.get("fit_slope");
  EXPECT_NEAR(r.rows.back()[1] - r.rows.front()[1], 0.5 - 1.0 / 1024, 1e-12);
}

TEST(GainProbe, ExponentConstraintsAreNamed) {
  const LinearizationPath path = zero_path(16, 0.01, 8);
  try {
    regularity_gain_probe(path, 0.25, 0.2);
    FAIL();
  } catch (const std::invalid_argument& e) {
    EXPECT_NE(std::string(e.what()).find("lower exponent"), std::string::npos);
  }
  try {
    regularity_gain_probe(path, 0.5, 1.2);
    FAIL();
  } catch (const std::invalid_argument& e) {
    EXPECT_NE(std::string(e.what()).find("upper exponent"), std::string::npos);
  }
  EXPECT_THROW(regularity_gain_probe(path, 1.0, 0.5), std::invalid_argument);
}

TEST(PropagatorDifference, EqualPathsGiveZero) {
  const TrajectoryRecord traj = ns_run(16, 1e-2, 0.1, false);
  const LinearizationPath A(traj), B(traj);
  const SpectralField v = random_field(A.grid(), Rank::scalar, 11, Support::dealiased);
  const StatReport r = propagator_difference(A, B, 0, 10, v);
  EXPECT_EQ(r.get("direct_l2"), 0.0);
  EXPECT_EQ(r.get("voc_l2"), 0.0);
  EXPECT_TRUE(r.find_verdict("variation_of_constants").pass);
}

TEST(PropagatorDifference, LinearInThePerturbationAndTelescopes) {
  const TrajectoryRecord traj = ns_run(16, 1e-2, 0.2, false);
  const LinearizationPath A(traj);
  const SpectralField v = random_field(A.grid(), Rank::scalar, 12, Support::dealiased);
  const auto& m = A.grid().modes();
  std::vector<double> eps, diff;
  for (double e : {1e-2, 5e-3, 2.5e-3, 1.25e-3}) {
    LinearizationPath B(traj);
    B.perturbation.assign(A.grid().spectral_size(), 0.0);
    for (std::size_t s = 0; s < m.norm.size(); ++s) B.perturbation[s] = e * std::cos(double(m.k1[s] + 2 * m.k2[s]));
    const StatReport r = propagator_difference(A, B, 0, 20, v);
    EXPECT_TRUE(r.find_verdict("variation_of_constants").pass) << r.get("relative_disagreement");
    EXPECT_LE(r.get("relative_disagreement"), 1e-10);
    EXPECT_GT(r.get("bound_scale"), 0.0);
    eps.push_back(e);
    diff.push_back(r.get("difference_norm"));
  }
  EXPECT_NEAR(stats::fit_loglog(eps, diff).slope, 1.0, 0.1);
}

TEST(PropagatorDifference, RejectsMismatchedPaths) {
  const LinearizationPath A = zero_path(16, 0.01, 8), B = zero_path(16, 0.01, 9), C = zero_path(32, 0.01, 8);
  const SpectralField v = random_field(A.grid(), Rank::scalar, 1);
  EXPECT_THROW(propagator_difference(A, B, 0, 4, v), std::invalid_argument);
  EXPECT_THROW(propagator_difference(A, C, 0, 4, v), std::invalid_argument);
}
