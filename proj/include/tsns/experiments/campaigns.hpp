#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

#include "tsns/dynamics/diagnostics.hpp"
#include "tsns/dynamics/drifts.hpp"
#include "tsns/dynamics/trajectory_io.hpp"
#include "tsns/experiments/context.hpp"
#include "tsns/experiments/parallel.hpp"
#include "tsns/girsanov/shift.hpp"
#include "tsns/linearized/propagator.hpp"

namespace tsns::experiments {

namespace detail {

inline double rel_diff(const SpectralField& a, const SpectralField& b) {
  return l2_norm(a - b) / std::max(l2_norm(b), 1e-300);
}

/// Divergence-free velocity with |u^(k)| = |k|^{-beta-1} and uniform phases
/// on the dealiased set, a C^beta field up to logarithms.
inline SpectralField power_law_velocity(const TorusGrid& grid, double beta, std::uint64_t seed, std::uint32_t draw) {
  const auto& m = grid.modes();
  RngStream rng(seed, draw, StreamPurpose::phases);
  SpectralField z = SpectralField::scalar(grid);
  for (std::size_t s : m.canonical_dealiased)
    z.set_coefficient(grid.wavenumber(s), std::polar(std::pow(m.norm[s], -beta - 1.0), 2.0 * std::numbers::pi * rng.uniform()));
  return polarize(z);
}

/// Mean over draws of log2 of a per-block norm.
struct BlockAverage {
  std::map<int, double> sup, l2;
  int draws = 0;

  void add(const SpectralField& f) {
    for (int N : dyadic_scales(f.grid())) {
      const SpectralField b = lp_project(f, N);
      sup[N] += std::log2(std::max(max_abs(to_physical(b)), 1e-300));
      l2[N] += std::log2(std::max(l2_norm(b), 1e-300));
    }
    ++draws;
  }

  static double slope(const std::map<int, double>& acc, int draws, int lo, int hi) {
    std::vector<double> x, y;
    for (const auto& [N, v] : acc)
      if (N >= lo && N <= hi) {
        x.push_back(std::log2(double(N)));
        y.push_back(v / draws);
      }
    if (x.size() < 2) return std::nan("");
    return stats::fit_line(x, y).slope;
  }
  double sup_slope(int lo, int hi) const { return slope(sup, draws, lo, hi); }
  double l2_slope(int lo, int hi) const { return slope(l2, draws, lo, hi); }
};

inline SpectralField random_scalar(const TorusGrid& grid, std::uint64_t seed, std::uint32_t i, std::uint32_t sub,
                                   Support support) {
  RngStream rng(seed, i, StreamPurpose::test, sub);
  return sample_white(grid, rng, support);
}

inline SpectralField random_vector(const TorusGrid& grid, std::uint64_t seed, std::uint32_t i, Support support) {
  SpectralField u = SpectralField::vector(grid);
  for (std::uint32_t c = 0; c < 2; ++c) {
    const SpectralField f = random_scalar(grid, seed, i, 10 + c, support);
    std::copy(f.component(0).begin(), f.component(0).end(), u.component(c).begin());
  }
  return u;
}

}  // namespace detail

/// G_alpha dyadic sup-norm slopes over an (alpha, beta) grid against
/// -min(beta, 2 beta - 1); the naive drift against 1 - beta; and the rough
/// symbol against the smooth one.
inline std::vector<StatReport> commutator_campaign(const ExperimentConfig& cfg, RunContext& ctx) {
  for (const auto& [a, b] : cfg.commutator_grid)
    if (!(b > a / 2.0))
      throw std::invalid_argument("commutator: hypothesis beta > alpha / 2 violated at (alpha, beta) = (" +
                                  StatReport::format(a) + ", " + StatReport::format(b) + ")");
  const TorusGrid grid(cfg.n);
  const double tol = cfg.thresholds.slope_tolerance;
  const int lo = cfg.fit_lo, hi = cfg.fit_hi;
  StatReport r;
  r.title = "commutator";
  r.seed = cfg.seed;
  r.columns = {"alpha", "beta", "g_slope", "g_target", "g_pass", "naive_slope", "naive_target", "naive_pass",
               "g_l2_slope", "naive_l2_slope", "g_max_abs"};
  const std::size_t rows = cfg.commutator_grid.size();
  std::vector<detail::BlockAverage> G(rows), naive(rows);
  std::vector<double> gmax(rows, 0.0);
  for (int p = 0; p < cfg.phases; ++p) {
    std::vector<SpectralField> gs(rows), ns(rows);
    parallel_for(rows, ctx.threads, [&](std::size_t i) {
      const auto [alpha, beta] = cfg.commutator_grid[i];
      const SpectralField u = detail::power_law_velocity(grid, beta, cfg.seed, std::uint32_t(p));
      gs[i] = commutator_g(u, alpha);
      ns[i] = leray_project(tsns::detail::advect_vector(u, u));
    });
    for (std::size_t i = 0; i < rows; ++i) {
      gmax[i] = std::max(gmax[i], coefficient_l1(gs[i]));
      G[i].add(gs[i]);
      naive[i].add(ns[i]);
    }
  }
  bool all_g = true, all_naive = true;
  for (std::size_t i = 0; i < rows; ++i) {
    const auto [alpha, beta] = cfg.commutator_grid[i];
    const double naive_slope = naive[i].sup_slope(lo, hi), naive_target = 1.0 - beta;
    const bool naive_pass = std::abs(naive_slope - naive_target) <= tol;
    all_naive = all_naive && naive_pass;
    if (alpha == 0.0) {
      // G_0 vanishes identically; the slope is undefined
      const bool zero = gmax[i] == 0.0;
      all_g = all_g && zero;
      r.add_row({alpha, beta, std::nan(""), std::nan(""), zero ? 1.0 : 0.0, naive_slope, naive_target,
                 naive_pass ? 1.0 : 0.0, std::nan(""), naive[i].l2_slope(lo, hi), gmax[i]});
      r.notes.push_back("alpha = 0 row: G is exactly zero (max coefficient sum " + StatReport::format(gmax[i]) + ")");
      continue;
    }
    const double g_slope = G[i].sup_slope(lo, hi), g_target = -std::min(beta, 2.0 * beta - 1.0);
    const bool g_pass = std::abs(g_slope - g_target) <= tol;
    all_g = all_g && g_pass;
    r.add_row({alpha, beta, g_slope, g_target, g_pass ? 1.0 : 0.0, naive_slope, naive_target, naive_pass ? 1.0 : 0.0,
               G[i].l2_slope(lo, hi), naive[i].l2_slope(lo, hi), gmax[i]});
  }

  detail::BlockAverage rough, smooth;
  for (int p = 0; p < cfg.phases; ++p) {
    const SpectralField u = detail::power_law_velocity(grid, cfg.rough_beta, cfg.seed, std::uint32_t(p));
    rough.add(rough_commutator(u, cfg.rough_alpha, cfg.gamma));
    smooth.add(commutator_g(u, cfg.rough_alpha + 1.0 - cfg.gamma));
  }
  const double rs = rough.sup_slope(lo, hi), ss = smooth.sup_slope(lo, hi);
  r.set("n", cfg.n);
  r.set("phases", cfg.phases);
  r.set("fit_lo", lo);
  r.set("fit_hi", hi);
  r.set("rough_alpha", cfg.rough_alpha);
  r.set("rough_beta", cfg.rough_beta);
  r.set("rough_slope", rs);
  r.set("smooth_slope", ss);
  r.set("rough_gap", rs - ss);
  r.verdict("g_slopes", all_g, "every G_alpha slope within " + StatReport::format(tol) + " of -min(beta, 2 beta - 1)");
  r.verdict("naive_slopes", all_naive, "every naive slope within " + StatReport::format(tol) + " of 1 - beta");
  r.verdict("rough_gap", rs - ss >= cfg.thresholds.rough_gap,
            "rough minus smooth slope " + StatReport::format(rs - ss));
  r.notes.push_back("slopes of the phase-averaged log2 sup norm of sharp dyadic blocks, N in [fit_lo, fit_hi]");
  r.notes.push_back("l2 slope columns are diagnostics of the same blocks in L^2");
  return {r};
}

/// Enstrophy budget of the vorticity NS drift: deterministic at dt and dt/2,
/// and the noise injection of a stochastic run.
inline std::vector<StatReport> enstrophy_experiment(const ExperimentConfig& cfg, RunContext& ctx) {
  const TorusGrid grid(cfg.n);
  const Level level = Level::vorticity;
  const NoiseSpec noise = noise_of(cfg, level);
  DriftSpec drift;
  drift.kind = DriftKind::navier_stokes;
  drift.level = level;
  drift.alpha = cfg.alpha;
  const SpectralField w0 = initial_state(cfg, grid, 0, level);
  const Thresholds& th = cfg.thresholds;

  auto deterministic = [&](double dt, const std::string& title) {
    SimulationInputs in;
    in.noiseless = true;
    IntegratorConfig ic{dt, cfg.T};
    ic.record_noise = false;
    const TrajectoryRecord traj = simulate(w0, noise, drift, ic, cfg.seed, 0, in);
    StatReport r = enstrophy_diagnostic(traj);
    r.title = title;
    return r;
  };
  std::vector<StatReport> out;
  out.push_back(deterministic(cfg.dt, "enstrophy_deterministic"));
  out.push_back(deterministic(0.5 * cfg.dt, "enstrophy_deterministic_half_dt"));

  IntegratorConfig ic{cfg.dt, cfg.T};
  const TrajectoryRecord noisy = simulate(w0, noise, drift, ic, cfg.seed, 0);
  if (ctx.persist()) {
    io::save_trajectory(noisy, ctx.path("stochastic_run"));
    ctx.artifact("stochastic_run/states", field_checksum(noisy.final_state()));
  }
  StatReport sto = enstrophy_diagnostic(noisy);
  sto.title = "enstrophy_stochastic";
  out.push_back(sto);

  const StatReport& a = out[0];
  const StatReport& b = out[1];
  StatReport s;
  s.title = "enstrophy_balance";
  s.seed = cfg.seed;
  const double transfer = std::max({a.get("max_transfer"), b.get("max_transfer"), sto.get("max_transfer")});
  const double ra = a.get("relative_residual"), rb = b.get("relative_residual");
  s.set("max_transfer", transfer);
  s.set("relative_residual", ra);
  s.set("relative_residual_half_dt", rb);
  s.set("residual_halving_ratio", ra > 0.0 ? rb / ra : 0.0);
  s.set("injection_z", sto.get("injection_z"));
  s.verdict("transfer", transfer <= th.transfer_tol, "max |<w, F(w)>| / (|w| |F(w)|) = " + StatReport::format(transfer));
  s.verdict("residual", ra <= th.residual_factor * cfg.dt, "relative residual " + StatReport::format(ra));
  s.verdict("residual_halving", ra == 0.0 || rb / ra <= th.residual_halving,
            "residual ratio under dt halving " + StatReport::format(ra > 0.0 ? rb / ra : 0.0));
  s.verdict("injection", std::abs(sto.get("injection_z")) <= th.se_z, "z = " + StatReport::format(sto.get("injection_z")));
  s.notes.push_back("vorticity level, Navier-Stokes drift; level and drift flags are not used here");
  out.push_back(s);
  return out;
}

/// Shift-ODE configuration of the NS -> twisted homotopy at vorticity level.
inline ShiftODEConfig shift_config(const ExperimentConfig& cfg, double dt) {
  const TorusGrid grid(cfg.n);
  ShiftODEConfig s;
  s.noise = noise_of(cfg, Level::vorticity);
  s.family.kind = DriftKind::interpolated;
  s.family.level = Level::vorticity;
  s.family.alpha = cfg.alpha;
  CutoffSpec cs;
  cs.R = cfg.R;
  cs.alpha = cfg.alpha;
  s.family.cutoff = cs;
  s.x0 = initial_state(cfg, grid, 0, Level::vorticity);
  s.T = cfg.T;
  s.dt = dt;
  s.R = cfg.R;
  s.picard_tolerance = cfg.picard_tolerance;
  s.max_picard = cfg.max_picard;
  s.s_intervals = cfg.s_intervals;
  return s;
}

inline StatReport solve_report(const ShiftSolution& sol, const ExperimentConfig& cfg, const std::string& title) {
  StatReport r;
  r.title = title;
  r.seed = cfg.seed;
  r.columns = {"interval", "s_end", "iterations", "final_distance", "contracting", "cm_norm"};
  bool contracting = true;
  for (std::size_t j = 0; j < sol.iterations.size(); ++j) {
    contracting = contracting && sol.contracting[j];
    r.add_row({double(j), sol.path.s[j + 1], double(sol.iterations[j]), sol.residuals[j].back(),
               sol.contracting[j] ? 1.0 : 0.0, sol.path.cm_norm(j + 1)});
  }
  r.set("dt", sol.path.dt);
  r.set("max_iterations", sol.max_iterations());
  r.set("sup_cm_norm", sol.sup_cm_norm);
  r.set("cutoff_activated", sol.cutoff_activated ? 1.0 : 0.0);
  r.verdict("picard_iterations", sol.max_iterations() <= cfg.thresholds.max_picard_iterations,
            "max " + std::to_string(sol.max_iterations()) + " per s-subinterval");
  r.verdict("contracting", contracting, "successive distances halve");
  r.verdict("no_cutoff", !sol.cutoff_activated, "chi and chi^sm stay at 1 along every solve");
  return r;
}

/// Shift-ODE solve, endpoint coupling, dt-order study on one coarsened fine
/// record, and causality at the configured cut fractions.
inline std::vector<StatReport> coupling_experiment(const ExperimentConfig& cfg, RunContext& ctx) {
  const TorusGrid grid(cfg.n);
  const Thresholds& th = cfg.thresholds;
  std::vector<StatReport> out;
  const ShiftODEConfig scfg = shift_config(cfg, cfg.dt);
  const NoiseRecord rec = generate_noise_record(grid, cfg.dt, scfg.steps(), cfg.seed, 0);

  ShiftSolution sol;
  try {
    sol = solve_shift_ode(rec, scfg, ctx.progress);
  } catch (const PicardDiverged& e) {
    StatReport r;
    r.title = "shift_solve";
    r.columns = {"iteration", "distance"};
    for (std::size_t i = 0; i < e.residuals.size(); ++i) r.add_row({double(i + 1), e.residuals[i]});
    r.verdict("picard_converged", false, e.what());
    ctx.failures.push_back(e.what());
    return {r};
  }
  out.push_back(solve_report(sol, cfg, "shift_solve"));
  if (ctx.persist()) {
    std::ofstream hs(ctx.path("shift_path.tsh"), std::ios::binary);
    io::write_shift_path(hs, sol.path);
    std::ofstream ns(ctx.path("noise.tsnoise"), std::ios::binary);
    io::write_noise(ns, rec, scfg.noise);
    ctx.artifact("shift_path.tsh", field_checksum(sol.path.final_path().back()));
  }

  const CouplingReport cr = coupling_check(rec, scfg, sol.path);
  StatReport c = cr.report();
  c.seed = cfg.seed;
  c.verdict("relative_error", cr.relative_error <= th.coupling_relative,
            "|X_T - Y_T| / |X_T - Y^0_T| = " + StatReport::format(cr.relative_error));
  c.verdict("no_cutoff", !cr.cutoff_activated, "X and Y stay inside the cutoff radius");
  out.push_back(c);

  // order study: the finest record is drawn once and coarsened exactly
  const double fine = cfg.order_dt_fine;
  const std::size_t fine_steps = std::size_t(std::llround(cfg.T / fine));
  if (std::abs(double(fine_steps) * fine - cfg.T) > 1e-9 * cfg.T || fine_steps % (std::size_t(1) << (cfg.order_levels - 1)))
    throw std::invalid_argument("coupling: T must be a multiple of order_dt_fine * 2^(order_levels - 1)");
  StatReport o;
  o.title = "coupling_order";
  o.seed = cfg.seed;
  o.columns = {"dt", "relative_error", "l2_error", "uncorrected_error", "max_iterations", "cutoff_activated"};
  std::vector<double> dts, errs;
  NoiseRecord level_rec = generate_noise_record(grid, fine, fine_steps, cfg.seed, 1);
  bool cut = false;
  for (int k = 0; k < cfg.order_levels; ++k) {
    if (k > 0) level_rec = coarsen(level_rec, cfg.gamma);
    const ShiftODEConfig oc = shift_config(cfg, level_rec.dt);
    const ShiftSolution os = solve_shift_ode(level_rec, oc);
    const CouplingReport ocr = coupling_check(level_rec, oc, os.path);
    cut = cut || os.cutoff_activated || ocr.cutoff_activated;
    o.add_row({level_rec.dt, ocr.relative_error, ocr.l2_error, ocr.uncorrected_error, double(os.max_iterations()),
               ocr.cutoff_activated ? 1.0 : 0.0});
    dts.push_back(level_rec.dt);
    errs.push_back(ocr.l2_error);
    ctx.note("order level dt " + StatReport::format(level_rec.dt) + " relative error " + StatReport::format(ocr.relative_error));
  }
  const stats::LineFit fit = stats::fit_loglog(dts, errs);
  o.set("fitted_order", fit.slope);
  o.set("fitted_order_se", fit.slope_se);
  o.verdict("dt_order", fit.slope >= th.order_min, "fitted order " + StatReport::format(fit.slope));
  o.verdict("no_cutoff", !cut, "no cutoff activation at any level");
  out.push_back(o);

  for (std::size_t j = 0; j < cfg.t_cut_fractions.size(); ++j) {
    const double f = cfg.t_cut_fractions[j];
    StatReport cz = causality_check(rec, scfg, sol, f * cfg.T, j + 1);
    cz.title = "causality_" + StatReport::format(f);
    cz.seed = cfg.seed;
    const double tol = th.causality_factor * cfg.picard_tolerance * std::max(1.0, sol.sup_cm_norm);
    cz.set("tolerance", tol);
    cz.verdicts.clear();
    cz.verdict("causal", cz.get("max_restricted_difference") <= tol,
               "sup_s |h_s - h'_s| on [0, t_cut) = " + StatReport::format(cz.get("max_restricted_difference")));
    out.push_back(cz);
  }
  return out;
}

/// <w, ns_drift(w)> and <vh, hat_twisted_drift(vh)> on M random dealiased fields.
inline std::vector<StatReport> conservation_experiment(const ExperimentConfig& cfg, RunContext& ctx) {
  const TorusGrid grid(cfg.n);
  std::vector<std::array<double, 2>> ratio(cfg.M);
  parallel_for(cfg.M, ctx.threads, [&](std::size_t i) {
    RngStream rw(cfg.seed, std::uint32_t(i), StreamPurpose::test, 1), rh(cfg.seed, std::uint32_t(i), StreamPurpose::test, 2);
    const SpectralField w = sample_gaussian_field({cfg.alpha, Level::vorticity}, grid, rw, Support::dealiased);
    const SpectralField vh = sample_gaussian_field({cfg.alpha, Level::hat}, grid, rh, Support::dealiased);
    ratio[i] = {transfer_ratio(w, ns_drift(w)), transfer_ratio(vh, hat_twisted_drift(vh, cfg.alpha))};
  });
  StatReport r;
  r.title = "conservation";
  r.seed = cfg.seed;
  r.columns = {"field", "ns_relative", "hat_twisted_relative"};
  double worst_ns = 0.0, worst_hat = 0.0;
  for (std::size_t i = 0; i < cfg.M; ++i) {
    r.add_row({double(i), ratio[i][0], ratio[i][1]});
    worst_ns = std::max(worst_ns, ratio[i][0]);
    worst_hat = std::max(worst_hat, ratio[i][1]);
  }
  r.set("max_ns_relative", worst_ns);
  r.set("max_hat_twisted_relative", worst_hat);
  r.verdict("ns_orthogonal", worst_ns <= cfg.thresholds.conservation_tol, StatReport::format(worst_ns));
  r.verdict("hat_twisted_orthogonal", worst_hat <= cfg.thresholds.conservation_tol, StatReport::format(worst_hat));
  return {r};
}

/// curl(biot_savart w) = w, P P u = P u, |grad|^a |grad|^b = |grad|^{a+b},
/// and the transform round trip on M random fields.
inline std::vector<StatReport> identities_experiment(const ExperimentConfig& cfg, RunContext& ctx) {
  const TorusGrid grid(cfg.n);
  std::vector<std::array<double, 4>> err(cfg.M);
  parallel_for(cfg.M, ctx.threads, [&](std::size_t i) {
    const auto id = std::uint32_t(i);
    const SpectralField w = detail::random_scalar(grid, cfg.seed, id, 1, Support::retained);
    const SpectralField u = detail::random_vector(grid, cfg.seed, id, Support::retained);
    RngStream rng(cfg.seed, id, StreamPurpose::test, 3);
    const double a = 2.0 * rng.uniform() - 1.0, b = 2.0 * rng.uniform() - 1.0;
    const SpectralField Pu = leray_project(u);
    err[i] = {detail::rel_diff(curl(biot_savart(w)), w), detail::rel_diff(leray_project(Pu), Pu),
              detail::rel_diff(fractional_power(fractional_power(w, a), b), fractional_power(w, a + b)),
              detail::rel_diff(to_spectral(to_physical(u)), u)};
  });
  StatReport r;
  r.title = "identities";
  r.seed = cfg.seed;
  r.columns = {"field", "curl_biot_savart", "leray_idempotent", "power_semigroup", "round_trip"};
  const char* names[4] = {"curl_biot_savart", "leray_idempotent", "power_semigroup", "round_trip"};
  std::array<double, 4> worst{};
  for (std::size_t i = 0; i < cfg.M; ++i) {
    r.add_row({double(i), err[i][0], err[i][1], err[i][2], err[i][3]});
    for (int k = 0; k < 4; ++k) worst[k] = std::max(worst[k], err[i][k]);
  }
  for (int k = 0; k < 4; ++k) {
    r.set(std::string("max_") + names[k], worst[k]);
    r.verdict(names[k], worst[k] <= cfg.thresholds.identity_tol, StatReport::format(worst[k]));
  }
  return {r};
}

/// Duhamel endpoint of the time-shifted drift against the original: matched
/// quadrature on M random paths, and the left-point rule under dt halving
/// for a path smooth in time.
inline std::vector<StatReport> time_shift_experiment(const ExperimentConfig& cfg, RunContext& ctx) {
  const TorusGrid grid(cfg.n);
  const std::size_t steps = cfg.steps();
  std::vector<double> matched(cfg.M);
  parallel_for(cfg.M, ctx.threads, [&](std::size_t i) {
    DriftPath Z;
    for (std::size_t q = 0; q < steps; ++q) {
      RngStream rng(cfg.seed, std::uint32_t(i), StreamPurpose::test, std::uint32_t(q));
      Z.push_back(sample_gaussian_field({cfg.alpha, Level::vorticity}, grid, rng, Support::dealiased));
    }
    matched[i] = detail::rel_diff(duhamel_endpoint(time_shift_drift(Z, cfg.dt, cfg.gamma), cfg.dt, cfg.gamma),
                                  duhamel_endpoint_matched(Z, cfg.dt, cfg.gamma));
  });
  StatReport m;
  m.title = "time_shift_matched";
  m.seed = cfg.seed;
  m.columns = {"path", "relative_difference"};
  double worst = 0.0;
  for (std::size_t i = 0; i < cfg.M; ++i) {
    m.add_row({double(i), matched[i]});
    worst = std::max(worst, matched[i]);
  }
  m.set("max_relative_difference", worst);
  m.verdict("matched", worst <= cfg.thresholds.matched_tol, StatReport::format(worst));

  RngStream ra(cfg.seed, 0, StreamPurpose::test, 1000), rb(cfg.seed, 0, StreamPurpose::test, 1001);
  const SpectralField A = sample_gaussian_field({cfg.alpha, Level::vorticity}, grid, ra, Support::dealiased);
  const SpectralField B = sample_gaussian_field({cfg.alpha, Level::vorticity}, grid, rb, Support::dealiased);
  StatReport u;
  u.title = "time_shift_unmatched";
  u.seed = cfg.seed;
  u.columns = {"dt", "relative_difference"};
  std::vector<double> dts, errs;
  for (int k = 0; k <= cfg.order_levels; ++k) {
    const double dt = cfg.dt / double(1 << k);
    const std::size_t M = steps << k;
    DriftPath Z;
    for (std::size_t q = 0; q < M; ++q) {
      const double t = double(q) * dt;
      Z.push_back(std::cos(2.0 * std::numbers::pi * t / cfg.T) * A + (t / cfg.T) * B);
    }
    const double e = detail::rel_diff(duhamel_endpoint(time_shift_drift(Z, dt, cfg.gamma), dt, cfg.gamma),
                                      duhamel_endpoint(Z, dt, cfg.gamma));
    u.add_row({dt, e});
    dts.push_back(dt);
    errs.push_back(e);
  }
  const double order = stats::fit_loglog(dts, errs).slope;
  u.set("fitted_order", order);
  u.verdict("first_order", order >= cfg.thresholds.order_min, "fitted order " + StatReport::format(order));
  return {m, u};
}

/// E[exp(log-density)] for bounded deterministic drifts, and an
/// importance-sampling estimate of a linear hat-level mean.
inline std::vector<StatReport> girsanov_experiment(const ExperimentConfig& cfg, RunContext& ctx) {
  const TorusGrid grid(cfg.n);
  const std::size_t steps = cfg.steps();
  const std::size_t N = cfg.mc_samples;
  const double z = cfg.thresholds.se_z;

  std::vector<DriftPath> drifts(2);
  {
    SpectralField c = SpectralField::scalar(grid);
    c.set_coefficient({1, 0}, 1.0);
    drifts[0] = DriftPath(steps, c);
    RngStream rng(cfg.seed, 0, StreamPurpose::test, 7);
    const SpectralField a = sample_white(grid, rng, Support::dealiased);
    const SpectralField unit = (1.0 / l2_norm(a)) * a;
    for (std::size_t q = 0; q < steps; ++q)
      drifts[1].push_back(std::sin(2.0 * std::numbers::pi * double(q) * cfg.dt / cfg.T) * unit);
  }
  const char* names[2] = {"constant_mode", "time_varying"};

  // linear hat system from x0 = e_{(1,0)}; observable Re x_T(1,0)
  const NoiseSpec noise{cfg.alpha, cfg.gamma, Level::hat};
  DriftSpec lin;
  lin.kind = DriftKind::linear;
  lin.level = Level::hat;
  lin.alpha = cfg.alpha;
  SpectralField x0 = SpectralField::scalar(grid);
  x0.set_coefficient({1, 0}, 1.0);
  const double oracle = std::exp(-cfg.T);  // |k| = 1
  DriftPath is_shift(steps);
  {
    SpectralField c = SpectralField::scalar(grid);
    c.set_coefficient({1, 0}, 1.5);
    std::fill(is_shift.begin(), is_shift.end(), c);
  }
  const std::size_t slot = grid.slot({1, 0});

  std::vector<std::array<double, 4>> v(N);
  parallel_for(N, ctx.threads, [&](std::size_t i) {
    const NoiseRecord rec = generate_noise_record(grid, cfg.dt, steps, cfg.seed, std::uint32_t(i));
    v[i][0] = std::exp(girsanov_log_density(drifts[0], rec));
    v[i][1] = std::exp(girsanov_log_density(drifts[1], rec));
    SimulationInputs in;
    in.noise = &rec;
    in.shift = &is_shift;
    const IntegratorConfig ic = endpoint_integrator(cfg.dt, cfg.T);
    const double phi = simulate(x0, noise, lin, ic, cfg.seed, std::uint32_t(i), in).final_state().component(0)[slot].real();
    v[i][2] = phi * std::exp(girsanov_log_density(is_shift, rec));
    v[i][3] = phi;
  });
  StatReport r;
  r.title = "girsanov";
  r.seed = cfg.seed;
  r.columns = {"sample", "density_constant_mode", "density_time_varying", "weighted_observable", "shifted_observable"};
  for (std::size_t i = 0; i < N; ++i) r.add_row({double(i), v[i][0], v[i][1], v[i][2], v[i][3]});
  for (int d = 0; d < 3; ++d) {
    std::vector<double> col(N);
    for (std::size_t i = 0; i < N; ++i) col[i] = v[i][d];
    const double mean = stats::mean(col), se = stats::standard_error(col);
    const double target = d < 2 ? 1.0 : oracle;
    const std::string name = d < 2 ? std::string("normalisation_") + names[d] : "importance_sampling";
    r.set(name + "_mean", mean);
    r.set(name + "_se", se);
    r.set(name + "_z", (mean - target) / se);
    r.verdict(name, std::abs(mean - target) <= z * se,
              "mean " + StatReport::format(mean) + " vs " + StatReport::format(target) + ", SE " + StatReport::format(se));
  }
  std::vector<double> raw(N);
  for (std::size_t i = 0; i < N; ++i) raw[i] = v[i][3];
  const double raw_mean = stats::mean(raw), raw_se = stats::standard_error(raw);
  r.set("oracle_mean", oracle);
  r.set("unweighted_shifted_mean", raw_mean);
  r.verdict("unweighted_is_biased", std::abs(raw_mean - oracle) > z * raw_se,
            "the shifted system alone misses the oracle", false);
  return {r};
}

/// Jacobian against finite differences of the flow, the flow property, and
/// bit-exact reduction to the semigroup for A = 0.
inline std::vector<StatReport> propagator_experiment(const ExperimentConfig& cfg, RunContext&) {
  const TorusGrid grid(cfg.n);
  const NoiseSpec noise = noise_of(cfg, Level::vorticity);
  DriftSpec ns;
  ns.kind = DriftKind::navier_stokes;
  ns.level = Level::vorticity;
  ns.alpha = cfg.alpha;
  const SpectralField w0 = initial_state(cfg, grid, 0, Level::vorticity);
  RngStream rv(cfg.seed, 0, StreamPurpose::test, 1);
  const SpectralField v = sample_gaussian_field({cfg.alpha, Level::vorticity}, grid, rv, Support::dealiased);

  StatReport r;
  r.title = "propagator";
  r.seed = cfg.seed;
  r.columns = {"epsilon", "fd_relative_error"};
  SimulationInputs quiet;
  quiet.noiseless = true;
  IntegratorConfig ic{cfg.dt, cfg.T};
  ic.record_noise = false;
  const TrajectoryRecord base = simulate(w0, noise, ns, ic, cfg.seed, 0, quiet);
  const LinearizationPath path(base);
  const SpectralField Jv = propagate_steps(path, 0, path.steps(), v);
  IntegratorConfig ends = endpoint_integrator(cfg.dt, cfg.T);
  std::vector<double> eps, err;
  for (double e : {1e-2, 1e-3, 1e-4, 1e-5}) {
    const SpectralField xe = simulate(w0 + e * v, noise, ns, ends, cfg.seed, 0, quiet).final_state();
    const double d = detail::rel_diff((xe - base.final_state()) * (1.0 / e), Jv);
    r.add_row({e, d});
    eps.push_back(e);
    err.push_back(d);
  }
  const double order = stats::fit_loglog(eps, err, 10.0).slope;
  r.set("fd_order", order);

  const TrajectoryRecord noisy = simulate(w0, noise, ns, ic, cfg.seed, 1);
  const LinearizationPath np(noisy);
  const std::size_t M = np.steps(), a = M / 5, b = M / 2;
  const SpectralField direct = propagate_steps(np, a, M, v);
  const SpectralField composed = propagate_steps(np, b, M, propagate_steps(np, a, b, v));
  const double flow = detail::rel_diff(composed, direct);
  r.set("flow_defect", flow);

  DriftSpec zero;
  zero.kind = DriftKind::linear;
  zero.level = Level::vorticity;
  const LinearizationPath lp(std::vector<SpectralField>(M + 1, SpectralField::scalar(grid)), zero, noise, cfg.dt);
  const bool exact = propagate_steps(lp, a, M, v) == semigroup_apply(v, double(M - a) * cfg.dt, cfg.gamma);
  r.set("zero_path_exact", exact ? 1.0 : 0.0);

  r.verdict("jacobian_fd_order", order >= cfg.thresholds.order_min, "fitted order " + StatReport::format(order));
  r.verdict("flow_property", flow <= cfg.thresholds.flow_factor * cfg.dt, "defect " + StatReport::format(flow));
  r.verdict("zero_path_semigroup", exact, "J equals P_{t-s} bit for bit when A = 0");
  return {r};
}

}  // namespace tsns::experiments
