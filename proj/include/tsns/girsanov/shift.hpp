#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "tsns/dynamics/integrator.hpp"
#include "tsns/experiments/report.hpp"
#include "tsns/experiments/stats.hpp"
#include "tsns/linearized/propagator.hpp"
#include "tsns/spectral/field_io.hpp"

namespace tsns {

/// A white-level drift path on the step grid: h[q] acts on [q dt, (q+1) dt).
using DriftPath = std::vector<SpectralField>;

/// First step index q with 2 q >= M, i.e. q dt >= T / 2.
inline std::size_t second_half_start(std::size_t steps) { return (steps + 1) / 2; }

/// t_q -> 2 P_{T - t_q} Z(2 t_q - T) on 2 t_q >= T, else 0.  `Z` holds one
/// field per step (at least M entries); 2 q - M is always a grid index.
inline DriftPath time_shift_drift(const DriftPath& Z, double dt, double gamma) {
  const std::size_t M = Z.size();
  DriftPath out(M);
  const TorusGrid& grid = Z.at(0).grid();
  for (std::size_t q = 0; q < M; ++q) {
    if (2 * q < M) {
      out[q] = SpectralField(grid, Z[0].rank());
      continue;
    }
    out[q] = semigroup_apply(Z[2 * q - M], double(M - q) * dt, gamma);
    out[q] *= 2.0;
  }
  return out;
}

/// Left-point Duhamel sum sum_q dt P_{T - t_q} Z_q.
inline SpectralField duhamel_endpoint(const DriftPath& Z, double dt, double gamma) {
  const std::size_t M = Z.size();
  SpectralField acc(Z.at(0).grid(), Z[0].rank());
  for (std::size_t q = 0; q < M; ++q) acc.axpy(dt, semigroup_apply(Z[q], double(M - q) * dt, gamma));
  return acc;
}

/// The quadrature the shifted sum induces on the original drift: weight 2 dt
/// at the nodes r = 2 q - M, q >= M / 2.
inline SpectralField duhamel_endpoint_matched(const DriftPath& Z, double dt, double gamma) {
  const std::size_t M = Z.size();
  SpectralField acc(Z.at(0).grid(), Z[0].rank());
  for (std::size_t q = second_half_start(M); q < M; ++q) {
    const std::size_t r = 2 * q - M;
    acc.axpy(2.0 * dt, semigroup_apply(Z[r], double(M - r) * dt, gamma));
  }
  return acc;
}

/// ||h||_{L^2([0,T]; L^2)} by the step quadrature.
inline double cameron_martin_norm(const DriftPath& h, double dt, std::size_t from = 0, std::size_t to = SIZE_MAX) {
  double acc = 0.0;
  for (std::size_t q = from; q < std::min(to, h.size()); ++q)
    if (!h[q].empty()) acc += dt * norm2(h[q]);
  return std::sqrt(acc);
}

/// -sum_q <h_q, dW_q> - 1/2 ||h||^2_{L^2_T L^2} (left-point Ito sum).
inline double girsanov_log_density(const DriftPath& h, const NoiseRecord& noise) {
  if (h.size() > noise.steps()) throw std::invalid_argument("girsanov_log_density: noise record too short");
  double stoch = 0.0, quad = 0.0;
  for (std::size_t q = 0; q < h.size(); ++q) {
    if (h[q].empty()) continue;
    stoch += inner(h[q], noise.dW[q]);
    quad += noise.dt * norm2(h[q]);
  }
  return -stoch - 0.5 * quad;
}

/// Interpolated (or forcing) drift family with shift h_s, solved on a homotopy grid in s.
struct ShiftODEConfig {
  NoiseSpec noise;
  DriftSpec family;        // interpolated or forcing; s is overwritten
  SpectralField x0;
  double T = 0.25;
  double dt = 1e-3;
  double R = 50.0;          // Lipschitz cutoff radius; the drift's chi^sm uses family.cutoff
  bool lipschitz_cutoff = true;
  double picard_tolerance = 1e-6;
  int max_picard = 50;
  int s_intervals = 8;
  Scheme scheme = Scheme::exponential_euler;

  std::size_t steps() const { return std::size_t(std::llround(T / dt)); }

  void validate() const {
    noise.validate();
    if (!(T > 0.0)) throw std::invalid_argument("ShiftODEConfig: T must be > 0");
    if (!(picard_tolerance > 0.0)) throw std::invalid_argument("ShiftODEConfig: tolerance must be > 0");
    if (max_picard < 1 || s_intervals < 1) throw std::invalid_argument("ShiftODEConfig: need positive iteration and interval counts");
    if (!(R > 0.0)) throw std::invalid_argument("ShiftODEConfig: R must be > 0");
    if (family.kind != DriftKind::interpolated && family.kind != DriftKind::forcing)
      throw std::invalid_argument("ShiftODEConfig: family must be interpolated or forcing");
    if (family.level != noise.level) throw std::invalid_argument("ShiftODEConfig: drift and noise levels differ");
    if (x0.empty() || x0.rank() != rank_of(noise.level)) throw std::invalid_argument("ShiftODEConfig: bad initial state");
    IntegratorConfig{dt, T}.validate();
  }

  IntegratorConfig integrator() const {
    IntegratorConfig c;
    c.dt = dt;
    c.T = T;
    c.scheme = scheme;
    c.kappa = family.cutoff ? family.cutoff->kappa : 0.05;
    c.blowup_threshold = 1e6;
    return c;
  }

  /// Norm scale of the Lipschitz cutoff: the drift's, else a default at alpha.
  CutoffSpec lipschitz_spec() const {
    CutoffSpec c = family.cutoff.value_or(CutoffSpec{});
    if (!family.cutoff) c.alpha = noise.alpha;
    c.R = R;
    return c;
  }
};

/// h_s at the homotopy nodes s_j; every path has M entries, zero for q dt < T / 2.
struct ShiftPath {
  double T = 0.0;
  double dt = 0.0;
  std::vector<double> s;
  std::vector<DriftPath> h;

  std::size_t steps() const { return std::size_t(std::llround(T / dt)); }
  std::size_t first() const { return second_half_start(steps()); }
  const DriftPath& final_path() const { return h.back(); }
  double cm_norm(std::size_t j) const { return cameron_martin_norm(h.at(j), dt); }
};

inline DriftPath zero_drift_path(const TorusGrid& grid, std::size_t steps) {
  return DriftPath(steps, SpectralField::scalar(grid));
}

/// Cutoff values seen along one run.
struct CutoffLog {
  std::vector<double> smooth;     // chi^sm_{2R}(X_q) inside the drift
  std::vector<double> lipschitz;  // chi_{2R}(X_q)
  bool activated() const {
    for (double c : smooth)
      if (c < 1.0) return true;
    for (double c : lipschitz)
      if (c < 1.0) return true;
    return false;
  }
};

inline CutoffLog cutoff_log(const std::vector<SpectralField>& states, const ShiftODEConfig& cfg) {
  CutoffLog log;
  const CutoffSpec lc = cfg.lipschitz_spec();
  for (const auto& x : states) {
    log.smooth.push_back(drift_cutoff(cfg.family, x));
    log.lipschitz.push_back(cfg.lipschitz_cutoff ? chi_lipschitz(x, cfg.noise.level, lc, 2.0 * cfg.R) : 1.0);
  }
  return log;
}

/// Simulation of X^{(h, s)} on the recorded noise, every step stored.
inline TrajectoryRecord shifted_trajectory(const DriftPath& h, double s, const NoiseRecord& noise,
                                           const ShiftODEConfig& cfg) {
  SimulationInputs in;
  in.noise = &noise;
  in.shift = &h;
  IntegratorConfig ic = cfg.integrator();
  ic.record_noise = false;
  return simulate(cfg.x0, cfg.noise, cfg.family.with_s(s), ic, noise.seed, noise.trajectory, in);
}

/// Inverse of the shift colouring: the returned white field h satisfies
/// sqrt(2) m h = y on the dealiased set.
inline SpectralField uncolour(const SpectralField& y, const NoiseSpec& noise) {
  const SpectralField z = noise.level == Level::velocity ? depolarize(y) : y;
  const auto& m = z.grid().modes();
  return apply_symbol(z, [&](std::size_t slot) {
    if (!m.dealiased[slot]) return 0.0;
    return 1.0 / (std::numbers::sqrt2 * noise.multiplier(m.norm[slot]));
  });
}

struct ShiftRhs {
  DriftPath value;  // d/ds h_s
  CutoffLog cutoffs;
};

/// d/ds h_s(tau_q) = -2 (sqrt(2) m)^{-1} J_{2q-M, q}[d_s F_s(X_{2q-M})] chi_{2R}(X_{2q-M})
/// for 2 q >= M, zero before.
inline ShiftRhs shift_rhs(const DriftPath& h, double s, const NoiseRecord& noise, const ShiftODEConfig& cfg) {
  const std::size_t M = cfg.steps();
  if (noise.steps() < M) throw std::invalid_argument("shift_rhs: noise record does not cover [0, T]");
  const TorusGrid& grid = cfg.x0.grid();
  ShiftRhs out;
  out.value = zero_drift_path(grid, M);
  TrajectoryRecord traj = shifted_trajectory(h, s, noise, cfg);
  out.cutoffs = cutoff_log(traj.states, cfg);
  const DriftSpec drift = cfg.family.with_s(s);
  const LinearizationPath path(std::move(traj.states), drift, cfg.noise, cfg.dt);
  for (std::size_t q = second_half_start(M); q < M; ++q) {
    const std::size_t r = 2 * q - M;
    const double chi = out.cutoffs.lipschitz[r];
    if (chi == 0.0) continue;
    const SpectralField dsF = drift_s_derivative(drift, path.state(r));
    if (l2_norm(dsF) == 0.0) continue;
    SpectralField y = propagate_steps(path, r, q, dsF);
    y *= -2.0 * chi;
    out.value[q] = uncolour(y, cfg.noise);
  }
  return out;
}

struct PicardDiverged : std::runtime_error {
  std::vector<double> residuals;
  PicardDiverged(const std::string& what, std::vector<double> r) : std::runtime_error(what), residuals(std::move(r)) {}
};

struct ShiftSolution {
  ShiftPath path;
  std::vector<int> iterations;                   // per s-subinterval
  std::vector<std::vector<double>> residuals;    // successive-iterate distances
  std::vector<bool> contracting;                 // every distance at most half the previous
  bool cutoff_activated = false;
  double sup_cm_norm = 0.0;
  int max_iterations() const { return iterations.empty() ? 0 : *std::max_element(iterations.begin(), iterations.end()); }
};

namespace detail {
inline double path_distance(const DriftPath& a, const DriftPath& b, double dt) {
  double acc = 0.0;
  for (std::size_t q = 0; q < a.size(); ++q) acc += dt * norm2(a[q] - b[q]);
  return std::sqrt(acc);
}

/// a + sum_i c_i f_i
inline DriftPath combine(const DriftPath& a, std::initializer_list<std::pair<double, const DriftPath*>> terms) {
  DriftPath out = a;
  for (std::size_t q = 0; q < out.size(); ++q)
    for (const auto& [c, f] : terms)
      if (c != 0.0) out[q].axpy(c, (*f)[q]);
  return out;
}
}  // namespace detail

/// h_s = int_0^s rhs(h_r, r) dr on uniform s-subintervals.  Each subinterval
/// is the 3-stage Lobatto IIIA collocation (Simpson nodes), solved by Picard
/// iteration until the successive-iterate L^2_T L^2 distance falls below
/// tolerance * max(1, ||h||).
inline ShiftSolution solve_shift_ode(const NoiseRecord& noise, const ShiftODEConfig& cfg,
                                     const std::function<void(const std::string&)>& progress = {}) {
  cfg.validate();
  const std::size_t M = cfg.steps();
  const TorusGrid& grid = cfg.x0.grid();
  const double dt = cfg.dt;
  ShiftSolution sol;
  sol.path.T = cfg.T;
  sol.path.dt = dt;
  sol.path.s.push_back(0.0);
  sol.path.h.push_back(zero_drift_path(grid, M));

  ShiftRhs fa = shift_rhs(sol.path.h[0], 0.0, noise, cfg);
  sol.cutoff_activated = fa.cutoffs.activated();
  const double ds = 1.0 / cfg.s_intervals;
  for (int j = 0; j < cfg.s_intervals; ++j) {
    const double sa = j * ds, sm = sa + 0.5 * ds, sb = (j + 1 == cfg.s_intervals) ? 1.0 : sa + ds;
    const DriftPath& ha = sol.path.h.back();
    DriftPath hm = detail::combine(ha, {{0.5 * ds, &fa.value}});
    DriftPath hb = detail::combine(ha, {{ds, &fa.value}});
    std::vector<double> hist;
    bool contracting = true;
    int it = 0;
    ShiftRhs fb;
    for (;;) {
      if (it == cfg.max_picard)
        throw PicardDiverged("solve_shift_ode: Picard cap hit on s-subinterval " + std::to_string(j), hist);
      ++it;
      const ShiftRhs fm = shift_rhs(hm, sm, noise, cfg);
      fb = shift_rhs(hb, sb, noise, cfg);
      sol.cutoff_activated = sol.cutoff_activated || fm.cutoffs.activated() || fb.cutoffs.activated();
      DriftPath hm_new = detail::combine(ha, {{5.0 * ds / 24.0, &fa.value}, {8.0 * ds / 24.0, &fm.value}, {-ds / 24.0, &fb.value}});
      DriftPath hb_new = detail::combine(ha, {{ds / 6.0, &fa.value}, {4.0 * ds / 6.0, &fm.value}, {ds / 6.0, &fb.value}});
      const double d = std::hypot(detail::path_distance(hm_new, hm, dt), detail::path_distance(hb_new, hb, dt));
      if (!hist.empty() && d > 0.5 * hist.back()) contracting = false;
      hist.push_back(d);
      hm = std::move(hm_new);
      hb = std::move(hb_new);
      if (progress)
        progress("s-interval " + std::to_string(j) + " iteration " + std::to_string(it) + " distance " +
                 StatReport::format(d));
      if (d <= cfg.picard_tolerance * std::max(1.0, cameron_martin_norm(hb, dt))) break;
    }
    // rhs at the accepted endpoint starts the next subinterval
    fa = shift_rhs(hb, sb, noise, cfg);
    sol.cutoff_activated = sol.cutoff_activated || fa.cutoffs.activated();
    sol.iterations.push_back(it);
    sol.residuals.push_back(std::move(hist));
    sol.contracting.push_back(contracting);
    sol.path.s.push_back(sb);
    sol.path.h.push_back(std::move(hb));
  }
  for (std::size_t j = 0; j < sol.path.h.size(); ++j) sol.sup_cm_norm = std::max(sol.sup_cm_norm, sol.path.cm_norm(j));
  return sol;
}

struct CouplingReport {
  double l2_error = 0.0;          // ||X_T - Y^{h1}_T||
  double holder_error = 0.0;      // at alpha - kappa, velocity representation
  double uncorrected_error = 0.0; // ||X_T - Y^0_T||, s = 1 without the shift
  double relative_error = 0.0;    // l2_error / uncorrected_error
  double state_relative_error = 0.0;  // l2_error / ||X_T||
  double dt = 0.0;
  bool cutoff_activated = false;
  CutoffLog x_cutoffs, y_cutoffs;
  double cm_norm = 0.0;
  double log_density = 0.0;

  StatReport report() const {
    StatReport r;
    r.title = "coupling";
    r.columns = {"step", "chi_sm_x", "chi_x", "chi_sm_y", "chi_y"};
    for (std::size_t q = 0; q < x_cutoffs.smooth.size(); ++q)
      r.add_row({double(q), x_cutoffs.smooth[q], x_cutoffs.lipschitz[q], y_cutoffs.smooth[q], y_cutoffs.lipschitz[q]});
    r.set("dt", dt);
    r.set("l2_error", l2_error);
    r.set("holder_error", holder_error);
    r.set("uncorrected_error", uncorrected_error);
    r.set("relative_error", relative_error);
    r.set("state_relative_error", state_relative_error);
    r.set("cutoff_activated", cutoff_activated ? 1.0 : 0.0);
    r.set("cm_norm", cm_norm);
    r.set("log_density", log_density);
    r.notes.push_back("2 tau - T lands on the step grid for every tau >= T/2; no alignment convention needed");
    return r;
  }
};

/// X (s = 0 drift) against Y^{h_1} (s = 1 drift with the shift) on the same noise.
inline CouplingReport coupling_check(const NoiseRecord& noise, const ShiftODEConfig& cfg, const ShiftPath& path) {
  const DriftPath& h1 = path.final_path();
  const TrajectoryRecord X = shifted_trajectory(zero_drift_path(cfg.x0.grid(), cfg.steps()), 0.0, noise, cfg);
  const TrajectoryRecord Y = shifted_trajectory(h1, 1.0, noise, cfg);
  const TrajectoryRecord Y0 = shifted_trajectory(zero_drift_path(cfg.x0.grid(), cfg.steps()), 1.0, noise, cfg);
  CouplingReport rep;
  const SpectralField diff = X.final_state() - Y.final_state();
  rep.dt = cfg.dt;
  rep.l2_error = l2_norm(diff);
  const CutoffSpec lc = cfg.lipschitz_spec();
  rep.holder_error = holder_norm(velocity_of(diff, cfg.noise.level, cfg.noise.alpha), lc.alpha - lc.kappa);
  rep.uncorrected_error = l2_norm(X.final_state() - Y0.final_state());
  rep.relative_error = rep.uncorrected_error > 0.0 ? rep.l2_error / rep.uncorrected_error : rep.l2_error;
  rep.state_relative_error = rep.l2_error / std::max(l2_norm(X.final_state()), 1e-300);
  rep.x_cutoffs = cutoff_log(X.states, cfg);
  rep.y_cutoffs = cutoff_log(Y.states, cfg);
  rep.cutoff_activated = rep.x_cutoffs.activated() || rep.y_cutoffs.activated();
  rep.cm_norm = cameron_martin_norm(h1, cfg.dt);
  rep.log_density = girsanov_log_density(h1, noise);
  return rep;
}

/// Solves again on a record whose noise after t_cut is replaced, and compares
/// every h_s on [0, t_cut).
inline StatReport causality_check(const NoiseRecord& noise, const ShiftODEConfig& cfg, const ShiftSolution& base,
                                  double t_cut, std::uint64_t salt = 1) {
  if (!(t_cut > 0.0 && t_cut < cfg.T)) throw std::invalid_argument("causality_check: t_cut must lie in (0, T)");
  const std::size_t cut = std::size_t(std::floor(t_cut / cfg.dt + 1e-9));
  const NoiseRecord other = replace_noise_after(noise, cut, salt);
  const ShiftSolution alt = solve_shift_ode(other, cfg);
  double worst = 0.0, scale = 0.0, after = 0.0;
  for (std::size_t j = 0; j < base.path.h.size(); ++j) {
    DriftPath d(cut);
    for (std::size_t q = 0; q < cut; ++q) d[q] = base.path.h[j][q] - alt.path.h[j][q];
    worst = std::max(worst, cameron_martin_norm(d, cfg.dt));
    scale = std::max(scale, cameron_martin_norm(base.path.h[j], cfg.dt, 0, cut));
    DriftPath e(cfg.steps() - cut);
    for (std::size_t q = cut; q < cfg.steps(); ++q) e[q - cut] = base.path.h[j][q] - alt.path.h[j][q];
    after = std::max(after, cameron_martin_norm(e, cfg.dt));
  }
  const double tol = 10.0 * cfg.picard_tolerance * std::max(1.0, base.sup_cm_norm);
  StatReport r;
  r.title = "causality";
  r.set("t_cut", t_cut);
  r.set("cut_step", double(cut));
  r.set("max_restricted_difference", worst);
  r.set("restricted_norm", scale);
  r.set("difference_after_cut", after);
  r.set("tolerance", tol);
  r.verdicts.push_back({"causal", worst <= tol, true, "sup_s ||h_s - h'_s||_{[0,t_cut]} = " + StatReport::format(worst)});
  return r;
}

namespace io {

/// FieldHeader (white, scalar), then u32 #s, u32 M, u32 first, f64 T, f64 dt,
/// then per s: f64 s and the payloads of h_s(tau_q) for q = first .. M-1.
inline void write_shift_path(std::ostream& os, const ShiftPath& p) {
  const TorusGrid& grid = p.h.at(0).at(0).grid();
  write_header(os, {std::uint32_t(grid.n()), Rank::scalar, Level::white});
  detail::put_le<std::uint32_t>(os, std::uint32_t(p.s.size()));
  detail::put_le<std::uint32_t>(os, std::uint32_t(p.steps()));
  detail::put_le<std::uint32_t>(os, std::uint32_t(p.first()));
  detail::put_le<double>(os, p.T);
  detail::put_le<double>(os, p.dt);
  for (std::size_t j = 0; j < p.s.size(); ++j) {
    detail::put_le<double>(os, p.s[j]);
    for (std::size_t q = p.first(); q < p.steps(); ++q) write_payload(os, p.h[j][q]);
  }
}

inline ShiftPath read_shift_path(std::istream& is) {
  const FieldHeader h = read_header(is);
  if (h.level != Level::white || h.rank != Rank::scalar) throw std::runtime_error("shift path: bad header");
  const TorusGrid grid(int(h.n));
  ShiftPath p;
  const auto ns = detail::get_le<std::uint32_t>(is);
  const auto M = detail::get_le<std::uint32_t>(is);
  const auto first = detail::get_le<std::uint32_t>(is);
  p.T = detail::get_le<double>(is);
  p.dt = detail::get_le<double>(is);
  if (p.steps() != M || p.first() != first) throw std::runtime_error("shift path: inconsistent grid header");
  for (std::uint32_t j = 0; j < ns; ++j) {
    p.s.push_back(detail::get_le<double>(is));
    DriftPath path = zero_drift_path(grid, M);
    for (std::size_t q = first; q < M; ++q) path[q] = read_payload(is, grid, Rank::scalar);
    p.h.push_back(std::move(path));
  }
  return p;
}

}  // namespace io

}  // namespace tsns
