#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "tsns/dynamics/integrator.hpp"
#include "tsns/experiments/report.hpp"
#include "tsns/experiments/stats.hpp"

namespace tsns {

/// DF(u)[v]; for bilinear drifts B(u, v) + B(v, u).
inline SpectralField df_apply(const DriftSpec& drift, const SpectralField& u, const SpectralField& v) {
  u.check_compatible(v);
  return drift_derivative(drift, u, v);
}

/// DF evaluated along a stored trajectory, one state per step.
///
/// For the interpolated family the cutoff value and, off the plateau, the
/// Besov gradient and B_s(X, X) are cached per state, so applying the
/// operator costs only the bilinear products.
class LinearizationPath {
 public:
  LinearizationPath(std::vector<SpectralField> states, const DriftSpec& drift, const NoiseSpec& noise, double dt)
      : drift_(drift), noise_(noise), dt_(dt), states_(std::move(states)),
        coeff_(states_.at(0).grid(), noise, dt) {
    drift_.validate();
    if (!(dt > 0.0)) throw std::invalid_argument("LinearizationPath: dt must be > 0");
    if (drift_.kind == DriftKind::interpolated) {
      cache_.resize(states_.size());
      for (std::size_t q = 0; q < states_.size(); ++q) cache_[q] = build_cache(states_[q]);
    }
  }

  /// From a trajectory stored at every step; `drift` overrides the record's.
  explicit LinearizationPath(const TrajectoryRecord& traj)
      : LinearizationPath(traj.states, traj.drift, traj.noise, traj.integrator.dt) {
    if (traj.integrator.record_stride != 1) throw std::invalid_argument("LinearizationPath: needs every step stored");
  }

  const DriftSpec& drift() const { return drift_; }
  const NoiseSpec& noise() const { return noise_; }
  double dt() const { return dt_; }
  std::size_t steps() const { return states_.size() - 1; }
  const SpectralField& state(std::size_t q) const { return states_.at(q); }
  const TorusGrid& grid() const { return states_.front().grid(); }
  const StepCoefficients& coefficients() const { return coeff_; }
  bool is_linear() const { return drift_.is_linear() && perturbation.empty(); }

  /// Mode-wise symbol added to DF at every time (empty: none).
  std::vector<double> perturbation;

  /// A_q v = DF(X_q)[v] (+ perturbation v).
  SpectralField apply(std::size_t q, const SpectralField& v) const {
    SpectralField out = apply_df(q, v);
    if (!perturbation.empty()) out += apply_symbol(v, [&](std::size_t s) { return perturbation[s]; });
    return out;
  }

  /// Index of time t on the step grid; off-grid times are rejected.
  std::size_t index_of(double t) const {
    const double r = t / dt_;
    const double q = std::round(r);
    if (std::abs(r - q) > 1e-9 * std::max(1.0, r) || q < 0.0 || q > double(steps()))
      throw std::invalid_argument("LinearizationPath: time " + std::to_string(t) + " is not on the step grid");
    return std::size_t(q);
  }

 private:
  struct Cache {
    double chi = 1.0;
    double dchi_scale = 0.0;  // chi0'(.) / scale; 0 on the plateau
    SpectralField gradient;   // Besov gradient at velocity level
    SpectralField bxx;        // B_s(X, X)
  };

  Cache build_cache(const SpectralField& x) const {
    Cache c;
    c.chi = drift_cutoff(drift_, x);
    if (!drift_.cutoff) return c;
    const CutoffSpec& cs = *drift_.cutoff;
    const double radius = 2.0 * cs.R;
    const SpectralField u = velocity_of(x, drift_.level, cs.alpha);
    const double s = cs.alpha - 2.0 * cs.kappa;
    const double scale = std::pow(radius, cs.p) / besov_normaliser(x.grid(), cs);
    const double d = chi0_derivative(besov_pp_power(u, s, cs.p) / scale);
    if (d != 0.0) {
      c.dchi_scale = d / scale;
      c.gradient = besov_pp_power_gradient(u, s, cs.p);
      c.bxx = interpolated_bilinear(drift_, x, x);
    }
    return c;
  }

  SpectralField apply_df(std::size_t q, const SpectralField& v) const {
    if (drift_.kind != DriftKind::interpolated) return drift_derivative(drift_, states_[q], v);
    const Cache& c = cache_[q];
    const SpectralField& x = states_[q];
    SpectralField out(x.grid(), x.rank());
    if (c.chi > 0.0) {
      out.axpy(c.chi, interpolated_bilinear(drift_, x, v));
      out.axpy(c.chi, interpolated_bilinear(drift_, v, x));
    }
    if (c.dchi_scale != 0.0)
      out.axpy(c.dchi_scale * inner(c.gradient, velocity_of(v, drift_.level, drift_.cutoff->alpha)), c.bxx);
    return out;
  }

  DriftSpec drift_;
  NoiseSpec noise_;
  double dt_;
  std::vector<SpectralField> states_;
  StepCoefficients coeff_;
  std::vector<Cache> cache_;
};

/// One exponential-Euler step of the linearised equation at step q.
inline SpectralField linearized_step(const LinearizationPath& path, std::size_t q, const SpectralField& v) {
  const StepCoefficients& c = path.coefficients();
  SpectralField out = apply_symbol(v, [&](std::size_t s) { return c.E[s]; });
  out += apply_symbol(path.apply(q, v), [&](std::size_t s) { return c.P1[s]; });
  return out;
}

/// J_{s,t} v between step indices s <= t.
inline SpectralField propagate_steps(const LinearizationPath& path, std::size_t s, std::size_t t,
                                     const SpectralField& v) {
  if (s > t || t > path.steps()) throw std::invalid_argument("propagate_j: need s <= t <= horizon");
  if (path.is_linear()) return semigroup_apply(v, double(t - s) * path.dt(), path.noise().gamma);
  SpectralField x = v;
  for (std::size_t q = s; q < t; ++q) x = linearized_step(path, q, x);
  return x;
}

/// J_{s,t} v at times on the step grid.
inline SpectralField propagate_j(const LinearizationPath& path, double s, double t, const SpectralField& v) {
  const std::size_t a = path.index_of(s), b = path.index_of(t);
  if (a > b) throw std::invalid_argument("propagate_j: need s <= t");
  if (path.is_linear()) return semigroup_apply(v, t - s, path.noise().gamma);
  return propagate_steps(path, a, b, v);
}

namespace detail {
inline void require_gain_exponents(double beta, double delta, double theta, double gamma) {
  if (!(theta >= 0.0 && theta < 1.0)) throw std::invalid_argument("regularity_gain_probe: theta must lie in [0, 1)");
  const double target = delta + 2.0 * gamma * theta;
  if (!(beta - 1.0 + 2.0 * gamma > target))
    throw std::invalid_argument("regularity_gain_probe: upper exponent constraint beta - 1 + 2 gamma > delta + 2 gamma theta violated");
  if (!(target >= beta))
    throw std::invalid_argument("regularity_gain_probe: lower exponent constraint delta + 2 gamma theta >= beta violated");
}

/// 2 cos(N x1) for dyadic N.
inline SpectralField single_mode(const TorusGrid& grid, Rank rank, int N) {
  SpectralField v(grid, rank);
  if (rank == Rank::scalar) v.set_coefficient({N, 0}, 1.0);
  else v.set_coefficient({N, 0}, 1.0, 1);  // divergence-free shear
  return v;
}

inline std::vector<std::size_t> dyadic_lags(std::size_t max_steps) {
  std::vector<std::size_t> lags;
  for (std::size_t l = 1; l <= max_steps; l *= 2) lags.push_back(l);
  return lags;
}
}  // namespace detail

struct GainProbeOptions {
  double beta = 1.0;              // A_t : C^beta -> C^{beta-1}
  std::size_t start = 0;          // s as a step index
  std::vector<std::size_t> lags;  // t - s in steps; default dyadic up to the horizon
  std::vector<int> modes;         // input frequencies; default dyadic
  double tolerance = 0.2;         // allowed negative log-log slope
};

/// max over single-mode inputs of ||J_{s,t} v||_{delta + 2 gamma theta} (t-s)^theta / ||v||_delta
/// per lag, with a log-log fit against the lag.  Verdict: no growth as t - s shrinks.
inline StatReport regularity_gain_probe(const LinearizationPath& path, double theta, double delta,
                                        GainProbeOptions opt = {}) {
  const double gamma = path.noise().gamma;
  detail::require_gain_exponents(opt.beta, delta, theta, gamma);
  const TorusGrid& grid = path.grid();
  const std::size_t horizon = path.steps() - opt.start;
  if (opt.lags.empty()) opt.lags = detail::dyadic_lags(horizon);
  if (opt.modes.empty())
    for (int N = 1; N <= grid.n() / 2 - 1; N *= 2) opt.modes.push_back(N);
  std::sort(opt.lags.begin(), opt.lags.end());
  if (opt.lags.back() > horizon) throw std::invalid_argument("regularity_gain_probe: lag beyond horizon");

  const double target = delta + 2.0 * gamma * theta;
  std::vector<double> ratio(opt.lags.size(), 0.0);
  for (int N : opt.modes) {
    const SpectralField v = detail::single_mode(grid, path.state(0).rank(), N);
    const double vnorm = holder_norm(v, delta);
    SpectralField x = v;
    std::size_t at = opt.start;
    for (std::size_t i = 0; i < opt.lags.size(); ++i) {
      const std::size_t to = opt.start + opt.lags[i];
      x = propagate_steps(path, at, to, x);
      at = to;
      const double lag = double(opt.lags[i]) * path.dt();
      ratio[i] = std::max(ratio[i], holder_norm(x, target) * std::pow(lag, theta) / vnorm);
    }
  }
  std::vector<double> lx, ly;
  for (std::size_t i = 0; i < ratio.size(); ++i) {
    lx.push_back(std::log2(double(opt.lags[i]) * path.dt()));
    ly.push_back(std::log2(ratio[i]));
  }
  const stats::LineFit fit = ratio.size() >= 2 ? stats::fit_line(lx, ly) : stats::LineFit{};
  const bool bounded = fit.slope >= -opt.tolerance;

  StatReport r;
  r.title = "regularity_gain";
  r.columns = {"s", "t", "theta", "delta", "ratio", "fit_slope", "verdict"};
  for (std::size_t i = 0; i < ratio.size(); ++i)
    r.add_row({double(opt.start) * path.dt(), double(opt.start + opt.lags[i]) * path.dt(), theta, delta, ratio[i],
               fit.slope, bounded ? 1.0 : 0.0});
  r.set("theta", theta);
  r.set("delta", delta);
  r.set("beta", opt.beta);
  r.set("fit_slope", fit.slope);
  r.set("max_ratio", *std::max_element(ratio.begin(), ratio.end()));
  r.verdicts.push_back({"bounded", bounded, true, "log-log slope " + StatReport::format(fit.slope)});
  return r;
}

struct DifferenceOptions {
  double theta = 0.0;
  double delta = 1.0;
  double beta = 1.0;
  double kappa = 0.05;
};

/// (J^A - J^B) v two ways: direct subtraction, and the discrete variation of
/// constants sum_{m} J^A_{m+1,t} P1 (A_m - B_m) J^B_{s,m} v, which telescopes
/// exactly for the exponential scheme.
inline StatReport propagator_difference(const LinearizationPath& A, const LinearizationPath& B, std::size_t s,
                                        std::size_t t, const SpectralField& v, DifferenceOptions opt = {}) {
  if (A.grid() != B.grid() || A.steps() != B.steps()) throw std::invalid_argument("propagator_difference: paths differ in grid or horizon");
  if (A.dt() != B.dt()) throw std::invalid_argument("propagator_difference: paths differ in dt");
  const SpectralField direct = propagate_steps(A, s, t, v) - propagate_steps(B, s, t, v);

  const StepCoefficients& c = A.coefficients();
  SpectralField voc(v.grid(), v.rank());
  SpectralField jb = v;
  double sup_diff = 0.0;
  std::vector<SpectralField> probes;
  for (int N = 1; N <= A.grid().n() / 2 - 1; N *= 2) probes.push_back(detail::single_mode(A.grid(), v.rank(), N));
  for (std::size_t m = s; m < t; ++m) {
    SpectralField d = A.apply(m, jb) - B.apply(m, jb);
    voc += propagate_steps(A, m + 1, t, apply_symbol(d, [&](std::size_t k) { return c.P1[k]; }));
    for (const auto& e : probes) {
      const SpectralField de = A.apply(m, e) - B.apply(m, e);
      sup_diff = std::max(sup_diff, holder_norm(de, opt.beta - 1.0) / holder_norm(e, opt.beta));
    }
    jb = linearized_step(B, m, jb);
  }
  const double gamma = A.noise().gamma;
  const double lag = double(t - s) * A.dt();
  const double expo = 1.0 - opt.theta - 1.0 / (2.0 * gamma) - opt.kappa;
  const double dnorm = holder_norm(direct, opt.delta + 2.0 * gamma * opt.theta);
  const double scale = sup_diff * std::pow(lag, expo) * holder_norm(v, opt.delta);
  const double agree = l2_norm(direct - voc) / std::max(l2_norm(direct), 1e-300);

  StatReport r;
  r.title = "propagator_difference";
  r.set("lag", lag);
  r.set("direct_l2", l2_norm(direct));
  r.set("voc_l2", l2_norm(voc));
  r.set("relative_disagreement", l2_norm(direct) > 0.0 ? agree : l2_norm(voc));
  r.set("difference_norm", dnorm);
  r.set("sup_operator_difference", sup_diff);
  r.set("bound_scale", scale);
  r.set("bound_ratio", scale > 0.0 ? dnorm / scale : 0.0);
  r.verdicts.push_back({"variation_of_constants", r.get("relative_disagreement") <= 10.0 * A.dt(), true,
                        "relative disagreement " + StatReport::format(r.get("relative_disagreement"))});
  return r;
}

}  // namespace tsns
