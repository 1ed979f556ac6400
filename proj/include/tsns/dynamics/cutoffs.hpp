#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <utility>

#include "tsns/spectral/littlewood_paley.hpp"
#include "tsns/spectral/operators.hpp"

namespace tsns {

/// Plateau profile: 1 on [0,1], smoothstep down to 0 on [1,2], 0 beyond.
inline double chi0(double x) {
  const double t = std::clamp(x - 1.0, 0.0, 1.0);
  return 1.0 - t * t * t * (t * (6.0 * t - 15.0) + 10.0);
}

inline double chi0_derivative(double x) {
  if (x <= 1.0 || x >= 2.0) return 0.0;
  const double t = x - 1.0;
  return -30.0 * t * t * (1.0 - t) * (1.0 - t);
}

inline constexpr double chi0_lipschitz = 15.0 / 8.0;

struct CutoffSpec {
  double R = 1.0;
  double kappa = 0.05;
  int p = 8;
  double alpha = 1.0;  // norms are taken at regularity alpha - kappa and alpha - 2 kappa

  void validate() const {
    if (!(R > 0.0)) throw std::invalid_argument("CutoffSpec: R must be > 0");
    if (!(kappa > 0.0)) throw std::invalid_argument("CutoffSpec: kappa must be > 0");
    if (p < 2 || p % 2) throw std::invalid_argument("CutoffSpec: p must be an even integer >= 2");
  }
};

/// The velocity field a state of the given level represents.  Cutoff norms
/// are always measured on it, so they do not depend on the representation.
inline SpectralField velocity_of(const SpectralField& x, Level level, double alpha) {
  switch (level) {
    case Level::velocity: return x;
    case Level::vorticity: return biot_savart(x);
    case Level::hat: return biot_savart(fractional_power(x, -alpha));
    case Level::white: break;
  }
  throw std::invalid_argument("velocity_of: white noise has no velocity");
}

struct CutoffNorms {
  double holder = 0.0;  // C^{alpha - kappa}
  double besov = 0.0;   // B^{alpha - 2 kappa}_{p,p}
};

inline CutoffNorms cutoff_norms(const SpectralField& x, Level level, const CutoffSpec& spec) {
  const SpectralField u = velocity_of(x, level, spec.alpha);
  return {holder_norm(u, spec.alpha - spec.kappa), besov_pp_norm(u, spec.alpha - 2.0 * spec.kappa, spec.p)};
}

/// chi(X / radius) = chi0(||X||_{C^{alpha-kappa}} / radius).  When the cheap
/// coefficient bound already sits on the plateau the exact norm is skipped.
inline double chi_lipschitz(const SpectralField& x, Level level, const CutoffSpec& spec, double radius) {
  const SpectralField u = velocity_of(x, level, spec.alpha);
  const double beta = spec.alpha - spec.kappa;
  if (holder_norm_bound(u, beta) <= radius) return 1.0;
  return chi0(holder_norm(u, beta) / radius);
}

/// 1 / sum_N N^{-kappa p} over the grid's scales.  With this factor
/// c ||X||^p_{B^{alpha-2kappa}_{p,p}} <= ||X||^p_{C^{alpha-kappa}}, so both
/// cutoffs equal 1 whenever the Hoelder norm is below the radius.
inline double besov_normaliser(const TorusGrid& grid, const CutoffSpec& spec) {
  double acc = 0.0;
  for (int N : dyadic_scales(grid)) acc += std::pow(double(N), -spec.kappa * spec.p);
  return 1.0 / acc;
}

/// chi^sm(X / radius) = chi0(c ||X||^p_{B^{alpha-2kappa}_{p,p}} / radius^p).
inline double chi_smooth(const SpectralField& x, Level level, const CutoffSpec& spec, double radius) {
  const SpectralField u = velocity_of(x, level, spec.alpha);
  const double c = besov_normaliser(x.grid(), spec);
  return chi0(c * besov_pp_power(u, spec.alpha - 2.0 * spec.kappa, spec.p) / std::pow(radius, spec.p));
}

/// D chi^sm(X / radius)[v].
inline double chi_smooth_derivative(const SpectralField& x, const SpectralField& v, Level level,
                                    const CutoffSpec& spec, double radius) {
  const SpectralField u = velocity_of(x, level, spec.alpha);
  const double s = spec.alpha - 2.0 * spec.kappa;
  const double scale = std::pow(radius, spec.p) / besov_normaliser(x.grid(), spec);
  const double d = chi0_derivative(besov_pp_power(u, s, spec.p) / scale);
  if (d == 0.0) return 0.0;
  return d / scale * inner(besov_pp_power_gradient(u, s, spec.p), velocity_of(v, level, spec.alpha));
}

/// (chi_R(f), chi^sm_R(f)) at the CutoffSpec radius.
inline std::pair<double, double> evaluate_cutoffs(const SpectralField& f, const CutoffSpec& spec,
                                                  Level level = Level::velocity) {
  spec.validate();
  return {chi_lipschitz(f, level, spec, spec.R), chi_smooth(f, level, spec, spec.R)};
}

}  // namespace tsns
