#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "tsns/gaussian/rng.hpp"
#include "tsns/spectral/field.hpp"
#include "tsns/spectral/operators.hpp"

namespace tsns {

inline Rank rank_of(Level level) { return level == Level::velocity ? Rank::vector : Rank::scalar; }

/// Coloured additive forcing sqrt(2) m(k) dW_k at one representation level.
struct NoiseSpec {
  double alpha = 1.0;
  double gamma = 1.0;
  Level level = Level::hat;

  void validate() const {
    if (!(alpha > 0.0)) throw std::invalid_argument("NoiseSpec: alpha must be > 0");
    if (!(gamma > 0.5 && gamma <= 1.0)) throw std::invalid_argument("NoiseSpec: gamma must lie in (1/2, 1]");
    if (level == Level::white) throw std::invalid_argument("NoiseSpec: white is not a state level");
  }

  /// m(|k|) without the sqrt(2).
  double multiplier(double knorm) const {
    switch (level) {
      case Level::velocity: return std::pow(knorm, gamma - 1.0 - alpha);
      case Level::vorticity: return std::pow(knorm, gamma - alpha);
      case Level::hat: return std::pow(knorm, gamma);
      case Level::white: break;
    }
    return 1.0;
  }

  /// sigma_inf^2 = m^2 / (K + |k|^{2 gamma}).
  double stationary_variance(double knorm, double K = 0.0) const {
    const double m = multiplier(knorm);
    return m * m / (K + std::pow(knorm, 2.0 * gamma));
  }
};

/// Invariant Gaussian of the linear equation; per-mode E|f^(k)|^2.
struct GaussianMeasureSpec {
  double alpha = 1.0;
  Level level = Level::hat;

  double variance(double knorm) const {
    switch (level) {
      case Level::velocity: return std::pow(knorm, -2.0 - 2.0 * alpha);
      case Level::vorticity: return std::pow(knorm, -2.0 * alpha);
      case Level::hat: return 1.0;
      case Level::white: break;
    }
    return 1.0;
  }
};

inline const std::vector<std::size_t>& canonical_slots(const TorusGrid& grid, Support support) {
  return support == Support::dealiased ? grid.modes().canonical_dealiased : grid.modes().canonical_retained;
}

/// Scalar white amplitude zeta -> divergence-free velocity (i k_perp / |k|) zeta.
/// The polarisation vector has unit length, so |u^(k)| = |zeta(k)|.
inline SpectralField polarize(const SpectralField& zeta) {
  SpectralField u = SpectralField::vector(zeta.grid());
  const auto& m = zeta.grid().modes();
  auto z = zeta.component(0);
  auto a = u.component(0);
  auto b = u.component(1);
  for (std::size_t s : m.retained_slots) {
    const Complex iz = Complex{0.0, 1.0} * z[s] / m.norm[s];
    a[s] = -double(m.k2[s]) * iz;
    b[s] = double(m.k1[s]) * iz;
  }
  return u;
}

/// Left inverse of polarize on divergence-free fields.
inline SpectralField depolarize(const SpectralField& u) {
  SpectralField zeta = SpectralField::scalar(u.grid());
  const auto& m = u.grid().modes();
  auto a = u.component(0);
  auto b = u.component(1);
  auto z = zeta.component(0);
  for (std::size_t s : m.retained_slots) {
    z[s] = Complex{0.0, -1.0} * (-double(m.k2[s]) * a[s] + double(m.k1[s]) * b[s]) / m.norm[s];
  }
  return zeta;
}

/// Scalar complex white field with E|z(k)|^2 = scale^2 on the chosen support.
inline SpectralField sample_white(const TorusGrid& grid, RngStream& rng, Support support = Support::retained,
                                  double scale = 1.0) {
  SpectralField f = SpectralField::scalar(grid);
  const auto& m = grid.modes();
  auto c = f.component(0);
  for (std::size_t s : canonical_slots(grid, support)) {
    const Complex z = scale * rng.complex_normal();
    c[s] = z;
    if (m.k2[s] == 0) c[m.mirror[s]] = std::conj(z);
  }
  return f;
}

/// Applies a real per-mode amplitude to a scalar white field and lifts it to
/// the state level (polarised at velocity level).
template <class Amplitude>
SpectralField colour(const SpectralField& white, Level level, Amplitude&& amplitude) {
  const auto& m = white.grid().modes();
  SpectralField scaled = apply_symbol(white, [&](std::size_t s) { return amplitude(m.norm[s]); });
  return level == Level::velocity ? polarize(scaled) : scaled;
}

inline SpectralField sample_gaussian_field(const GaussianMeasureSpec& spec, const TorusGrid& grid, RngStream& rng,
                                           Support support = Support::retained) {
  const SpectralField white = sample_white(grid, rng, support);
  return colour(white, spec.level, [&](double k) { return std::sqrt(spec.variance(k)); });
}

/// sqrt(2) m(k) dW_k, E|dW_k|^2 = dt.
inline SpectralField noise_increment(const NoiseSpec& spec, double dt, const TorusGrid& grid, RngStream& rng,
                                     Support support = Support::retained) {
  if (!(dt > 0.0)) throw std::invalid_argument("noise_increment: dt must be > 0");
  const SpectralField dW = sample_white(grid, rng, support, std::sqrt(dt));
  return colour(dW, spec.level, [&](double k) { return std::numbers::sqrt2 * spec.multiplier(k); });
}

/// Exact transition of df = -(K + |k|^{2 gamma}) f dt + sqrt(2) m dW over dt.
inline SpectralField ou_exact_step(const SpectralField& f, double dt, const NoiseSpec& spec, RngStream& rng,
                                   Support support = Support::retained, double K = 0.0, bool with_noise = true) {
  if (!(dt > 0.0)) throw std::invalid_argument("ou_exact_step: dt must be > 0");
  const auto& m = f.grid().modes();
  SpectralField out = apply_symbol(f, [&](std::size_t s) {
    return std::exp(-(K + std::pow(m.norm[s], 2.0 * spec.gamma)) * dt);
  });
  if (!with_noise) return out;
  const SpectralField white = sample_white(f.grid(), rng, support);
  out += colour(white, spec.level, [&](double k) {
    const double rate = K + std::pow(k, 2.0 * spec.gamma);
    return std::sqrt(spec.stationary_variance(k, K) * -std::expm1(-2.0 * rate * dt));
  });
  return out;
}

/// Stationary path of the damped OU process sampled at multiples of dt.
inline std::vector<SpectralField> damped_ou_sample_path(double K, double T, double dt, const NoiseSpec& spec,
                                                         const TorusGrid& grid, RngStream& rng,
                                                         Support support = Support::retained) {
  if (!(K >= 0.0)) throw std::invalid_argument("damped_ou_sample_path: K must be >= 0");
  if (!(dt > 0.0) || !(T >= dt)) throw std::invalid_argument("damped_ou_sample_path: need 0 < dt <= T");
  const auto steps = std::size_t(std::llround(T / dt));
  std::vector<SpectralField> path;
  path.reserve(steps + 1);
  const SpectralField white = sample_white(grid, rng, support);
  path.push_back(colour(white, spec.level, [&](double k) { return std::sqrt(spec.stationary_variance(k, K)); }));
  for (std::size_t i = 0; i < steps; ++i) path.push_back(ou_exact_step(path.back(), dt, spec, rng, support, K));
  return path;
}

/// Cov(f^(k)_t, f^(k)_{t+lag}) for the stationary damped process.
inline double ou_covariance_oracle(double knorm, double lag, double K, const NoiseSpec& spec) {
  if (!(knorm >= 1.0)) throw std::invalid_argument("ou_covariance_oracle: |k| must be >= 1");
  if (!(lag >= 0.0)) throw std::invalid_argument("ou_covariance_oracle: lag must be >= 0");
  const double rate = K + std::pow(knorm, 2.0 * spec.gamma);
  return spec.stationary_variance(knorm, K) * std::exp(-rate * lag);
}

// ---------------------------------------------------------------------------
// Recorded noise.
//
// Each step stores two independent scalar white fields on the dealiased half
// lattice: dW (E|dW_k|^2 = dt) and Z (E|Z_k|^2 = 1).  Together they give the
// exact OU stochastic convolution over the step,
//   int_0^dt e^{-l(dt-r)} dW_r = phi1(l dt) dW + sqrt(dt g(l dt)) Z,
// so that a drift-free step is exact in distribution while dW alone drives
// the Girsanov density.

/// (1 - e^{-x}) / x
inline double phi1(double x) {
  if (std::abs(x) < 1e-5) return 1.0 - x / 2.0 + x * x / 6.0;
  return -std::expm1(-x) / x;
}

/// (1 - e^{-2x}) / (2x) - phi1(x)^2, the conditional variance factor.
inline double ou_residual_factor(double x) {
  if (x < 1e-3) return x * x / 12.0 - x * x * x / 12.0 + 17.0 * x * x * x * x / 360.0;
  const double p = phi1(x);
  return -std::expm1(-2.0 * x) / (2.0 * x) - p * p;
}

struct NoiseRecord {
  TorusGrid grid;
  double dt = 0.0;
  std::uint64_t seed = 0;
  std::uint32_t trajectory = 0;
  std::vector<SpectralField> dW;
  std::vector<SpectralField> Z;

  std::size_t steps() const { return dW.size(); }
};

inline void draw_noise_step(NoiseRecord& rec, std::size_t q, StreamPurpose purpose) {
  RngStream rng(rec.seed, rec.trajectory, purpose, std::uint32_t(q));
  rec.dW[q] = sample_white(rec.grid, rng, Support::dealiased, std::sqrt(rec.dt));
  rec.Z[q] = sample_white(rec.grid, rng, Support::dealiased);
}

/// Step q is drawn from its own substream, so records of different length
/// share their common prefix.
inline NoiseRecord generate_noise_record(const TorusGrid& grid, double dt, std::size_t steps, std::uint64_t seed,
                                         std::uint32_t trajectory = 0) {
  if (!(dt > 0.0)) throw std::invalid_argument("generate_noise_record: dt must be > 0");
  NoiseRecord rec{grid, dt, seed, trajectory, std::vector<SpectralField>(steps), std::vector<SpectralField>(steps)};
  for (std::size_t q = 0; q < steps; ++q) draw_noise_step(rec, q, StreamPurpose::noise);
  return rec;
}

/// Same record on steps [0, first), fresh independent draws afterwards.
inline NoiseRecord replace_noise_after(const NoiseRecord& rec, std::size_t first, std::uint64_t salt) {
  NoiseRecord out = rec;
  out.seed = rec.seed ^ (salt * 0x9E3779B97F4A7C15ull);
  for (std::size_t q = first; q < rec.steps(); ++q) draw_noise_step(out, q, StreamPurpose::replacement);
  out.seed = rec.seed;
  return out;
}

/// Merges pairs of steps into one step of size 2 dt, preserving the exact
/// OU convolution pathwise.  The residual field depends on the decay rates,
/// hence on gamma.
inline NoiseRecord coarsen(const NoiseRecord& fine, double gamma) {
  if (fine.steps() % 2 != 0) throw std::invalid_argument("coarsen: odd number of steps");
  NoiseRecord out{fine.grid, 2.0 * fine.dt, fine.seed, fine.trajectory, {}, {}};
  const auto& m = fine.grid.modes();
  const double dt = fine.dt;
  for (std::size_t q = 0; q + 1 < fine.steps(); q += 2) {
    SpectralField dWc = fine.dW[q] + fine.dW[q + 1];
    SpectralField Zc = SpectralField::scalar(fine.grid);
    auto w1 = fine.dW[q].component(0), w2 = fine.dW[q + 1].component(0);
    auto z1 = fine.Z[q].component(0), z2 = fine.Z[q + 1].component(0);
    auto wc = dWc.component(0);
    auto zc = Zc.component(0);
    for (std::size_t s : m.dealiased_slots) {
      const double x = std::pow(m.norm[s], 2.0 * gamma) * dt;
      const double sf = std::sqrt(dt * ou_residual_factor(x));
      const Complex eta1 = phi1(x) * w1[s] + sf * z1[s];
      const Complex eta2 = phi1(x) * w2[s] + sf * z2[s];
      const Complex etac = std::exp(-x) * eta1 + eta2;
      zc[s] = (etac - phi1(2.0 * x) * wc[s]) / std::sqrt(2.0 * dt * ou_residual_factor(2.0 * x));
    }
    out.dW.push_back(std::move(dWc));
    out.Z.push_back(std::move(Zc));
  }
  return out;
}

}  // namespace tsns
