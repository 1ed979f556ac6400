#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

#include "tsns/spectral/field.hpp"

namespace tsns {

/// Dyadic frequency localisation.  The sharp profile keeps N/2 < |k| <= N;
/// the smooth one uses phi(x) = theta(|x|) - theta(2|x|) with a C^infty step
/// theta (1 on [0,1], 0 on [2,inf)), so phi lives on 1/2 < |x| < 2.
struct DyadicProfile {
  enum class Mode { sharp, smooth };
  Mode mode = Mode::sharp;

  static DyadicProfile sharp() { return {Mode::sharp}; }
  static DyadicProfile smooth() { return {Mode::smooth}; }

  static double step(double r) {
    if (r <= 1.0) return 1.0;
    if (r >= 2.0) return 0.0;
    const double a = bump(2.0 - r);
    const double b = bump(r - 1.0);
    return a / (a + b);
  }

  /// phi(x) at |x| = r.
  static double phi(double r) { return step(r) - step(2.0 * r); }

  /// Weight of wavenumber magnitude |k| in the block of scale N.
  double weight(double knorm, int N) const {
    if (mode == Mode::sharp) return (knorm > 0.5 * N && knorm <= double(N)) ? 1.0 : 0.0;
    return phi(knorm / double(N));
  }

 private:
  static double bump(double t) { return t > 0.0 ? std::exp(-1.0 / t) : 0.0; }
};

inline bool is_dyadic(int N) { return N >= 1 && (N & (N - 1)) == 0; }

/// All dyadic N whose block can meet the retained lattice.
inline std::vector<int> dyadic_scales(const TorusGrid& grid) {
  const double kmax = std::sqrt(2.0) * grid.max_wavenumber();
  std::vector<int> out;
  for (int N = 1;; N *= 2) {
    out.push_back(N);
    if (N >= kmax) break;
  }
  return out;
}

inline SpectralField lp_project(const SpectralField& f, int N, const DyadicProfile& profile = {}) {
  if (!is_dyadic(N)) throw std::invalid_argument("lp_project: N = " + std::to_string(N) + " is not dyadic");
  const auto& m = f.grid().modes();
  SpectralField out(f.grid(), f.rank());
  for (std::size_t c = 0; c < f.components(); ++c) {
    auto src = f.component(c);
    auto dst = out.component(c);
    for (std::size_t s : m.retained_slots) {
      const double w = profile.weight(m.norm[s], N);
      if (w != 0.0) dst[s] = w * src[s];
    }
  }
  return out;
}

/// sup_N N^beta max_x |P_N f(x)|, with the Euclidean norm for vector fields.
inline double holder_norm(const SpectralField& f, double beta, const DyadicProfile& profile = {}) {
  double best = 0.0;
  for (int N : dyadic_scales(f.grid())) {
    const SpectralField block = lp_project(f, N, profile);
    const double sup = max_abs(to_physical(block));
    best = std::max(best, std::pow(double(N), beta) * sup);
  }
  return best;
}

/// Upper bound for holder_norm from sum_k |f^(k)| per block; no transforms.
inline double holder_norm_bound(const SpectralField& f, double beta, const DyadicProfile& profile = {}) {
  const auto& m = f.grid().modes();
  double best = 0.0;
  for (int N : dyadic_scales(f.grid())) {
    double acc = 0.0;
    for (std::size_t s : m.retained_slots) {
      const double w = profile.weight(m.norm[s], N);
      if (w == 0.0) continue;
      double mag2 = 0.0;
      for (std::size_t c = 0; c < f.components(); ++c) mag2 += std::norm(f.component(c)[s]);
      acc += m.weight[s] * std::abs(w) * std::sqrt(mag2);
    }
    best = std::max(best, std::pow(double(N), beta) * acc);
  }
  return best;
}

namespace detail {
inline void require_even_p(int p) {
  if (p < 2 || p % 2 != 0) throw std::invalid_argument("besov: p must be even and >= 2, got " + std::to_string(p));
}

/// mean_x |g(x)|^p for a physical field, Euclidean magnitude over components.
inline double lp_mean_power(const PhysicalField& g, int p) {
  const std::size_t size = g.grid.physical_size();
  double acc = 0.0;
  for (std::size_t i = 0; i < size; ++i) {
    double mag2 = 0.0;
    for (std::size_t c = 0; c < std::size_t(g.rank); ++c) mag2 += g.values[c * size + i] * g.values[c * size + i];
    acc += std::pow(mag2, 0.5 * p);
  }
  return acc / double(size);
}
}  // namespace detail

/// sum_N N^{sp} ||P_N f||_{L^p}^p, by grid quadrature.
inline double besov_pp_power(const SpectralField& f, double s, int p, const DyadicProfile& profile = {}) {
  detail::require_even_p(p);
  double acc = 0.0;
  for (int N : dyadic_scales(f.grid())) {
    const SpectralField block = lp_project(f, N, profile);
    acc += std::pow(double(N), s * p) * detail::lp_mean_power(to_physical(block), p);
  }
  return acc;
}

inline double besov_pp_norm(const SpectralField& f, double s, int p, const DyadicProfile& profile = {}) {
  return std::pow(besov_pp_power(f, s, p, profile), 1.0 / p);
}

/// L^2 gradient of besov_pp_power at f: d/de power(f + e v) = inner(result, v).
inline SpectralField besov_pp_power_gradient(const SpectralField& f, double s, int p,
                                             const DyadicProfile& profile = {}) {
  detail::require_even_p(p);
  SpectralField grad(f.grid(), f.rank());
  const std::size_t size = f.grid().physical_size();
  for (int N : dyadic_scales(f.grid())) {
    PhysicalField g = to_physical(lp_project(f, N, profile));
    for (std::size_t i = 0; i < size; ++i) {
      double mag2 = 0.0;
      for (std::size_t c = 0; c < f.components(); ++c) mag2 += g.values[c * size + i] * g.values[c * size + i];
      const double scale = p * std::pow(mag2, 0.5 * (p - 2));
      for (std::size_t c = 0; c < f.components(); ++c) g.values[c * size + i] *= scale;
    }
    // Quadrature pairing equals the weighted coefficient pairing on the
    // retained set, and P_N is self-adjoint.
    grad.axpy(std::pow(double(N), s * p), lp_project(to_spectral(g), N, profile));
  }
  return grad;
}

}  // namespace tsns
