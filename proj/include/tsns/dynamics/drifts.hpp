#pragma once

#include <cmath>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "tsns/dynamics/cutoffs.hpp"
#include "tsns/experiments/report.hpp"
#include "tsns/experiments/stats.hpp"
#include "tsns/spectral/littlewood_paley.hpp"
#include "tsns/spectral/operators.hpp"

namespace tsns {

/// Raised when a drift or a state stops being finite or exceeds the
/// configured norm threshold.
struct BlowupDetected : std::runtime_error {
  using std::runtime_error::runtime_error;
  std::size_t step = 0;
};

namespace detail {

inline void check_finite(const SpectralField& f, const char* where) {
  if (!all_finite(f)) throw BlowupDetected(std::string(where) + ": non-finite values");
}

/// dealias(u . grad g) for a vector u and scalar g, by transforms.
inline SpectralField advect_scalar(const SpectralField& u, const SpectralField& g) {
  const TorusGrid& grid = g.grid();
  const PhysicalField pu = to_physical(u);
  const PhysicalField pg = to_physical(gradient(g));
  PhysicalField prod{grid, Rank::scalar, std::vector<double>(grid.physical_size())};
  const std::size_t size = grid.physical_size();
  for (std::size_t i = 0; i < size; ++i)
    prod.values[i] = pu.values[i] * pg.values[i] + pu.values[size + i] * pg.values[size + i];
  return dealias(to_spectral(prod));
}

/// dealias((u . grad) g) for vectors u, g.
inline SpectralField advect_vector(const SpectralField& u, const SpectralField& g) {
  const TorusGrid& grid = g.grid();
  const std::size_t size = grid.physical_size();
  const PhysicalField pu = to_physical(u);
  PhysicalField prod{grid, Rank::vector, std::vector<double>(2 * size)};
  for (std::size_t c = 0; c < 2; ++c) {
    SpectralField gc = SpectralField::scalar(grid);
    std::copy(g.component(c).begin(), g.component(c).end(), gc.component(0).begin());
    const PhysicalField pg = to_physical(gradient(gc));
    for (std::size_t i = 0; i < size; ++i)
      prod.values[c * size + i] = pu.values[i] * pg.values[i] + pu.values[size + i] * pg.values[size + i];
  }
  return dealias(to_spectral(prod));
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Vorticity and hat level (scalar states).

/// -(K w . grad) w.
inline SpectralField ns_drift(const SpectralField& w) {
  detail::require_rank(w, Rank::scalar, "ns_drift");
  SpectralField out = detail::advect_scalar(biot_savart(w), w);
  out *= -1.0;
  detail::check_finite(out, "ns_drift");
  return out;
}

/// -|grad|^{-alpha} (K v . grad) |grad|^alpha v.
inline SpectralField twisted_drift(const SpectralField& v, double alpha) {
  detail::require_rank(v, Rank::scalar, "twisted_drift");
  SpectralField out = fractional_power(detail::advect_scalar(biot_savart(v), fractional_power(v, alpha)), -alpha);
  out *= -1.0;
  detail::check_finite(out, "twisted_drift");
  return out;
}

/// -(K |grad|^{-alpha} vh . grad) vh: the twisted drift written for vh = |grad|^alpha v.
inline SpectralField hat_twisted_drift(const SpectralField& vh, double alpha) {
  detail::require_rank(vh, Rank::scalar, "hat_twisted_drift");
  SpectralField out = detail::advect_scalar(biot_savart(fractional_power(vh, -alpha)), vh);
  out *= -1.0;
  detail::check_finite(out, "hat_twisted_drift");
  return out;
}

/// The vorticity nonlinearity conjugated to the hat variable.
inline SpectralField hat_ns_drift(const SpectralField& vh, double alpha) {
  return fractional_power(ns_drift(fractional_power(vh, -alpha)), alpha);
}

// ---------------------------------------------------------------------------
// Velocity level (vector states).

/// -P (u . grad) u.
inline SpectralField velocity_ns_drift(const SpectralField& u) {
  detail::require_rank(u, Rank::vector, "velocity_ns_drift");
  SpectralField out = leray_project(detail::advect_vector(u, u));
  out *= -1.0;
  detail::check_finite(out, "velocity_ns_drift");
  return out;
}

/// -P ((|grad|^{beta-alpha} u) . grad) u, 0 <= beta <= alpha.
inline SpectralField generalized_drift(const SpectralField& u, double beta, double alpha) {
  detail::require_rank(u, Rank::vector, "generalized_drift");
  if (!(beta >= 0.0 && beta <= alpha))
    throw std::invalid_argument("generalized_drift: need 0 <= beta <= alpha");
  SpectralField out = leray_project(detail::advect_vector(fractional_power(u, beta - alpha), u));
  out *= -1.0;
  detail::check_finite(out, "generalized_drift");
  return out;
}

/// -|grad|^{-alpha} P (v . grad) |grad|^alpha v.
inline SpectralField velocity_twisted_drift(const SpectralField& v, double alpha) {
  detail::require_rank(v, Rank::vector, "velocity_twisted_drift");
  SpectralField out = fractional_power(leray_project(detail::advect_vector(v, fractional_power(v, alpha))), -alpha);
  out *= -1.0;
  detail::check_finite(out, "velocity_twisted_drift");
  return out;
}

// ---------------------------------------------------------------------------
// Commutator.

inline void require_divergence_free(const SpectralField& u, const char* op) {
  detail::require_rank(u, Rank::vector, op);
  if (!is_divergence_free(u, 1e-10)) throw std::invalid_argument(std::string(op) + ": input is not divergence-free");
}

/// G_alpha(u) = |grad|^{-alpha} P div(u (x) |grad|^alpha u) - P div(u (x) u),
/// composed from the transform-based primitives.
inline SpectralField commutator_g(const SpectralField& u, double alpha) {
  require_divergence_free(u, "commutator_g");
  if (alpha == 0.0) return SpectralField::vector(u.grid());
  SpectralField out = fractional_power(leray_project(detail::advect_vector(u, fractional_power(u, alpha))), -alpha);
  out -= leray_project(detail::advect_vector(u, u));
  return out;
}

/// The same operator as the lattice sum
///   i sum_{k+l=n} |n|^{-alpha} (|n|^alpha - |l|^alpha) (u(k) . l) u(l),
/// followed by the Leray projection, over the dealiased lattice.  O(S^2) in
/// the number S of dealiased modes.
inline SpectralField commutator_g_direct(const SpectralField& u, double alpha) {
  require_divergence_free(u, "commutator_g_direct");
  const TorusGrid& grid = u.grid();
  const int M = grid.dealias_radius();
  const int W = 2 * M + 1;
  std::vector<Complex> a(std::size_t(W) * W), b(std::size_t(W) * W);
  auto at = [&](int k1, int k2) { return std::size_t(k1 + M) * W + std::size_t(k2 + M); };
  for (int k1 = -M; k1 <= M; ++k1)
    for (int k2 = -M; k2 <= M; ++k2) {
      if (k1 == 0 && k2 == 0) continue;
      a[at(k1, k2)] = u.coefficient({k1, k2}, 0);
      b[at(k1, k2)] = u.coefficient({k1, k2}, 1);
    }
  SpectralField out = SpectralField::vector(grid);
  const auto& m = grid.modes();
  const Complex I{0.0, 1.0};
  for (std::size_t s : m.dealiased_slots) {
    const int n1 = m.k1[s], n2 = m.k2[s];
    const double nn = m.norm[s];
    const double nna = std::pow(nn, alpha);
    Complex acc1{}, acc2{};
    for (int k1 = std::max(-M, n1 - M); k1 <= std::min(M, n1 + M); ++k1) {
      for (int k2 = std::max(-M, n2 - M); k2 <= std::min(M, n2 + M); ++k2) {
        const int l1 = n1 - k1, l2 = n2 - k2;
        if ((k1 == 0 && k2 == 0) || (l1 == 0 && l2 == 0)) continue;
        const double ln = std::sqrt(double(l1) * l1 + double(l2) * l2);
        const double mult = (nna - std::pow(ln, alpha)) / nna;
        if (mult == 0.0) continue;
        const Complex kdotl = a[at(k1, k2)] * double(l1) + b[at(k1, k2)] * double(l2);
        acc1 += mult * kdotl * a[at(l1, l2)];
        acc2 += mult * kdotl * b[at(l1, l2)];
      }
    }
    out.component(0)[s] = I * acc1;
    out.component(1)[s] = I * acc2;
  }
  return leray_project(out);
}

/// Dyadic sup-norm profile N -> ||P_N f||_inf (sharp blocks).
inline std::vector<std::pair<int, double>> dyadic_sup_profile(const SpectralField& f) {
  std::vector<std::pair<int, double>> out;
  for (int N : dyadic_scales(f.grid())) out.emplace_back(N, max_abs(to_physical(lp_project(f, N))));
  return out;
}

/// Weight of the rough covariance symbol: 2 + (-1)^{|n1|+|n2|}.
inline double rough_sigma(int n1, int n2) { return ((std::abs(n1) + std::abs(n2)) % 2 == 0) ? 3.0 : 1.0; }

/// C_Q[u] = Q P div(u (x) Q^{-1} u) - P div(u (x) u) with symbol
/// q(n) = w(n) |n|^{gamma-1-alpha}; w = rough_sigma unless `uniform` is set.
inline SpectralField rough_commutator(const SpectralField& u, double alpha, double gamma, bool uniform = false,
                                      double uniform_weight = 1.0) {
  require_divergence_free(u, "rough_commutator");
  const auto& m = u.grid().modes();
  auto q = [&](std::size_t s) {
    const double w = uniform ? uniform_weight : rough_sigma(m.k1[s], m.k2[s]);
    return w * std::pow(m.norm[s], gamma - 1.0 - alpha);
  };
  SpectralField inv = apply_symbol(u, [&](std::size_t s) { return 1.0 / q(s); });
  SpectralField out = apply_symbol(leray_project(detail::advect_vector(u, inv)), q);
  out -= leray_project(detail::advect_vector(u, u));
  return out;
}

/// Log-2 slope of the dyadic sup profile over N in [n_lo, n_hi].
inline stats::LineFit dyadic_slope(const std::vector<std::pair<int, double>>& profile, int n_lo, int n_hi) {
  std::vector<double> x, y;
  for (const auto& [N, v] : profile)
    if (N >= n_lo && N <= n_hi && v > 0.0) {
      x.push_back(N);
      y.push_back(v);
    }
  if (x.size() < 2) return {std::nan(""), std::nan(""), std::nan("")};
  return stats::fit_loglog(x, y);
}

/// Dyadic norms of the rough-symbol commutator next to the smooth-symbol
/// commutator G_{alpha+1-gamma} (the smooth symbol |n|^{gamma-1-alpha}).
inline StatReport rough_commutator_probe(const SpectralField& u, double alpha, double gamma, bool uniform = false) {
  const double smooth_order = alpha + 1.0 - gamma;
  const auto rough = dyadic_sup_profile(rough_commutator(u, alpha, gamma, uniform, 2.0));
  const auto smooth = dyadic_sup_profile(commutator_g(u, smooth_order));
  StatReport r;
  r.title = "rough_commutator_probe";
  r.columns = {"N", "rough_sup", "smooth_sup"};
  for (std::size_t i = 0; i < rough.size(); ++i) r.add_row({double(rough[i].first), rough[i].second, smooth[i].second});
  const int lo = 4, hi = std::max(8, u.grid().n() / 4);
  r.set("alpha", alpha);
  r.set("gamma", gamma);
  r.set("rough_slope", dyadic_slope(rough, lo, hi).slope);
  r.set("smooth_slope", dyadic_slope(smooth, lo, hi).slope);
  r.set("fit_lo", lo);
  r.set("fit_hi", hi);
  double total = 0.0;
  for (const auto& [N, v] : rough) total += v;
  r.set("rough_total", total);
  return r;
}

}  // namespace tsns
