#pragma once

#include <cmath>
#include <stdexcept>

#include "tsns/spectral/field.hpp"

// Mode-wise linear operators.  With f(x) = sum f^(k) e^{-ik.x}, a derivative
// d_j acts as multiplication by -i k_j.

namespace tsns {

namespace detail {
inline void require_rank(const SpectralField& f, Rank r, const char* op) {
  if (f.rank() != r) {
    throw std::invalid_argument(std::string(op) + ": expected " + (r == Rank::scalar ? "scalar" : "vector") +
                                " field");
  }
}
constexpr Complex I{0.0, 1.0};
}  // namespace detail

/// (I - k k^T / |k|^2) mode by mode.
inline SpectralField leray_project(const SpectralField& u) {
  detail::require_rank(u, Rank::vector, "leray_project");
  SpectralField out = u;
  const auto& m = u.grid().modes();
  auto a = out.component(0);
  auto b = out.component(1);
  for (std::size_t s : m.retained_slots) {
    const double k1 = m.k1[s], k2 = m.k2[s];
    const Complex kdotu = (k1 * a[s] + k2 * b[s]) / m.norm2[s];
    a[s] -= k1 * kdotu;
    b[s] -= k2 * kdotu;
  }
  return out;
}

/// Velocity of a vorticity: u^ = i k_perp w^ / |k|^2, k_perp = (-k2, k1).
inline SpectralField biot_savart(const SpectralField& w) {
  detail::require_rank(w, Rank::scalar, "biot_savart");
  SpectralField u = SpectralField::vector(w.grid());
  const auto& m = w.grid().modes();
  auto src = w.component(0);
  auto a = u.component(0);
  auto b = u.component(1);
  for (std::size_t s : m.retained_slots) {
    const Complex z = detail::I * src[s] / m.norm2[s];
    a[s] = -double(m.k2[s]) * z;
    b[s] = double(m.k1[s]) * z;
  }
  return u;
}

/// d1 u2 - d2 u1, i.e. w^ = -i (k1 u2^ - k2 u1^).
inline SpectralField curl(const SpectralField& u) {
  detail::require_rank(u, Rank::vector, "curl");
  SpectralField w = SpectralField::scalar(u.grid());
  const auto& m = u.grid().modes();
  auto a = u.component(0);
  auto b = u.component(1);
  auto out = w.component(0);
  for (std::size_t s : m.retained_slots) out[s] = -detail::I * (double(m.k1[s]) * b[s] - double(m.k2[s]) * a[s]);
  return w;
}

inline SpectralField gradient(const SpectralField& f) {
  detail::require_rank(f, Rank::scalar, "gradient");
  SpectralField g = SpectralField::vector(f.grid());
  const auto& m = f.grid().modes();
  auto src = f.component(0);
  auto a = g.component(0);
  auto b = g.component(1);
  for (std::size_t s : m.retained_slots) {
    a[s] = -detail::I * double(m.k1[s]) * src[s];
    b[s] = -detail::I * double(m.k2[s]) * src[s];
  }
  return g;
}

inline SpectralField divergence(const SpectralField& u) {
  detail::require_rank(u, Rank::vector, "divergence");
  SpectralField d = SpectralField::scalar(u.grid());
  const auto& m = u.grid().modes();
  auto a = u.component(0);
  auto b = u.component(1);
  auto out = d.component(0);
  for (std::size_t s : m.retained_slots) out[s] = -detail::I * (double(m.k1[s]) * a[s] + double(m.k2[s]) * b[s]);
  return d;
}

/// max_k |k . u^(k)| relative to the L^2 norm of u.
inline double divergence_defect(const SpectralField& u) {
  detail::require_rank(u, Rank::vector, "divergence_defect");
  const auto& m = u.grid().modes();
  auto a = u.component(0);
  auto b = u.component(1);
  double worst = 0.0;
  for (std::size_t s : m.retained_slots)
    worst = std::max(worst, std::abs(double(m.k1[s]) * a[s] + double(m.k2[s]) * b[s]));
  const double norm = l2_norm(u);
  return norm > 0.0 ? worst / norm : worst;
}

inline bool is_divergence_free(const SpectralField& u, double tol = 1e-12) {
  return divergence_defect(u) <= tol;
}

/// |nabla|^s.
inline SpectralField fractional_power(SpectralField f, double s) {
  if (s == 0.0) return f;
  const auto& m = f.grid().modes();
  return apply_symbol(std::move(f), [&](std::size_t k) { return std::pow(m.norm[k], s); });
}

/// exp(-t |k|^{2 gamma}).
inline SpectralField semigroup_apply(SpectralField f, double t, double gamma) {
  if (!(t >= 0.0)) throw std::invalid_argument("semigroup_apply: negative time " + std::to_string(t));
  if (t == 0.0) return f;
  const auto& m = f.grid().modes();
  return apply_symbol(std::move(f), [&](std::size_t k) { return std::exp(-t * std::pow(m.norm[k], 2.0 * gamma)); });
}

/// |k|^{2 gamma} per slot; 0 outside the retained set.
inline std::vector<double> dissipation_rates(const TorusGrid& grid, double gamma) {
  const auto& m = grid.modes();
  std::vector<double> rate(grid.spectral_size(), 0.0);
  for (std::size_t s : m.retained_slots) rate[s] = std::pow(m.norm[s], 2.0 * gamma);
  return rate;
}

}  // namespace tsns
