#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <span>
#include <stdexcept>
#include <vector>

#include "tsns/spectral/fft.hpp"
#include "tsns/spectral/grid.hpp"

namespace tsns {

enum class Rank : std::uint8_t { scalar = 1, vector = 2 };

/// Which physical quantity a field represents; also the tag stored in dumps.
enum class Level : std::uint8_t { velocity = 0, vorticity = 1, hat = 2, white = 3 };

inline const char* to_string(Level level) {
  switch (level) {
    case Level::velocity: return "velocity";
    case Level::vorticity: return "vorticity";
    case Level::hat: return "hat";
    case Level::white: return "white";
  }
  return "?";
}

inline Level level_from_string(const std::string& s) {
  if (s == "velocity") return Level::velocity;
  if (s == "vorticity") return Level::vorticity;
  if (s == "hat") return Level::hat;
  if (s == "white") return Level::white;
  throw std::invalid_argument("unknown level '" + s + "'");
}

/// Truncated Fourier coefficients of a real, mean-free field on T^2.
///
/// Coefficients follow f^(k) = int f(x) e^{ik.x} dx with int dx = 1, so that
/// f(x) = sum_k f^(k) e^{-ik.x}.  Only the half lattice k2 >= 0 is stored;
/// the other half is implied by f^(-k) = conj f^(k).
class SpectralField {
 public:
  SpectralField() = default;
  SpectralField(TorusGrid grid, Rank rank)
      : grid_(std::move(grid)), rank_(rank), data_(components() * grid_.spectral_size()) {}

  static SpectralField scalar(const TorusGrid& grid) { return {grid, Rank::scalar}; }
  static SpectralField vector(const TorusGrid& grid) { return {grid, Rank::vector}; }

  const TorusGrid& grid() const { return grid_; }
  Rank rank() const { return rank_; }
  std::size_t components() const { return std::size_t(rank_); }
  bool empty() const { return data_.empty(); }

  std::span<const Complex> component(std::size_t c) const {
    return {data_.data() + c * grid_.spectral_size(), grid_.spectral_size()};
  }
  std::span<Complex> component(std::size_t c) {
    return {data_.data() + c * grid_.spectral_size(), grid_.spectral_size()};
  }
  std::span<const Complex> data() const { return data_; }
  std::span<Complex> data() { return data_; }

  /// Coefficient at any retained wavenumber (negative k2 through symmetry).
  Complex coefficient(Wavenumber k, std::size_t c = 0) const {
    check_mode(k);
    if (k.k2 < 0) return std::conj(component(c)[grid_.slot(-k)]);
    return component(c)[grid_.slot(k)];
  }

  /// Sets f^(k) and f^(-k) consistently.
  void set_coefficient(Wavenumber k, Complex value, std::size_t c = 0) {
    check_mode(k);
    if (k.k2 < 0) {
      k = -k;
      value = std::conj(value);
    }
    auto comp = component(c);
    const std::size_t s = grid_.slot(k);
    comp[s] = value;
    if (k.k2 == 0) comp[grid_.modes().mirror[s]] = std::conj(value);
  }

  SpectralField& operator+=(const SpectralField& o) {
    check_compatible(o);
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += o.data_[i];
    return *this;
  }
  SpectralField& operator-=(const SpectralField& o) {
    check_compatible(o);
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] -= o.data_[i];
    return *this;
  }
  SpectralField& operator*=(double a) {
    for (auto& z : data_) z *= a;
    return *this;
  }
  /// this += a * o
  SpectralField& axpy(double a, const SpectralField& o) {
    check_compatible(o);
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += a * o.data_[i];
    return *this;
  }

  friend SpectralField operator+(SpectralField a, const SpectralField& b) { return a += b; }
  friend SpectralField operator-(SpectralField a, const SpectralField& b) { return a -= b; }
  friend SpectralField operator*(double a, SpectralField f) { return f *= a; }
  friend SpectralField operator*(SpectralField f, double a) { return f *= a; }

  bool same_shape(const SpectralField& o) const { return grid_ == o.grid_ && rank_ == o.rank_; }

  void check_compatible(const SpectralField& o) const {
    if (!same_shape(o)) throw std::invalid_argument("SpectralField: grid or rank mismatch");
  }

  bool operator==(const SpectralField& o) const { return same_shape(o) && data_ == o.data_; }

 private:
  void check_mode(Wavenumber k) const {
    if (!grid_.contains(k)) {
      throw std::out_of_range("SpectralField: wavenumber (" + std::to_string(k.k1) + "," +
                              std::to_string(k.k2) + ") is not retained");
    }
  }

  TorusGrid grid_;
  Rank rank_ = Rank::scalar;
  std::vector<Complex> data_;
};

/// Grid values of a field; component-major, row-major (x1 slow, x2 fast).
struct PhysicalField {
  TorusGrid grid;
  Rank rank = Rank::scalar;
  std::vector<double> values;

  std::span<const double> component(std::size_t c) const {
    return {values.data() + c * grid.physical_size(), grid.physical_size()};
  }
  std::span<double> component(std::size_t c) {
    return {values.data() + c * grid.physical_size(), grid.physical_size()};
  }
};

inline PhysicalField to_physical(const SpectralField& f) {
  PhysicalField p{f.grid(), f.rank(), std::vector<double>(f.components() * f.grid().physical_size())};
  for (std::size_t c = 0; c < f.components(); ++c) fft::to_physical(f.grid(), f.component(c), p.component(c));
  return p;
}

inline SpectralField to_spectral(const PhysicalField& p) {
  SpectralField f(p.grid, p.rank);
  for (std::size_t c = 0; c < f.components(); ++c) fft::to_spectral(p.grid, p.component(c), f.component(c));
  return f;
}

/// Mode-wise multiplication by a real symbol m(slot).
template <class Symbol>
SpectralField apply_symbol(SpectralField f, Symbol&& symbol) {
  const auto& m = f.grid().modes();
  for (std::size_t c = 0; c < f.components(); ++c) {
    auto comp = f.component(c);
    for (std::size_t s : m.retained_slots) comp[s] *= symbol(s);
  }
  return f;
}

/// Zeroes every mode outside |k|_inf <= dealias_radius.
inline SpectralField dealias(SpectralField f) {
  const auto& m = f.grid().modes();
  for (std::size_t c = 0; c < f.components(); ++c) {
    auto comp = f.component(c);
    for (std::size_t s = 0; s < comp.size(); ++s)
      if (!m.dealiased[s]) comp[s] = Complex{};
  }
  return f;
}

inline bool is_dealiased(const SpectralField& f) {
  const auto& m = f.grid().modes();
  for (std::size_t c = 0; c < f.components(); ++c) {
    auto comp = f.component(c);
    for (std::size_t s = 0; s < comp.size(); ++s)
      if (!m.dealiased[s] && comp[s] != Complex{}) return false;
  }
  return true;
}

/// Real L^2 pairing int <f, g> dx (Parseval, normalised measure).
inline double inner(const SpectralField& f, const SpectralField& g) {
  f.check_compatible(g);
  const auto& m = f.grid().modes();
  double acc = 0.0;
  for (std::size_t c = 0; c < f.components(); ++c) {
    auto a = f.component(c);
    auto b = g.component(c);
    for (std::size_t s : m.retained_slots) acc += m.weight[s] * (a[s].real() * b[s].real() + a[s].imag() * b[s].imag());
  }
  return acc;
}

inline double norm2(const SpectralField& f) { return inner(f, f); }
inline double l2_norm(const SpectralField& f) { return std::sqrt(norm2(f)); }

/// Physical-space L^2 norm by quadrature over the grid.
inline double l2_norm(const PhysicalField& p) {
  double acc = 0.0;
  for (double v : p.values) acc += v * v;
  return std::sqrt(acc / double(p.grid.physical_size()));
}

/// Sum of |f^(k)| over the full lattice; an upper bound for sup_x |f(x)|.
inline double coefficient_l1(const SpectralField& f) {
  const auto& m = f.grid().modes();
  double acc = 0.0;
  for (std::size_t s : m.retained_slots) {
    double mag2 = 0.0;
    for (std::size_t c = 0; c < f.components(); ++c) mag2 += std::norm(f.component(c)[s]);
    acc += m.weight[s] * std::sqrt(mag2);
  }
  return acc;
}

inline bool all_finite(const SpectralField& f) {
  return std::all_of(f.data().begin(), f.data().end(),
                     [](const Complex& z) { return std::isfinite(z.real()) && std::isfinite(z.imag()); });
}

/// Largest deviation from f^(-k) = conj f^(k) on the stored k2 = 0 column,
/// plus any content in excluded slots.
inline double symmetry_defect(const SpectralField& f) {
  const auto& m = f.grid().modes();
  double worst = 0.0;
  for (std::size_t c = 0; c < f.components(); ++c) {
    auto comp = f.component(c);
    for (std::size_t s = 0; s < comp.size(); ++s) {
      if (!m.retained[s]) {
        worst = std::max(worst, std::abs(comp[s]));
      } else if (m.k2[s] == 0) {
        worst = std::max(worst, std::abs(comp[s] - std::conj(comp[m.mirror[s]])));
      }
    }
  }
  return worst;
}

inline double max_abs(const PhysicalField& p) {
  const std::size_t size = p.grid.physical_size();
  double worst = 0.0;
  for (std::size_t i = 0; i < size; ++i) {
    double mag2 = 0.0;
    for (std::size_t c = 0; c < std::size_t(p.rank); ++c) mag2 += p.values[c * size + i] * p.values[c * size + i];
    worst = std::max(worst, mag2);
  }
  return std::sqrt(worst);
}

}  // namespace tsns
