#pragma once

#include <cmath>
#include <numbers>
#include <random>

#include "tsns/spectral/field.hpp"
#include "tsns/spectral/operators.hpp"

namespace tsns::testing {

/// Random field with independent complex coefficients; decaying like
/// |k|^{-decay} so that products stay moderate.
inline SpectralField random_field(const TorusGrid& grid, Rank rank, std::uint64_t seed,
                                  Support support = Support::retained, double decay = 1.0) {
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> nd;
  SpectralField f(grid, rank);
  const auto& m = grid.modes();
  const auto& slots = support == Support::dealiased ? m.canonical_dealiased : m.canonical_retained;
  for (std::size_t c = 0; c < f.components(); ++c)
    for (std::size_t s : slots) {
      const double amp = std::pow(m.norm[s], -decay);
      f.set_coefficient(grid.wavenumber(s), amp * Complex{nd(gen), nd(gen)}, c);
    }
  return f;
}

inline SpectralField random_divfree(const TorusGrid& grid, std::uint64_t seed, Support support = Support::retained,
                                    double decay = 1.0) {
  return leray_project(random_field(grid, Rank::vector, seed, support, decay));
}

/// Grid coordinate of physical index i along one axis.
inline double coord(const TorusGrid& grid, std::size_t i) { return 2.0 * std::numbers::pi * double(i) / grid.n(); }

/// Relative max-norm difference of coefficient arrays.
inline double rel_diff(const SpectralField& a, const SpectralField& b) {
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < a.data().size(); ++i) {
    num = std::max(num, std::abs(a.data()[i] - b.data()[i]));
    den = std::max(den, std::abs(b.data()[i]));
  }
  return den > 0.0 ? num / den : num;
}

}  // namespace tsns::testing
