#pragma once

#include <cmath>
#include <complex>
#include <cstddef>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <stdexcept>
#include <string>
#include <vector>

namespace tsns {

using Complex = std::complex<double>;

struct Wavenumber {
  int k1 = 0;
  int k2 = 0;

  friend bool operator==(const Wavenumber&, const Wavenumber&) = default;
  Wavenumber operator-() const { return {-k1, -k2}; }
  double norm2() const { return double(k1) * k1 + double(k2) * k2; }
  double norm() const { return std::sqrt(norm2()); }
  int sup_norm() const { return std::max(std::abs(k1), std::abs(k2)); }
};

/// Per-storage-slot lookup tables for one lattice size.
///
/// Storage follows the real-to-complex FFT layout: n rows (k1, wrapped) by
/// n/2+1 columns (k2 >= 0).  Slots outside the retained set (the zero mode,
/// the Nyquist row and column) carry weight 0 and are never populated.
struct ModeTable {
  int n = 0;
  int columns = 0;
  std::vector<int> k1;
  std::vector<int> k2;
  std::vector<double> norm2;  // |k|^2, 0 for the zero mode
  std::vector<double> norm;   // |k|
  std::vector<std::uint8_t> retained;
  std::vector<std::uint8_t> dealiased;
  // Half-lattice representative: k2 > 0, or k2 == 0 and k1 > 0.
  std::vector<std::uint8_t> canonical;
  // Multiplicity of the slot in sums over the full lattice (1 on the k2 = 0
  // column, 2 elsewhere, 0 for excluded slots).
  std::vector<double> weight;
  std::vector<std::size_t> retained_slots;
  std::vector<std::size_t> dealiased_slots;
  std::vector<std::size_t> canonical_retained;
  std::vector<std::size_t> canonical_dealiased;
  // For k2 == 0 slots: storage slot of -k (same column).  Others: self.
  std::vector<std::size_t> mirror;
};

/// Periodic lattice on T^2 = (R/2piZ)^2 with n x n physical points.
class TorusGrid {
 public:
  TorusGrid() = default;
  explicit TorusGrid(int n) : table_(table_for(n)) {}

  int n() const { return table_->n; }
  int columns() const { return table_->columns; }
  std::size_t spectral_size() const { return std::size_t(n()) * std::size_t(columns()); }
  std::size_t physical_size() const { return std::size_t(n()) * std::size_t(n()); }

  /// Largest |k|_inf in the retained set.
  int max_wavenumber() const { return n() / 2 - 1; }
  /// Largest |k|_inf kept after quadratic products (2/3 rule, strict: 3M < n).
  int dealias_radius() const { return (n() - 1) / 3; }

  const ModeTable& modes() const { return *table_; }
  bool valid() const { return table_ != nullptr; }

  bool contains(Wavenumber k) const {
    return !(k.k1 == 0 && k.k2 == 0) && k.sup_norm() <= max_wavenumber();
  }

  /// Storage slot for a wavenumber with k2 >= 0.
  std::size_t slot(Wavenumber k) const {
    const int row = k.k1 >= 0 ? k.k1 : k.k1 + n();
    return std::size_t(row) * std::size_t(columns()) + std::size_t(k.k2);
  }

  Wavenumber wavenumber(std::size_t s) const { return {table_->k1[s], table_->k2[s]}; }

  friend bool operator==(const TorusGrid& a, const TorusGrid& b) {
    return a.table_ == b.table_ || (a.valid() && b.valid() && a.n() == b.n());
  }

 private:
  static std::shared_ptr<const ModeTable> table_for(int n) {
    if (n < 8 || n % 2 != 0) {
      throw std::invalid_argument("TorusGrid: n must be even and >= 8, got " + std::to_string(n));
    }
    static std::mutex mutex;
    static std::map<int, std::shared_ptr<const ModeTable>> cache;
    std::lock_guard lock(mutex);
    auto& entry = cache[n];
    if (!entry) entry = build(n);
    return entry;
  }

  static std::shared_ptr<const ModeTable> build(int n) {
    auto t = std::make_shared<ModeTable>();
    t->n = n;
    t->columns = n / 2 + 1;
    const std::size_t size = std::size_t(n) * std::size_t(t->columns);
    t->k1.resize(size);
    t->k2.resize(size);
    t->norm2.resize(size);
    t->norm.resize(size);
    t->retained.resize(size);
    t->dealiased.resize(size);
    t->canonical.resize(size);
    t->weight.resize(size);
    t->mirror.resize(size);
    const int kmax = n / 2 - 1;
    const int kdeal = (n - 1) / 3;
    for (int row = 0; row < n; ++row) {
      const int k1 = row <= n / 2 ? row : row - n;
      for (int k2 = 0; k2 < t->columns; ++k2) {
        const std::size_t s = std::size_t(row) * std::size_t(t->columns) + std::size_t(k2);
        t->k1[s] = k1;
        t->k2[s] = k2;
        t->norm2[s] = double(k1) * k1 + double(k2) * k2;
        t->norm[s] = std::sqrt(t->norm2[s]);
        const bool zero = k1 == 0 && k2 == 0;
        const int sup = std::max(std::abs(k1), k2);
        const bool ret = !zero && sup <= kmax;
        t->retained[s] = ret;
        t->dealiased[s] = ret && sup <= kdeal;
        t->canonical[s] = ret && (k2 > 0 || k1 > 0);
        t->weight[s] = ret ? (k2 == 0 ? 1.0 : 2.0) : 0.0;
        if (k2 == 0) {
          const int mrow = k1 == 0 ? 0 : (-k1 >= 0 ? -k1 : -k1 + n);
          t->mirror[s] = std::size_t(mrow) * std::size_t(t->columns);
        } else {
          t->mirror[s] = s;
        }
        if (ret) t->retained_slots.push_back(s);
        if (t->dealiased[s]) t->dealiased_slots.push_back(s);
        if (t->canonical[s]) t->canonical_retained.push_back(s);
        if (t->canonical[s] && t->dealiased[s]) t->canonical_dealiased.push_back(s);
      }
    }
    return t;
  }

  std::shared_ptr<const ModeTable> table_;
};

/// Which modes a sampler or mask acts on.
enum class Support { retained, dealiased };

}  // namespace tsns
