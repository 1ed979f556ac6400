#pragma once

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <string>

#include "tsns/spectral/field.hpp"

// Byte layout is described in docs/FORMATS.md.

namespace tsns::io {

inline constexpr std::array<char, 4> field_magic{'T', 'S', 'N', 'S'};
inline constexpr std::uint32_t field_version = 1;

namespace detail {
template <class T>
void put_le(std::ostream& os, T value) {
  static_assert(std::is_trivially_copyable_v<T>);
  std::array<unsigned char, sizeof(T)> bytes;
  std::memcpy(bytes.data(), &value, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes.begin(), bytes.end());
  os.write(reinterpret_cast<const char*>(bytes.data()), sizeof(T));
}

template <class T>
T get_le(std::istream& is) {
  std::array<unsigned char, sizeof(T)> bytes;
  is.read(reinterpret_cast<char*>(bytes.data()), sizeof(T));
  if (!is) throw std::runtime_error("field dump: unexpected end of stream");
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes.begin(), bytes.end());
  T value;
  std::memcpy(&value, bytes.data(), sizeof(T));
  return value;
}
}  // namespace detail

struct FieldHeader {
  std::uint32_t n = 0;
  Rank rank = Rank::scalar;
  Level level = Level::vorticity;
};

inline void write_header(std::ostream& os, const FieldHeader& h) {
  os.write(field_magic.data(), 4);
  detail::put_le<std::uint32_t>(os, field_version);
  detail::put_le<std::uint32_t>(os, h.n);
  detail::put_le<std::uint8_t>(os, std::uint8_t(h.rank));
  detail::put_le<std::uint8_t>(os, std::uint8_t(h.level));
}

inline FieldHeader read_header(std::istream& is) {
  std::array<char, 4> magic{};
  is.read(magic.data(), 4);
  if (!is || magic != field_magic) throw std::runtime_error("field dump: bad magic");
  const auto version = detail::get_le<std::uint32_t>(is);
  if (version != field_version) throw std::runtime_error("field dump: unsupported version " + std::to_string(version));
  FieldHeader h;
  h.n = detail::get_le<std::uint32_t>(is);
  const auto rank = detail::get_le<std::uint8_t>(is);
  const auto level = detail::get_le<std::uint8_t>(is);
  if (rank != 1 && rank != 2) throw std::runtime_error("field dump: bad rank tag");
  if (level > 3) throw std::runtime_error("field dump: bad level tag");
  h.rank = Rank(rank);
  h.level = Level(level);
  return h;
}

/// Coefficients only, k1 then k2 over [-(n/2-1), n/2-1], zero mode skipped.
inline void write_payload(std::ostream& os, const SpectralField& f) {
  const int kmax = f.grid().max_wavenumber();
  for (std::size_t c = 0; c < f.components(); ++c) {
    for (int k1 = -kmax; k1 <= kmax; ++k1) {
      for (int k2 = -kmax; k2 <= kmax; ++k2) {
        if (k1 == 0 && k2 == 0) continue;
        const Complex z = f.coefficient({k1, k2}, c);
        detail::put_le<double>(os, z.real());
        detail::put_le<double>(os, z.imag());
      }
    }
  }
}

/// Reads a payload; k2 < 0 entries must be the conjugates of their partners.
inline SpectralField read_payload(std::istream& is, const TorusGrid& grid, Rank rank) {
  SpectralField f(grid, rank);
  const int kmax = grid.max_wavenumber();
  for (std::size_t c = 0; c < f.components(); ++c) {
    for (int k1 = -kmax; k1 <= kmax; ++k1) {
      for (int k2 = -kmax; k2 <= kmax; ++k2) {
        if (k1 == 0 && k2 == 0) continue;
        const double re = detail::get_le<double>(is);
        const double im = detail::get_le<double>(is);
        if (k2 > 0 || (k2 == 0 && k1 > 0)) f.set_coefficient({k1, k2}, {re, im}, c);
      }
    }
  }
  return f;
}

inline void write_field(std::ostream& os, const SpectralField& f, Level level) {
  write_header(os, {std::uint32_t(f.grid().n()), f.rank(), level});
  write_payload(os, f);
}

inline SpectralField read_field(std::istream& is, Level* level = nullptr) {
  const FieldHeader h = read_header(is);
  if (level) *level = h.level;
  return read_payload(is, TorusGrid(int(h.n)), h.rank);
}

inline void save_field(const std::string& path, const SpectralField& f, Level level) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open " + path + " for writing");
  write_field(os, f, level);
}

inline SpectralField load_field(const std::string& path, Level* level = nullptr) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open " + path);
  return read_field(is, level);
}

}  // namespace tsns::io
