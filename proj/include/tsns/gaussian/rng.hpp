#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>

#include "tsns/spectral/grid.hpp"

namespace tsns {

/// Philox4x32-10 block function (Salmon et al., SC'11).
inline std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> ctr, std::array<std::uint32_t, 2> key) {
  constexpr std::uint32_t M0 = 0xD2511F53u, M1 = 0xCD9E8D57u;
  constexpr std::uint32_t W0 = 0x9E3779B9u, W1 = 0xBB67AE85u;
  for (int round = 0; round < 10; ++round) {
    const std::uint64_t p0 = std::uint64_t(M0) * ctr[0];
    const std::uint64_t p1 = std::uint64_t(M1) * ctr[2];
    const std::uint32_t hi0 = std::uint32_t(p0 >> 32), lo0 = std::uint32_t(p0);
    const std::uint32_t hi1 = std::uint32_t(p1 >> 32), lo1 = std::uint32_t(p1);
    ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
    key[0] += W0;
    key[1] += W1;
  }
  return ctr;
}

/// Purpose tags keep the streams of one trajectory apart.
enum class StreamPurpose : std::uint32_t {
  initial = 1,
  noise = 2,
  ensemble = 3,
  phases = 4,
  test = 5,
  replacement = 6,
};

/// Counter-based stream.  Block b of the stream is
/// philox(counter = {b_lo, b_hi ^ substream, trajectory, purpose}, key = seed),
/// so every draw is a pure function of (seed, trajectory, purpose, substream,
/// position).
class RngStream {
 public:
  RngStream() = default;
  RngStream(std::uint64_t seed, std::uint32_t trajectory, StreamPurpose purpose, std::uint32_t substream = 0)
      : key_{std::uint32_t(seed), std::uint32_t(seed >> 32)},
        trajectory_(trajectory),
        purpose_(std::uint32_t(purpose)),
        substream_(substream) {}

  std::uint64_t next_u64() {
    if (lane_ == 2) refill();
    const std::uint64_t v = (std::uint64_t(buffer_[2 * lane_]) << 32) | buffer_[2 * lane_ + 1];
    ++lane_;
    return v;
  }

  /// Uniform on [0, 1) with 53 random bits.
  double uniform() { return double(next_u64() >> 11) * 0x1.0p-53; }

  /// Box-Muller; both outputs of each pair are used.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double u1 = 1.0 - uniform();  // (0, 1]
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(a);
    has_spare_ = true;
    return r * std::cos(a);
  }

  /// Complex Gaussian with E|z|^2 = 1 (real and imaginary parts of variance 1/2).
  Complex complex_normal() {
    const double re = normal();
    const double im = normal();
    return {re * std::numbers::sqrt2 / 2.0, im * std::numbers::sqrt2 / 2.0};
  }

  std::uint64_t blocks_used() const { return block_; }

 private:
  void refill() {
    buffer_ = philox4x32({std::uint32_t(block_), std::uint32_t(block_ >> 32) ^ substream_, trajectory_, purpose_}, key_);
    ++block_;
    lane_ = 0;
  }

  std::array<std::uint32_t, 2> key_{};
  std::uint32_t trajectory_ = 0;
  std::uint32_t purpose_ = 0;
  std::uint32_t substream_ = 0;
  std::uint64_t block_ = 0;
  std::array<std::uint32_t, 4> buffer_{};
  int lane_ = 2;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace tsns
