#pragma once

#include <fftw3.h>

#include <complex>
#include <map>
#include <mutex>
#include <span>
#include <vector>

#include "tsns/spectral/grid.hpp"

namespace tsns::fft {

/// FFTW plans for one lattice size.  Planning is serialised; execution goes
/// through the new-array interface and is safe from any thread.
class Plans {
 public:
  static const Plans& get(int n) {
    static std::mutex mutex;
    static std::map<int, std::unique_ptr<Plans>> cache;
    std::lock_guard lock(mutex);
    auto& p = cache[n];
    if (!p) p.reset(new Plans(n));
    return *p;
  }

  Plans(const Plans&) = delete;
  Plans& operator=(const Plans&) = delete;
  ~Plans() {
    fftw_destroy_plan(forward_);
    fftw_destroy_plan(backward_);
  }

  void forward(double* in, Complex* out) const {
    fftw_execute_dft_r2c(forward_, in, reinterpret_cast<fftw_complex*>(out));
  }
  /// Destroys `in`.
  void backward(Complex* in, double* out) const {
    fftw_execute_dft_c2r(backward_, reinterpret_cast<fftw_complex*>(in), out);
  }

 private:
  explicit Plans(int n) {
    const std::size_t cols = std::size_t(n / 2 + 1);
    std::vector<double> real(std::size_t(n) * n);
    std::vector<Complex> spec(std::size_t(n) * cols);
    // ESTIMATE keeps the chosen algorithm, and thus every bit of output,
    // independent of timing noise.
    const unsigned flags = FFTW_ESTIMATE | FFTW_UNALIGNED;
    forward_ = fftw_plan_dft_r2c_2d(n, n, real.data(), reinterpret_cast<fftw_complex*>(spec.data()), flags);
    backward_ = fftw_plan_dft_c2r_2d(n, n, reinterpret_cast<fftw_complex*>(spec.data()), real.data(), flags);
  }

  fftw_plan forward_ = nullptr;
  fftw_plan backward_ = nullptr;
};

/// Physical values of a scalar component: f(x) = sum_k c(k) e^{-ik.x}.
inline void to_physical(const TorusGrid& grid, std::span<const Complex> coeffs, std::span<double> out) {
  thread_local std::vector<Complex> scratch;
  scratch.resize(grid.spectral_size());
  for (std::size_t s = 0; s < scratch.size(); ++s) scratch[s] = std::conj(coeffs[s]);
  Plans::get(grid.n()).backward(scratch.data(), out.data());
}

/// Coefficients c(k) = mean_x f(x) e^{ik.x}, masked to the retained set.
inline void to_spectral(const TorusGrid& grid, std::span<const double> values, std::span<Complex> out) {
  thread_local std::vector<double> scratch;
  scratch.assign(values.begin(), values.end());
  Plans::get(grid.n()).forward(scratch.data(), out.data());
  const auto& m = grid.modes();
  const double scale = 1.0 / double(grid.physical_size());
  for (std::size_t s = 0; s < out.size(); ++s) {
    out[s] = m.retained[s] ? std::conj(out[s]) * scale : Complex{};
  }
}

}  // namespace tsns::fft
