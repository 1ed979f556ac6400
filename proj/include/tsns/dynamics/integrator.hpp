#pragma once

#include <cmath>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "tsns/dynamics/drift_spec.hpp"
#include "tsns/gaussian/noise.hpp"

namespace tsns {

enum class Scheme { exponential_euler, etdrk2 };

struct IntegratorConfig {
  double dt = 1e-3;
  double T = 1.0;
  Scheme scheme = Scheme::exponential_euler;
  double blowup_threshold = 1e6;  // on holder_norm(velocity, alpha - kappa)
  double kappa = 0.05;
  std::size_t record_stride = 1;  // keep every k-th state; 0 keeps only the endpoints
  bool record_noise = true;

  std::size_t steps() const { return std::size_t(std::llround(T / dt)); }

  void validate() const {
    if (!(dt > 0.0)) throw std::invalid_argument("IntegratorConfig: dt must be > 0");
    if (!(T >= dt * (1.0 - 1e-12))) throw std::invalid_argument("IntegratorConfig: need T >= dt");
    if (std::abs(double(steps()) * dt - T) > 1e-9 * T)
      throw std::invalid_argument("IntegratorConfig: T must be a multiple of dt");
  }
};

/// Per-slot constants of one step of size dt:
///   x+ = E x + P1 F(x) + Nw (dW + h dt) + Nz Z  (noise colour applied to dW, Z).
struct StepCoefficients {
  std::vector<double> E, P1, P2, Nw, Nz;
  double dt = 0.0;

  StepCoefficients(const TorusGrid& grid, const NoiseSpec& noise, double dt_) : dt(dt_) {
    const std::size_t size = grid.spectral_size();
    E.assign(size, 0.0);
    P1.assign(size, 0.0);
    P2.assign(size, 0.0);
    Nw.assign(size, 0.0);
    Nz.assign(size, 0.0);
    const auto& m = grid.modes();
    for (std::size_t s : m.retained_slots) {
      const double rate = std::pow(m.norm[s], 2.0 * noise.gamma);
      const double x = rate * dt;
      const double amp = std::numbers::sqrt2 * noise.multiplier(m.norm[s]);
      E[s] = std::exp(-x);
      P1[s] = phi1(x) * dt;
      // (e^{-x} - 1 + x) / x^2, the ETDRK2 corrector weight.
      P2[s] = dt * (x < 1e-4 ? 0.5 - x / 6.0 + x * x / 24.0 : (std::expm1(-x) + x) / (x * x));
      Nw[s] = amp * phi1(x);
      Nz[s] = amp * std::sqrt(dt * ou_residual_factor(x));
    }
  }
};

/// Noise of one step: scalar white fields (dealiased), optional shift h.
struct StepNoise {
  const SpectralField* dW = nullptr;
  const SpectralField* Z = nullptr;
  const SpectralField* h = nullptr;
};

namespace detail {
/// Scalar white field with per-slot weights -> state-level field.
inline SpectralField coloured(const SpectralField& white, const std::vector<double>& w, Level level) {
  SpectralField scaled = apply_symbol(white, [&](std::size_t s) { return w[s]; });
  return level == Level::velocity ? polarize(scaled) : scaled;
}
}  // namespace detail

/// Stochastic forcing of one step (the terms multiplying dW, h, Z).
inline SpectralField step_forcing(const StepCoefficients& c, const StepNoise& noise, Level level, const TorusGrid& grid) {
  SpectralField white = SpectralField::scalar(grid);
  bool any = false;
  if (noise.dW) {
    white += *noise.dW;
    any = true;
  }
  if (noise.h) {
    white.axpy(c.dt, *noise.h);
    any = true;
  }
  SpectralField out(grid, rank_of(level));
  if (any) out += detail::coloured(white, c.Nw, level);
  if (noise.Z) out += detail::coloured(*noise.Z, c.Nz, level);
  return out;
}

inline SpectralField step(const SpectralField& x, const DriftSpec& drift, const StepCoefficients& c,
                          const StepNoise& noise, Scheme scheme = Scheme::exponential_euler) {
  SpectralField a = apply_symbol(x, [&](std::size_t s) { return c.E[s]; });
  SpectralField f0;
  if (drift.kind != DriftKind::linear) {
    f0 = evaluate_drift(drift, x);
    a += apply_symbol(f0, [&](std::size_t s) { return c.P1[s]; });
  }
  if (noise.dW || noise.Z || noise.h) a += step_forcing(c, noise, drift.level, x.grid());
  if (scheme == Scheme::etdrk2 && drift.kind != DriftKind::linear) {
    SpectralField df = evaluate_drift(drift, a);
    df -= f0;
    a += apply_symbol(df, [&](std::size_t s) { return c.P2[s]; });
  }
  return a;
}

/// Convenience overload that builds the coefficients.
inline SpectralField step(const SpectralField& x, const DriftSpec& drift, const NoiseSpec& noise, double dt,
                          const StepNoise& sn = {}, Scheme scheme = Scheme::exponential_euler) {
  if (!(dt > 0.0)) throw std::invalid_argument("step: dt must be > 0");
  return step(x, drift, StepCoefficients(x.grid(), noise, dt), sn, scheme);
}

struct TrajectoryRecord {
  NoiseSpec noise;
  DriftSpec drift;
  IntegratorConfig integrator;
  std::uint64_t seed = 0;
  std::uint32_t trajectory = 0;
  std::vector<double> times;
  std::vector<std::size_t> step_index;
  std::vector<SpectralField> states;
  std::optional<NoiseRecord> noise_record;
  bool blew_up = false;
  std::string blowup_message;

  const SpectralField& final_state() const { return states.back(); }
};

/// Optional inputs of simulate.
struct SimulationInputs {
  const NoiseRecord* noise = nullptr;                 // recorded realisation; else drawn from the seed
  const std::vector<SpectralField>* shift = nullptr;  // white-level h per step
  bool noiseless = false;
  std::function<void(std::size_t, const SpectralField&)> observer;  // every state, step 0 included
  bool throw_on_blowup = true;
};

inline double blowup_norm(const SpectralField& x, Level level, double alpha, double kappa) {
  return holder_norm(velocity_of(x, level, alpha), alpha - kappa);
}

inline bool exceeds(const SpectralField& x, Level level, double alpha, double kappa, double threshold) {
  if (!all_finite(x)) return true;
  const SpectralField u = velocity_of(x, level, alpha);
  if (holder_norm_bound(u, alpha - kappa) <= threshold) return false;
  return holder_norm(u, alpha - kappa) > threshold;
}

/// Integrates from x0 over cfg.steps() steps of the exponential scheme.
inline TrajectoryRecord simulate(const SpectralField& x0, const NoiseSpec& noise, const DriftSpec& drift,
                                 const IntegratorConfig& cfg, std::uint64_t seed, std::uint32_t trajectory = 0,
                                 const SimulationInputs& in = {}) {
  cfg.validate();
  drift.validate();
  if (x0.rank() != rank_of(drift.level)) throw std::invalid_argument("simulate: state rank does not match level");
  const TorusGrid& grid = x0.grid();
  const std::size_t steps = cfg.steps();
  if (in.noise && in.noise->steps() < steps) throw std::invalid_argument("simulate: noise record too short");
  if (in.noise && std::abs(in.noise->dt - cfg.dt) > 1e-15 * cfg.dt)
    throw std::invalid_argument("simulate: noise record dt mismatch");
  if (in.shift && in.shift->size() < steps) throw std::invalid_argument("simulate: shift path too short");

  TrajectoryRecord rec;
  rec.noise = noise;
  rec.drift = drift;
  rec.integrator = cfg;
  rec.seed = seed;
  rec.trajectory = trajectory;
  auto keep = [&](std::size_t q) {
    if (q == 0 || q == steps) return true;
    return cfg.record_stride > 0 && q % cfg.record_stride == 0;
  };
  rec.times.push_back(0.0);
  rec.step_index.push_back(0);
  rec.states.push_back(x0);
  if (in.observer) in.observer(0, x0);

  NoiseRecord local{grid, cfg.dt, seed, trajectory, {}, {}};
  if (!in.noise && !in.noiseless) {
    local.dW.resize(steps);
    local.Z.resize(steps);
  }
  const StepCoefficients coeff(grid, noise, cfg.dt);
  SpectralField x = x0;
  for (std::size_t q = 0; q < steps; ++q) {
    StepNoise sn;
    if (in.noise) {
      sn.dW = &in.noise->dW[q];
      sn.Z = &in.noise->Z[q];
    } else if (!in.noiseless) {
      draw_noise_step(local, q, StreamPurpose::noise);
      sn.dW = &local.dW[q];
      sn.Z = &local.Z[q];
    }
    if (in.shift) sn.h = &(*in.shift)[q];
    try {
      x = step(x, drift, coeff, sn, cfg.scheme);
      if (exceeds(x, drift.level, noise.alpha, cfg.kappa, cfg.blowup_threshold)) {
        BlowupDetected e("holder norm above threshold at step " + std::to_string(q + 1));
        e.step = q + 1;
        throw e;
      }
    } catch (BlowupDetected& e) {
      rec.blew_up = true;
      rec.blowup_message = e.what();
      if (in.throw_on_blowup) {
        e.step = q + 1;
        throw;
      }
      break;
    }
    if (!in.noise && !in.noiseless && !cfg.record_noise) {
      local.dW[q] = SpectralField();
      local.Z[q] = SpectralField();
    }
    if (in.observer) in.observer(q + 1, x);
    if (keep(q + 1)) {
      rec.times.push_back(double(q + 1) * cfg.dt);
      rec.step_index.push_back(q + 1);
      rec.states.push_back(x);
    }
  }
  if (cfg.record_noise) {
    if (in.noise) {
      NoiseRecord copy = *in.noise;
      copy.dW.resize(steps);
      copy.Z.resize(steps);
      rec.noise_record = std::move(copy);
    } else if (!in.noiseless) {
      rec.noise_record = std::move(local);
    }
  }
  return rec;
}

}  // namespace tsns
