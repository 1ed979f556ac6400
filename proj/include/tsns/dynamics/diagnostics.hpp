#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

#include "tsns/dynamics/integrator.hpp"
#include "tsns/experiments/report.hpp"
#include "tsns/experiments/stats.hpp"

namespace tsns {

/// |<x, F(x)>| / (||x|| ||F(x)||), 0 when either factor vanishes.
inline double transfer_ratio(const SpectralField& x, const SpectralField& fx) {
  const double denom = l2_norm(x) * l2_norm(fx);
  return denom > 0.0 ? std::abs(inner(x, fx)) / denom : 0.0;
}

/// Expected per-step increase of ||x||^2 from the noise alone:
/// sum_k sigma_inf^2(k) (1 - e^{-2 |k|^{2 gamma} dt}) over the noise support.
inline double expected_injection(const TorusGrid& grid, const NoiseSpec& noise, double dt) {
  const auto& m = grid.modes();
  double acc = 0.0;
  for (std::size_t s : m.dealiased_slots) {
    const double rate = std::pow(m.norm[s], 2.0 * noise.gamma);
    acc += m.weight[s] * noise.stationary_variance(m.norm[s]) * -std::expm1(-2.0 * rate * dt);
  }
  return acc;
}

/// Enstrophy budget of a vorticity-level trajectory stored at every step.
///
/// Columns: time, enstrophy ||w||^2, energy ||K w||^2, dissipation
/// 2||grad^gamma w||^2, transfer <w, F(w)> / (||w|| ||F(w)||), and
/// residual = (||w+||^2 - ||w||^2)/dt + mean dissipation (deterministic runs)
/// or the noise injection r = ||w+||^2 - ||E w + P1 F(w)||^2 (noisy runs).
inline StatReport enstrophy_diagnostic(const TrajectoryRecord& traj) {
  if (traj.drift.level != Level::vorticity) throw std::invalid_argument("enstrophy_diagnostic: vorticity level only");
  if (traj.integrator.record_stride != 1) throw std::invalid_argument("enstrophy_diagnostic: needs every step stored");
  const double dt = traj.integrator.dt;
  const double gamma = traj.noise.gamma;
  const bool noisy = traj.noise_record.has_value();
  const TorusGrid& grid = traj.states.front().grid();
  const StepCoefficients coeff(grid, traj.noise, dt);

  StatReport r;
  r.title = "enstrophy";
  r.seed = traj.seed;
  r.columns = {"time", "enstrophy", "energy", "dissipation", "transfer", "residual"};
  std::vector<double> enst, diss, transfer;
  for (const auto& w : traj.states) {
    enst.push_back(norm2(w));
    diss.push_back(2.0 * norm2(fractional_power(w, gamma)));
    transfer.push_back(traj.drift.kind == DriftKind::linear ? 0.0 : transfer_ratio(w, evaluate_drift(traj.drift, w)));
  }
  std::vector<double> residual(traj.states.size(), 0.0);
  for (std::size_t q = 0; q + 1 < traj.states.size(); ++q) {
    if (noisy) {
      SpectralField det = step(traj.states[q], traj.drift, coeff, {}, traj.integrator.scheme);
      residual[q] = enst[q + 1] - norm2(det);
    } else {
      residual[q] = (enst[q + 1] - enst[q]) / dt + 0.5 * (diss[q] + diss[q + 1]);
    }
  }
  double max_transfer = 0.0, max_residual = 0.0, max_diss = 0.0;
  for (std::size_t q = 0; q < traj.states.size(); ++q) {
    r.add_row({traj.times[q], enst[q], norm2(biot_savart(traj.states[q])), diss[q], transfer[q], residual[q]});
    max_transfer = std::max(max_transfer, transfer[q]);
    max_diss = std::max(max_diss, diss[q]);
    if (q + 1 < traj.states.size()) max_residual = std::max(max_residual, std::abs(residual[q]));
  }
  r.set("dt", dt);
  r.set("max_transfer", max_transfer);
  if (noisy) {
    std::vector<double> inj(residual.begin(), residual.end() - 1);
    const double expected = expected_injection(grid, traj.noise, dt);
    const double m = stats::mean(inj), se = stats::standard_error(inj);
    r.set("injection_mean", m);
    r.set("injection_se", se);
    r.set("injection_expected", expected);
    r.set("injection_z", (m - expected) / se);
  } else {
    r.set("max_abs_residual", max_residual);
    r.set("max_dissipation", max_diss);
    r.set("relative_residual", max_diss > 0.0 ? max_residual / max_diss : max_residual);
  }
  return r;
}

}  // namespace tsns
