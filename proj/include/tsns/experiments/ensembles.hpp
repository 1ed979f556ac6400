#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "tsns/dynamics/trajectory_io.hpp"
#include "tsns/experiments/context.hpp"
#include "tsns/experiments/marginals.hpp"
#include "tsns/experiments/parallel.hpp"

namespace tsns::experiments {

struct Ensemble {
  std::vector<SpectralField> initial;
  std::vector<SpectralField> final;  // last stored state; the pre-blowup state for blown-up runs
  std::vector<std::uint8_t> blew_up;
  std::vector<std::string> messages;

  std::size_t blowups() const { return std::size_t(std::count(blew_up.begin(), blew_up.end(), 1)); }
};

/// M independent trajectories from mu_alpha to horizon T at step dt.
/// With a non-empty `persist_as` every trajectory is saved under it.
inline Ensemble run_ensemble(const ExperimentConfig& cfg, double dt, RunContext& ctx, const std::string& persist_as = {},
                             std::size_t record_stride = 0) {
  const TorusGrid grid(cfg.n);
  const NoiseSpec noise = noise_of(cfg);
  const DriftSpec drift = drift_of(cfg);
  IntegratorConfig ic = endpoint_integrator(dt, cfg.T);
  ic.record_stride = record_stride;
  ic.blowup_threshold = cfg.blowup_threshold;
  Ensemble e;
  e.initial.resize(cfg.M);
  e.final.resize(cfg.M);
  e.blew_up.assign(cfg.M, 0);
  e.messages.resize(cfg.M);
  std::vector<std::uint64_t> sums(cfg.M);
  const bool save = ctx.persist() && !persist_as.empty();
  parallel_for(cfg.M, ctx.threads, [&](std::size_t i) {
    e.initial[i] = initial_state(cfg, grid, i, cfg.level);
    SimulationInputs in;
    in.throw_on_blowup = false;
    const TrajectoryRecord traj = simulate(e.initial[i], noise, drift, ic, cfg.seed, std::uint32_t(i), in);
    e.final[i] = traj.final_state();
    e.blew_up[i] = traj.blew_up;
    e.messages[i] = traj.blowup_message;
    sums[i] = field_checksum(traj.final_state());
    if (save) io::save_trajectory(traj, ctx.path(persist_as + "/" + index_name("traj_", i)));
  });
  for (std::size_t i = 0; i < cfg.M; ++i) {
    if (save) ctx.artifact(persist_as + "/" + index_name("traj_", i) + "/states", sums[i]);
    if (e.blew_up[i]) ctx.failures.push_back("trajectory " + std::to_string(i) + " (dt " + StatReport::format(dt) + "): " + e.messages[i]);
  }
  return e;
}

inline StatReport ensemble_report(const Ensemble& e, const ExperimentConfig& cfg, double dt, const std::string& title) {
  StatReport r;
  r.title = title;
  r.seed = cfg.seed;
  r.columns = {"trajectory", "blew_up", "initial_l2", "final_l2"};
  for (std::size_t i = 0; i < e.final.size(); ++i)
    r.add_row({double(i), double(e.blew_up[i]), l2_norm(e.initial[i]), l2_norm(e.final[i])});
  r.set("dt", dt);
  r.set("T", cfg.T);
  r.set("M", double(cfg.M));
  r.set("blowups", double(e.blowups()));
  r.verdict("no_blowup", e.blowups() == 0, std::to_string(e.blowups()) + " of " + std::to_string(cfg.M) + " blew up");
  return r;
}

inline std::vector<StatReport> simulate_experiment(const ExperimentConfig& cfg, RunContext& ctx) {
  const Ensemble e = run_ensemble(cfg, cfg.dt, ctx, "trajectories", cfg.record_stride);
  return {ensemble_report(e, cfg, cfg.dt, "simulate")};
}

/// Whether the configured drift leaves the truncated mu_alpha exactly invariant.
inline bool preserves_gaussian(const ExperimentConfig& cfg) {
  const DriftKind k = drift_kind_from_string(cfg.drift);
  return k == DriftKind::linear || (k == DriftKind::twisted && cfg.level == Level::hat);
}

inline void make_soft(StatReport& r, const std::string& why) {
  for (auto& v : r.verdicts) v.hard = false;
  r.notes.push_back(why);
}

/// Time-T marginals against the initial Gaussian law, at dt and (optionally) dt / 2.
inline std::vector<StatReport> invariance_experiment(const ExperimentConfig& cfg, RunContext& ctx) {
  const GaussianMeasureSpec mu{cfg.alpha, cfg.level};
  const bool exact = preserves_gaussian(cfg);
  const std::string exploratory_note = "drift does not preserve mu_alpha exactly; marginal verdicts are findings only";
  std::vector<StatReport> out;
  const Ensemble e = run_ensemble(cfg, cfg.dt, ctx, "trajectories");
  out.push_back(ensemble_report(e, cfg, cfg.dt, "ensemble"));
  StatReport m = marginal_tests(e.final, mu, cfg.thresholds);
  m.seed = cfg.seed;
  if (!exact) make_soft(m, exploratory_note);
  const bool base_pass = m.find_verdict("ks_bonferroni").pass && m.find_verdict("variance_bonferroni").pass;
  out.push_back(m);

  StatReport summary;
  summary.title = "invariance";
  summary.seed = cfg.seed;
  summary.set("dt", cfg.dt);
  summary.set("ks_rejections", m.get("ks_rejections"));
  summary.set("variance_rejections", m.get("variance_rejections"));
  summary.verdict("marginals", base_pass, "no corrected rejection at dt", exact);
  if (cfg.dt_halving) {
    const Ensemble h = run_ensemble(cfg, 0.5 * cfg.dt, ctx);
    out.push_back(ensemble_report(h, cfg, 0.5 * cfg.dt, "ensemble_half_dt"));
    StatReport mh = marginal_tests(h.final, mu, cfg.thresholds);
    mh.title = "marginals_half_dt";
    mh.seed = cfg.seed;
    if (!exact) make_soft(mh, exploratory_note);
    const bool half_pass = mh.find_verdict("ks_bonferroni").pass && mh.find_verdict("variance_bonferroni").pass;
    out.push_back(mh);
    summary.set("half_dt_ks_rejections", mh.get("ks_rejections"));
    summary.set("half_dt_variance_rejections", mh.get("variance_rejections"));
    summary.verdict("stable_under_halving", base_pass == half_pass,
                    std::string("dt: ") + (base_pass ? "PASS" : "FAIL") + ", dt/2: " + (half_pass ? "PASS" : "FAIL"),
                    exact);
  }
  if (!exact) summary.notes.push_back(exploratory_note);
  out.push_back(summary);
  return out;
}

/// Subsampling stride (in steps) and series statistics of one long run.
struct Decorrelation {
  std::size_t burn_steps = 0;
  double tau_steps = 1.0;
  std::size_t stride = 1;
};

inline StatReport long_run_report(const ExperimentConfig& cfg, std::vector<SpectralField>* samples) {
  const TorusGrid grid(cfg.n);
  const NoiseSpec noise = noise_of(cfg);
  const DriftSpec drift = drift_of(cfg);
  const IntegratorConfig ic = endpoint_integrator(cfg.dt, cfg.long_run_T);
  const std::size_t burn = std::size_t(std::llround(cfg.burn_in / cfg.dt));
  const std::uint32_t id = std::uint32_t(cfg.M);  // past the ensemble's trajectory indices
  const SpectralField x0 = initial_state(cfg, grid, id, cfg.level);

  std::vector<double> series;
  SimulationInputs in;
  in.observer = [&](std::size_t q, const SpectralField& x) {
    if (q >= burn) series.push_back(norm2(curl(velocity_of(x, cfg.level, cfg.alpha))));
  };
  const TrajectoryRecord first = simulate(x0, noise, drift, ic, cfg.seed, id, in);
  if (first.blew_up) throw BlowupDetected("long run: " + first.blowup_message);
  Decorrelation d;
  d.burn_steps = burn;
  d.tau_steps = stats::integrated_autocorrelation_time(series);
  d.stride = std::max<std::size_t>(1, std::size_t(std::ceil(5.0 * d.tau_steps)));

  // same seed, same path: collect the subsampled states
  in.observer = [&](std::size_t q, const SpectralField& x) {
    if (q >= burn && (q - burn) % d.stride == 0) samples->push_back(x);
  };
  simulate(x0, noise, drift, ic, cfg.seed, id, in);

  StatReport r;
  r.title = "decorrelation";
  r.seed = cfg.seed;
  r.columns = {"step", "enstrophy"};
  for (std::size_t i = 0; i < series.size(); i += d.stride) r.add_row({double(burn + i), series[i]});
  r.set("long_run_T", cfg.long_run_T);
  r.set("burn_in_steps", double(burn));
  r.set("tau_int_steps", d.tau_steps);
  r.set("tau_int_time", d.tau_steps * cfg.dt);
  r.set("stride_steps", double(d.stride));
  r.set("samples", double(samples->size()));
  r.notes.push_back("states subsampled every 5 integrated autocorrelation times of the enstrophy");
  return r;
}

inline std::vector<StatReport> gaussianity_experiment(const ExperimentConfig& cfg, RunContext& ctx) {
  if (cfg.M < 100) throw std::invalid_argument("gaussianity: needs M >= 100");
  const GaussianMeasureSpec mu{cfg.alpha, cfg.level};
  std::vector<StatReport> out;
  const Ensemble e = run_ensemble(cfg, cfg.dt, ctx, "trajectories");
  out.push_back(ensemble_report(e, cfg, cfg.dt, "ensemble"));
  StatReport g = gaussianity_report(e.final, mu, cfg.thresholds);
  g.seed = cfg.seed;
  g.notes.push_back("exploratory: nonlinear time-T marginals compared with mu_alpha");
  out.push_back(g);
  if (cfg.long_run_T > 0.0) {
    std::vector<SpectralField> samples;
    out.push_back(long_run_report(cfg, &samples));
    if (samples.size() >= 100) {
      StatReport lr = gaussianity_report(samples, mu, cfg.thresholds);
      lr.title = "gaussianity_long_run";
      lr.seed = cfg.seed;
      out.push_back(lr);
    } else {
      out.back().notes.push_back("fewer than 100 decorrelated samples; no long-run gaussianity report");
    }
  }
  return out;
}

/// Stationary damped OU paths sampled at lag 0 and lag tau, pooled
/// normalised statistics per K:
///   variance   |f_0|^2 / s_inf^2 - 1,
///   covariance Re <f_0, f_tau> / s_inf^2 - e^{-(K + |k|^{2 gamma}) tau}.
inline std::vector<StatReport> ou_covariance_experiment(const ExperimentConfig& cfg, RunContext& ctx) {
  const TorusGrid grid(cfg.n);
  const NoiseSpec noise = noise_of(cfg);
  const auto& modes = grid.modes().canonical_dealiased;
  const auto& m = grid.modes();
  StatReport r;
  r.title = "ou_covariance";
  r.seed = cfg.seed;
  r.columns = {"K", "k1", "k2", "knorm", "variance_ratio", "covariance_ratio"};
  for (std::size_t ki = 0; ki < cfg.ou_K.size(); ++ki) {
    const double K = cfg.ou_K[ki];
    std::vector<std::vector<SpectralField>> paths(cfg.M);
    parallel_for(cfg.M, ctx.threads, [&](std::size_t i) {
      RngStream rng(cfg.seed, std::uint32_t(i), StreamPurpose::ensemble, std::uint32_t(ki));
      paths[i] = damped_ou_sample_path(K, cfg.ou_lag, cfg.ou_lag, noise, grid, rng, Support::dealiased);
    });
    std::vector<double> var_stat, cov_stat;
    std::vector<SpectralField> a(cfg.M), b(cfg.M);
    for (std::size_t i = 0; i < cfg.M; ++i) {
      a[i] = paths[i].front();
      b[i] = paths[i].back();
    }
    for (std::size_t s : modes) {
      const double s2 = noise.stationary_variance(m.norm[s], K);
      const double c = ou_covariance_oracle(m.norm[s], cfg.ou_lag, K, noise) / s2;
      const auto z0 = mode_samples(a, s, cfg.level), z1 = mode_samples(b, s, cfg.level);
      double vsum = 0.0, csum = 0.0;
      for (std::size_t i = 0; i < cfg.M; ++i) {
        const double v = std::norm(z0[i]) / s2 - 1.0;
        const double cv = (std::conj(z0[i]) * z1[i]).real() / s2 - c;
        var_stat.push_back(v);
        cov_stat.push_back(cv);
        vsum += v;
        csum += cv;
      }
      r.add_row({K, double(m.k1[s]), double(m.k2[s]), m.norm[s], 1.0 + vsum / double(cfg.M),
                 (csum / double(cfg.M) + c) / c});
    }
    const std::string tag = "K=" + StatReport::format(K);
    const double vz = stats::mean(var_stat) / stats::standard_error(var_stat);
    const double cz = stats::mean(cov_stat) / stats::standard_error(cov_stat);
    r.set("mode_samples_" + tag, double(var_stat.size()));
    r.set("variance_z_" + tag, vz);
    r.set("covariance_z_" + tag, cz);
    r.verdict("variance_" + tag, std::abs(vz) <= cfg.thresholds.se_z, "z = " + StatReport::format(vz));
    r.verdict("covariance_" + tag, std::abs(cz) <= cfg.thresholds.se_z, "z = " + StatReport::format(cz));
  }
  r.set("lag", cfg.ou_lag);
  r.notes.push_back("pooled over all canonical dealiased modes; oracle sigma^2 e^{-(K+|k|^{2 gamma}) tau}");
  return {r};
}

}  // namespace tsns::experiments
