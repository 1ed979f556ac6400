#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "tsns/dynamics/drift_spec.hpp"
#include "tsns/experiments/report.hpp"

namespace tsns::experiments {

enum class ExperimentKind {
  simulate,
  invariance,
  gaussianity,
  coupling,
  commutator,
  ou_covariance,
  enstrophy,
  conservation,
  identities,
  time_shift,
  girsanov,
  propagator,
};

inline const std::vector<std::pair<ExperimentKind, const char*>>& kind_names() {
  static const std::vector<std::pair<ExperimentKind, const char*>> names = {
      {ExperimentKind::simulate, "simulate"},       {ExperimentKind::invariance, "invariance"},
      {ExperimentKind::gaussianity, "gaussianity"}, {ExperimentKind::coupling, "coupling"},
      {ExperimentKind::commutator, "commutator"},   {ExperimentKind::ou_covariance, "ou-cov"},
      {ExperimentKind::enstrophy, "enstrophy"},     {ExperimentKind::conservation, "conservation"},
      {ExperimentKind::identities, "identities"},   {ExperimentKind::time_shift, "time-shift"},
      {ExperimentKind::girsanov, "girsanov"},       {ExperimentKind::propagator, "propagator"},
  };
  return names;
}

inline const char* to_string(ExperimentKind k) {
  for (const auto& [kind, name] : kind_names())
    if (kind == k) return name;
  return "?";
}

/// Unknown names are usage errors.
inline ExperimentKind kind_from_string(const std::string& s) {
  for (const auto& [kind, name] : kind_names())
    if (s == name) return kind;
  throw std::invalid_argument("unknown experiment kind '" + s + "'");
}

/// Every pass/fail threshold used by an experiment.
struct Thresholds {
  double family_level = 0.01;  // Bonferroni family level for per-mode tests
  double se_z = 3.0;           // "within k SE" for pooled and Monte Carlo checks
  double kurtosis_flag_se = 5.0;
  double mode_radius_fraction = 1.0 / 6.0;  // per-mode tests use |k| <= fraction * n
  double slope_tolerance = 0.25;
  double rough_gap = 0.3;
  double conservation_tol = 1e-10;
  double identity_tol = 1e-12;
  double matched_tol = 1e-12;
  double order_min = 0.8;
  double coupling_relative = 5e-2;
  int max_picard_iterations = 8;
  double causality_factor = 10.0;
  double flow_factor = 10.0;
  double transfer_tol = 1e-10;
  double residual_factor = 10.0;  // deterministic enstrophy residual <= factor * dt
  double residual_halving = 0.75; // and shrinks at least this much under dt halving

  void validate() const {
    for (double v : {family_level, se_z, kurtosis_flag_se, mode_radius_fraction, slope_tolerance, rough_gap,
                     conservation_tol, identity_tol, matched_tol, order_min, coupling_relative, causality_factor,
                     flow_factor, transfer_tol, residual_factor, residual_halving})
      if (!(v > 0.0)) throw std::invalid_argument("ExperimentConfig: thresholds must be positive");
    if (!(family_level < 1.0)) throw std::invalid_argument("ExperimentConfig: family level must be < 1");
    if (max_picard_iterations < 1) throw std::invalid_argument("ExperimentConfig: max_picard_iterations must be >= 1");
  }
};

struct ExperimentConfig {
  ExperimentKind kind = ExperimentKind::simulate;
  int n = 32;
  double alpha = 1.0;
  double gamma = 1.0;
  Level level = Level::hat;
  std::string drift = "twisted";
  double dt = 1e-3;
  double T = 1.0;
  std::size_t M = 16;
  std::uint64_t seed = 1;
  std::string out;
  bool exploratory = false;
  unsigned threads = 0;  // 0: hardware concurrency
  Thresholds thresholds;

  double blowup_threshold = 1e6;
  // simulate
  std::size_t record_stride = 0;
  // invariance
  bool dt_halving = true;
  // gaussianity
  double long_run_T = 0.0;
  double burn_in = 1.0;
  // commutator
  std::vector<std::pair<double, double>> commutator_grid = {{1.0, 0.9}, {1.0, 1.2}, {1.5, 1.4}};
  int phases = 20;
  double rough_alpha = 1.0;
  double rough_beta = 0.9;
  int fit_lo = 4;
  int fit_hi = 64;
  // ou-cov
  std::vector<double> ou_K = {1.0, 10.0};
  double ou_lag = 0.02;
  // coupling
  double R = 50.0;
  double picard_tolerance = 1e-6;
  int max_picard = 50;
  int s_intervals = 8;
  double order_dt_fine = 1.0 / 1024.0;
  int order_levels = 3;
  std::vector<double> t_cut_fractions = {0.3, 0.6};
  // girsanov
  std::size_t mc_samples = 10000;

  std::size_t steps() const { return std::size_t(std::llround(T / dt)); }

  /// Well-posedness regimes: alpha = gamma = 1, or gamma in (2/3, 1] with alpha > 2 - gamma.
  bool in_regime() const {
    if (alpha == 1.0 && gamma == 1.0) return true;
    return gamma > 2.0 / 3.0 && gamma <= 1.0 && alpha > 2.0 - gamma;
  }

  void validate() const {
    if (M < 1) throw std::invalid_argument("ExperimentConfig: M must be >= 1");
    if (n < 8 || n % 2 != 0) throw std::invalid_argument("ExperimentConfig: n must be even and >= 8");
    if (!(dt > 0.0) || !(T > 0.0)) throw std::invalid_argument("ExperimentConfig: dt and T must be > 0");
    if (!(alpha > 0.0)) throw std::invalid_argument("ExperimentConfig: alpha must be > 0");
    if (!(gamma > 0.5 && gamma <= 1.0)) throw std::invalid_argument("ExperimentConfig: gamma must lie in (1/2, 1]");
    if (level == Level::white) throw std::invalid_argument("ExperimentConfig: white is not a state level");
    thresholds.validate();
    if (!(blowup_threshold > 0.0)) throw std::invalid_argument("ExperimentConfig: blowup_threshold must be > 0");
    if (fit_lo < 1 || fit_hi <= fit_lo) throw std::invalid_argument("ExperimentConfig: need 1 <= fit_lo < fit_hi");
    if (phases < 1 || order_levels < 2 || s_intervals < 1 || max_picard < 1 || mc_samples < 2)
      throw std::invalid_argument("ExperimentConfig: counts must be positive");
    const bool physical = kind != ExperimentKind::commutator && kind != ExperimentKind::conservation &&
                          kind != ExperimentKind::identities;
    if (physical && !in_regime() && !exploratory)
      throw std::invalid_argument("ExperimentConfig: (alpha, gamma) outside the well-posedness regimes "
                                  "(gamma in (2/3, 1], alpha > 2 - gamma); set exploratory to run anyway");
    double beta = 0.0;
    drift_kind_from_string(drift, &beta);
  }

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json j;
    j["kind"] = to_string(kind);
    j["n"] = n;
    j["alpha"] = alpha;
    j["gamma"] = gamma;
    j["level"] = tsns::to_string(level);
    j["drift"] = drift;
    j["dt"] = dt;
    j["T"] = T;
    j["M"] = M;
    j["seed"] = seed;
    j["out"] = out;
    j["exploratory"] = exploratory;
    j["threads"] = threads;
    auto& t = j["thresholds"];
    t["family_level"] = thresholds.family_level;
    t["se_z"] = thresholds.se_z;
    t["kurtosis_flag_se"] = thresholds.kurtosis_flag_se;
    t["mode_radius_fraction"] = thresholds.mode_radius_fraction;
    t["slope_tolerance"] = thresholds.slope_tolerance;
    t["rough_gap"] = thresholds.rough_gap;
    t["conservation_tol"] = thresholds.conservation_tol;
    t["identity_tol"] = thresholds.identity_tol;
    t["matched_tol"] = thresholds.matched_tol;
    t["order_min"] = thresholds.order_min;
    t["coupling_relative"] = thresholds.coupling_relative;
    t["max_picard_iterations"] = thresholds.max_picard_iterations;
    t["causality_factor"] = thresholds.causality_factor;
    t["flow_factor"] = thresholds.flow_factor;
    t["transfer_tol"] = thresholds.transfer_tol;
    t["residual_factor"] = thresholds.residual_factor;
    t["residual_halving"] = thresholds.residual_halving;
    j["blowup_threshold"] = blowup_threshold;
    j["record_stride"] = record_stride;
    j["dt_halving"] = dt_halving;
    j["long_run_T"] = long_run_T;
    j["burn_in"] = burn_in;
    auto& grid = j["commutator_grid"] = nlohmann::ordered_json::array();
    for (const auto& [a, b] : commutator_grid) grid.push_back({a, b});
    j["phases"] = phases;
    j["rough_alpha"] = rough_alpha;
    j["rough_beta"] = rough_beta;
    j["fit_lo"] = fit_lo;
    j["fit_hi"] = fit_hi;
    j["ou_K"] = ou_K;
    j["ou_lag"] = ou_lag;
    j["R"] = R;
    j["picard_tolerance"] = picard_tolerance;
    j["max_picard"] = max_picard;
    j["s_intervals"] = s_intervals;
    j["order_dt_fine"] = order_dt_fine;
    j["order_levels"] = order_levels;
    j["t_cut_fractions"] = t_cut_fractions;
    j["mc_samples"] = mc_samples;
    return j;
  }

  /// Overwrites the fields present in `j`; unknown keys are rejected.
  void merge_json(const nlohmann::json& j) {
    if (!j.is_object()) throw std::invalid_argument("config: expected a JSON object");
    for (auto it = j.begin(); it != j.end(); ++it) {
      const std::string& k = it.key();
      const auto& v = it.value();
      if (k == "kind") kind = kind_from_string(v.get<std::string>());
      else if (k == "n") n = v.get<int>();
      else if (k == "alpha") alpha = v.get<double>();
      else if (k == "gamma") gamma = v.get<double>();
      else if (k == "level") level = level_from_string(v.get<std::string>());
      else if (k == "drift") drift = v.get<std::string>();
      else if (k == "dt") dt = v.get<double>();
      else if (k == "T") T = v.get<double>();
      else if (k == "M") M = v.get<std::size_t>();
      else if (k == "seed") seed = v.get<std::uint64_t>();
      else if (k == "out") out = v.get<std::string>();
      else if (k == "exploratory") exploratory = v.get<bool>();
      else if (k == "threads") threads = v.get<unsigned>();
      else if (k == "thresholds") merge_thresholds(v);
      else if (k == "blowup_threshold") blowup_threshold = v.get<double>();
      else if (k == "record_stride") record_stride = v.get<std::size_t>();
      else if (k == "dt_halving") dt_halving = v.get<bool>();
      else if (k == "long_run_T") long_run_T = v.get<double>();
      else if (k == "burn_in") burn_in = v.get<double>();
      else if (k == "commutator_grid") {
        commutator_grid.clear();
        for (const auto& row : v) commutator_grid.emplace_back(row.at(0).get<double>(), row.at(1).get<double>());
      } else if (k == "phases") phases = v.get<int>();
      else if (k == "rough_alpha") rough_alpha = v.get<double>();
      else if (k == "rough_beta") rough_beta = v.get<double>();
      else if (k == "fit_lo") fit_lo = v.get<int>();
      else if (k == "fit_hi") fit_hi = v.get<int>();
      else if (k == "ou_K") ou_K = v.get<std::vector<double>>();
      else if (k == "ou_lag") ou_lag = v.get<double>();
      else if (k == "R") R = v.get<double>();
      else if (k == "picard_tolerance") picard_tolerance = v.get<double>();
      else if (k == "max_picard") max_picard = v.get<int>();
      else if (k == "s_intervals") s_intervals = v.get<int>();
      else if (k == "order_dt_fine") order_dt_fine = v.get<double>();
      else if (k == "order_levels") order_levels = v.get<int>();
      else if (k == "t_cut_fractions") t_cut_fractions = v.get<std::vector<double>>();
      else if (k == "mc_samples") mc_samples = v.get<std::size_t>();
      else throw std::invalid_argument("config: unknown key '" + k + "'");
    }
  }

  static ExperimentConfig from_json(const nlohmann::json& j) {
    ExperimentConfig c;
    c.merge_json(j);
    return c;
  }

  /// FNV-1a of the canonical JSON, without the output directory and thread count.
  std::uint64_t hash() const {
    nlohmann::ordered_json j = to_json();
    j.erase("out");
    j.erase("threads");
    return fnv1a(j.dump());
  }

 private:
  void merge_thresholds(const nlohmann::json& v) {
    for (auto it = v.begin(); it != v.end(); ++it) {
      const std::string& k = it.key();
      const auto& x = it.value();
      Thresholds& t = thresholds;
      if (k == "family_level") t.family_level = x.get<double>();
      else if (k == "se_z") t.se_z = x.get<double>();
      else if (k == "kurtosis_flag_se") t.kurtosis_flag_se = x.get<double>();
      else if (k == "mode_radius_fraction") t.mode_radius_fraction = x.get<double>();
      else if (k == "slope_tolerance") t.slope_tolerance = x.get<double>();
      else if (k == "rough_gap") t.rough_gap = x.get<double>();
      else if (k == "conservation_tol") t.conservation_tol = x.get<double>();
      else if (k == "identity_tol") t.identity_tol = x.get<double>();
      else if (k == "matched_tol") t.matched_tol = x.get<double>();
      else if (k == "order_min") t.order_min = x.get<double>();
      else if (k == "coupling_relative") t.coupling_relative = x.get<double>();
      else if (k == "max_picard_iterations") t.max_picard_iterations = x.get<int>();
      else if (k == "causality_factor") t.causality_factor = x.get<double>();
      else if (k == "flow_factor") t.flow_factor = x.get<double>();
      else if (k == "transfer_tol") t.transfer_tol = x.get<double>();
      else if (k == "residual_factor") t.residual_factor = x.get<double>();
      else if (k == "residual_halving") t.residual_halving = x.get<double>();
      else throw std::invalid_argument("config: unknown threshold '" + k + "'");
    }
  }
};

}  // namespace tsns::experiments
