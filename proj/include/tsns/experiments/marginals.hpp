#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "tsns/experiments/config.hpp"
#include "tsns/experiments/report.hpp"
#include "tsns/experiments/stats.hpp"
#include "tsns/gaussian/noise.hpp"

namespace tsns::experiments {

/// Canonical dealiased modes with |k| <= radius.
inline std::vector<std::size_t> test_modes(const TorusGrid& grid, double radius) {
  std::vector<std::size_t> out;
  const auto& m = grid.modes();
  for (std::size_t s : m.canonical_dealiased)
    if (m.norm[s] <= radius + 1e-12) out.push_back(s);
  return out;
}

/// Scalar amplitude of a state at one slot: the polarisation coordinate at
/// velocity level, the coefficient otherwise.  Its variance is the per-mode
/// variance of the level either way.
inline std::vector<Complex> mode_samples(const std::vector<SpectralField>& samples, std::size_t slot, Level level) {
  std::vector<Complex> out;
  out.reserve(samples.size());
  for (const auto& f : samples) {
    if (level == Level::velocity) {
      const auto& m = f.grid().modes();
      const Complex a = f.component(0)[slot], b = f.component(1)[slot];
      out.push_back(Complex{0.0, -1.0} * (-double(m.k2[slot]) * a + double(m.k1[slot]) * b) / m.norm[slot]);
    } else {
      out.push_back(f.component(0)[slot]);
    }
  }
  return out;
}

/// Two-sided Bonferroni critical |z| for `tests` tests at family level `level`.
inline double bonferroni_z(double level, std::size_t tests) {
  return stats::normal_quantile(1.0 - level / (2.0 * double(std::max<std::size_t>(tests, 1))));
}

/// Per-mode KS on standardised real and imaginary parts and a variance
/// z-test, both with Bonferroni correction over the tested modes.
inline StatReport marginal_tests(const std::vector<SpectralField>& samples, const GaussianMeasureSpec& mu,
                                 const Thresholds& th) {
  if (samples.size() < 2) throw std::invalid_argument("marginal_tests: need at least two samples");
  const TorusGrid& grid = samples.front().grid();
  const auto modes = test_modes(grid, th.mode_radius_fraction * grid.n());
  if (modes.empty()) throw std::invalid_argument("marginal_tests: no modes inside the test radius");
  const auto& m = grid.modes();
  const std::size_t ks_tests = 2 * modes.size();
  const double ks_level = th.family_level / double(ks_tests);
  const double z_crit = bonferroni_z(th.family_level, modes.size());

  StatReport r;
  r.title = "marginals";
  r.columns = {"k1", "k2", "knorm", "ks_re", "p_re", "ks_im", "p_im", "variance_ratio", "variance_z"};
  double min_p = 1.0, max_z = 0.0;
  std::size_t rejected_ks = 0, rejected_var = 0, beyond_se = 0;
  for (std::size_t s : modes) {
    const double var = mu.variance(m.norm[s]);
    const double sd = std::sqrt(var / 2.0);
    const auto z = mode_samples(samples, s, mu.level);
    std::vector<double> re, im, power;
    for (const Complex& c : z) {
      re.push_back(c.real() / sd);
      im.push_back(c.imag() / sd);
      power.push_back(std::norm(c) / var);
    }
    const auto kr = stats::ks_test_normal(re), ki = stats::ks_test_normal(im);
    const double ratio = stats::mean(power);
    const double vz = (ratio - 1.0) / stats::standard_error(power);
    r.add_row({double(m.k1[s]), double(m.k2[s]), m.norm[s], kr.statistic, kr.p_value, ki.statistic, ki.p_value, ratio, vz});
    min_p = std::min({min_p, kr.p_value, ki.p_value});
    max_z = std::max(max_z, std::abs(vz));
    rejected_ks += (kr.p_value < ks_level) + (ki.p_value < ks_level);
    rejected_var += std::abs(vz) > z_crit;
    beyond_se += std::abs(vz) > th.se_z;
  }
  r.set("samples", double(samples.size()));
  r.set("modes", double(modes.size()));
  r.set("ks_tests", double(ks_tests));
  r.set("ks_level", ks_level);
  r.set("min_p", min_p);
  r.set("variance_z_critical", z_crit);
  r.set("max_abs_variance_z", max_z);
  r.set("ks_rejections", double(rejected_ks));
  r.set("variance_rejections", double(rejected_var));
  r.set("variance_beyond_se", double(beyond_se));
  r.verdict("ks_bonferroni", rejected_ks == 0,
            "min p " + StatReport::format(min_p) + " vs " + StatReport::format(ks_level));
  r.verdict("variance_bonferroni", rejected_var == 0,
            "max |z| " + StatReport::format(max_z) + " vs " + StatReport::format(z_crit));
  r.verdict("variance_within_se", beyond_se == 0,
            std::to_string(beyond_se) + " modes beyond " + StatReport::format(th.se_z) + " SE without correction", false);
  return r;
}

/// Per-mode variance ratio, excess kurtosis and tail quantiles.  Kurtosis
/// beyond kurtosis_flag_se standard errors raises a soft flag.
inline StatReport gaussianity_report(const std::vector<SpectralField>& samples, const GaussianMeasureSpec& mu,
                                     const Thresholds& th) {
  if (samples.size() < 100) throw std::invalid_argument("gaussianity_report: needs M >= 100 samples");
  const TorusGrid& grid = samples.front().grid();
  const auto modes = test_modes(grid, th.mode_radius_fraction * grid.n());
  const auto& m = grid.modes();
  const double q_lo = 0.005, q_hi = 0.995;

  StatReport r;
  r.title = "gaussianity";
  r.columns = {"k1", "k2", "knorm", "variance_ratio", "variance_z", "excess_kurtosis", "kurtosis_se", "kurtosis_z",
               "q005", "q995", "flagged"};
  std::size_t flagged = 0, outside = 0;
  double max_kz = 0.0;
  for (std::size_t s : modes) {
    const double var = mu.variance(m.norm[s]);
    const double sd = std::sqrt(var / 2.0);
    const auto z = mode_samples(samples, s, mu.level);
    std::vector<double> parts, power;
    for (const Complex& c : z) {
      parts.push_back(c.real() / sd);
      parts.push_back(c.imag() / sd);
      power.push_back(std::norm(c) / var);
    }
    const double ratio = stats::mean(power);
    const double vz = (ratio - 1.0) / stats::standard_error(power);
    const double kurt = stats::excess_kurtosis(parts);
    const double kse = stats::kurtosis_se(parts.size());
    const double kz = kurt / kse;
    std::sort(parts.begin(), parts.end());
    auto quantile = [&](double p) { return parts[std::min(parts.size() - 1, std::size_t(p * double(parts.size())))]; };
    const bool flag = std::abs(kz) > th.kurtosis_flag_se;
    flagged += flag;
    outside += std::abs(vz) > th.se_z;
    max_kz = std::max(max_kz, std::abs(kz));
    r.add_row({double(m.k1[s]), double(m.k2[s]), m.norm[s], ratio, vz, kurt, kse, kz, quantile(q_lo), quantile(q_hi),
               flag ? 1.0 : 0.0});
  }
  r.set("samples", double(samples.size()));
  r.set("modes", double(modes.size()));
  r.set("flagged_modes", double(flagged));
  r.set("variance_outside_se", double(outside));
  r.set("max_abs_kurtosis_z", max_kz);
  r.set("normal_q995", stats::normal_quantile(q_hi));
  r.verdict("kurtosis_within_flag", flagged == 0,
            std::to_string(flagged) + " modes beyond " + StatReport::format(th.kurtosis_flag_se) + " SE", false);
  r.verdict("variance_within_se", outside == 0,
            std::to_string(outside) + " modes beyond " + StatReport::format(th.se_z) + " SE", false);
  return r;
}

}  // namespace tsns::experiments
