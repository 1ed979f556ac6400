#pragma once

#include <cstdio>
#include <filesystem>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "tsns/dynamics/drift_spec.hpp"
#include "tsns/dynamics/integrator.hpp"
#include "tsns/experiments/config.hpp"
#include "tsns/experiments/report.hpp"
#include "tsns/gaussian/noise.hpp"

namespace tsns::experiments {

/// FNV-1a of the raw coefficient bytes.
inline std::uint64_t field_checksum(const SpectralField& f) {
  const auto d = f.data();
  return fnv1a(std::string(reinterpret_cast<const char*>(d.data()), d.size() * sizeof(Complex)));
}

/// Where an experiment persists artifacts, plus what it recorded along the way.
struct RunContext {
  std::string out;  // empty: nothing is written
  unsigned threads = 0;
  std::vector<std::pair<std::string, std::string>> artifacts;  // relative path, checksum
  std::vector<std::string> failures;
  std::function<void(const std::string&)> progress;

  bool persist() const { return !out.empty(); }

  /// Absolute path of `rel`, parent directories created.
  std::string path(const std::string& rel) const {
    const std::filesystem::path p = std::filesystem::path(out) / rel;
    std::filesystem::create_directories(p.parent_path());
    return p.string();
  }

  void artifact(std::string rel, std::uint64_t checksum) { artifacts.emplace_back(std::move(rel), hex64(checksum)); }

  void note(const std::string& msg) const {
    if (progress) progress(msg);
  }
};

inline NoiseSpec noise_of(const ExperimentConfig& c, Level level) { return {c.alpha, c.gamma, level}; }
inline NoiseSpec noise_of(const ExperimentConfig& c) { return noise_of(c, c.level); }

inline DriftSpec drift_of(const ExperimentConfig& c, Level level) {
  DriftSpec d;
  double beta = 0.0;
  d.kind = drift_kind_from_string(c.drift, &beta);
  if (d.kind == DriftKind::forcing) throw std::invalid_argument("drift 'forcing' needs a forcing field; not available here");
  d.level = level;
  d.alpha = c.alpha;
  if (d.kind == DriftKind::generalized) d.beta = beta;
  return d;
}
inline DriftSpec drift_of(const ExperimentConfig& c) { return drift_of(c, c.level); }

/// Trajectory i starts from an independent draw of the truncated mu_alpha.
inline SpectralField initial_state(const ExperimentConfig& c, const TorusGrid& grid, std::size_t i, Level level) {
  RngStream rng(c.seed, std::uint32_t(i), StreamPurpose::initial);
  return sample_gaussian_field({c.alpha, level}, grid, rng, Support::dealiased);
}

inline IntegratorConfig endpoint_integrator(double dt, double T) {
  IntegratorConfig ic{dt, T};
  ic.record_stride = 0;
  ic.record_noise = false;
  return ic;
}

inline std::string index_name(const char* prefix, std::size_t i) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%s%04zu", prefix, i);
  return buf;
}

}  // namespace tsns::experiments
