#pragma once

#include <chrono>
#include <filesystem>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include <fftw3.h>
#include <json.hpp>

#include "tsns/experiments/campaigns.hpp"
#include "tsns/experiments/config.hpp"
#include "tsns/experiments/context.hpp"
#include "tsns/experiments/ensembles.hpp"

namespace tsns::experiments {

inline constexpr const char* tsns_version = "0.1.0";

struct RunManifest {
  nlohmann::ordered_json json;
  std::vector<StatReport> reports;
  std::string path;  // manifest.json, empty when nothing was written

  bool pass() const { return json.at("pass").get<bool>(); }
};

inline std::uint64_t report_checksum(const StatReport& r) { return fnv1a(r.to_csv() + r.to_json(false).dump()); }

inline std::vector<StatReport> dispatch(const ExperimentConfig& cfg, RunContext& ctx) {
  switch (cfg.kind) {
    case ExperimentKind::simulate: return simulate_experiment(cfg, ctx);
    case ExperimentKind::invariance: return invariance_experiment(cfg, ctx);
    case ExperimentKind::gaussianity: return gaussianity_experiment(cfg, ctx);
    case ExperimentKind::coupling: return coupling_experiment(cfg, ctx);
    case ExperimentKind::commutator: return commutator_campaign(cfg, ctx);
    case ExperimentKind::ou_covariance: return ou_covariance_experiment(cfg, ctx);
    case ExperimentKind::enstrophy: return enstrophy_experiment(cfg, ctx);
    case ExperimentKind::conservation: return conservation_experiment(cfg, ctx);
    case ExperimentKind::identities: return identities_experiment(cfg, ctx);
    case ExperimentKind::time_shift: return time_shift_experiment(cfg, ctx);
    case ExperimentKind::girsanov: return girsanov_experiment(cfg, ctx);
    case ExperimentKind::propagator: return propagator_experiment(cfg, ctx);
  }
  throw std::invalid_argument("unknown experiment kind");
}

/// Runs the experiment, writes <out>/<title>.csv and .json for every report
/// and <out>/manifest.json.  An empty cfg.out runs without persisting.
inline RunManifest run_experiment(const ExperimentConfig& cfg,
                                  const std::function<void(const std::string&)>& progress = {}) {
  cfg.validate();
  namespace fs = std::filesystem;
  RunContext ctx;
  ctx.out = cfg.out;
  ctx.threads = cfg.threads;
  ctx.progress = progress;
  if (ctx.persist()) {
    std::error_code ec;
    fs::create_directories(cfg.out, ec);
    const fs::path probe = fs::path(cfg.out) / ".write_probe";
    std::ofstream os(probe);
    if (ec || !os) throw std::runtime_error("run_experiment: output directory '" + cfg.out + "' is not writable");
    os.close();
    fs::remove(probe);
  }

  const auto start = std::chrono::steady_clock::now();
  RunManifest man;
  man.reports = dispatch(cfg, ctx);
  const double runtime = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  auto& j = man.json;
  j["tsns_version"] = tsns_version;
  j["fftw_version"] = std::string(fftw_version);
  j["kind"] = to_string(cfg.kind);
  j["config"] = cfg.to_json();
  j["config_hash"] = hex64(cfg.hash());
  j["seeds"] = {{"base", cfg.seed},
                {"streams", "philox4x32 keyed by seed; counter = (block, substream, trajectory, purpose)"}};
  bool pass = true;
  auto& reps = j["reports"] = nlohmann::ordered_json::array();
  auto& verdicts = j["verdicts"] = nlohmann::ordered_json::array();
  for (auto& r : man.reports) {
    if (r.seed == 0) r.seed = cfg.seed;
    r.runtime_seconds = runtime;
    const std::string stem = r.title;
    reps.push_back({{"title", r.title}, {"csv", stem + ".csv"}, {"json", stem + ".json"}, {"checksum", hex64(report_checksum(r))}});
    for (const auto& v : r.verdicts) {
      verdicts.push_back({{"report", r.title}, {"name", v.name}, {"pass", v.pass}, {"hard", v.hard}, {"detail", v.detail}});
      if (v.hard && !v.pass) pass = false;
    }
    if (ctx.persist()) {
      write_text(ctx.path(stem + ".csv"), r.to_csv());
      write_text(ctx.path(stem + ".json"), r.to_json(true).dump(2) + "\n");
    }
  }
  auto& arts = j["artifacts"] = nlohmann::ordered_json::array();
  for (const auto& [p, c] : ctx.artifacts) arts.push_back({{"path", p}, {"checksum", c}});
  j["failures"] = ctx.failures;
  if (!ctx.failures.empty()) pass = false;
  j["pass"] = pass;
  j["runtime_seconds"] = runtime;
  if (ctx.persist()) {
    man.path = ctx.path("manifest.json");
    write_text(man.path, j.dump(2) + "\n");
  }
  return man;
}

/// Reruns the configuration stored in a manifest and compares every report
/// and artifact checksum.  Output goes to `out`, default <manifest dir>/replay.
inline StatReport replay(const std::string& manifest_path, std::string out = {}, unsigned threads = 0,
                         RunManifest* rerun = nullptr) {
  namespace fs = std::filesystem;
  const nlohmann::json stored = nlohmann::json::parse(read_text(manifest_path));
  ExperimentConfig cfg = ExperimentConfig::from_json(stored.at("config"));
  if (out.empty()) out = (fs::path(manifest_path).parent_path() / "replay").string();
  cfg.out = out;
  cfg.threads = threads;
  RunManifest again = run_experiment(cfg);

  StatReport r;
  r.title = "replay";
  r.seed = cfg.seed;
  r.columns = {"index", "match"};
  bool all = hex64(cfg.hash()) == stored.at("config_hash").get<std::string>();
  r.notes.push_back(std::string("config hash ") + (all ? "matches" : "differs"));
  const auto& a = stored.at("reports");
  const auto& b = again.json.at("reports");
  std::size_t idx = 0;
  auto compare = [&](const std::string& what, const std::string& x, const std::string& y) {
    const bool m = x == y;
    r.add_row({double(idx++), m ? 1.0 : 0.0});
    r.notes.push_back(what + (m ? ": match" : ": MISMATCH " + x + " vs " + y));
    all = all && m;
  };
  if (a.size() != b.size()) {
    all = false;
    r.notes.push_back("report count differs");
  }
  for (std::size_t i = 0; i < std::min(a.size(), b.size()); ++i)
    compare("report " + a[i].at("title").get<std::string>(), a[i].at("checksum").get<std::string>(),
            b[i].at("checksum").get<std::string>());
  const auto& fa = stored.at("artifacts");
  const auto& fb = again.json.at("artifacts");
  if (fa.size() != fb.size()) {
    all = false;
    r.notes.push_back("artifact count differs");
  }
  for (std::size_t i = 0; i < std::min(fa.size(), fb.size()); ++i)
    compare("artifact " + fa[i].at("path").get<std::string>(), fa[i].at("checksum").get<std::string>(),
            fb[i].at("checksum").get<std::string>());
  r.set("compared", double(idx));
  r.verdict("bit_exact", all, all ? "every checksum reproduced" : "at least one checksum differs");
  if (rerun) *rerun = std::move(again);
  return r;
}

}  // namespace tsns::experiments
