#include <cstdio>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "tsns/experiments/run.hpp"

using namespace tsns;
using namespace tsns::experiments;

namespace {

struct Flags {
  std::string config;
  std::optional<double> alpha, gamma, dt, T;
  std::optional<int> n;
  std::optional<std::size_t> M;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out, level, drift;
  std::optional<unsigned> threads;
  bool exploratory = false;
  bool verbose = false;
};

void add_flags(CLI::App* app, Flags& f) {
  app->add_option("--config", f.config, "JSON config; flags given on the command line override it");
  app->add_option("--alpha", f.alpha, "regularity index alpha");
  app->add_option("--gamma", f.gamma, "dissipation exponent gamma in (1/2, 1]");
  app->add_option("--n", f.n, "grid points per direction");
  app->add_option("--dt", f.dt, "time step");
  app->add_option("--T", f.T, "horizon");
  app->add_option("--M", f.M, "ensemble size");
  app->add_option("--seed", f.seed, "base seed");
  app->add_option("--out", f.out, "output directory");
  app->add_option("--level", f.level, "state level")->check(CLI::IsMember({"velocity", "vorticity", "hat"}));
  app->add_option("--drift", f.drift, "linear, ns, twisted or generalized:<beta>");
  app->add_option("--threads", f.threads, "worker threads (0: all cores)");
  app->add_flag("--exploratory", f.exploratory, "allow parameters outside the well-posedness regimes");
  app->add_flag("-v,--verbose", f.verbose, "progress on stderr");
}

ExperimentConfig build_config(ExperimentKind kind, const Flags& f) {
  ExperimentConfig c;
  if (!f.config.empty()) c.merge_json(nlohmann::json::parse(read_text(f.config)));
  c.kind = kind;
  if (f.alpha) c.alpha = *f.alpha;
  if (f.gamma) c.gamma = *f.gamma;
  if (f.n) c.n = *f.n;
  if (f.dt) c.dt = *f.dt;
  if (f.T) c.T = *f.T;
  if (f.M) c.M = *f.M;
  if (f.seed) c.seed = *f.seed;
  if (f.out) c.out = *f.out;
  if (f.level) c.level = level_from_string(*f.level);
  if (f.drift) c.drift = *f.drift;
  if (f.threads) c.threads = *f.threads;
  if (f.exploratory) c.exploratory = true;
  return c;
}

void print_verdicts(const std::vector<StatReport>& reports) {
  for (const auto& r : reports)
    for (const auto& v : r.verdicts)
      std::printf("%-5s %s%s/%s: %s\n", v.pass ? "PASS" : "FAIL", v.hard ? "" : "(soft) ", r.title.c_str(),
                  v.name.c_str(), v.detail.c_str());
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"tsns: stochastic hypoviscous Navier-Stokes experiments on the 2-torus"};
  app.require_subcommand(1);
  Flags flags;
  std::vector<std::pair<CLI::App*, ExperimentKind>> subs;
  for (const auto& [kind, name] : kind_names()) {
    CLI::App* sub = app.add_subcommand(name, std::string("run the ") + name + " experiment");
    add_flags(sub, flags);
    subs.emplace_back(sub, kind);
  }
  std::string manifest, replay_out;
  unsigned replay_threads = 0;
  CLI::App* rp = app.add_subcommand("replay", "rerun a manifest and compare every checksum");
  rp->add_option("manifest", manifest, "manifest.json of an earlier run")->required()->check(CLI::ExistingFile);
  rp->add_option("--out", replay_out, "output directory (default: <manifest dir>/replay)");
  rp->add_option("--threads", replay_threads, "worker threads (0: all cores)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  }

  try {
    if (rp->parsed()) {
      RunManifest again;
      const StatReport r = replay(manifest, replay_out, replay_threads, &again);
      for (const auto& note : r.notes) std::printf("%s\n", note.c_str());
      print_verdicts({r});
      return r.hard_pass() ? 0 : 1;
    }
    for (const auto& [sub, kind] : subs) {
      if (!sub->parsed()) continue;
      const ExperimentConfig cfg = build_config(kind, flags);
      std::function<void(const std::string&)> progress;
      if (flags.verbose) progress = [](const std::string& m) { std::fprintf(stderr, "%s\n", m.c_str()); };
      const RunManifest man = run_experiment(cfg, progress);
      print_verdicts(man.reports);
      for (const auto& f : man.json.at("failures")) std::printf("FAILURE %s\n", f.get<std::string>().c_str());
      if (!man.path.empty()) std::printf("manifest %s\n", man.path.c_str());
      std::printf("%s (%.2f s)\n", man.pass() ? "PASS" : "FAIL", man.json.at("runtime_seconds").get<double>());
      return man.pass() ? 0 : 1;
    }
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "usage error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 3;
  }
  return 2;
}
