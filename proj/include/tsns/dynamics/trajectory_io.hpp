#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>

#include <json.hpp>

#include "tsns/dynamics/diagnostics.hpp"
#include "tsns/dynamics/integrator.hpp"
#include "tsns/spectral/field_io.hpp"

namespace tsns::io {

inline nlohmann::ordered_json to_json(const NoiseSpec& n) {
  return {{"alpha", n.alpha}, {"gamma", n.gamma}, {"level", to_string(n.level)}};
}

inline nlohmann::ordered_json to_json(const DriftSpec& d) {
  nlohmann::ordered_json j{{"kind", to_string(d.kind)}, {"level", to_string(d.level)}, {"alpha", d.alpha}};
  if (d.kind == DriftKind::generalized) j["beta"] = d.beta;
  if (d.kind == DriftKind::interpolated || d.kind == DriftKind::forcing) j["s"] = d.s;
  if (d.cutoff) j["cutoff"] = {{"R", d.cutoff->R}, {"kappa", d.cutoff->kappa}, {"p", d.cutoff->p}};
  return j;
}

inline nlohmann::ordered_json to_json(const IntegratorConfig& c) {
  return {{"dt", c.dt},
          {"T", c.T},
          {"scheme", c.scheme == Scheme::etdrk2 ? "etdrk2" : "exponential_euler"},
          {"blowup_threshold", c.blowup_threshold},
          {"kappa", c.kappa},
          {"record_stride", c.record_stride}};
}

inline void write_noise(std::ostream& os, const NoiseRecord& rec, const NoiseSpec& spec) {
  write_header(os, {std::uint32_t(rec.grid.n()), Rank::scalar, Level::white});
  detail::put_le<double>(os, spec.alpha);
  detail::put_le<double>(os, spec.gamma);
  detail::put_le<std::uint8_t>(os, std::uint8_t(spec.level));
  detail::put_le<double>(os, rec.dt);
  detail::put_le<std::uint64_t>(os, rec.seed);
  detail::put_le<std::uint32_t>(os, rec.trajectory);
  detail::put_le<std::uint32_t>(os, std::uint32_t(rec.steps()));
  for (std::size_t q = 0; q < rec.steps(); ++q) {
    write_payload(os, rec.dW[q]);
    write_payload(os, rec.Z[q]);
  }
}

inline NoiseRecord read_noise(std::istream& is, NoiseSpec* spec = nullptr) {
  const FieldHeader h = read_header(is);
  if (h.level != Level::white || h.rank != Rank::scalar) throw std::runtime_error("noise stream: bad header");
  NoiseSpec ns;
  ns.alpha = detail::get_le<double>(is);
  ns.gamma = detail::get_le<double>(is);
  ns.level = Level(detail::get_le<std::uint8_t>(is));
  NoiseRecord rec;
  rec.grid = TorusGrid(int(h.n));
  rec.dt = detail::get_le<double>(is);
  rec.seed = detail::get_le<std::uint64_t>(is);
  rec.trajectory = detail::get_le<std::uint32_t>(is);
  const auto steps = detail::get_le<std::uint32_t>(is);
  for (std::uint32_t q = 0; q < steps; ++q) {
    rec.dW.push_back(read_payload(is, rec.grid, Rank::scalar));
    rec.Z.push_back(read_payload(is, rec.grid, Rank::scalar));
  }
  if (spec) *spec = ns;
  return rec;
}

inline std::string state_filename(std::size_t step) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "step_%06zu.tsns", step);
  return buf;
}

/// Directory layout: manifest.json, states/step_XXXXXX.tsns, noise.tsnoise
/// (when recorded), diagnostics.csv (time, enstrophy, energy, transfer_residual).
inline void save_trajectory(const TrajectoryRecord& traj, const std::string& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(fs::path(dir) / "states");
  nlohmann::ordered_json man;
  man["noise"] = to_json(traj.noise);
  man["drift"] = to_json(traj.drift);
  man["integrator"] = to_json(traj.integrator);
  man["n"] = traj.states.front().grid().n();
  man["seed"] = traj.seed;
  man["trajectory"] = traj.trajectory;
  man["blew_up"] = traj.blew_up;
  if (traj.blew_up) man["blowup_message"] = traj.blowup_message;
  man["steps"] = traj.step_index;
  write_text((fs::path(dir) / "manifest.json").string(), man.dump(2) + "\n");
  for (std::size_t i = 0; i < traj.states.size(); ++i)
    save_field((fs::path(dir) / "states" / state_filename(traj.step_index[i])).string(), traj.states[i],
               traj.drift.level);
  if (traj.noise_record) {
    std::ofstream os(fs::path(dir) / "noise.tsnoise", std::ios::binary);
    write_noise(os, *traj.noise_record, traj.noise);
  }
  std::string csv = "time,enstrophy,energy,transfer_residual\n";
  for (std::size_t i = 0; i < traj.states.size(); ++i) {
    const SpectralField& x = traj.states[i];
    const SpectralField u = velocity_of(x, traj.drift.level, traj.noise.alpha);
    const double transfer =
        traj.drift.kind == DriftKind::linear ? 0.0 : transfer_ratio(x, evaluate_drift(traj.drift, x));
    csv += StatReport::format(traj.times[i]) + "," + StatReport::format(norm2(curl(u))) + "," +
           StatReport::format(norm2(u)) + "," + StatReport::format(transfer) + "\n";
  }
  write_text((fs::path(dir) / "diagnostics.csv").string(), csv);
}

}  // namespace tsns::io
