#pragma once

#include <optional>
#include <stdexcept>
#include <string>

#include "tsns/dynamics/cutoffs.hpp"
#include "tsns/dynamics/drifts.hpp"

namespace tsns {

enum class DriftKind { linear, navier_stokes, twisted, generalized, interpolated, forcing };

inline const char* to_string(DriftKind k) {
  switch (k) {
    case DriftKind::linear: return "linear";
    case DriftKind::navier_stokes: return "ns";
    case DriftKind::twisted: return "twisted";
    case DriftKind::generalized: return "generalized";
    case DriftKind::interpolated: return "interpolated";
    case DriftKind::forcing: return "forcing";
  }
  return "?";
}

/// Which nonlinearity drives a state of a given level.
///
/// interpolated: F_s(x) = [(1-s) B_ns + s B_tw](x, x) chi^sm(x / 2R), the
///   homotopy from the Navier-Stokes to the twisted drift (chi^sm omitted
///   when no cutoff is set).
/// forcing: F_s(x) = s C for a fixed field C, a state-independent family.
struct DriftSpec {
  DriftKind kind = DriftKind::linear;
  Level level = Level::hat;
  double alpha = 1.0;
  double beta = 1.0;  // generalized only
  double s = 0.0;     // interpolated and forcing
  std::optional<CutoffSpec> cutoff;
  SpectralField forcing;

  void validate() const {
    if (level == Level::white) throw std::invalid_argument("DriftSpec: white is not a state level");
    if (kind == DriftKind::generalized) {
      if (level != Level::velocity) throw std::invalid_argument("DriftSpec: generalized drift lives at velocity level");
      if (!(beta >= 0.0 && beta <= alpha)) throw std::invalid_argument("DriftSpec: generalized(beta) needs 0 <= beta <= alpha");
    }
    if ((kind == DriftKind::interpolated || kind == DriftKind::forcing) && !(s >= 0.0 && s <= 1.0))
      throw std::invalid_argument("DriftSpec: s must lie in [0, 1]");
    if (kind == DriftKind::forcing && forcing.empty()) throw std::invalid_argument("DriftSpec: forcing field missing");
    if (cutoff) cutoff->validate();
  }

  bool is_linear() const { return kind == DriftKind::linear || kind == DriftKind::forcing; }

  DriftSpec with_s(double value) const {
    DriftSpec d = *this;
    d.s = value;
    return d;
  }
};

inline DriftKind drift_kind_from_string(const std::string& name, double* beta = nullptr) {
  if (name == "linear") return DriftKind::linear;
  if (name == "ns" || name == "navier_stokes") return DriftKind::navier_stokes;
  if (name == "twisted") return DriftKind::twisted;
  if (name == "interpolated") return DriftKind::interpolated;
  if (name == "forcing") return DriftKind::forcing;
  if (name.rfind("generalized:", 0) == 0) {
    if (beta) *beta = std::stod(name.substr(12));
    return DriftKind::generalized;
  }
  throw std::invalid_argument("unknown drift '" + name + "'");
}

/// Bilinear form B of a quadratic drift, F(x) = B(x, x).  `ns`, `twisted`
/// and `generalized` only; the result is dealiased.
inline SpectralField drift_bilinear(DriftKind kind, const DriftSpec& d, const SpectralField& a, const SpectralField& b) {
  using detail::advect_scalar;
  using detail::advect_vector;
  const double al = d.alpha;
  SpectralField out;
  switch (d.level) {
    case Level::vorticity:
      if (kind == DriftKind::navier_stokes) out = advect_scalar(biot_savart(a), b);
      else if (kind == DriftKind::twisted) out = fractional_power(advect_scalar(biot_savart(a), fractional_power(b, al)), -al);
      else throw std::invalid_argument("drift_bilinear: unsupported kind at vorticity level");
      break;
    case Level::hat:
      if (kind == DriftKind::navier_stokes)
        out = fractional_power(advect_scalar(biot_savart(fractional_power(a, -al)), fractional_power(b, -al)), al);
      else if (kind == DriftKind::twisted) out = advect_scalar(biot_savart(fractional_power(a, -al)), b);
      else throw std::invalid_argument("drift_bilinear: unsupported kind at hat level");
      break;
    case Level::velocity:
      if (kind == DriftKind::navier_stokes) out = leray_project(advect_vector(a, b));
      else if (kind == DriftKind::generalized) out = leray_project(advect_vector(fractional_power(a, d.beta - al), b));
      else if (kind == DriftKind::twisted)
        out = fractional_power(leray_project(advect_vector(a, fractional_power(b, al))), -al);
      else throw std::invalid_argument("drift_bilinear: unsupported kind at velocity level");
      break;
    case Level::white: throw std::invalid_argument("drift_bilinear: white level");
  }
  out *= -1.0;
  return out;
}

/// B_s = (1-s) B_ns + s B_tw.
inline SpectralField interpolated_bilinear(const DriftSpec& d, const SpectralField& a, const SpectralField& b) {
  SpectralField out(a.grid(), a.rank());
  if (d.s < 1.0) out.axpy(1.0 - d.s, drift_bilinear(DriftKind::navier_stokes, d, a, b));
  if (d.s > 0.0) out.axpy(d.s, drift_bilinear(DriftKind::twisted, d, a, b));
  return out;
}

inline double drift_cutoff(const DriftSpec& d, const SpectralField& x) {
  if (!d.cutoff) return 1.0;
  return chi_smooth(x, d.level, *d.cutoff, 2.0 * d.cutoff->R);
}

inline SpectralField evaluate_drift(const DriftSpec& d, const SpectralField& x) {
  switch (d.kind) {
    case DriftKind::linear: return SpectralField(x.grid(), x.rank());
    case DriftKind::forcing: return d.s * d.forcing;
    case DriftKind::navier_stokes:
    case DriftKind::twisted:
    case DriftKind::generalized: {
      SpectralField out = drift_bilinear(d.kind, d, x, x);
      detail::check_finite(out, "evaluate_drift");
      return out;
    }
    case DriftKind::interpolated: {
      const double chi = drift_cutoff(d, x);
      SpectralField out(x.grid(), x.rank());
      if (chi > 0.0) out.axpy(chi, interpolated_bilinear(d, x, x));
      detail::check_finite(out, "evaluate_drift");
      return out;
    }
  }
  throw std::logic_error("evaluate_drift: unreachable");
}

/// d/ds F_s(x).
inline SpectralField drift_s_derivative(const DriftSpec& d, const SpectralField& x) {
  switch (d.kind) {
    case DriftKind::forcing: return d.forcing;
    case DriftKind::interpolated: {
      const double chi = drift_cutoff(d, x);
      SpectralField out(x.grid(), x.rank());
      if (chi > 0.0) {
        out.axpy(chi, drift_bilinear(DriftKind::twisted, d, x, x));
        out.axpy(-chi, drift_bilinear(DriftKind::navier_stokes, d, x, x));
      }
      return out;
    }
    default: return SpectralField(x.grid(), x.rank());
  }
}

/// DF(x)[v].
inline SpectralField drift_derivative(const DriftSpec& d, const SpectralField& x, const SpectralField& v) {
  switch (d.kind) {
    case DriftKind::linear:
    case DriftKind::forcing: return SpectralField(x.grid(), x.rank());
    case DriftKind::navier_stokes:
    case DriftKind::twisted:
    case DriftKind::generalized: return drift_bilinear(d.kind, d, x, v) + drift_bilinear(d.kind, d, v, x);
    case DriftKind::interpolated: {
      const double chi = drift_cutoff(d, x);
      SpectralField out(x.grid(), x.rank());
      if (chi > 0.0) {
        out.axpy(chi, interpolated_bilinear(d, x, v));
        out.axpy(chi, interpolated_bilinear(d, v, x));
      }
      if (d.cutoff) {
        const double dchi = chi_smooth_derivative(x, v, d.level, *d.cutoff, 2.0 * d.cutoff->R);
        if (dchi != 0.0) out.axpy(dchi, interpolated_bilinear(d, x, x));
      }
      return out;
    }
  }
  throw std::logic_error("drift_derivative: unreachable");
}

}  // namespace tsns
