#pragma once

// Frame-accurate stimulus schedules and offline luminance rendering for the
// three paradigms: pattern-reversal checkerboard, radial contraction-expansion
// checkerboard and the pulsing Gabor grating.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "json.hpp"
#include "ssvep/detail/numfmt.hpp"
#include "ssvep/errors.hpp"

namespace ssvep::stimgen {

enum class Paradigm { pattern_reversal, radial_motion, gabor_pulse };

inline std::string_view to_string(Paradigm p) {
  switch (p) {
    case Paradigm::pattern_reversal: return "reversal";
    case Paradigm::radial_motion: return "radial";
    case Paradigm::gabor_pulse: return "gabor";
  }
  return "unknown";
}

inline Paradigm parse_paradigm(std::string_view s) {
  if (s == "reversal" || s == "pattern_reversal") return Paradigm::pattern_reversal;
  if (s == "radial" || s == "radial_motion") return Paradigm::radial_motion;
  if (s == "gabor" || s == "gabor_pulse") return Paradigm::gabor_pulse;
  throw ArgumentError("unknown paradigm '" + std::string(s) + "'");
}

struct CheckerGeometry {
  int radial_cycles = 5;
  int angular_cycles = 12;
  int outer_radius_px = 256;
  int fixation_radius_px = 8;
};

enum class PulseMode {
  width,      // mask_scale multiplies the Gaussian sigma
  amplitude,  // mask_scale multiplies the grating contrast
};

struct GaborParams {
  double contrast = 0.3;
  double phase = 2.5;            // radians
  double spatial_freq = 25.0;    // cycles per stimulus width
  double mask_sigma_px = 42.0;
  double pulse_depth = 0.2;
  int size_px = 256;
  PulseMode mode = PulseMode::width;
};

using Geometry = std::variant<CheckerGeometry, GaborParams>;

struct StimulusSpec {
  Paradigm paradigm = Paradigm::radial_motion;
  double stim_freq_hz = 8.0;
  double refresh_rate_hz = 144.0;
  double duration_s = 5.0;
  Geometry geometry = CheckerGeometry{};

  /// Spec with paradigm-appropriate default geometry.
  static StimulusSpec make(Paradigm p, double freq_hz, double refresh_hz = 144.0, double duration_s = 5.0) {
    StimulusSpec s;
    s.paradigm = p;
    s.stim_freq_hz = freq_hz;
    s.refresh_rate_hz = refresh_hz;
    s.duration_s = duration_s;
    if (p == Paradigm::gabor_pulse) s.geometry = GaborParams{};
    return s;
  }
};

struct FrameState {
  long long n = 0;
  double t_s = 0.0;
  double state = 0.0;  // pattern id, radial phase or mask scale depending on paradigm
};

struct FrameSchedule {
  double refresh_rate_hz = 0.0;
  Paradigm paradigm = Paradigm::radial_motion;
  std::vector<FrameState> frames;
};

struct LuminanceImage {
  int width = 0;
  int height = 0;
  std::vector<double> values;  // row-major, normalized luminance in [-1, 1]

  LuminanceImage() = default;
  LuminanceImage(int w, int h, double fill = 0.0)
      : width(w), height(h), values(static_cast<std::size_t>(w) * static_cast<std::size_t>(h), fill) {}

  [[nodiscard]] double at(int x, int y) const { return values[static_cast<std::size_t>(y) * width + x]; }
  double& at(int x, int y) { return values[static_cast<std::size_t>(y) * width + x]; }
};

struct SpecCheck {
  std::vector<std::string> warnings;
};

// ---------------------------------------------------------------------------

/// Radial phase of the contraction-expansion checkerboard; ranges over [0, π]
/// once per motion cycle, starting contracted at t = 0.
inline double radial_phase(double t, double motion_freq_hz) {
  if (!(motion_freq_hz > 0.0)) throw ArgumentError("motion frequency must be positive");
  constexpr double pi = std::numbers::pi;
  return pi / 2.0 + (pi / 2.0) * std::sin(2.0 * pi * motion_freq_hz * t - pi / 2.0);
}

inline SpecCheck validate_spec(const StimulusSpec& spec) {
  SpecCheck check;
  if (!(spec.refresh_rate_hz > 0.0) || !std::isfinite(spec.refresh_rate_hz))
    throw SpecError("refresh rate must be positive");
  if (!(spec.stim_freq_hz > 0.0) || !std::isfinite(spec.stim_freq_hz))
    throw SpecError("stimulus frequency must be positive");
  if (!(spec.duration_s > 0.0) || !std::isfinite(spec.duration_s)) throw SpecError("duration must be positive");
  if (spec.stim_freq_hz > spec.refresh_rate_hz / 2.0)
    throw SpecError("stimulus frequency " + detail::format_double(spec.stim_freq_hz) +
                    " Hz exceeds half the refresh rate (" + detail::format_double(spec.refresh_rate_hz / 2.0) +
                    " Hz)");

  const bool gabor = spec.paradigm == Paradigm::gabor_pulse;
  if (gabor != std::holds_alternative<GaborParams>(spec.geometry))
    throw SpecError("geometry does not match paradigm");
  if (const auto* g = std::get_if<CheckerGeometry>(&spec.geometry)) {
    if (g->radial_cycles < 1 || g->angular_cycles < 1) throw SpecError("checkerboard needs at least one cycle");
    if (g->outer_radius_px < 1) throw SpecError("outer radius must be positive");
    if (g->fixation_radius_px < 0 || g->fixation_radius_px >= g->outer_radius_px)
      throw SpecError("fixation radius must lie inside the outer radius");
  } else {
    const auto& p = std::get<GaborParams>(spec.geometry);
    if (!(p.contrast >= 0.0 && p.contrast <= 1.0)) throw SpecError("contrast must be within [0, 1]");
    if (!(p.pulse_depth >= 0.0 && p.pulse_depth <= 1.0)) throw SpecError("pulse depth must be within [0, 1]");
    if (p.mode == PulseMode::width && p.pulse_depth >= 1.0)
      throw SpecError("width pulsing needs pulse depth below 1 to keep the mask positive");
    if (!(p.mask_sigma_px > 0.0)) throw SpecError("mask sigma must be positive");
    if (p.size_px < 1) throw SpecError("patch size must be positive");
  }

  const double frames_per_cycle = spec.refresh_rate_hz / spec.stim_freq_hz;
  if (std::abs(frames_per_cycle - std::round(frames_per_cycle)) > 1e-9)
    check.warnings.push_back("non-integer frames per cycle (" + detail::format_double(frames_per_cycle) +
                             "); frame states are sampled from the ideal waveform");
  return check;
}

inline long long frame_count(const StimulusSpec& spec) {
  return std::llround(spec.duration_s * spec.refresh_rate_hz);
}

/// Stimulus state at frame n, evaluated directly from n (no accumulated phase).
inline double frame_state(const StimulusSpec& spec, long long n) {
  constexpr double pi = std::numbers::pi;
  const double t = static_cast<double>(n) / spec.refresh_rate_hz;
  switch (spec.paradigm) {
    case Paradigm::pattern_reversal: {
      // One flicker cycle holds two reversals. The tolerance absorbs rounding
      // when 2·f·n/f_r lands on an integer.
      const double reversals = 2.0 * spec.stim_freq_hz * static_cast<double>(n) / spec.refresh_rate_hz;
      const auto k = static_cast<long long>(std::floor(reversals + 1e-9));
      return static_cast<double>(k % 2);
    }
    case Paradigm::radial_motion:
      return radial_phase(t, spec.stim_freq_hz);
    case Paradigm::gabor_pulse: {
      const auto& g = std::get<GaborParams>(spec.geometry);
      return 1.0 + g.pulse_depth * std::cos(2.0 * pi * spec.stim_freq_hz * t);
    }
  }
  return 0.0;
}

inline FrameSchedule build_frame_schedule(const StimulusSpec& spec) {
  (void)validate_spec(spec);
  FrameSchedule sched;
  sched.refresh_rate_hz = spec.refresh_rate_hz;
  sched.paradigm = spec.paradigm;
  const long long n_frames = frame_count(spec);
  sched.frames.reserve(static_cast<std::size_t>(n_frames));
  for (long long n = 0; n < n_frames; ++n)
    sched.frames.push_back({n, static_cast<double>(n) / spec.refresh_rate_hz, frame_state(spec, n)});
  return sched;
}

// ---------------------------------------------------------------------------
// Rendering

namespace detail {
inline double sign_or_zero(double v) {
  if (std::abs(v) < 1e-9) return 0.0;
  return v > 0.0 ? 1.0 : -1.0;
}
}  // namespace detail

/// Polar checkerboard of side 2·outer_radius+1 centered on the middle pixel.
inline LuminanceImage render_checkerboard(const CheckerGeometry& geom, double phase) {
  if (geom.outer_radius_px < 1) throw ArgumentError("outer radius must be positive");
  if (geom.radial_cycles < 1 || geom.angular_cycles < 1) throw ArgumentError("checkerboard needs at least one cycle");
  if (geom.fixation_radius_px < 0 || geom.fixation_radius_px >= geom.outer_radius_px)
    throw ArgumentError("fixation radius must lie inside the outer radius");
  constexpr double pi = std::numbers::pi;
  const int R = geom.outer_radius_px;
  const int side = 2 * R + 1;
  LuminanceImage img(side, side, 0.0);
  for (int y = 0; y < side; ++y) {
    for (int x = 0; x < side; ++x) {
      const double dx = x - R;
      const double dy = R - y;
      const double r = std::hypot(dx, dy);
      if (r <= geom.fixation_radius_px) {
        img.at(x, y) = 1.0;
        continue;
      }
      if (r > R) continue;
      const double theta = std::atan2(dy, dx);
      const double radial = std::sin(2.0 * pi * geom.radial_cycles * r / R + phase);
      const double angular = std::sin(geom.angular_cycles * theta);
      img.at(x, y) = detail::sign_or_zero(detail::sign_or_zero(radial) * detail::sign_or_zero(angular));
    }
  }
  return img;
}

inline LuminanceImage render_gabor(const GaborParams& params, double mask_scale) {
  if (!(mask_scale > 0.0)) throw ArgumentError("mask scale must be positive");
  if (params.size_px < 1) throw ArgumentError("patch size must be positive");
  if (!(params.mask_sigma_px > 0.0)) throw ArgumentError("mask sigma must be positive");
  constexpr double pi = std::numbers::pi;
  const int n = params.size_px;
  const double c = (n - 1) / 2.0;
  const double sigma = mask_scale * params.mask_sigma_px;
  const double two_sigma_sq = 2.0 * sigma * sigma;
  LuminanceImage img(n, n, 0.0);
  for (int yi = 0; yi < n; ++yi) {
    const double y = yi - c;
    for (int xi = 0; xi < n; ++xi) {
      const double x = xi - c;
      const double carrier = std::cos(2.0 * pi * params.spatial_freq * x / n + params.phase);
      img.at(xi, yi) = params.contrast * carrier * std::exp(-(x * x + y * y) / two_sigma_sq);
    }
  }
  return img;
}

/// Image shown on one frame, given that frame's scheduled state.
inline LuminanceImage render_frame(const StimulusSpec& spec, double state) {
  switch (spec.paradigm) {
    case Paradigm::pattern_reversal:
      return render_checkerboard(std::get<CheckerGeometry>(spec.geometry),
                                 state > 0.5 ? std::numbers::pi : 0.0);
    case Paradigm::radial_motion:
      return render_checkerboard(std::get<CheckerGeometry>(spec.geometry), state);
    case Paradigm::gabor_pulse: {
      auto g = std::get<GaborParams>(spec.geometry);
      if (g.mode == PulseMode::amplitude) {
        g.contrast = std::min(1.0, g.contrast * state);
        return render_gabor(g, 1.0);
      }
      return render_gabor(g, state);
    }
  }
  return {};
}

// ---------------------------------------------------------------------------
// Output formats

inline nlohmann::json schedule_to_json(const FrameSchedule& sched) {
  nlohmann::json frames = nlohmann::json::array();
  for (const auto& f : sched.frames) {
    nlohmann::json state;
    if (sched.paradigm == Paradigm::pattern_reversal)
      state = static_cast<int>(f.state);
    else
      state = f.state;
    frames.push_back({{"n", f.n}, {"t_s", f.t_s}, {"state", state}});
  }
  return {{"refresh_rate_hz", sched.refresh_rate_hz},
          {"paradigm", std::string(to_string(sched.paradigm))},
          {"frames", std::move(frames)}};
}

inline FrameSchedule schedule_from_json(const nlohmann::json& j) {
  FrameSchedule s;
  s.refresh_rate_hz = j.at("refresh_rate_hz").get<double>();
  s.paradigm = parse_paradigm(j.at("paradigm").get<std::string>());
  for (const auto& f : j.at("frames"))
    s.frames.push_back({f.at("n").get<long long>(), f.at("t_s").get<double>(), f.at("state").get<double>()});
  return s;
}

inline std::uint8_t to_gray(double v) {
  const double clamped = std::clamp(v, -1.0, 1.0);
  return static_cast<std::uint8_t>(std::lround((clamped + 1.0) * 127.5));
}

inline std::string encode_pgm(const LuminanceImage& img) {
  std::string out = "P5\n" + std::to_string(img.width) + " " + std::to_string(img.height) + "\n255\n";
  out.reserve(out.size() + img.values.size());
  for (double v : img.values) out.push_back(static_cast<char>(to_gray(v)));
  return out;
}

inline void write_pgm(const LuminanceImage& img, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out << encode_pgm(img);
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

}  // namespace ssvep::stimgen
