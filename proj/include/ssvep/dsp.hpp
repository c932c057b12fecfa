#pragma once

// Preprocessing: zero-phase Butterworth band-pass, windowed line-noise
// subtraction and a subspace-based artifact suppressor.

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <limits>
#include <numbers>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "ssvep/model.hpp"

namespace ssvep::dsp {

struct BandpassSpec {
  double lo_hz = 7.0;
  double hi_hz = 15.0;
  int order = 4;  // prototype order; the band-pass has 2·order poles

  void validate(double fs) const {
    if (order < 1) throw ArgumentError("filter order must be at least 1");
    if (!(lo_hz > 0.0 && lo_hz < hi_hz && hi_hz < fs / 2.0))
      throw ArgumentError("band edges must satisfy 0 < lo < hi < fs/2 (lo=" + detail::format_double(lo_hz) +
                          ", hi=" + detail::format_double(hi_hz) + ", fs=" + detail::format_double(fs) + ")");
  }
};

/// Second-order section: b0 + b1 z^-1 + b2 z^-2 over 1 + a1 z^-1 + a2 z^-2.
struct Biquad {
  double b0, b1, b2, a1, a2;
};

using Sos = std::vector<Biquad>;

inline std::complex<double> sos_response(const Sos& sos, double freq_hz, double fs) {
  const auto z1 = std::polar(1.0, -2.0 * std::numbers::pi * freq_hz / fs);
  const auto z2 = z1 * z1;
  std::complex<double> h = 1.0;
  for (const auto& s : sos) h *= (s.b0 + s.b1 * z1 + s.b2 * z2) / (1.0 + s.a1 * z1 + s.a2 * z2);
  return h;
}

/// Digital Butterworth band-pass via the bilinear transform of the analog
/// prototype, returned as second-order sections with unit gain at the
/// (prewarped) geometric center frequency.
inline Sos butter_bandpass(const BandpassSpec& spec, double fs) {
  spec.validate(fs);
  using cd = std::complex<double>;
  constexpr double pi = std::numbers::pi;
  const int n = spec.order;
  const double fs2 = 2.0 * fs;
  const double w1 = fs2 * std::tan(pi * spec.lo_hz / fs);
  const double w2 = fs2 * std::tan(pi * spec.hi_hz / fs);
  const double bw = w2 - w1;
  const double w0sq = w1 * w2;

  // Low-pass prototype poles in the upper half plane; each maps to two
  // band-pass poles, and the conjugates supply the rest.
  std::vector<cd> digital;
  for (int k = 1; k <= n; ++k) {
    const cd p = std::polar(1.0, pi * (2.0 * k + n - 1) / (2.0 * n));
    if (p.imag() < -1e-14) continue;
    const cd pb = p * bw / 2.0;
    const cd root = std::sqrt(pb * pb - w0sq);
    for (const cd s : {pb + root, pb - root}) {
      const cd z = (fs2 + s) / (fs2 - s);
      if (std::abs(p.imag()) < 1e-14) {
        // Real prototype pole: its band-pass images are a conjugate pair
        // already; keep only the upper one.
        if (z.imag() >= 0.0) digital.push_back(z);
      } else {
        digital.push_back(z.imag() >= 0.0 ? z : std::conj(z));
      }
    }
  }
  std::vector<cd> real_poles;
  Sos sos;
  for (const auto& z : digital) {
    if (std::abs(z.imag()) < 1e-14) {
      real_poles.push_back(z);
      continue;
    }
    sos.push_back({1.0, 0.0, -1.0, -2.0 * z.real(), std::norm(z)});
  }
  // Real poles (very wide bands) pair up into sections too.
  for (std::size_t i = 0; i + 1 < real_poles.size(); i += 2) {
    const double p1 = real_poles[i].real(), p2 = real_poles[i + 1].real();
    sos.push_back({1.0, 0.0, -1.0, -(p1 + p2), p1 * p2});
  }
  if (real_poles.size() % 2 == 1) {
    const double p1 = real_poles.back().real();
    sos.push_back({1.0, -1.0, 0.0, -p1, 0.0});
  }

  // Normalize to unit gain at the digital image of the analog center.
  const double fc = fs / pi * std::atan(std::sqrt(w0sq) / fs2);
  const double g = std::abs(sos_response(sos, fc, fs));
  const double per = std::pow(g, 1.0 / static_cast<double>(sos.size()));
  for (auto& s : sos) {
    s.b0 /= per;
    s.b1 /= per;
    s.b2 /= per;
  }
  return sos;
}

namespace detail {

/// Steady-state initial conditions of each section for a unit step input.
inline std::vector<std::array<double, 2>> sos_step_zi(const Sos& sos) {
  std::vector<std::array<double, 2>> zi(sos.size());
  double scale = 1.0;
  for (std::size_t i = 0; i < sos.size(); ++i) {
    const auto& s = sos[i];
    const double dc = (s.b0 + s.b1 + s.b2) / (1.0 + s.a1 + s.a2);
    const double z1 = s.b2 - s.a2 * dc;
    const double z0 = s.b1 - s.a1 * dc + z1;
    zi[i] = {z0 * scale, z1 * scale};
    scale *= dc;
  }
  return zi;
}

// Direct form II transposed, in place.
inline void sosfilt(const Sos& sos, std::span<double> x, std::vector<std::array<double, 2>> z) {
  for (std::size_t i = 0; i < sos.size(); ++i) {
    const auto& s = sos[i];
    double z0 = z[i][0], z1 = z[i][1];
    for (double& v : x) {
      const double in = v;
      const double out = s.b0 * in + z0;
      z0 = s.b1 * in - s.a1 * out + z1;
      z1 = s.b2 * in - s.a2 * out;
      v = out;
    }
  }
}

}  // namespace detail

/// Forward-backward filtering with odd extension at both ends and
/// steady-state initial conditions. `padlen` < 0 selects 3·(2·sections+1).
inline std::vector<double> sosfiltfilt(const Sos& sos, std::span<const double> x, int padlen = -1) {
  const std::size_t n = x.size();
  if (n == 0) return {};
  std::size_t pad = padlen < 0 ? 3 * (2 * sos.size() + 1) : static_cast<std::size_t>(padlen);
  pad = std::min(pad, n - 1);

  std::vector<double> ext(n + 2 * pad);
  for (std::size_t i = 0; i < pad; ++i) ext[i] = 2.0 * x[0] - x[pad - i];
  std::copy(x.begin(), x.end(), ext.begin() + static_cast<std::ptrdiff_t>(pad));
  for (std::size_t i = 0; i < pad; ++i) ext[pad + n + i] = 2.0 * x[n - 1] - x[n - 2 - i];

  const auto zi = detail::sos_step_zi(sos);
  auto scaled = [&](double v) {
    auto z = zi;
    for (auto& s : z) s = {s[0] * v, s[1] * v};
    return z;
  };
  detail::sosfilt(sos, ext, scaled(ext.front()));
  std::reverse(ext.begin(), ext.end());
  detail::sosfilt(sos, ext, scaled(ext.front()));
  std::reverse(ext.begin(), ext.end());
  return {ext.begin() + static_cast<std::ptrdiff_t>(pad), ext.begin() + static_cast<std::ptrdiff_t>(pad + n)};
}

inline Matrix bandpass(const Matrix& samples, double fs, const BandpassSpec& spec) {
  const auto sos = butter_bandpass(spec, fs);
  Matrix out(samples.rows(), samples.cols());
  for (Eigen::Index c = 0; c < samples.rows(); ++c) {
    std::span<const double> row(samples.row(c).data(), static_cast<std::size_t>(samples.cols()));
    auto y = sosfiltfilt(sos, row);
    std::copy(y.begin(), y.end(), out.row(c).data());
  }
  return out;
}

inline TrialEpoch bandpass(const TrialEpoch& epoch, const BandpassSpec& spec) {
  TrialEpoch out = epoch;
  out.samples = bandpass(epoch.samples, epoch.sample_rate_hz, spec);
  return out;
}

// ---------------------------------------------------------------------------
// Line noise

/// Subtracts a least-squares sinusoid at `line_hz` fitted in 1-s windows that
/// overlap by half and are blended with a raised-cosine (periodic Hann)
/// window, whose shifted copies sum to one.
inline Matrix remove_line_noise(const Matrix& samples, double fs, double line_hz) {
  if (!(line_hz > 0.0 && line_hz < fs / 2.0))
    throw ArgumentError("line frequency must lie in (0, fs/2)");
  const auto n = static_cast<long long>(samples.cols());
  long long win = std::max<long long>(2, std::llround(fs));
  if (win % 2 == 1) ++win;
  const long long hop = win / 2;
  constexpr double pi = std::numbers::pi;

  std::vector<double> s(static_cast<std::size_t>(n)), c(static_cast<std::size_t>(n));
  for (long long i = 0; i < n; ++i) {
    const double ph = 2.0 * pi * line_hz * static_cast<double>(i) / fs;
    s[static_cast<std::size_t>(i)] = std::sin(ph);
    c[static_cast<std::size_t>(i)] = std::cos(ph);
  }

  Matrix out = samples;
  for (long long start = -hop; start < n; start += hop) {
    const long long lo = std::max<long long>(0, start);
    const long long hi = std::min<long long>(n, start + win);
    if (hi - lo < 2) continue;
    double ss = 0, sc = 0, cc = 0;
    for (long long i = lo; i < hi; ++i) {
      const auto k = static_cast<std::size_t>(i);
      ss += s[k] * s[k];
      sc += s[k] * c[k];
      cc += c[k] * c[k];
    }
    const double det = ss * cc - sc * sc;
    if (std::abs(det) < 1e-12 * (ss * cc + 1e-300)) continue;
    std::vector<double> taper(static_cast<std::size_t>(hi - lo));
    for (long long i = lo; i < hi; ++i) {
      const double v = std::sin(pi * static_cast<double>(i - start) / static_cast<double>(win));
      taper[static_cast<std::size_t>(i - lo)] = v * v;
    }
    for (Eigen::Index ch = 0; ch < samples.rows(); ++ch) {
      double xs = 0, xc = 0;
      for (long long i = lo; i < hi; ++i) {
        const auto k = static_cast<std::size_t>(i);
        xs += samples(ch, i) * s[k];
        xc += samples(ch, i) * c[k];
      }
      const double a = (xs * cc - xc * sc) / det;
      const double b = (xc * ss - xs * sc) / det;
      for (long long i = lo; i < hi; ++i) {
        const auto k = static_cast<std::size_t>(i);
        out(ch, i) -= taper[static_cast<std::size_t>(i - lo)] * (a * s[k] + b * c[k]);
      }
    }
  }
  return out;
}

inline TrialEpoch remove_line_noise(const TrialEpoch& epoch, double line_hz) {
  TrialEpoch out = epoch;
  out.samples = remove_line_noise(epoch.samples, epoch.sample_rate_hz, line_hz);
  return out;
}

// ---------------------------------------------------------------------------
// Artifact suppression

struct ArtifactReport {
  std::size_t calibration_start = 0;  // sample index
  std::vector<int> removed_per_window;
};

/// Calibrates on the lowest-RMS contiguous 10 s, then in each 1 s window
/// projects out principal components whose variance exceeds `cutoff` times
/// the calibration variance along the same direction.
inline Recording suppress_artifacts(const Recording& rec, double cutoff, ArtifactReport* report = nullptr) {
  rec.validate();
  if (!(cutoff > 0.0)) throw ArgumentError("artifact cutoff must be positive");
  const auto fs = rec.sample_rate_hz;
  const auto n = static_cast<Eigen::Index>(rec.n_samples());
  const auto cal_len = static_cast<Eigen::Index>(std::llround(10.0 * fs));
  if (n < cal_len) throw ArgumentError("artifact suppression needs at least 10 s of data");
  if (std::isinf(cutoff)) return rec;

  const auto win = std::max<Eigen::Index>(1, static_cast<Eigen::Index>(std::llround(fs)));
  const Matrix& x = rec.samples;
  const auto ch = x.rows();

  // Lowest-RMS calibration segment, scanned in 1 s steps.
  Eigen::VectorXd col_energy = x.colwise().squaredNorm().transpose();
  std::vector<double> prefix(static_cast<std::size_t>(n) + 1, 0.0);
  for (Eigen::Index i = 0; i < n; ++i)
    prefix[static_cast<std::size_t>(i) + 1] = prefix[static_cast<std::size_t>(i)] + col_energy(i);
  Eigen::Index best = 0;
  double best_energy = std::numeric_limits<double>::infinity();
  for (Eigen::Index start = 0; start + cal_len <= n; start += win) {
    const double e = prefix[static_cast<std::size_t>(start + cal_len)] - prefix[static_cast<std::size_t>(start)];
    if (e < best_energy) {
      best_energy = e;
      best = start;
    }
  }
  const Eigen::MatrixXd cal = x.middleCols(best, cal_len);
  const Eigen::MatrixXd cal_cov = cal * cal.transpose() / static_cast<double>(cal_len);
  const double floor = 1e-12 * cal_cov.trace() / static_cast<double>(ch);

  Recording out = rec;
  ArtifactReport rep;
  rep.calibration_start = static_cast<std::size_t>(best);
  for (Eigen::Index start = 0; start < n; start += win) {
    const auto len = std::min(win, n - start);
    const Eigen::MatrixXd w = x.middleCols(start, len);
    const Eigen::MatrixXd cov = w * w.transpose() / static_cast<double>(len);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
    const auto& vecs = eig.eigenvectors();
    const auto& vals = eig.eigenvalues();
    Eigen::MatrixXd removed(ch, 0);
    for (Eigen::Index k = 0; k < ch; ++k) {
      const Eigen::VectorXd v = vecs.col(k);
      const double ref = std::max(v.dot(cal_cov * v), floor);
      if (vals(k) > cutoff * ref) {
        removed.conservativeResize(Eigen::NoChange, removed.cols() + 1);
        removed.col(removed.cols() - 1) = v;
      }
    }
    rep.removed_per_window.push_back(static_cast<int>(removed.cols()));
    if (removed.cols() == 0) continue;
    out.samples.middleCols(start, len) = w - removed * (removed.transpose() * w);
  }
  if (report) *report = std::move(rep);
  return out;
}

}  // namespace ssvep::dsp
