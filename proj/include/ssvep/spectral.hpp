#pragma once

// Single-segment boxcar PSD and neighbor-contrast SNR spectra.

#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "ssvep/detail/fft.hpp"
#include "ssvep/model.hpp"

namespace ssvep::spectral {

struct PowerSpectrum {
  std::vector<double> freqs_hz;
  Matrix power;  // channels × bins, µV²/Hz
  double resolution_hz = 0.0;
  ChannelLayout layout;

  [[nodiscard]] std::size_t n_bins() const noexcept { return freqs_hz.size(); }
};

struct SnrParams {
  int n_neighbor = 3;
  int n_skip = 1;
};

struct SnrSpectrum {
  std::vector<double> freqs_hz;
  Matrix snr_linear;  // NaN where the neighborhood is incomplete
  Matrix snr_db;      // NaN where the neighborhood is incomplete
  SnrParams params;
  ChannelLayout layout;

  [[nodiscard]] std::size_t n_bins() const noexcept { return freqs_hz.size(); }

  /// Bins with a complete neighborhood on both sides.
  [[nodiscard]] bool defined(std::size_t bin) const noexcept {
    const auto reach = static_cast<std::size_t>(params.n_skip + params.n_neighbor);
    return bin >= reach && bin + reach < n_bins();
  }
  [[nodiscard]] std::size_t first_defined() const noexcept {
    return static_cast<std::size_t>(params.n_skip + params.n_neighbor);
  }
  [[nodiscard]] std::size_t last_defined() const noexcept {
    return n_bins() - 1 - static_cast<std::size_t>(params.n_skip + params.n_neighbor);
  }
};

/// Periodogram of one mean-removed segment per channel, no taper, scaled so
/// that the one-sided power summed over bins times the resolution equals the
/// segment variance.
inline PowerSpectrum psd_boxcar(const Matrix& samples, double fs, const ChannelLayout& layout = {}) {
  const auto n = static_cast<std::size_t>(samples.cols());
  if (n < 2) throw ArgumentError("PSD needs at least two samples");
  const std::size_t nb = n / 2 + 1;
  PowerSpectrum psd;
  psd.layout = layout;
  psd.resolution_hz = fs / static_cast<double>(n);
  psd.freqs_hz.resize(nb);
  for (std::size_t k = 0; k < nb; ++k) psd.freqs_hz[k] = static_cast<double>(k) * psd.resolution_hz;
  psd.power.resize(samples.rows(), static_cast<Eigen::Index>(nb));

  std::vector<double> row(n);
  for (Eigen::Index c = 0; c < samples.rows(); ++c) {
    const double mean = samples.row(c).mean();
    for (std::size_t i = 0; i < n; ++i) row[i] = samples(c, static_cast<Eigen::Index>(i)) - mean;
    const auto spec = detail::rfft(row);
    for (std::size_t k = 0; k < nb; ++k) {
      const bool unpaired = k == 0 || (n % 2 == 0 && k == nb - 1);
      const double scale = (unpaired ? 1.0 : 2.0) / (fs * static_cast<double>(n));
      psd.power(c, static_cast<Eigen::Index>(k)) = scale * std::norm(spec[k]);
    }
  }
  return psd;
}

/// PSD of an epoch after dropping the first `skip_initial_s` seconds.
inline PowerSpectrum psd_boxcar(const TrialEpoch& epoch, double skip_initial_s) {
  if (skip_initial_s < 0.0) throw ArgumentError("skip must be non-negative");
  const auto skip = static_cast<Eigen::Index>(std::llround(skip_initial_s * epoch.sample_rate_hz));
  const auto remaining = static_cast<Eigen::Index>(epoch.n_samples()) - skip;
  if (remaining < 2) throw ArgumentError("no samples left after skipping the onset");
  return psd_boxcar(epoch.samples.rightCols(remaining), epoch.sample_rate_hz, epoch.layout);
}

inline SnrSpectrum snr_spectrum(const PowerSpectrum& psd, SnrParams params = {}) {
  if (params.n_neighbor < 1) throw ArgumentError("n_neighbor must be at least 1");
  if (params.n_skip < 0) throw ArgumentError("n_skip must be non-negative");
  const auto nb = static_cast<long long>(psd.n_bins());
  const long long reach = params.n_skip + params.n_neighbor;
  if (nb < 2 * reach + 1) throw ArgumentError("spectrum too short for the SNR neighborhood");

  SnrSpectrum out;
  out.freqs_hz = psd.freqs_hz;
  out.params = params;
  out.layout = psd.layout;
  const double nan = std::numeric_limits<double>::quiet_NaN();
  out.snr_linear = Matrix::Constant(psd.power.rows(), nb, nan);
  out.snr_db = Matrix::Constant(psd.power.rows(), nb, nan);
  for (Eigen::Index c = 0; c < psd.power.rows(); ++c) {
    for (long long k = reach; k < nb - reach; ++k) {
      double sum = 0.0;
      for (long long d = params.n_skip + 1; d <= reach; ++d) sum += psd.power(c, k - d) + psd.power(c, k + d);
      const double mean = sum / (2.0 * params.n_neighbor);
      const double p = psd.power(c, k);
      if (!(mean > 0.0)) {
        if (p > 0.0) {
          out.snr_linear(c, k) = std::numeric_limits<double>::infinity();
          out.snr_db(c, k) = std::numeric_limits<double>::infinity();
        }
        continue;
      }
      out.snr_linear(c, k) = p / mean;
      out.snr_db(c, k) = 10.0 * std::log10(p / mean);
    }
  }
  return out;
}

/// Nearest bin to `f_hz`; exact halfway points resolve to the lower bin.
inline std::size_t nearest_bin(std::span<const double> freqs_hz, double f_hz) {
  if (freqs_hz.empty()) throw ArgumentError("empty frequency axis");
  const double f0 = freqs_hz.front();
  const double res = freqs_hz.size() > 1 ? freqs_hz[1] - freqs_hz[0] : 1.0;
  if (!(f_hz >= f0 && f_hz <= freqs_hz.back()))
    throw ArgumentError("frequency " + detail::format_double(f_hz) + " Hz outside spectrum range");
  const double x = (f_hz - f0) / res;
  auto k = static_cast<std::size_t>(std::floor(x));
  if (x - static_cast<double>(k) > 0.5) ++k;
  return std::min(k, freqs_hz.size() - 1);
}

struct SnrReadout {
  std::size_t bin = 0;
  double freq_hz = 0.0;        // center of the bin actually read
  std::vector<double> snr_db;  // one per channel
  std::vector<double> snr_linear;
};

inline SnrReadout snr_at(const SnrSpectrum& s, double f_hz) {
  SnrReadout r;
  r.bin = nearest_bin(s.freqs_hz, f_hz);
  if (!s.defined(r.bin))
    throw ArgumentError("frequency " + detail::format_double(f_hz) + " Hz has no complete SNR neighborhood");
  r.freq_hz = s.freqs_hz[r.bin];
  for (Eigen::Index c = 0; c < s.snr_db.rows(); ++c) {
    r.snr_db.push_back(s.snr_db(c, static_cast<Eigen::Index>(r.bin)));
    r.snr_linear.push_back(s.snr_linear(c, static_cast<Eigen::Index>(r.bin)));
  }
  return r;
}

/// 10·log10 of the linear SNR averaged over every defined bin and channel.
inline double mean_snr_db(const SnrSpectrum& s) {
  double sum = 0.0;
  std::size_t count = 0;
  for (Eigen::Index c = 0; c < s.snr_linear.rows(); ++c)
    for (std::size_t k = s.first_defined(); k <= s.last_defined(); ++k) {
      const double v = s.snr_linear(c, static_cast<Eigen::Index>(k));
      if (std::isfinite(v)) {
        sum += v;
        ++count;
      }
    }
  if (count == 0) throw DegenerateError("no finite SNR values to average");
  return 10.0 * std::log10(sum / static_cast<double>(count));
}

/// Dump as CSV: `freq_hz,<ch...>` one row per bin; undefined values are empty.
inline std::string format_spectrum_csv(const std::vector<double>& freqs, const Matrix& values,
                                       const ChannelLayout& layout) {
  std::string out = "freq_hz";
  for (Eigen::Index c = 0; c < values.rows(); ++c) {
    out += ',';
    out += layout.size() == static_cast<std::size_t>(values.rows()) ? layout.names()[static_cast<std::size_t>(c)]
                                                                      : "ch" + std::to_string(c);
  }
  out += '\n';
  for (std::size_t k = 0; k < freqs.size(); ++k) {
    detail::append_double(out, freqs[k]);
    for (Eigen::Index c = 0; c < values.rows(); ++c) {
      out += ',';
      const double v = values(c, static_cast<Eigen::Index>(k));
      if (std::isfinite(v)) detail::append_double(out, v);
    }
    out += '\n';
  }
  return out;
}

}  // namespace ssvep::spectral
