#pragma once

// CCA and filter-bank CCA target recognition, single-target onset detection
// and accuracy bookkeeping.

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "ssvep/dsp.hpp"
#include "ssvep/model.hpp"

namespace ssvep::decode {

struct ReferenceSet {
  std::vector<double> targets_hz;
  int n_harmonics = 3;
  double sample_rate_hz = 0.0;
  std::vector<Matrix> signals;  // per target: 2·n_harmonics × n_samples

  [[nodiscard]] std::size_t size() const noexcept { return targets_hz.size(); }
  [[nodiscard]] Eigen::Index n_samples() const noexcept { return signals.empty() ? 0 : signals.front().cols(); }
};

/// Rows are sin(2π·h·f·t), cos(2π·h·f·t) for h = 1…n_harmonics.
inline ReferenceSet make_references(const std::vector<double>& targets_hz, int n_harmonics, double fs,
                                    Eigen::Index n_samples) {
  if (targets_hz.empty()) throw ArgumentError("reference set needs at least one target");
  if (n_harmonics < 1) throw ArgumentError("n_harmonics must be at least 1");
  if (n_samples < 2) throw ArgumentError("references need at least two samples");
  const double fmax = *std::max_element(targets_hz.begin(), targets_hz.end());
  if (!(n_harmonics * fmax < fs / 2.0))
    throw ArgumentError("harmonic " + std::to_string(n_harmonics) + " of " + detail::format_double(fmax) +
                        " Hz exceeds fs/2");
  constexpr double pi = std::numbers::pi;
  ReferenceSet refs;
  refs.targets_hz = targets_hz;
  refs.n_harmonics = n_harmonics;
  refs.sample_rate_hz = fs;
  for (double f : targets_hz) {
    if (!(f > 0.0)) throw ArgumentError("target frequencies must be positive");
    Matrix y(2 * n_harmonics, n_samples);
    for (int h = 1; h <= n_harmonics; ++h) {
      for (Eigen::Index i = 0; i < n_samples; ++i) {
        const double ph = 2.0 * pi * h * f * static_cast<double>(i) / fs;
        y(2 * (h - 1), i) = std::sin(ph);
        y(2 * (h - 1) + 1, i) = std::cos(ph);
      }
    }
    refs.signals.push_back(std::move(y));
  }
  return refs;
}

/// Largest harmonic count (up to `wanted`) that keeps every target below fs/2.
inline int harmonics_below_nyquist(const std::vector<double>& targets_hz, int wanted, double fs) {
  const double fmax = *std::max_element(targets_hz.begin(), targets_hz.end());
  int h = wanted;
  while (h > 1 && !(h * fmax < fs / 2.0)) --h;
  return h;
}

/// Largest harmonic count (up to `wanted`, below fs/2) for which no harmonic
/// h ≥ 2 of one target lies within `tol_hz` of another target's fundamental.
/// Such an overlap would make one reference span contain another's.
inline int harmonics_without_overlap(const std::vector<double>& targets_hz, int wanted, double fs, double tol_hz) {
  int h = harmonics_below_nyquist(targets_hz, wanted, fs);
  auto collides = [&](int g) {
    for (double fi : targets_hz)
      for (double fj : targets_hz)
        if (fi != fj && std::abs(g * fi - fj) <= tol_hz) return true;
    return false;
  };
  for (int g = 2; g <= h; ++g)
    if (collides(g)) return g - 1;
  return h;
}

namespace detail {

// Orthonormal basis of the centered row space of `m` (as columns of an
// n × rank matrix) via rank-revealing QR of its transpose.
inline Eigen::MatrixXd centered_basis(const Matrix& m, const char* what) {
  Eigen::MatrixXd t = m.transpose();
  t.rowwise() -= t.colwise().mean();
  for (Eigen::Index j = 0; j < t.cols(); ++j) {
    const double scale = m.row(j).cwiseAbs().maxCoeff();
    const double norm = t.col(j).norm();
    if (!(norm > 1e-12 * scale * std::sqrt(static_cast<double>(t.rows()))) || norm == 0.0)
      throw DegenerateError(std::string(what) + " row " + std::to_string(j) + " has zero variance");
    t.col(j) /= norm;
  }
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(t);
  qr.setThreshold(1e-10);
  const auto rank = qr.rank();
  Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(t.rows(), rank);
  return q;
}

}  // namespace detail

/// Largest canonical correlation between the row sets of X and Y.
inline double cca_corr(const Matrix& x, const Matrix& y) {
  if (x.cols() != y.cols()) throw ArgumentError("CCA inputs must have the same number of samples");
  if (x.rows() < 1 || y.rows() < 1) throw ArgumentError("CCA inputs must have at least one row");
  if (x.cols() <= x.rows() + y.rows()) throw ArgumentError("CCA needs more samples than variables");
  const auto qx = detail::centered_basis(x, "X");
  const auto qy = detail::centered_basis(y, "Y");
  const Eigen::MatrixXd m = qx.transpose() * qy;
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(m);
  return std::clamp(svd.singularValues()(0), 0.0, 1.0);
}

struct FilterBankConfig {
  std::vector<dsp::BandpassSpec> bands;
  double weight_a = 1.25;
  double weight_b = 0.25;

  /// w(m) = m^(−a) + b for the 1-based band index m.
  [[nodiscard]] double weight(int m) const { return std::pow(static_cast<double>(m), -weight_a) + weight_b; }

  void validate(double fs) const {
    if (bands.empty()) throw ArgumentError("filter bank needs at least one band");
    for (const auto& b : bands) b.validate(fs);
    for (int m = 1; m <= static_cast<int>(bands.size()); ++m)
      if (!(weight(m) > 0.0)) throw ArgumentError("filter-bank weights must be positive");
  }
};

/// Sub-band m starts at m·f_min − margin and ends at `ceiling_hz`; bands
/// narrower than `min_width_hz` are dropped.
inline FilterBankConfig make_filter_bank(const std::vector<double>& targets_hz, double ceiling_hz, int n_bands = 5,
                                         double margin_hz = 1.0, double min_width_hz = 4.0, int order = 4) {
  if (targets_hz.empty()) throw ArgumentError("filter bank needs targets");
  const double fmin = *std::min_element(targets_hz.begin(), targets_hz.end());
  FilterBankConfig bank;
  for (int m = 1; m <= n_bands; ++m) {
    const double lo = std::max(m * fmin - margin_hz, 0.5);
    if (ceiling_hz - lo < min_width_hz) break;
    bank.bands.push_back({lo, ceiling_hz, order});
  }
  if (bank.bands.empty()) throw ArgumentError("filter-bank ceiling leaves no usable band");
  return bank;
}

struct Decision {
  std::vector<double> rho;                    // combined statistic per target
  std::vector<std::vector<double>> band_rho;  // [band][target] canonical correlations
  int predicted = 0;
  double predicted_hz = 0.0;
  std::optional<bool> threshold_pass;
};

/// Index of the maximum; ties go to the lowest index.
inline int argmax_lowest(const std::vector<double>& v) {
  int best = 0;
  for (int k = 1; k < static_cast<int>(v.size()); ++k)
    if (v[static_cast<std::size_t>(k)] > v[static_cast<std::size_t>(best)]) best = k;
  return best;
}

inline Decision fbcca_decide(const TrialEpoch& epoch, const ReferenceSet& refs, const FilterBankConfig& bank) {
  bank.validate(epoch.sample_rate_hz);
  if (refs.n_samples() != static_cast<Eigen::Index>(epoch.n_samples()))
    throw ArgumentError("reference length does not match the epoch");
  if (std::abs(refs.sample_rate_hz - epoch.sample_rate_hz) > 1e-9)
    throw ArgumentError("reference sample rate does not match the epoch");
  Decision d;
  d.rho.assign(refs.size(), 0.0);
  for (std::size_t m = 0; m < bank.bands.size(); ++m) {
    const Matrix sub = dsp::bandpass(epoch.samples, epoch.sample_rate_hz, bank.bands[m]);
    const double w = bank.weight(static_cast<int>(m) + 1);
    std::vector<double> row;
    for (std::size_t k = 0; k < refs.size(); ++k) {
      const double r = cca_corr(sub, refs.signals[k]);
      row.push_back(r);
      d.rho[k] += w * r * r;
    }
    d.band_rho.push_back(std::move(row));
  }
  d.predicted = argmax_lowest(d.rho);
  d.predicted_hz = refs.targets_hz[static_cast<std::size_t>(d.predicted)];
  return d;
}

/// Plain CCA ranking (no filter bank), for comparison with fbcca_decide.
inline Decision cca_decide(const TrialEpoch& epoch, const ReferenceSet& refs) {
  Decision d;
  for (const auto& y : refs.signals) d.rho.push_back(cca_corr(epoch.samples, y));
  d.band_rho.push_back(d.rho);
  d.predicted = argmax_lowest(d.rho);
  d.predicted_hz = refs.targets_hz[static_cast<std::size_t>(d.predicted)];
  return d;
}

/// Single-target presence test: passes when the canonical correlation with
/// the reference reaches `threshold`. The epoch is band-passed first when a
/// band is given.
inline Decision detect_onset(const TrialEpoch& epoch, const ReferenceSet& ref, double threshold,
                             std::optional<dsp::BandpassSpec> band = std::nullopt) {
  if (!(threshold > 0.0 && threshold <= 1.0)) throw ArgumentError("threshold must lie in (0, 1]");
  if (ref.size() != 1) throw ArgumentError("onset detection needs a single-target reference");
  const Matrix x = band ? dsp::bandpass(epoch.samples, epoch.sample_rate_hz, *band) : epoch.samples;
  Decision d;
  const double r = cca_corr(x, ref.signals.front());
  d.rho = {r};
  d.band_rho = {{r}};
  d.predicted = 0;
  d.predicted_hz = ref.targets_hz.front();
  d.threshold_pass = r >= threshold;
  return d;
}

/// Empirical quantile (linear interpolation between order statistics).
inline double quantile(std::vector<double> values, double q) {
  if (values.empty()) throw ArgumentError("quantile of an empty sample");
  if (!(q >= 0.0 && q <= 1.0)) throw ArgumentError("quantile level must lie in [0, 1]");
  std::sort(values.begin(), values.end());
  const double pos = q * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (pos - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

struct TargetAccuracy {
  std::size_t correct = 0;
  std::size_t total = 0;
  [[nodiscard]] double accuracy() const { return total ? static_cast<double>(correct) / static_cast<double>(total) : 0.0; }
};

struct AccuracyReport {
  double overall = 0.0;
  std::size_t correct = 0;
  std::size_t total = 0;
  std::map<double, TargetAccuracy> per_target;
};

inline AccuracyReport evaluate_accuracy(const std::vector<Decision>& decisions, const std::vector<double>& truth_hz) {
  if (decisions.size() != truth_hz.size()) throw ArgumentError("decision and truth counts differ");
  if (decisions.empty()) throw ArgumentError("no decisions to evaluate");
  AccuracyReport rep;
  for (std::size_t i = 0; i < decisions.size(); ++i) {
    const bool ok = std::abs(decisions[i].predicted_hz - truth_hz[i]) < 1e-9;
    auto& cell = rep.per_target[truth_hz[i]];
    ++cell.total;
    ++rep.total;
    if (ok) {
      ++cell.correct;
      ++rep.correct;
    }
  }
  rep.overall = static_cast<double>(rep.correct) / static_cast<double>(rep.total);
  return rep;
}

}  // namespace ssvep::decode
