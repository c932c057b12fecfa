#pragma once

// Repeated-measures ANOVA, Holm step-down adjustment, paired t-tests and
// VAS-F scoring, with F and t tail probabilities from an in-house
// regularized incomplete beta.

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "ssvep/errors.hpp"

namespace ssvep::stats {

namespace detail {

// Continued fraction for I_x(a, b) (modified Lentz), valid for x < (a+1)/(a+b+2).
inline double beta_cf(double a, double b, double x) {
  constexpr int kMaxIter = 10000;
  constexpr double kEps = 1e-16;
  constexpr double kTiny = 1e-300;
  const double qab = a + b, qap = a + 1.0, qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::abs(d) < kTiny) d = kTiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= kMaxIter; ++m) {
    const double m2 = 2.0 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::abs(del - 1.0) < kEps) break;
  }
  return h;
}

}  // namespace detail

/// Regularized incomplete beta I_x(a, b).
inline double incomplete_beta(double a, double b, double x) {
  if (!(a > 0.0 && b > 0.0)) throw ArgumentError("incomplete beta needs positive shape parameters");
  if (!(x >= 0.0 && x <= 1.0)) throw ArgumentError("incomplete beta argument must lie in [0, 1]");
  if (x == 0.0) return 0.0;
  if (x == 1.0) return 1.0;
  const double ln_front =
      std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + a * std::log(x) + b * std::log1p(-x);
  const double front = std::exp(ln_front);
  if (x < (a + 1.0) / (a + b + 2.0)) return front * detail::beta_cf(a, b, x) / a;
  return 1.0 - front * detail::beta_cf(b, a, 1.0 - x) / b;
}

inline double f_cdf(double f, double df1, double df2) {
  if (f <= 0.0) return 0.0;
  return incomplete_beta(df1 / 2.0, df2 / 2.0, df1 * f / (df1 * f + df2));
}

/// Upper tail P(F > f), computed directly to keep precision for small p.
inline double f_sf(double f, double df1, double df2) {
  if (f <= 0.0) return 1.0;
  return incomplete_beta(df2 / 2.0, df1 / 2.0, df2 / (df2 + df1 * f));
}

inline double t_cdf(double t, double df) {
  const double tail = 0.5 * incomplete_beta(df / 2.0, 0.5, df / (df + t * t));
  return t >= 0.0 ? 1.0 - tail : tail;
}

/// Two-sided p-value for a t statistic.
inline double t_two_sided_p(double t, double df) {
  return incomplete_beta(df / 2.0, 0.5, df / (df + t * t));
}

// ---------------------------------------------------------------------------

struct RmAnovaResult {
  double F = 0.0;
  int df1 = 0;
  int df2 = 0;
  double p = 1.0;
  double eta_sq_partial = 0.0;
  double ss_condition = 0.0;
  double ss_subject = 0.0;
  double ss_error = 0.0;
  double ss_total = 0.0;
};

/// One-way within-subjects ANOVA on a subjects × conditions matrix.
inline RmAnovaResult rm_anova(const Eigen::MatrixXd& data) {
  const auto n = data.rows();
  const auto k = data.cols();
  if (n < 2 || k < 2) throw ArgumentError("repeated-measures ANOVA needs at least 2 subjects and 2 conditions");
  if (!data.allFinite()) throw ArgumentError("repeated-measures ANOVA needs a complete, finite matrix");

  const double grand = data.mean();
  const Eigen::VectorXd subj = data.rowwise().mean();
  const Eigen::RowVectorXd cond = data.colwise().mean();
  RmAnovaResult r;
  r.ss_total = (data.array() - grand).square().sum();
  r.ss_subject = static_cast<double>(k) * (subj.array() - grand).square().sum();
  r.ss_condition = static_cast<double>(n) * (cond.array() - grand).square().sum();
  // Residual from the additive model, summed directly rather than by subtraction.
  double ss_err = 0.0;
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < k; ++j) {
      const double e = data(i, j) - subj(i) - cond(j) + grand;
      ss_err += e * e;
    }
  r.ss_error = ss_err;
  r.df1 = static_cast<int>(k - 1);
  r.df2 = static_cast<int>((n - 1) * (k - 1));
  const double scale = std::max(r.ss_total, std::numeric_limits<double>::min());
  if (!(r.ss_error > 1e-12 * scale))
    throw DegenerateError("repeated-measures ANOVA: error sum of squares is zero");
  r.F = (r.ss_condition / r.df1) / (r.ss_error / r.df2);
  r.p = f_sf(r.F, r.df1, r.df2);
  r.eta_sq_partial = r.ss_condition / (r.ss_condition + r.ss_error);
  return r;
}

/// Holm step-down adjusted p-values, returned in input order.
inline std::vector<double> holm_adjust(const std::vector<double>& pvals) {
  for (double p : pvals)
    if (!(p >= 0.0 && p <= 1.0)) throw ArgumentError("p-values must lie in [0, 1]");
  const std::size_t m = pvals.size();
  std::vector<std::size_t> order(m);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return pvals[a] < pvals[b]; });
  std::vector<double> adjusted(m);
  double running = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    const double v = std::min(1.0, pvals[order[i]] * static_cast<double>(m - i));
    running = std::max(running, v);
    adjusted[order[i]] = running;
  }
  return adjusted;
}

struct PairedT {
  double t = 0.0;
  int df = 0;
  double p = 1.0;  // two-sided
  double cohen_d = 0.0;
  double mean_diff = 0.0;
  double sd_diff = 0.0;
};

/// Paired t-test on a − b.
inline PairedT paired_t(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) throw ArgumentError("paired samples must have equal length");
  if (a.size() < 2) throw ArgumentError("paired t-test needs at least two pairs");
  const auto n = static_cast<double>(a.size());
  std::vector<double> d(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) d[i] = a[i] - b[i];
  const double mean = std::accumulate(d.begin(), d.end(), 0.0) / n;
  double ss = 0.0;
  for (double v : d) ss += (v - mean) * (v - mean);
  const double sd = std::sqrt(ss / (n - 1.0));
  double scale = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) scale = std::max({scale, std::abs(a[i]), std::abs(b[i])});
  if (!(sd > 1e-12 * std::max(scale, std::numeric_limits<double>::min())))
    throw DegenerateError("paired t-test: differences have zero variance");
  PairedT r;
  r.mean_diff = mean;
  r.sd_diff = sd;
  r.df = static_cast<int>(a.size()) - 1;
  r.t = mean / (sd / std::sqrt(n));
  r.p = t_two_sided_p(r.t, r.df);
  r.cohen_d = mean / sd;
  return r;
}

// ---------------------------------------------------------------------------
// VAS-F

/// Which of the 18 items are fatigue items (13) and energy items (5).
struct VasfPartition {
  std::vector<int> fatigue_items;
  std::vector<int> energy_items;

  /// Items 0–12 fatigue, 13–17 energy.
  static VasfPartition standard() {
    VasfPartition p;
    for (int i = 0; i < 13; ++i) p.fatigue_items.push_back(i);
    for (int i = 13; i < 18; ++i) p.energy_items.push_back(i);
    return p;
  }

  void validate() const {
    if (fatigue_items.size() != 13 || energy_items.size() != 5)
      throw ArgumentError("VAS-F partition must have 13 fatigue and 5 energy items");
    std::vector<int> all = fatigue_items;
    all.insert(all.end(), energy_items.begin(), energy_items.end());
    std::sort(all.begin(), all.end());
    for (int i = 0; i < 18; ++i)
      if (all[static_cast<std::size_t>(i)] != i) throw ArgumentError("VAS-F partition must cover items 0–17 once each");
  }
};

struct VasfScore {
  double fatigue = 0.0;
  double energy = 0.0;
  bool baseline_corrected = false;
};

inline VasfScore score_vasf(const std::vector<double>& items, const std::optional<VasfScore>& baseline = std::nullopt,
                            const VasfPartition& partition = VasfPartition::standard()) {
  if (items.size() != 18) throw ArgumentError("VAS-F needs exactly 18 item responses, got " + std::to_string(items.size()));
  partition.validate();
  auto mean_of = [&](const std::vector<int>& idx) {
    double s = 0.0;
    for (int i : idx) s += items[static_cast<std::size_t>(i)];
    return s / static_cast<double>(idx.size());
  };
  VasfScore s{mean_of(partition.fatigue_items), mean_of(partition.energy_items), false};
  if (baseline) {
    s.fatigue -= baseline->fatigue;
    s.energy -= baseline->energy;
    s.baseline_corrected = true;
  }
  return s;
}

// ---------------------------------------------------------------------------

struct MeanSe {
  double mean = 0.0;
  double se = 0.0;
};

/// Mean and standard error (sample sd / √n; 0 for a single value).
inline MeanSe mean_se(const std::vector<double>& v) {
  if (v.empty()) throw ArgumentError("mean of an empty sample");
  const auto n = static_cast<double>(v.size());
  const double mean = std::accumulate(v.begin(), v.end(), 0.0) / n;
  if (v.size() < 2) return {mean, 0.0};
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  return {mean, std::sqrt(ss / (n - 1.0)) / std::sqrt(n)};
}

}  // namespace ssvep::stats
