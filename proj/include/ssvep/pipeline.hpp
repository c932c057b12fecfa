#pragma once

// Offline analysis pipeline: epoching, preprocessing, spectra, decoding and
// the per-subject / per-task report with its JSON and markdown renderings.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"
#include "ssvep/decode.hpp"
#include "ssvep/dsp.hpp"
#include "ssvep/model.hpp"
#include "ssvep/spectral.hpp"
#include "ssvep/stats.hpp"
#include "ssvep/stimgen.hpp"

namespace ssvep::pipeline {

struct PipelineConfig {
  int task = 1;
  stimgen::Paradigm paradigm = stimgen::Paradigm::pattern_reversal;
  std::vector<double> targets_hz;
  dsp::BandpassSpec band;
  double line_freq_hz = 50.0;
  double artifact_cutoff = 20.0;
  spectral::SnrParams snr;
  double skip_initial_s = 1.0;
  double trial_s = 5.0;
  int n_harmonics = 3;
  decode::FilterBankConfig bank;
  std::string analysis_channel = "POz";
  std::vector<std::string> analysis_sources = {"Pz", "Oz"};
  // Onset detection (single-target tasks).
  std::optional<double> onset_threshold;  // fixed threshold; calibrated when empty
  double null_quantile = 0.95;
  std::vector<double> control_offsets_hz = {-5.0, -3.0, 3.0, 5.0};

  [[nodiscard]] bool single_target() const { return targets_hz.size() == 1; }

  /// Defaults for the three tasks: flicker 7.2/9/14 Hz (7–15 Hz band),
  /// radial motion 8/12/16 Hz (7–17 Hz), Gabor pulse 72 Hz (65–80 Hz).
  static PipelineConfig for_task(int task) {
    PipelineConfig c;
    c.task = task;
    switch (task) {
      case 1:
        c.paradigm = stimgen::Paradigm::pattern_reversal;
        c.targets_hz = {7.2, 9.0, 14.0};
        c.band = {7.0, 15.0, 4};
        break;
      case 2:
        c.paradigm = stimgen::Paradigm::radial_motion;
        c.targets_hz = {8.0, 12.0, 16.0};
        c.band = {7.0, 17.0, 4};
        break;
      case 3:
        c.paradigm = stimgen::Paradigm::gabor_pulse;
        c.targets_hz = {72.0};
        c.band = {65.0, 80.0, 4};
        break;
      default:
        throw ArgumentError("unknown task " + std::to_string(task) + " (expected 1, 2 or 3)");
    }
    if (c.single_target())
      c.bank.bands = {c.band};
    else
      c.bank = decode::make_filter_bank(c.targets_hz, c.band.hi_hz, 5, 1.0, 4.0, c.band.order);
    return c;
  }
};

struct TrialResult {
  int trial = 0;
  double onset_s = 0.0;
  double true_hz = 0.0;
  double predicted_hz = 0.0;
  std::vector<double> rho;
  double rho_true = 0.0;  // canonical correlation at the true target (first band)
  double snr_db = 0.0;
  double snr_linear = 0.0;
  std::optional<bool> pass;  // onset detection outcome
  bool stimulus_on = true;   // false for rest-period epochs of single-target tasks
};

struct TargetSummary {
  double target_hz = 0.0;
  double snr_db = 0.0;  // 10·log10 of the mean linear SNR over trials
  double accuracy = 0.0;
  double mean_rho = 0.0;  // mean canonical correlation at the true target (first band)
  int n_trials = 0;
};

struct Vasf {
  stats::VasfScore raw;
  stats::VasfScore baseline;
  stats::VasfScore corrected;
};

struct TaskResult {
  std::string subject;
  int task = 0;
  std::string paradigm;
  std::vector<TargetSummary> targets;
  double snr_db = 0.0;  // combined over all stimulation trials
  double accuracy = 0.0;
  double mean_rho = 0.0;
  std::optional<double> threshold;
  std::optional<Vasf> vasf;
  std::vector<TrialResult> trials;
};

struct Report {
  std::vector<TaskResult> entries;
};

/// Error raised inside a pipeline stage, tagged with stage and trial.
class StageError : public std::runtime_error {
 public:
  StageError(std::string stage, int trial, const std::exception& cause, bool degenerate)
      : std::runtime_error("stage '" + stage + "'" + (trial >= 0 ? " trial " + std::to_string(trial) : "") + ": " +
                           cause.what()),
        stage_(std::move(stage)),
        trial_(trial),
        degenerate_(degenerate) {}
  [[nodiscard]] const std::string& stage() const noexcept { return stage_; }
  [[nodiscard]] int trial() const noexcept { return trial_; }
  [[nodiscard]] bool degenerate() const noexcept { return degenerate_; }

 private:
  std::string stage_;
  int trial_;
  bool degenerate_;
};

namespace detail {

template <typename Fn>
auto stage(const std::string& name, int trial, Fn&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const StageError&) {
    throw;
  } catch (const DegenerateError& e) {
    throw StageError(name, trial, e, true);
  } catch (const std::exception& e) {
    throw StageError(name, trial, e, false);
  }
}

inline double db(double linear) { return 10.0 * std::log10(linear); }

// Band-pass and line removal per epoch, then artifact suppression over the
// concatenation of all epochs (so calibration sees the whole task).
inline std::vector<TrialEpoch> preprocess(const std::vector<TrialEpoch>& epochs, const PipelineConfig& cfg,
                                          int trial_base) {
  std::vector<TrialEpoch> out;
  out.reserve(epochs.size());
  for (std::size_t i = 0; i < epochs.size(); ++i) {
    const int id = trial_base + static_cast<int>(i);
    auto e = stage("bandpass", id, [&] { return dsp::bandpass(epochs[i], cfg.band); });
    if (cfg.line_freq_hz > 0.0 && cfg.line_freq_hz < e.sample_rate_hz / 2.0)
      e = stage("line_noise", id, [&] { return dsp::remove_line_noise(e, cfg.line_freq_hz); });
    out.push_back(std::move(e));
  }
  if (out.empty()) return out;
  const double fs = out.front().sample_rate_hz;
  Eigen::Index total = 0;
  for (const auto& e : out) total += e.samples.cols();
  if (static_cast<double>(total) < 10.0 * fs || std::isinf(cfg.artifact_cutoff)) return out;

  Recording joined;
  joined.sample_rate_hz = fs;
  joined.layout = out.front().layout;
  joined.samples.resize(out.front().samples.rows(), total);
  Eigen::Index at = 0;
  for (const auto& e : out) {
    joined.samples.middleCols(at, e.samples.cols()) = e.samples;
    at += e.samples.cols();
  }
  const auto cleaned = stage("artifact_suppression", -1, [&] { return dsp::suppress_artifacts(joined, cfg.artifact_cutoff); });
  at = 0;
  for (auto& e : out) {
    e.samples = cleaned.samples.middleCols(at, e.samples.cols());
    at += e.samples.cols();
  }
  return out;
}

inline Recording with_analysis_channel(const Recording& rec, const PipelineConfig& cfg) {
  if (rec.layout.contains(cfg.analysis_channel)) return rec;
  for (const auto& s : cfg.analysis_sources)
    if (!rec.layout.contains(s))
      throw ArgumentError("analysis channel '" + cfg.analysis_channel + "' missing and source '" + s + "' absent");
  return derive_virtual_channel(rec, cfg.analysis_channel, cfg.analysis_sources);
}

}  // namespace detail

/// Runs one subject's task end to end. `vasf_items` optionally carries the
/// subject's baseline and post-task VAS-F responses.
inline TaskResult run_pipeline(const PipelineConfig& cfg, const Recording& raw, const MarkerStream& markers,
                               const std::string& subject,
                               const std::optional<std::pair<std::vector<double>, std::vector<double>>>& vasf_items =
                                   std::nullopt) {
  const auto rec = detail::stage("load", -1, [&] {
    raw.validate();
    return detail::with_analysis_channel(raw, cfg);
  });
  const EpochWindow window{0.0, cfg.trial_s};
  const auto onsets = detail::stage("epoching", -1, [&] { return extract_epochs(rec, markers, window); });
  if (onsets.empty()) throw StageError("epoching", -1, ArgumentError("no trial_onset markers"), false);
  std::vector<TrialEpoch> offsets;
  if (cfg.single_target())
    offsets = detail::stage("epoching", -1,
                            [&] { return extract_epochs_at(rec, markers, window, labels::kTrialOffset); });

  const auto clean_on = detail::preprocess(onsets, cfg, 0);
  const auto clean_off = detail::preprocess(offsets, cfg, static_cast<int>(onsets.size()));
  const auto ch = rec.layout.index(cfg.analysis_channel);
  const double fs = rec.sample_rate_hz;
  const auto n = static_cast<Eigen::Index>(onsets.front().n_samples());
  const int nh = decode::harmonics_without_overlap(cfg.targets_hz, cfg.n_harmonics, fs, fs / static_cast<double>(n));
  const auto refs = detail::stage("decode", -1, [&] { return decode::make_references(cfg.targets_hz, nh, fs, n); });

  TaskResult res;
  res.subject = subject;
  res.task = cfg.task;
  res.paradigm = std::string(stimgen::to_string(cfg.paradigm));

  auto snr_of = [&](const TrialEpoch& e, int id, double f) {
    return detail::stage("spectrum", id, [&] {
      const auto psd = spectral::psd_boxcar(e, cfg.skip_initial_s);
      const auto snr = spectral::snr_spectrum(psd, cfg.snr);
      const auto r = spectral::snr_at(snr, f);
      return r.snr_linear[ch];
    });
  };

  for (std::size_t i = 0; i < clean_on.size(); ++i) {
    const int id = static_cast<int>(i);
    const auto& e = clean_on[i];
    if (e.target_freq_hz <= 0.0) throw StageError("epoching", id, ArgumentError("onset without target"), false);
    TrialResult tr;
    tr.trial = id;
    tr.onset_s = e.onset_s;
    tr.true_hz = e.target_freq_hz;
    tr.snr_linear = snr_of(e, id, e.target_freq_hz);
    tr.snr_db = detail::db(tr.snr_linear);
    if (!cfg.single_target()) {
      const auto d = detail::stage("decode", id, [&] { return decode::fbcca_decide(e, refs, cfg.bank); });
      tr.predicted_hz = d.predicted_hz;
      tr.rho = d.rho;
      auto it = std::find(cfg.targets_hz.begin(), cfg.targets_hz.end(), e.target_freq_hz);
      if (it == cfg.targets_hz.end())
        throw StageError("decode", id, ArgumentError("target " + ssvep::detail::format_double(e.target_freq_hz) +
                                                     " Hz not in the task's target set"),
                         false);
      tr.rho_true = d.band_rho.front()[static_cast<std::size_t>(it - cfg.targets_hz.begin())];
    }
    res.trials.push_back(std::move(tr));
  }

  if (cfg.single_target()) {
    // Canonical correlation with the target reference for stimulation and
    // rest epochs, and with nearby control frequencies as the null.
    const double f = cfg.targets_hz.front();
    std::vector<double> controls;
    for (double d : cfg.control_offsets_hz) controls.push_back(f + d);
    const int nh_c = decode::harmonics_below_nyquist(controls, cfg.n_harmonics, fs);
    const auto null_refs = detail::stage("decode", -1, [&] { return decode::make_references(controls, nh_c, fs, n); });
    std::vector<double> null_rho;
    std::vector<double> on_rho, off_rho;
    auto collect = [&](const std::vector<TrialEpoch>& epochs, int base, std::vector<double>& dst) {
      for (std::size_t i = 0; i < epochs.size(); ++i) {
        const int id = base + static_cast<int>(i);
        detail::stage("decode", id, [&] {
          dst.push_back(decode::cca_corr(epochs[i].samples, refs.signals.front()));
          for (const auto& y : null_refs.signals) null_rho.push_back(decode::cca_corr(epochs[i].samples, y));
          return 0;
        });
      }
    };
    collect(clean_on, 0, on_rho);
    collect(clean_off, static_cast<int>(clean_on.size()), off_rho);
    const double thr = cfg.onset_threshold ? *cfg.onset_threshold : decode::quantile(null_rho, cfg.null_quantile);
    res.threshold = thr;
    std::size_t correct = 0;
    for (std::size_t i = 0; i < on_rho.size(); ++i) {
      auto& tr = res.trials[i];
      tr.rho = {on_rho[i]};
      tr.pass = on_rho[i] >= thr;
      tr.predicted_hz = *tr.pass ? f : 0.0;
      tr.rho_true = on_rho[i];
      if (*tr.pass) ++correct;
    }
    for (std::size_t i = 0; i < off_rho.size(); ++i) {
      TrialResult tr;
      tr.trial = static_cast<int>(on_rho.size() + i);
      tr.onset_s = clean_off[i].onset_s;
      tr.true_hz = 0.0;
      tr.stimulus_on = false;
      tr.rho = {off_rho[i]};
      tr.pass = off_rho[i] >= thr;
      tr.predicted_hz = *tr.pass ? f : 0.0;
      tr.snr_linear = snr_of(clean_off[i], tr.trial, f);
      tr.snr_db = detail::db(tr.snr_linear);
      if (!*tr.pass) ++correct;
      res.trials.push_back(std::move(tr));
    }
    res.accuracy = static_cast<double>(correct) / static_cast<double>(on_rho.size() + off_rho.size());
  }

  // Per-target summaries over stimulation trials.
  std::size_t on_count = 0;
  std::size_t on_correct = 0;
  double snr_sum = 0.0;
  double rho_sum = 0.0;
  for (double f : cfg.targets_hz) {
    TargetSummary ts;
    ts.target_hz = f;
    double lin = 0.0, rho = 0.0;
    int correct = 0;
    for (const auto& tr : res.trials) {
      if (!tr.stimulus_on || tr.true_hz != f) continue;
      ++ts.n_trials;
      lin += tr.snr_linear;
      rho += tr.rho_true;
      const bool ok = cfg.single_target() ? tr.pass.value_or(false) : tr.predicted_hz == f;
      if (ok) ++correct;
    }
    if (ts.n_trials > 0) {
      ts.snr_db = detail::db(lin / ts.n_trials);
      ts.accuracy = static_cast<double>(correct) / ts.n_trials;
      ts.mean_rho = rho / ts.n_trials;
    }
    snr_sum += lin;
    rho_sum += rho;
    on_count += static_cast<std::size_t>(ts.n_trials);
    on_correct += static_cast<std::size_t>(correct);
    res.targets.push_back(ts);
  }
  res.snr_db = detail::db(snr_sum / static_cast<double>(on_count));
  res.mean_rho = rho_sum / static_cast<double>(on_count);
  if (!cfg.single_target()) res.accuracy = static_cast<double>(on_correct) / static_cast<double>(on_count);

  if (vasf_items) {
    Vasf v;
    v.baseline = stats::score_vasf(vasf_items->first);
    v.raw = stats::score_vasf(vasf_items->second);
    v.corrected = stats::score_vasf(vasf_items->second, v.baseline);
    res.vasf = v;
  }
  return res;
}

}  // namespace ssvep::pipeline
