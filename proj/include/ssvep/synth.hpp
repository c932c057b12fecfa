#pragma once

// Ground-truth EEG synthesis: harmonic evoked responses on a pink-noise
// background with mains interference and sparse artifact bursts, plus the
// continuous multi-trial recordings, markers and manifests built from them.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <map>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "json.hpp"
#include "ssvep/detail/fft.hpp"
#include "ssvep/model.hpp"
#include "ssvep/stimgen.hpp"

namespace ssvep::synth {

/// Portable seeded generator: mt19937_64 with hand-rolled uniform and normal
/// transforms so streams are identical across standard libraries.
class Rng {
 public:
  explicit Rng(std::initializer_list<std::uint64_t> key) {
    std::vector<std::uint32_t> words;
    for (auto k : key) {
      words.push_back(static_cast<std::uint32_t>(k & 0xffffffffu));
      words.push_back(static_cast<std::uint32_t>(k >> 32));
    }
    std::seed_seq seq(words.begin(), words.end());
    engine_.seed(seq);
  }

  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double th = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(th);
    has_spare_ = true;
    return r * std::cos(th);
  }

  std::uint64_t below(std::uint64_t n) { return static_cast<std::uint64_t>(uniform() * static_cast<double>(n)); }

  std::uint64_t poisson(double mean) {
    // Knuth's method; artifact counts per trial are small.
    const double limit = std::exp(-mean);
    std::uint64_t k = 0;
    double p = uniform();
    while (p > limit) {
      ++k;
      p *= uniform();
    }
    return k;
  }

 private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

inline std::vector<std::string> default_channels() {
  return {"PO7", "O1", "PO3", "Pz", "Oz", "PO4", "O2", "PO8", "CP1", "CP2", "P3", "P7", "P4", "P8"};
}

/// Evoked-response gain by scalp region: occipital strongest, centro-parietal weakest.
inline double default_gain(const std::string& ch) {
  if (ch == "O1" || ch == "Oz" || ch == "O2") return 1.0;
  if (ch.rfind("PO", 0) == 0) return 0.8;
  if (ch == "Pz") return 0.6;
  if (ch.rfind("CP", 0) == 0) return 0.3;
  if (ch.rfind("P", 0) == 0) return 0.5;
  return 0.4;
}

struct SynthConfig {
  double evoked_amp_uV = 1.5;
  double harmonic_decay = 0.5;
  int n_harmonics = 3;
  double pink_noise_uV = 10.0;  // RMS per channel
  double white_noise_uV = 0.5;  // RMS per channel
  double line_freq_hz = 50.0;
  double line_amp_uV = 5.0;
  double artifact_rate_per_min = 4.0;
  double artifact_amp_uV = 80.0;
  std::map<std::string, double> channel_gains;  // overrides default_gain
  double subject_gain_sd = 0.25;                // log-normal spread of evoked gain across subjects
  double sample_rate_hz = 500.0;
  std::vector<std::string> channels = default_channels();
  std::uint64_t seed = 1;

  void validate() const {
    if (evoked_amp_uV < 0 || pink_noise_uV < 0 || white_noise_uV < 0 || line_amp_uV < 0 || artifact_amp_uV < 0 ||
        artifact_rate_per_min < 0 || subject_gain_sd < 0)
      throw ArgumentError("synth amplitudes and rates must be non-negative");
    if (!(harmonic_decay >= 0.0 && harmonic_decay <= 1.0)) throw ArgumentError("harmonic_decay must lie in [0, 1]");
    if (n_harmonics < 1) throw ArgumentError("n_harmonics must be at least 1");
    if (!(sample_rate_hz > 0.0)) throw ArgumentError("sample rate must be positive");
    if (channels.empty()) throw ArgumentError("synth needs at least one channel");
    for (const auto& [name, g] : channel_gains)
      if (std::find(channels.begin(), channels.end(), name) == channels.end())
        throw ArgumentError("gain given for unknown channel '" + name + "'");
  }

  [[nodiscard]] double gain(const std::string& ch) const {
    auto it = channel_gains.find(ch);
    return it == channel_gains.end() ? default_gain(ch) : it->second;
  }
};

struct TaskProtocol {
  int task = 1;
  stimgen::Paradigm paradigm = stimgen::Paradigm::pattern_reversal;
  std::vector<double> targets_hz;
  int trials_per_target = 10;
  double trial_s = 5.0;
  double rest_s = 5.0;
  double evoked_scale = 1.0;   // paradigm-specific response strength
  double fatigue_shift = 1.0;  // mean VAS-F fatigue increase after this task

  [[nodiscard]] int n_trials() const { return trials_per_target * static_cast<int>(targets_hz.size()); }
};

struct SynthProtocol {
  std::vector<TaskProtocol> tasks;
  int n_subjects = 14;
  double lead_s = 2.0;

  /// Three tasks, 30 trials of 5 s stimulation and 5 s rest each, 14 subjects.
  static SynthProtocol standard() {
    SynthProtocol p;
    p.tasks = {
        {1, stimgen::Paradigm::pattern_reversal, {7.2, 9.0, 14.0}, 10, 5.0, 5.0, 1.0, 1.0},
        {2, stimgen::Paradigm::radial_motion, {8.0, 12.0, 16.0}, 10, 5.0, 5.0, 1.0, 0.6},
        {3, stimgen::Paradigm::gabor_pulse, {72.0}, 30, 5.0, 5.0, 1.0, 0.8},
    };
    return p;
  }

  void validate() const {
    if (n_subjects < 1) throw ArgumentError("protocol needs at least one subject");
    if (tasks.empty()) throw ArgumentError("protocol needs at least one task");
    if (lead_s < 0) throw ArgumentError("lead time must be non-negative");
    for (const auto& t : tasks) {
      if (t.targets_hz.empty()) throw ArgumentError("task " + std::to_string(t.task) + " has no targets");
      if (t.trials_per_target < 1) throw ArgumentError("trials per target must be at least 1");
      if (!(t.trial_s > 0.0) || t.rest_s < 0.0) throw ArgumentError("trial and rest durations must be positive");
      for (double f : t.targets_hz)
        if (!(f > 0.0)) throw ArgumentError("target frequencies must be positive");
    }
  }
};

// ---------------------------------------------------------------------------
// Signal components

/// Unit-RMS noise with a 1/f power spectrum, by shaping white noise in the
/// frequency domain (amplitude ∝ 1/√f, DC removed).
inline std::vector<double> pink_noise(std::size_t n, Rng& rng) {
  std::vector<double> white(n);
  for (auto& v : white) v = rng.normal();
  if (n < 4) return white;
  auto spec = detail::rfft(white);
  spec[0] = 0.0;
  for (std::size_t k = 1; k < spec.size(); ++k) spec[k] /= std::sqrt(static_cast<double>(k));
  auto pink = detail::irfft(spec, n);
  double ss = 0.0;
  for (double v : pink) ss += v * v;
  const double rms = std::sqrt(ss / static_cast<double>(n));
  if (rms > 0.0)
    for (auto& v : pink) v /= rms;
  return pink;
}

/// Harmonic evoked response, phases drawn once per call.
inline Matrix evoked_response(const SynthConfig& cfg, double target_hz, std::size_t n, double amp, Rng& rng) {
  constexpr double pi = std::numbers::pi;
  const auto ch = static_cast<Eigen::Index>(cfg.channels.size());
  std::vector<double> phases(static_cast<std::size_t>(cfg.n_harmonics));
  for (auto& p : phases) p = rng.uniform(0.0, 2.0 * pi);
  std::vector<double> wave(n, 0.0);
  for (int h = 1; h <= cfg.n_harmonics; ++h) {
    const double a = amp * std::pow(cfg.harmonic_decay, h - 1);
    if (a == 0.0) continue;
    for (std::size_t i = 0; i < n; ++i)
      wave[i] += a * std::sin(2.0 * pi * h * target_hz * static_cast<double>(i) / cfg.sample_rate_hz +
                              phases[static_cast<std::size_t>(h - 1)]);
  }
  Matrix out(ch, static_cast<Eigen::Index>(n));
  for (Eigen::Index c = 0; c < ch; ++c) {
    const double g = cfg.gain(cfg.channels[static_cast<std::size_t>(c)]);
    for (std::size_t i = 0; i < n; ++i) out(c, static_cast<Eigen::Index>(i)) = g * wave[i];
  }
  return out;
}

/// Background: independent pink and white noise per channel, one mains
/// sinusoid shared by all channels, and Hann-shaped artifact bursts.
inline Matrix background(const SynthConfig& cfg, std::size_t n, Rng& rng) {
  constexpr double pi = std::numbers::pi;
  const auto ch = static_cast<Eigen::Index>(cfg.channels.size());
  const double fs = cfg.sample_rate_hz;
  Matrix out = Matrix::Zero(ch, static_cast<Eigen::Index>(n));
  for (Eigen::Index c = 0; c < ch; ++c) {
    const auto pink = pink_noise(n, rng);
    for (std::size_t i = 0; i < n; ++i)
      out(c, static_cast<Eigen::Index>(i)) = cfg.pink_noise_uV * pink[i] + cfg.white_noise_uV * rng.normal();
  }
  const double line_phase = rng.uniform(0.0, 2.0 * pi);
  if (cfg.line_amp_uV > 0.0 && cfg.line_freq_hz > 0.0) {
    for (std::size_t i = 0; i < n; ++i) {
      const double v = cfg.line_amp_uV * std::sin(2.0 * pi * cfg.line_freq_hz * static_cast<double>(i) / fs + line_phase);
      out.col(static_cast<Eigen::Index>(i)).array() += v;
    }
  }
  const double minutes = static_cast<double>(n) / fs / 60.0;
  const auto bursts = rng.poisson(cfg.artifact_rate_per_min * minutes);
  const auto width = static_cast<std::size_t>(std::max(2.0, std::round(0.4 * fs)));
  for (std::uint64_t b = 0; b < bursts; ++b) {
    const auto start = static_cast<std::size_t>(rng.below(n));
    const double sign = rng.uniform() < 0.5 ? -1.0 : 1.0;
    std::vector<double> weight(static_cast<std::size_t>(ch));
    for (auto& w : weight) w = rng.uniform(0.3, 1.0);
    if (cfg.artifact_amp_uV == 0.0) continue;
    for (std::size_t j = 0; j < width && start + j < n; ++j) {
      const double s = std::sin(pi * static_cast<double>(j) / static_cast<double>(width - 1));
      const double v = sign * cfg.artifact_amp_uV * s * s;
      for (Eigen::Index c = 0; c < ch; ++c)
        out(c, static_cast<Eigen::Index>(start + j)) += weight[static_cast<std::size_t>(c)] * v;
    }
  }
  return out;
}

/// One synthetic stimulation trial; deterministic in (cfg.seed, trial_index).
inline TrialEpoch synth_trial(const SynthConfig& cfg, double target_hz, double duration_s, double fs,
                              std::uint64_t trial_index = 0) {
  cfg.validate();
  if (!(duration_s > 0.0)) throw ArgumentError("trial duration must be positive");
  if (!(target_hz > 0.0)) throw ArgumentError("target frequency must be positive");
  if (!(fs > 2.0 * cfg.n_harmonics * target_hz))
    throw ArgumentError("sample rate " + detail::format_double(fs) + " Hz cannot carry harmonic " +
                        std::to_string(cfg.n_harmonics) + " of " + detail::format_double(target_hz) + " Hz");
  SynthConfig local = cfg;
  local.sample_rate_hz = fs;
  const auto n = static_cast<std::size_t>(std::llround(duration_s * fs));
  Rng rng({cfg.seed, 0, 0, trial_index});
  TrialEpoch e;
  e.condition = "synthetic";
  e.target_freq_hz = target_hz;
  e.sample_rate_hz = fs;
  e.layout = ChannelLayout(cfg.channels);
  e.samples = evoked_response(local, target_hz, n, cfg.evoked_amp_uV, rng);
  e.samples += background(local, n, rng);
  return e;
}

// ---------------------------------------------------------------------------
// Continuous recordings

struct TrialTruth {
  double onset_s = 0.0;
  double target_hz = 0.0;
};

struct TaskRecording {
  Recording recording;
  MarkerStream markers;
  std::vector<TrialTruth> trials;
};

inline double subject_gain(const SynthConfig& cfg, int subject) {
  if (cfg.subject_gain_sd == 0.0) return 1.0;
  Rng rng({cfg.seed, static_cast<std::uint64_t>(subject), 0xa11ce});
  return std::exp(cfg.subject_gain_sd * rng.normal());
}

/// Balanced target sequence, shuffled per (seed, subject, task).
inline std::vector<double> target_sequence(const SynthConfig& cfg, const TaskProtocol& task, int subject) {
  std::vector<double> seq;
  for (int r = 0; r < task.trials_per_target; ++r)
    for (double f : task.targets_hz) seq.push_back(f);
  Rng rng({cfg.seed, static_cast<std::uint64_t>(subject), static_cast<std::uint64_t>(task.task), 0x5eed});
  for (std::size_t i = seq.size(); i > 1; --i) std::swap(seq[i - 1], seq[rng.below(i)]);
  return seq;
}

inline TaskRecording synth_recording(const SynthConfig& cfg, const TaskProtocol& task, int subject,
                                     double lead_s = 2.0) {
  cfg.validate();
  const double fs = cfg.sample_rate_hz;
  for (double f : task.targets_hz)
    if (!(fs > 2.0 * cfg.n_harmonics * f))
      throw ArgumentError("sample rate cannot carry the harmonics of " + detail::format_double(f) + " Hz");
  const auto seq = target_sequence(cfg, task, subject);
  const double period = task.trial_s + task.rest_s;
  const double total_s = lead_s + static_cast<double>(seq.size()) * period + 1.0;
  const auto n = static_cast<std::size_t>(std::llround(total_s * fs));
  const auto key_subject = static_cast<std::uint64_t>(subject);
  const auto key_task = static_cast<std::uint64_t>(task.task);

  TaskRecording out;
  Rng bg_rng({cfg.seed, key_subject, key_task, 0xb6});
  out.recording.sample_rate_hz = fs;
  out.recording.layout = ChannelLayout(cfg.channels);
  out.recording.t0 = 0.0;
  out.recording.samples = background(cfg, n, bg_rng);

  const double amp = cfg.evoked_amp_uV * task.evoked_scale * subject_gain(cfg, subject);
  const auto trial_n = static_cast<Eigen::Index>(std::llround(task.trial_s * fs));
  std::vector<Marker> markers;
  markers.push_back({0.0, labels::task_start(stimgen::to_string(task.paradigm))});
  for (std::size_t t = 0; t < seq.size(); ++t) {
    const double onset = lead_s + static_cast<double>(t) * period;
    const auto first = static_cast<Eigen::Index>(std::llround(onset * fs));
    Rng rng({cfg.seed, key_subject, key_task, static_cast<std::uint64_t>(t) + 1});
    out.recording.samples.middleCols(first, trial_n) +=
        evoked_response(cfg, seq[t], static_cast<std::size_t>(trial_n), amp, rng);
    const double onset_time = static_cast<double>(first) / fs;
    markers.push_back({onset_time, labels::trial_onset(seq[t])});
    markers.push_back({onset_time + task.trial_s, std::string(labels::kTrialOffset)});
    out.trials.push_back({onset_time, seq[t]});
  }
  markers.push_back({static_cast<double>(n - 1) / fs, std::string(labels::kTaskEnd)});
  out.markers = MarkerStream(std::move(markers));
  return out;
}

// ---------------------------------------------------------------------------
// VAS-F responses

struct VasfResponses {
  std::vector<double> baseline;
  std::map<int, std::vector<double>> tasks;  // task id → 18 items
};

/// Integer 0–10 item responses: fatigue items rise by the task's shift,
/// energy items fall by half of it.
inline VasfResponses synth_vasf(const SynthConfig& cfg, const SynthProtocol& protocol, int subject) {
  Rng rng({cfg.seed, static_cast<std::uint64_t>(subject), 0xfa71});
  auto clamp_item = [](double v) { return std::clamp(std::round(v), 0.0, 10.0); };
  std::vector<double> fatigue_base(13), energy_base(5);
  const double f0 = 3.0 + rng.normal();
  const double e0 = 6.0 + rng.normal();
  for (auto& v : fatigue_base) v = f0 + 0.8 * rng.normal();
  for (auto& v : energy_base) v = e0 + 0.8 * rng.normal();
  VasfResponses out;
  for (double v : fatigue_base) out.baseline.push_back(clamp_item(v));
  for (double v : energy_base) out.baseline.push_back(clamp_item(v));
  for (const auto& task : protocol.tasks) {
    const double shift = task.fatigue_shift + 0.7 * rng.normal();
    std::vector<double> items;
    for (double v : fatigue_base) items.push_back(clamp_item(v + shift + 0.8 * rng.normal()));
    for (double v : energy_base) items.push_back(clamp_item(v - 0.5 * shift + 0.8 * rng.normal()));
    out.tasks[task.task] = std::move(items);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Config and manifest I/O

inline nlohmann::json protocol_to_json(const SynthProtocol& p) {
  nlohmann::json tasks = nlohmann::json::array();
  for (const auto& t : p.tasks)
    tasks.push_back({{"task", t.task},
                     {"paradigm", std::string(stimgen::to_string(t.paradigm))},
                     {"targets", t.targets_hz},
                     {"trials_per_target", t.trials_per_target},
                     {"trial_s", t.trial_s},
                     {"rest_s", t.rest_s},
                     {"evoked_scale", t.evoked_scale},
                     {"fatigue_shift", t.fatigue_shift}});
  return {{"n_subjects", p.n_subjects}, {"lead_s", p.lead_s}, {"tasks", tasks}};
}

inline SynthProtocol protocol_from_json(const nlohmann::json& j) {
  SynthProtocol p = SynthProtocol::standard();
  p.n_subjects = j.value("n_subjects", p.n_subjects);
  p.lead_s = j.value("lead_s", p.lead_s);
  if (j.contains("tasks")) {
    p.tasks.clear();
    for (const auto& t : j.at("tasks")) {
      TaskProtocol tp;
      tp.task = t.at("task").get<int>();
      tp.paradigm = stimgen::parse_paradigm(t.at("paradigm").get<std::string>());
      tp.targets_hz = t.at("targets").get<std::vector<double>>();
      tp.trials_per_target = t.value("trials_per_target", tp.trials_per_target);
      tp.trial_s = t.value("trial_s", tp.trial_s);
      tp.rest_s = t.value("rest_s", tp.rest_s);
      tp.evoked_scale = t.value("evoked_scale", tp.evoked_scale);
      tp.fatigue_shift = t.value("fatigue_shift", tp.fatigue_shift);
      p.tasks.push_back(std::move(tp));
    }
  }
  p.validate();
  return p;
}

inline nlohmann::json config_to_json(const SynthConfig& c) {
  return {{"evoked_amp_uV", c.evoked_amp_uV},
          {"harmonic_decay", c.harmonic_decay},
          {"n_harmonics", c.n_harmonics},
          {"pink_noise_uV", c.pink_noise_uV},
          {"white_noise_uV", c.white_noise_uV},
          {"line_freq_hz", c.line_freq_hz},
          {"line_amp_uV", c.line_amp_uV},
          {"artifact_rate_per_min", c.artifact_rate_per_min},
          {"artifact_amp_uV", c.artifact_amp_uV},
          {"channel_gains", c.channel_gains},
          {"subject_gain_sd", c.subject_gain_sd},
          {"sample_rate_hz", c.sample_rate_hz},
          {"channels", c.channels},
          {"seed", c.seed}};
}

inline SynthConfig config_from_json(const nlohmann::json& j) {
  SynthConfig c;
  c.evoked_amp_uV = j.value("evoked_amp_uV", c.evoked_amp_uV);
  c.harmonic_decay = j.value("harmonic_decay", c.harmonic_decay);
  c.n_harmonics = j.value("n_harmonics", c.n_harmonics);
  c.pink_noise_uV = j.value("pink_noise_uV", c.pink_noise_uV);
  c.white_noise_uV = j.value("white_noise_uV", c.white_noise_uV);
  c.line_freq_hz = j.value("line_freq_hz", c.line_freq_hz);
  c.line_amp_uV = j.value("line_amp_uV", c.line_amp_uV);
  c.artifact_rate_per_min = j.value("artifact_rate_per_min", c.artifact_rate_per_min);
  c.artifact_amp_uV = j.value("artifact_amp_uV", c.artifact_amp_uV);
  if (j.contains("channel_gains")) c.channel_gains = j.at("channel_gains").get<std::map<std::string, double>>();
  c.subject_gain_sd = j.value("subject_gain_sd", c.subject_gain_sd);
  c.sample_rate_hz = j.value("sample_rate_hz", c.sample_rate_hz);
  if (j.contains("channels")) c.channels = j.at("channels").get<std::vector<std::string>>();
  c.seed = j.value("seed", c.seed);
  c.validate();
  return c;
}

inline std::string subject_id(int subject) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "S%02d", subject);
  return buf;
}

/// Writes recording/marker CSV pairs and VAS-F responses for every subject
/// and task, and returns (and writes) the manifest.
inline nlohmann::json synth_dataset(const SynthConfig& cfg, const SynthProtocol& protocol,
                                    const std::filesystem::path& out_dir) {
  cfg.validate();
  protocol.validate();
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw IoError("cannot create '" + out_dir.string() + "': " + ec.message());

  nlohmann::json subjects = nlohmann::json::array();
  for (int s = 1; s <= protocol.n_subjects; ++s) {
    const auto id = subject_id(s);
    nlohmann::json tasks = nlohmann::json::array();
    for (const auto& task : protocol.tasks) {
      const auto rec = synth_recording(cfg, task, s, protocol.lead_s);
      const auto stem = id + "_task" + std::to_string(task.task);
      save_recording(rec.recording, out_dir / (stem + "_recording.csv"));
      save_markers(rec.markers, out_dir / (stem + "_markers.csv"));
      nlohmann::json trials = nlohmann::json::array();
      for (const auto& t : rec.trials) trials.push_back({{"onset_s", t.onset_s}, {"target_hz", t.target_hz}});
      tasks.push_back({{"task", task.task},
                       {"paradigm", std::string(stimgen::to_string(task.paradigm))},
                       {"targets", task.targets_hz},
                       {"trial_s", task.trial_s},
                       {"recording", stem + "_recording.csv"},
                       {"markers", stem + "_markers.csv"},
                       {"trials", trials}});
    }
    const auto vasf = synth_vasf(cfg, protocol, s);
    nlohmann::json vj = {{"baseline", vasf.baseline}};
    for (const auto& [task, items] : vasf.tasks) vj["task" + std::to_string(task)] = items;
    detail::write_file(out_dir / (id + "_vasf.json"), vj.dump(2) + "\n");
    subjects.push_back({{"id", id}, {"vasf", id + "_vasf.json"}, {"tasks", tasks}});
  }
  nlohmann::json manifest = {{"sample_rate_hz", cfg.sample_rate_hz},
                             {"channels", cfg.channels},
                             {"protocol", protocol_to_json(protocol)},
                             {"subjects", subjects}};
  detail::write_file(out_dir / "manifest.json", manifest.dump(2) + "\n");
  return manifest;
}

}  // namespace ssvep::synth
