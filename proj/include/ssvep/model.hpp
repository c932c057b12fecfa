#pragma once

// Core data types: channel layouts, recordings, marker streams and trial
// epochs, plus the CSV formats used to move them on and off disk.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "ssvep/detail/numfmt.hpp"
#include "ssvep/errors.hpp"

namespace ssvep {

/// Channels × time, each channel row contiguous.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

class ChannelLayout {
 public:
  ChannelLayout() = default;

  explicit ChannelLayout(std::vector<std::string> names) : names_(std::move(names)) {
    if (names_.empty()) throw ArgumentError("channel layout must not be empty");
    for (std::size_t i = 0; i < names_.size(); ++i) {
      if (names_[i].empty()) throw ArgumentError("channel name must not be empty");
      if (!index_.emplace(names_[i], i).second)
        throw ArgumentError("duplicate channel name '" + names_[i] + "'");
    }
  }

  [[nodiscard]] const std::vector<std::string>& names() const noexcept { return names_; }
  [[nodiscard]] std::size_t size() const noexcept { return names_.size(); }
  [[nodiscard]] bool empty() const noexcept { return names_.empty(); }

  [[nodiscard]] std::optional<std::size_t> find(std::string_view name) const {
    auto it = index_.find(std::string(name));
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }

  [[nodiscard]] std::size_t index(std::string_view name) const {
    if (auto i = find(name)) return *i;
    throw ArgumentError("unknown channel '" + std::string(name) + "'");
  }

  [[nodiscard]] bool contains(std::string_view name) const { return find(name).has_value(); }

  /// Source channels of a derived channel; empty for physical channels.
  [[nodiscard]] const std::vector<std::string>& sources(std::string_view name) const {
    static const std::vector<std::string> none;
    auto it = virtual_sources_.find(std::string(name));
    return it == virtual_sources_.end() ? none : it->second;
  }

  [[nodiscard]] bool is_virtual(std::string_view name) const {
    return virtual_sources_.count(std::string(name)) != 0;
  }

  [[nodiscard]] ChannelLayout with_virtual(const std::string& name,
                                           std::vector<std::string> sources) const {
    if (name.empty()) throw ArgumentError("channel name must not be empty");
    if (contains(name)) throw ArgumentError("channel '" + name + "' already exists");
    if (sources.empty()) throw ArgumentError("virtual channel '" + name + "' needs sources");
    for (const auto& s : sources) (void)index(s);
    ChannelLayout out = *this;
    out.index_.emplace(name, out.names_.size());
    out.names_.push_back(name);
    out.virtual_sources_.emplace(name, std::move(sources));
    return out;
  }

  friend bool operator==(const ChannelLayout& a, const ChannelLayout& b) {
    return a.names_ == b.names_ && a.virtual_sources_ == b.virtual_sources_;
  }

 private:
  std::vector<std::string> names_;
  std::map<std::string, std::size_t> index_;
  std::map<std::string, std::vector<std::string>> virtual_sources_;
};

struct Recording {
  double sample_rate_hz = 0.0;
  ChannelLayout layout;
  Matrix samples;  // channels × time, microvolts
  double t0 = 0.0;

  [[nodiscard]] std::size_t n_channels() const noexcept { return static_cast<std::size_t>(samples.rows()); }
  [[nodiscard]] std::size_t n_samples() const noexcept { return static_cast<std::size_t>(samples.cols()); }
  [[nodiscard]] double duration_s() const noexcept {
    return sample_rate_hz > 0 ? static_cast<double>(n_samples()) / sample_rate_hz : 0.0;
  }

  void validate() const {
    if (!(sample_rate_hz > 0.0) || !std::isfinite(sample_rate_hz))
      throw ArgumentError("sample rate must be positive");
    if (layout.size() != n_channels())
      throw ArgumentError("layout has " + std::to_string(layout.size()) + " channels, samples have " +
                          std::to_string(n_channels()));
    if (!samples.allFinite()) throw ArgumentError("recording contains non-finite samples");
  }
};

struct Marker {
  double time_s = 0.0;
  std::string label;

  friend bool operator==(const Marker&, const Marker&) = default;
};

namespace labels {
inline constexpr std::string_view kTrialOnset = "trial_onset";
inline constexpr std::string_view kTrialOffset = "trial_offset";
inline constexpr std::string_view kBaselineStart = "baseline_start";
inline constexpr std::string_view kBaselineEnd = "baseline_end";
inline constexpr std::string_view kTaskStart = "task_start";
inline constexpr std::string_view kTaskEnd = "task_end";

inline std::string trial_onset(double target_hz) {
  return std::string(kTrialOnset) + ":" + detail::format_double(target_hz);
}
inline std::string task_start(std::string_view paradigm) {
  return std::string(kTaskStart) + ":" + std::string(paradigm);
}

/// Splits "name:arg" into its parts; arg is empty when absent.
inline std::pair<std::string_view, std::string_view> split_label(std::string_view label) {
  auto pos = label.find(':');
  if (pos == std::string_view::npos) return {label, {}};
  return {label.substr(0, pos), label.substr(pos + 1)};
}

inline bool is_known(std::string_view label) {
  auto [name, arg] = split_label(label);
  if (name == kTrialOnset) {
    auto hz = detail::parse_double(arg);
    return hz && *hz > 0.0 && std::isfinite(*hz);
  }
  if (name == kTaskStart) return !arg.empty();
  if (name == kTrialOffset || name == kBaselineStart || name == kBaselineEnd || name == kTaskEnd)
    return arg.empty();
  return false;
}
}  // namespace labels

class MarkerStream {
 public:
  MarkerStream() = default;

  explicit MarkerStream(std::vector<Marker> events) : events_(std::move(events)) {
    for (std::size_t i = 0; i < events_.size(); ++i) {
      const auto& e = events_[i];
      if (!std::isfinite(e.time_s))
        throw ArgumentError("marker " + std::to_string(i) + " has non-finite time");
      if (i > 0 && e.time_s < events_[i - 1].time_s)
        throw ArgumentError("marker times must be non-decreasing (marker " + std::to_string(i) + ")");
      if (!labels::is_known(e.label))
        throw ArgumentError("marker " + std::to_string(i) + " has unknown label '" + e.label + "'");
    }
  }

  [[nodiscard]] const std::vector<Marker>& events() const noexcept { return events_; }
  [[nodiscard]] std::size_t size() const noexcept { return events_.size(); }

  friend bool operator==(const MarkerStream&, const MarkerStream&) = default;

 private:
  std::vector<Marker> events_;
};

struct TrialEpoch {
  std::string condition;  // paradigm id
  double target_freq_hz = 0.0;
  Matrix samples;
  double sample_rate_hz = 0.0;
  double onset_s = 0.0;
  ChannelLayout layout;

  [[nodiscard]] std::size_t n_channels() const noexcept { return static_cast<std::size_t>(samples.rows()); }
  [[nodiscard]] std::size_t n_samples() const noexcept { return static_cast<std::size_t>(samples.cols()); }
  [[nodiscard]] double duration_s() const noexcept {
    return static_cast<double>(n_samples()) / sample_rate_hz;
  }
};

// ---------------------------------------------------------------------------
// CSV I/O

namespace detail {

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out << text;
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

template <typename Fn>
void for_each_line(std::string_view text, Fn&& fn) {
  std::size_t line_no = 0;
  std::size_t start = 0;
  while (start < text.size()) {
    auto end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    auto line = text.substr(start, end - start);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    ++line_no;
    fn(line_no, line);
    start = end + 1;
  }
}

// Timestamps are printed with limited precision, so the rate is recovered
// from the full span and snapped to a micro-hertz grid.
inline double infer_sample_rate(double t_first, double t_last, std::size_t n) {
  double span = t_last - t_first;
  if (n < 2 || !(span > 0.0)) throw ParseError("cannot infer sample rate: need two increasing timestamps");
  double fs = static_cast<double>(n - 1) / span;
  return std::round(fs * 1e6) / 1e6;
}

}  // namespace detail

/// Parses recording CSV text. `sample_rate_hz` overrides inference from the
/// time column (required for single-row files).
inline Recording parse_recording_csv(std::string_view text,
                                     std::optional<double> sample_rate_hz = std::nullopt) {
  std::vector<std::string> names;
  std::vector<double> times;
  std::vector<double> values;
  bool header_seen = false;

  detail::for_each_line(text, [&](std::size_t line_no, std::string_view line) {
    if (detail::trim(line).empty()) return;
    auto cells = detail::split(line, ',');
    if (!header_seen) {
      if (cells.size() < 2 || detail::trim(cells[0]) != "time_s")
        throw ParseError("row " + std::to_string(line_no) + ": header must be 'time_s,<ch1>,...'");
      for (std::size_t c = 1; c < cells.size(); ++c) names.emplace_back(detail::trim(cells[c]));
      header_seen = true;
      return;
    }
    if (cells.size() != names.size() + 1)
      throw ParseError("row " + std::to_string(line_no) + ": expected " + std::to_string(names.size() + 1) +
                       " cells, found " + std::to_string(cells.size()));
    for (std::size_t c = 0; c < cells.size(); ++c) {
      auto v = detail::parse_double(cells[c]);
      if (!v) throw ParseError("row " + std::to_string(line_no) + ": cannot parse '" + std::string(cells[c]) + "'");
      if (!std::isfinite(*v)) throw ParseError("row " + std::to_string(line_no) + ": non-finite value");
      if (c == 0)
        times.push_back(*v);
      else
        values.push_back(*v);
    }
  });
  if (!header_seen) throw ParseError("row 1: missing header");
  if (times.empty()) throw ParseError("recording has no samples");

  ChannelLayout layout;
  try {
    layout = ChannelLayout(names);
  } catch (const ArgumentError& e) {
    throw ParseError(std::string("row 1: ") + e.what());
  }
  const std::size_t n = times.size();
  const std::size_t ch = names.size();
  Recording rec;
  rec.layout = std::move(layout);
  rec.t0 = times.front();
  rec.sample_rate_hz = sample_rate_hz ? *sample_rate_hz : detail::infer_sample_rate(times.front(), times.back(), n);
  rec.samples.resize(static_cast<Eigen::Index>(ch), static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t c = 0; c < ch; ++c)
      rec.samples(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(i)) = values[i * ch + c];
  rec.validate();
  return rec;
}

inline Recording load_recording(const std::filesystem::path& path,
                                std::optional<double> sample_rate_hz = std::nullopt) {
  auto text = detail::read_file(path);
  try {
    return parse_recording_csv(text, sample_rate_hz);
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

inline std::string format_recording_csv(const Recording& rec) {
  rec.validate();
  std::string out = "time_s";
  for (const auto& n : rec.layout.names()) {
    out += ',';
    out += n;
  }
  out += '\n';
  out.reserve(out.size() + rec.n_samples() * (rec.n_channels() + 1) * 12);
  for (std::size_t i = 0; i < rec.n_samples(); ++i) {
    detail::append_double(out, rec.t0 + static_cast<double>(i) / rec.sample_rate_hz);
    for (std::size_t c = 0; c < rec.n_channels(); ++c) {
      out += ',';
      detail::append_double(out, rec.samples(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(i)));
    }
    out += '\n';
  }
  return out;
}

inline void save_recording(const Recording& rec, const std::filesystem::path& path) {
  detail::write_file(path, format_recording_csv(rec));
}

inline MarkerStream parse_markers_csv(std::string_view text) {
  std::vector<Marker> events;
  bool header_seen = false;
  detail::for_each_line(text, [&](std::size_t line_no, std::string_view line) {
    if (detail::trim(line).empty()) return;
    auto cells = detail::split(line, ',');
    if (!header_seen) {
      if (cells.size() != 2 || detail::trim(cells[0]) != "time_s" || detail::trim(cells[1]) != "label")
        throw ParseError("row " + std::to_string(line_no) + ": header must be 'time_s,label'");
      header_seen = true;
      return;
    }
    if (cells.size() != 2)
      throw ParseError("row " + std::to_string(line_no) + ": expected 2 cells, found " + std::to_string(cells.size()));
    auto t = detail::parse_double(cells[0]);
    if (!t || !std::isfinite(*t)) throw ParseError("row " + std::to_string(line_no) + ": bad time '" + std::string(cells[0]) + "'");
    std::string label(detail::trim(cells[1]));
    if (!labels::is_known(label)) throw ParseError("row " + std::to_string(line_no) + ": unknown label '" + label + "'");
    events.push_back({*t, std::move(label)});
  });
  if (!header_seen) throw ParseError("row 1: missing header");
  try {
    return MarkerStream(std::move(events));
  } catch (const ArgumentError& e) {
    throw ParseError(e.what());
  }
}

inline MarkerStream load_markers(const std::filesystem::path& path) {
  auto text = detail::read_file(path);
  try {
    return parse_markers_csv(text);
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

inline std::string format_markers_csv(const MarkerStream& markers) {
  std::string out = "time_s,label\n";
  for (const auto& m : markers.events()) {
    detail::append_double(out, m.time_s);
    out += ',';
    out += m.label;
    out += '\n';
  }
  return out;
}

inline void save_markers(const MarkerStream& markers, const std::filesystem::path& path) {
  detail::write_file(path, format_markers_csv(markers));
}

// ---------------------------------------------------------------------------
// Channel derivation and epoching

/// Appends the sample-wise mean of `sources` as a new channel.
inline Recording derive_virtual_channel(const Recording& rec, const std::string& new_name,
                                        const std::vector<std::string>& sources) {
  auto layout = rec.layout.with_virtual(new_name, sources);
  Recording out;
  out.sample_rate_hz = rec.sample_rate_hz;
  out.t0 = rec.t0;
  out.layout = std::move(layout);
  out.samples.resize(rec.samples.rows() + 1, rec.samples.cols());
  out.samples.topRows(rec.samples.rows()) = rec.samples;
  auto derived = out.samples.row(rec.samples.rows());
  derived.setZero();
  for (const auto& s : sources) derived += rec.samples.row(static_cast<Eigen::Index>(rec.layout.index(s)));
  derived /= static_cast<double>(sources.size());
  return out;
}

struct EpochWindow {
  double start_offset_s = 0.0;
  double end_offset_s = 5.0;

  [[nodiscard]] double duration_s() const noexcept { return end_offset_s - start_offset_s; }
};

/// Cuts one epoch per marker whose label name equals `label_name`. The target
/// frequency is parsed from the label argument, falling back to the most
/// recent trial onset (so offset epochs inherit the preceding target); the
/// condition is the paradigm of the most recent task_start marker.
inline std::vector<TrialEpoch> extract_epochs_at(const Recording& rec, const MarkerStream& markers,
                                                 EpochWindow window, std::string_view label_name) {
  if (!(window.duration_s() > 0.0)) throw ArgumentError("epoch window must have positive duration");
  const auto n = static_cast<long long>(std::llround(window.duration_s() * rec.sample_rate_hz));
  if (n < 1) throw ArgumentError("epoch window shorter than one sample");

  std::vector<TrialEpoch> out;
  std::string condition = "unknown";
  double last_target = 0.0;
  std::string failures;
  for (const auto& m : markers.events()) {
    auto [name, arg] = labels::split_label(m.label);
    if (name == labels::kTaskStart) {
      condition = std::string(arg);
      continue;
    }
    if (name == labels::kTrialOnset) last_target = detail::parse_double(arg).value_or(0.0);
    if (name != label_name) continue;
    const double start_t = m.time_s + window.start_offset_s;
    const auto first = static_cast<long long>(std::llround((start_t - rec.t0) * rec.sample_rate_hz));
    if (first < 0 || first + n > static_cast<long long>(rec.n_samples())) {
      failures += (failures.empty() ? "" : ", ") + detail::format_double(m.time_s);
      continue;
    }
    TrialEpoch e;
    e.condition = condition;
    e.target_freq_hz = last_target;
    e.samples = rec.samples.middleCols(first, n);
    e.sample_rate_hz = rec.sample_rate_hz;
    e.onset_s = rec.t0 + static_cast<double>(first) / rec.sample_rate_hz;
    e.layout = rec.layout;
    out.push_back(std::move(e));
  }
  if (!failures.empty())
    throw ArgumentError("epoch window exceeds recording bounds for markers at t = " + failures + " s");
  return out;
}

inline std::vector<TrialEpoch> extract_epochs(const Recording& rec, const MarkerStream& markers,
                                              EpochWindow window) {
  return extract_epochs_at(rec, markers, window, labels::kTrialOnset);
}

}  // namespace ssvep
