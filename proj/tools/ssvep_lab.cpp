// ssvep_lab: stimulus schedules, synthetic datasets, per-subject analysis and
// group statistics from the command line.
//
// Exit codes: 0 success, 2 input error, 3 numeric degeneracy.

#include <algorithm>
#include <filesystem>
#include <future>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "ssvep/pipeline.hpp"
#include "ssvep/report.hpp"
#include "ssvep/stimgen.hpp"
#include "ssvep/synth.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace ssvep;

namespace {

constexpr int kOk = 0;
constexpr int kInputError = 2;
constexpr int kDegenerate = 3;

json load_json(const fs::path& path) {
  const auto text = ssvep::detail::read_file(path);
  try {
    return json::parse(text);
  } catch (const json::exception& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

// ---------------------------------------------------------------------------

struct StimgenArgs {
  std::string paradigm;
  double freq = 0.0;
  double refresh = 144.0;
  double duration = 5.0;
  std::string out;
  std::string frames_dir;
  std::string pulse_mode = "width";
};

int cmd_stimgen(const StimgenArgs& a) {
  auto spec = stimgen::StimulusSpec::make(stimgen::parse_paradigm(a.paradigm), a.freq, a.refresh, a.duration);
  if (auto* g = std::get_if<stimgen::GaborParams>(&spec.geometry)) {
    if (a.pulse_mode == "width")
      g->mode = stimgen::PulseMode::width;
    else if (a.pulse_mode == "amplitude")
      g->mode = stimgen::PulseMode::amplitude;
    else
      throw ArgumentError("unknown pulse mode '" + a.pulse_mode + "' (expected width or amplitude)");
  }
  const auto check = stimgen::validate_spec(spec);
  for (const auto& w : check.warnings) std::cerr << "warning: " << w << "\n";
  const auto sched = stimgen::build_frame_schedule(spec);
  auto j = stimgen::schedule_to_json(sched);
  j["stim_freq_hz"] = spec.stim_freq_hz;
  j["duration_s"] = spec.duration_s;
  ssvep::detail::write_file(a.out, j.dump(2) + "\n");
  if (!a.frames_dir.empty()) {
    std::error_code ec;
    fs::create_directories(a.frames_dir, ec);
    if (ec) throw IoError("cannot create '" + a.frames_dir + "': " + ec.message());
    for (const auto& f : sched.frames) {
      char name[32];
      std::snprintf(name, sizeof(name), "frame_%05lld.pgm", f.n);
      stimgen::write_pgm(stimgen::render_frame(spec, f.state), fs::path(a.frames_dir) / name);
    }
  }
  return kOk;
}

// ---------------------------------------------------------------------------

int cmd_synth(const std::string& config_path, const std::string& out_dir) {
  const auto j = load_json(config_path);
  const auto cfg = synth::config_from_json(j.value("signal", json::object()));
  const auto protocol = j.contains("protocol") ? synth::protocol_from_json(j.at("protocol")) : synth::SynthProtocol::standard();
  const auto manifest = synth::synth_dataset(cfg, protocol, out_dir);
  std::cout << "wrote " << manifest.at("subjects").size() << " subjects to " << out_dir << "\n";
  return kOk;
}

// ---------------------------------------------------------------------------

struct AnalyzeArgs {
  std::string recording;
  std::string markers;
  std::string manifest;
  int task = 0;
  std::string out;
  std::string vasf;
  std::string subject;
  std::string format;
  std::string decisions;
  std::optional<double> threshold;
  std::optional<double> sample_rate;
};

std::optional<std::pair<std::vector<double>, std::vector<double>>> load_vasf(const fs::path& path, int task) {
  const auto j = load_json(path);
  const auto key = "task" + std::to_string(task);
  if (!j.contains("baseline") || !j.contains(key))
    throw ArgumentError(path.string() + ": VAS-F file lacks 'baseline' or '" + key + "'");
  return std::make_pair(j.at("baseline").get<std::vector<double>>(), j.at(key).get<std::vector<double>>());
}

report::Format pick_format(const std::string& requested, const std::string& out) {
  if (requested == "json") return report::Format::json;
  if (requested == "markdown" || requested == "md") return report::Format::markdown;
  if (!requested.empty()) throw ArgumentError("unknown format '" + requested + "' (expected json or markdown)");
  return fs::path(out).extension() == ".md" ? report::Format::markdown : report::Format::json;
}

pipeline::PipelineConfig task_config(int task, const std::optional<double>& threshold) {
  auto cfg = pipeline::PipelineConfig::for_task(task);
  if (threshold) cfg.onset_threshold = *threshold;
  return cfg;
}

pipeline::Report analyze_manifest(const AnalyzeArgs& a) {
  const fs::path manifest_path = a.manifest;
  const auto root = manifest_path.parent_path();
  const auto m = load_json(manifest_path);
  struct Job {
    std::string subject;
    int task;
    double trial_s;
    fs::path recording, markers, vasf;
  };
  std::vector<Job> jobs;
  for (const auto& s : m.at("subjects")) {
    const auto id = s.at("id").get<std::string>();
    for (const auto& t : s.at("tasks")) {
      const int task = t.at("task").get<int>();
      if (a.task != 0 && task != a.task) continue;
      jobs.push_back({id, task, t.value("trial_s", 5.0), root / t.at("recording").get<std::string>(),
                      root / t.at("markers").get<std::string>(),
                      s.contains("vasf") ? root / s.at("vasf").get<std::string>() : fs::path{}});
    }
  }
  if (jobs.empty()) throw ArgumentError("manifest selects no recordings");
  // Subjects run concurrently; results are collected in manifest order.
  std::vector<std::future<pipeline::TaskResult>> futures;
  for (const auto& job : jobs)
    futures.push_back(std::async(std::launch::async, [job, &a] {
      const auto rec = load_recording(job.recording, a.sample_rate);
      const auto markers = load_markers(job.markers);
      const auto vasf = job.vasf.empty() ? std::nullopt : load_vasf(job.vasf, job.task);
      auto cfg = task_config(job.task, a.threshold);
      cfg.trial_s = job.trial_s;
      return pipeline::run_pipeline(cfg, rec, markers, job.subject, vasf);
    }));
  pipeline::Report r;
  std::exception_ptr first_error;
  for (auto& f : futures) {
    try {
      r.entries.push_back(f.get());
    } catch (...) {
      if (!first_error) first_error = std::current_exception();
    }
  }
  if (first_error) std::rethrow_exception(first_error);
  return r;
}

int cmd_analyze(const AnalyzeArgs& a) {
  pipeline::Report r;
  if (!a.manifest.empty()) {
    if (!a.recording.empty() || !a.markers.empty())
      throw ArgumentError("--manifest cannot be combined with --recording/--markers");
    r = analyze_manifest(a);
  } else {
    if (a.recording.empty() || a.markers.empty()) throw ArgumentError("--recording and --markers are required");
    if (a.task == 0) throw ArgumentError("--task is required");
    const auto rec = load_recording(a.recording, a.sample_rate);
    const auto markers = load_markers(a.markers);
    const auto vasf = a.vasf.empty() ? std::nullopt : load_vasf(a.vasf, a.task);
    const auto subject = a.subject.empty() ? fs::path(a.recording).stem().string() : a.subject;
    r.entries.push_back(pipeline::run_pipeline(task_config(a.task, a.threshold), rec, markers, subject, vasf));
  }
  ssvep::detail::write_file(a.out, report::emit_report(r, pick_format(a.format, a.out)));
  if (!a.decisions.empty()) {
    if (r.entries.size() != 1) throw ArgumentError("--decisions needs a single recording");
    ssvep::detail::write_file(a.decisions, report::decisions_csv(r.entries.front()));
  }
  return kOk;
}

// ---------------------------------------------------------------------------

int cmd_table(const std::vector<std::string>& inputs, const std::string& out, const std::string& format) {
  pipeline::Report merged;
  for (const auto& in : inputs) {
    const auto part = report::report_from_json(load_json(in));
    merged.entries.insert(merged.entries.end(), part.entries.begin(), part.entries.end());
  }
  const auto text = report::emit_report(merged, pick_format(format, out));
  if (out.empty())
    std::cout << text;
  else
    ssvep::detail::write_file(out, text);
  return kOk;
}

int cmd_stats(const std::string& dir, const std::string& test, const std::string& metric, const std::string& out) {
  if (!fs::is_directory(dir)) throw IoError("'" + dir + "' is not a directory");
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir))
    if (entry.is_regular_file() && entry.path().extension() == ".json") files.push_back(entry.path());
  std::sort(files.begin(), files.end());
  pipeline::Report merged;
  for (const auto& f : files) {
    const auto j = load_json(f);
    if (!j.is_object() || !j.contains("entries")) continue;
    const auto part = report::report_from_json(j);
    merged.entries.insert(merged.entries.end(), part.entries.begin(), part.entries.end());
  }
  if (merged.entries.empty()) throw ArgumentError("no report files found in '" + dir + "'");
  const auto design = report::design_matrix(merged, report::parse_metric(metric));
  const auto result = report::run_stats(design, test == "posthoc", metric);
  const auto text = result.dump(2) + "\n";
  if (out.empty())
    std::cout << text;
  else
    ssvep::detail::write_file(out, text);
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"SSVEP stimulus, synthesis and analysis toolkit"};
  app.require_subcommand(1);

  StimgenArgs sg;
  auto* stim = app.add_subcommand("stimgen", "Write a frame schedule (and optionally PGM frames)");
  stim->add_option("--paradigm", sg.paradigm, "reversal | radial | gabor")
      ->required()
      ->check(CLI::IsMember({"reversal", "radial", "gabor"}));
  stim->add_option("--freq", sg.freq, "Stimulation frequency (Hz)")->required();
  stim->add_option("--refresh", sg.refresh, "Display refresh rate (Hz)")->capture_default_str();
  stim->add_option("--duration", sg.duration, "Duration (s)")->capture_default_str();
  stim->add_option("--out", sg.out, "Schedule JSON path")->required();
  stim->add_option("--frames", sg.frames_dir, "Directory for rendered PGM frames");
  stim->add_option("--pulse-mode", sg.pulse_mode, "Gabor pulse: width | amplitude")->capture_default_str();

  std::string synth_config, synth_out;
  auto* syn = app.add_subcommand("synth", "Generate a synthetic multi-subject dataset");
  syn->add_option("--config", synth_config, "Synthesis config JSON")->required()->check(CLI::ExistingFile);
  syn->add_option("--out", synth_out, "Output directory")->required();

  AnalyzeArgs an;
  auto* ana = app.add_subcommand("analyze", "Run the analysis pipeline and write a report");
  ana->add_option("--recording", an.recording, "Recording CSV");
  ana->add_option("--markers", an.markers, "Marker CSV");
  ana->add_option("--manifest", an.manifest, "Dataset manifest (analyzes every subject and task)");
  ana->add_option("--task", an.task, "Task id (1, 2 or 3); with --manifest restricts to one task");
  ana->add_option("--out", an.out, "Report path (.json or .md)")->required();
  ana->add_option("--vasf", an.vasf, "VAS-F responses JSON");
  ana->add_option("--subject", an.subject, "Subject id (default: recording file stem)");
  ana->add_option("--format", an.format, "json | markdown (default: from --out extension)");
  ana->add_option("--decisions", an.decisions, "Per-trial decisions CSV");
  ana->add_option("--threshold", an.threshold, "Fixed onset-detection threshold for Task 3");
  ana->add_option("--sample-rate", an.sample_rate, "Sample rate (Hz); inferred from timestamps if omitted");

  std::vector<std::string> table_in;
  std::string table_out, table_format;
  auto* tab = app.add_subcommand("table", "Merge JSON reports into one table");
  tab->add_option("reports", table_in, "Report JSON files")->required()->check(CLI::ExistingFile);
  tab->add_option("--out", table_out, "Output path (stdout if omitted)");
  tab->add_option("--format", table_format, "json | markdown");

  std::string stats_dir, stats_test = "rm-anova", stats_metric = "snr", stats_out;
  auto* st = app.add_subcommand("stats", "Repeated-measures statistics over a directory of reports");
  st->add_option("--reports", stats_dir, "Directory of JSON reports")->required();
  st->add_option("--test", stats_test, "rm-anova | posthoc")
      ->capture_default_str()
      ->check(CLI::IsMember({"rm-anova", "posthoc"}));
  st->add_option("--metric", stats_metric, "snr | rho | accuracy | fatigue")
      ->capture_default_str()
      ->check(CLI::IsMember({"snr", "rho", "accuracy", "fatigue"}));
  st->add_option("--out", stats_out, "Output path (stdout if omitted)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kInputError;
  }

  try {
    if (stim->parsed()) return cmd_stimgen(sg);
    if (syn->parsed()) return cmd_synth(synth_config, synth_out);
    if (ana->parsed()) return cmd_analyze(an);
    if (tab->parsed()) return cmd_table(table_in, table_out, table_format);
    if (st->parsed()) return cmd_stats(stats_dir, stats_test, stats_metric, stats_out);
  } catch (const pipeline::StageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.degenerate() ? kDegenerate : kInputError;
  } catch (const DegenerateError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kDegenerate;
  } catch (const InputError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kInputError;
  } catch (const json::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kInputError;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 1;
  }
  return kOk;
}
