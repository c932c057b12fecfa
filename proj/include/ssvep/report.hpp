#pragma once

// Report rendering (JSON, markdown, decisions CSV) and the statistics run
// over a collection of per-subject reports.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "ssvep/pipeline.hpp"
#include "ssvep/stats.hpp"

namespace ssvep::report {

using nlohmann::json;
using pipeline::Report;
using pipeline::TaskResult;

/// Display precision shared by every output format.
inline double round4(double v) { return std::round(v * 1e4) / 1e4; }

inline std::string fixed4(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.4f", round4(v));
  std::string s = buf;
  if (s == "-0.0000") s = "0.0000";
  return s;
}

struct TaskAggregate {
  int task = 0;
  int n_subjects = 0;
  stats::MeanSe snr;
  stats::MeanSe accuracy;
  std::optional<stats::MeanSe> fatigue;
};

/// Mean ± SE per task, computed from the rounded per-subject values so that
/// the aggregate row is reproducible from the rows above it.
inline std::vector<TaskAggregate> aggregate(const Report& r) {
  std::map<int, std::vector<const TaskResult*>> by_task;
  for (const auto& e : r.entries) by_task[e.task].push_back(&e);
  std::vector<TaskAggregate> out;
  for (const auto& [task, entries] : by_task) {
    TaskAggregate a;
    a.task = task;
    a.n_subjects = static_cast<int>(entries.size());
    std::vector<double> snr, acc, fat;
    for (const auto* e : entries) {
      snr.push_back(round4(e->snr_db));
      acc.push_back(round4(e->accuracy));
      if (e->vasf) fat.push_back(round4(e->vasf->corrected.fatigue));
    }
    a.snr = stats::mean_se(snr);
    a.accuracy = stats::mean_se(acc);
    if (fat.size() == entries.size()) a.fatigue = stats::mean_se(fat);
    out.push_back(a);
  }
  return out;
}

inline json mean_se_json(const stats::MeanSe& m) { return {{"mean", round4(m.mean)}, {"se", round4(m.se)}}; }

inline json task_result_to_json(const TaskResult& e, bool include_trials = true) {
  json targets = json::array();
  for (const auto& t : e.targets)
    targets.push_back({{"target_hz", t.target_hz},
                       {"snr_db", round4(t.snr_db)},
                       {"accuracy", round4(t.accuracy)},
                       {"mean_rho", round4(t.mean_rho)},
                       {"n_trials", t.n_trials}});
  json j = {{"subject", e.subject},
            {"task", e.task},
            {"paradigm", e.paradigm},
            {"snr_db", round4(e.snr_db)},
            {"accuracy", round4(e.accuracy)},
            {"mean_rho", round4(e.mean_rho)},
            {"targets", targets}};
  if (e.threshold) j["threshold"] = round4(*e.threshold);
  if (e.vasf) {
    j["vasf"] = {{"fatigue", round4(e.vasf->corrected.fatigue)},
                 {"energy", round4(e.vasf->corrected.energy)},
                 {"fatigue_raw", round4(e.vasf->raw.fatigue)},
                 {"energy_raw", round4(e.vasf->raw.energy)},
                 {"baseline_fatigue", round4(e.vasf->baseline.fatigue)},
                 {"baseline_energy", round4(e.vasf->baseline.energy)}};
  }
  if (include_trials) {
    json trials = json::array();
    for (const auto& t : e.trials) {
      json tj = {{"trial", t.trial},
                 {"onset_s", t.onset_s},
                 {"true_hz", t.true_hz},
                 {"predicted_hz", t.predicted_hz},
                 {"stimulus_on", t.stimulus_on},
                 {"snr_db", round4(t.snr_db)}};
      json rho = json::array();
      for (double v : t.rho) rho.push_back(round4(v));
      tj["rho"] = rho;
      if (t.pass) tj["pass"] = *t.pass;
      trials.push_back(std::move(tj));
    }
    j["trials"] = trials;
  }
  return j;
}

inline TaskResult task_result_from_json(const json& j) {
  TaskResult e;
  e.subject = j.at("subject").get<std::string>();
  e.task = j.at("task").get<int>();
  e.paradigm = j.value("paradigm", std::string{});
  e.snr_db = j.at("snr_db").get<double>();
  e.accuracy = j.at("accuracy").get<double>();
  e.mean_rho = j.value("mean_rho", 0.0);
  if (j.contains("threshold")) e.threshold = j.at("threshold").get<double>();
  for (const auto& t : j.at("targets")) {
    pipeline::TargetSummary ts;
    ts.target_hz = t.at("target_hz").get<double>();
    ts.snr_db = t.at("snr_db").get<double>();
    ts.accuracy = t.at("accuracy").get<double>();
    ts.mean_rho = t.value("mean_rho", 0.0);
    ts.n_trials = t.value("n_trials", 0);
    e.targets.push_back(ts);
  }
  if (j.contains("vasf")) {
    const auto& v = j.at("vasf");
    pipeline::Vasf vs;
    vs.corrected = {v.at("fatigue").get<double>(), v.at("energy").get<double>(), true};
    vs.raw = {v.at("fatigue_raw").get<double>(), v.at("energy_raw").get<double>(), false};
    vs.baseline = {v.at("baseline_fatigue").get<double>(), v.at("baseline_energy").get<double>(), false};
    e.vasf = vs;
  }
  for (const auto& t : j.value("trials", json::array())) {
    pipeline::TrialResult tr;
    tr.trial = t.at("trial").get<int>();
    tr.onset_s = t.at("onset_s").get<double>();
    tr.true_hz = t.at("true_hz").get<double>();
    tr.predicted_hz = t.at("predicted_hz").get<double>();
    tr.stimulus_on = t.value("stimulus_on", true);
    tr.snr_db = t.at("snr_db").get<double>();
    tr.snr_linear = std::pow(10.0, tr.snr_db / 10.0);
    tr.rho = t.at("rho").get<std::vector<double>>();
    if (t.contains("pass")) tr.pass = t.at("pass").get<bool>();
    e.trials.push_back(std::move(tr));
  }
  return e;
}

inline void require_nonempty(const Report& r) {
  if (r.entries.empty()) throw ArgumentError("report is empty");
}

inline json report_to_json(const Report& r, bool include_trials = true) {
  require_nonempty(r);
  json entries = json::array();
  for (const auto& e : r.entries) entries.push_back(task_result_to_json(e, include_trials));
  json agg = json::array();
  for (const auto& a : aggregate(r)) {
    json aj = {{"task", a.task},
               {"n_subjects", a.n_subjects},
               {"snr_db", mean_se_json(a.snr)},
               {"accuracy", mean_se_json(a.accuracy)}};
    if (a.fatigue) aj["fatigue"] = mean_se_json(*a.fatigue);
    agg.push_back(aj);
  }
  return {{"entries", entries}, {"aggregate", agg}};
}

inline Report report_from_json(const json& j) {
  Report r;
  for (const auto& e : j.at("entries")) r.entries.push_back(task_result_from_json(e));
  return r;
}

/// Table with one row per subject and SNR / Accuracy / Fatigue columns per
/// task, closed by a `mean ± SE` row.
inline std::string report_to_markdown(const Report& r) {
  require_nonempty(r);
  std::vector<int> tasks;
  std::vector<std::string> subjects;
  std::map<std::pair<std::string, int>, const TaskResult*> cell;
  for (const auto& e : r.entries) {
    if (std::find(tasks.begin(), tasks.end(), e.task) == tasks.end()) tasks.push_back(e.task);
    if (std::find(subjects.begin(), subjects.end(), e.subject) == subjects.end()) subjects.push_back(e.subject);
    cell[{e.subject, e.task}] = &e;
  }
  std::sort(tasks.begin(), tasks.end());
  std::sort(subjects.begin(), subjects.end());

  std::string out = "| Subject |";
  std::string rule = "|---|";
  for (int t : tasks) {
    const auto p = "Task " + std::to_string(t);
    out += " " + p + " SNR (dB) | " + p + " Accuracy | " + p + " Fatigue |";
    rule += "---|---|---|";
  }
  out += "\n" + rule + "\n";
  for (const auto& s : subjects) {
    out += "| " + s + " |";
    for (int t : tasks) {
      auto it = cell.find({s, t});
      if (it == cell.end()) {
        out += " - | - | - |";
        continue;
      }
      const auto& e = *it->second;
      out += " " + fixed4(e.snr_db) + " | " + fixed4(e.accuracy) + " | " +
             (e.vasf ? fixed4(e.vasf->corrected.fatigue) : std::string("-")) + " |";
    }
    out += "\n";
  }
  out += "| Average |";
  const auto agg = aggregate(r);
  for (int t : tasks) {
    const auto& a = *std::find_if(agg.begin(), agg.end(), [&](const TaskAggregate& x) { return x.task == t; });
    out += " " + fixed4(a.snr.mean) + " ± " + fixed4(a.snr.se) + " | " + fixed4(a.accuracy.mean) + " ± " +
           fixed4(a.accuracy.se) + " | " +
           (a.fatigue ? fixed4(a.fatigue->mean) + " ± " + fixed4(a.fatigue->se) : std::string("-")) + " |";
  }
  out += "\n";
  return out;
}

enum class Format { json, markdown };

inline std::string emit_report(const Report& r, Format f) {
  if (f == Format::markdown) return report_to_markdown(r);
  return report_to_json(r).dump(2) + "\n";
}

/// `trial,predicted_hz,true_hz,rho_1..rho_K,pass` for one task result.
inline std::string decisions_csv(const TaskResult& e) {
  std::size_t k = 0;
  for (const auto& t : e.trials) k = std::max(k, t.rho.size());
  std::string out = "trial,predicted_hz,true_hz";
  for (std::size_t i = 1; i <= k; ++i) out += ",rho_" + std::to_string(i);
  out += ",pass\n";
  for (const auto& t : e.trials) {
    out += std::to_string(t.trial) + "," + ssvep::detail::format_double(t.predicted_hz) + "," +
           ssvep::detail::format_double(t.true_hz);
    for (std::size_t i = 0; i < k; ++i)
      out += "," + (i < t.rho.size() ? ssvep::detail::format_double(round4(t.rho[i])) : std::string());
    out += ",";
    if (t.pass) out += *t.pass ? "1" : "0";
    out += "\n";
  }
  return out;
}

// ---------------------------------------------------------------------------
// Statistics over reports

enum class Metric { snr, rho, accuracy, fatigue };

inline Metric parse_metric(const std::string& s) {
  if (s == "snr") return Metric::snr;
  if (s == "rho") return Metric::rho;
  if (s == "accuracy") return Metric::accuracy;
  if (s == "fatigue") return Metric::fatigue;
  throw ArgumentError("unknown metric '" + s + "' (expected snr, rho, accuracy or fatigue)");
}

struct DesignMatrix {
  std::vector<std::string> subjects;
  std::vector<std::string> conditions;
  Eigen::MatrixXd values;  // subjects × conditions
};

/// Subjects × conditions matrix for a metric. SNR and correlation use one
/// condition per (task, target); accuracy one per task; fatigue uses the
/// baseline plus each task's raw score.
inline DesignMatrix design_matrix(const Report& r, Metric metric) {
  std::map<std::string, std::map<std::string, double>> cells;
  std::vector<std::string> conditions;
  auto put = [&](const std::string& subj, const std::string& cond, double v) {
    if (std::find(conditions.begin(), conditions.end(), cond) == conditions.end()) conditions.push_back(cond);
    cells[subj][cond] = v;
  };
  std::vector<const TaskResult*> sorted;
  for (const auto& e : r.entries) sorted.push_back(&e);
  std::stable_sort(sorted.begin(), sorted.end(), [](const TaskResult* a, const TaskResult* b) { return a->task < b->task; });
  for (const auto* e : sorted) {
    const auto task = "task" + std::to_string(e->task);
    switch (metric) {
      case Metric::snr:
      case Metric::rho:
        for (const auto& t : e->targets)
          put(e->subject, task + "@" + ssvep::detail::format_double(t.target_hz),
              metric == Metric::snr ? t.snr_db : t.mean_rho);
        break;
      case Metric::accuracy:
        put(e->subject, task, e->accuracy);
        break;
      case Metric::fatigue:
        if (!e->vasf) throw ArgumentError("report for " + e->subject + " " + task + " has no VAS-F scores");
        put(e->subject, "baseline", e->vasf->baseline.fatigue);
        put(e->subject, task, e->vasf->raw.fatigue);
        break;
    }
  }
  if (metric == Metric::fatigue) {
    std::stable_partition(conditions.begin(), conditions.end(), [](const std::string& c) { return c == "baseline"; });
  }
  DesignMatrix d;
  d.conditions = conditions;
  for (const auto& [s, _] : cells) d.subjects.push_back(s);
  d.values.resize(static_cast<Eigen::Index>(d.subjects.size()), static_cast<Eigen::Index>(conditions.size()));
  for (std::size_t i = 0; i < d.subjects.size(); ++i) {
    const auto& row = cells[d.subjects[i]];
    for (std::size_t j = 0; j < conditions.size(); ++j) {
      auto it = row.find(conditions[j]);
      if (it == row.end())
        throw ArgumentError("incomplete design: subject " + d.subjects[i] + " lacks condition " + conditions[j]);
      d.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = it->second;
    }
  }
  return d;
}

/// `{test, F, df, p, eta_sq, posthoc:[{pair, t, p_holm, d}]}`; post-hoc rows
/// only for the posthoc test.
inline json run_stats(const DesignMatrix& d, bool posthoc, const std::string& metric_name) {
  const auto a = stats::rm_anova(d.values);
  json j = {{"test", posthoc ? "posthoc" : "rm-anova"},
            {"metric", metric_name},
            {"conditions", d.conditions},
            {"n_subjects", d.subjects.size()},
            {"F", a.F},
            {"df", {a.df1, a.df2}},
            {"p", a.p},
            {"eta_sq", a.eta_sq_partial}};
  json rows = json::array();
  if (posthoc) {
    std::vector<stats::PairedT> tests;
    std::vector<std::pair<std::size_t, std::size_t>> pairs;
    std::vector<double> raw;
    for (std::size_t x = 0; x < d.conditions.size(); ++x)
      for (std::size_t y = x + 1; y < d.conditions.size(); ++y) {
        std::vector<double> va, vb;
        for (Eigen::Index i = 0; i < d.values.rows(); ++i) {
          va.push_back(d.values(i, static_cast<Eigen::Index>(x)));
          vb.push_back(d.values(i, static_cast<Eigen::Index>(y)));
        }
        tests.push_back(stats::paired_t(va, vb));
        pairs.emplace_back(x, y);
        raw.push_back(tests.back().p);
      }
    const auto adj = stats::holm_adjust(raw);
    for (std::size_t i = 0; i < tests.size(); ++i)
      rows.push_back({{"pair", {d.conditions[pairs[i].first], d.conditions[pairs[i].second]}},
                      {"t", tests[i].t},
                      {"df", tests[i].df},
                      {"p", tests[i].p},
                      {"p_holm", adj[i]},
                      {"d", tests[i].cohen_d}});
  }
  j["posthoc"] = rows;
  return j;
}

}  // namespace ssvep::report
