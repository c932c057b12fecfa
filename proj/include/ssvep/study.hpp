#pragma once

// In-memory synthetic study: generate every subject × task recording and run
// the analysis pipeline on it. Results come back in (subject, task) order
// regardless of how many jobs ran concurrently.

#include <future>
#include <vector>

#include "ssvep/pipeline.hpp"
#include "ssvep/synth.hpp"

namespace ssvep::study {

inline pipeline::PipelineConfig config_for(const synth::TaskProtocol& task) {
  auto cfg = pipeline::PipelineConfig::for_task(task.task);
  cfg.trial_s = task.trial_s;
  return cfg;
}

inline pipeline::TaskResult run_one(const synth::SynthConfig& cfg, const synth::SynthProtocol& protocol, int subject,
                                    const synth::TaskProtocol& task) {
  const auto rec = synth::synth_recording(cfg, task, subject, protocol.lead_s);
  const auto vasf = synth::synth_vasf(cfg, protocol, subject);
  return pipeline::run_pipeline(config_for(task), rec.recording, rec.markers, synth::subject_id(subject),
                                std::make_pair(vasf.baseline, vasf.tasks.at(task.task)));
}

inline pipeline::Report run_synthetic_study(const synth::SynthConfig& cfg, const synth::SynthProtocol& protocol,
                                            bool parallel = true) {
  protocol.validate();
  cfg.validate();
  std::vector<std::future<pipeline::TaskResult>> jobs;
  for (int s = 1; s <= protocol.n_subjects; ++s)
    for (const auto& task : protocol.tasks)
      jobs.push_back(std::async(parallel ? std::launch::async : std::launch::deferred,
                                [&cfg, &protocol, s, task] { return run_one(cfg, protocol, s, task); }));
  pipeline::Report r;
  for (auto& j : jobs) r.entries.push_back(j.get());
  return r;
}

}  // namespace ssvep::study
