#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include <json.hpp>

#include "stride/curriculum.hpp"
#include "stride/search_space.hpp"

namespace stride {

/// Identity of one search run, persisted as manifest.json in the run
/// directory so a resumed invocation can prove it continues the same run.
struct RunManifest {
  std::string run_id;
  std::string strategy;  // grm | timfbo | ecco
  std::string config_path;
  // "synthetic" (or empty) runs the in-process simulator; anything else is a
  // worker command line launched per trial.
  std::string trainer_command = "synthetic";
  std::uint64_t seed = 0;
  double budget = 0.0;  // <= 0 keeps the strategy default
  int workers = 1;
  std::string output_dir = "runs";
};

nlohmann::json manifest_to_json(const RunManifest& m);
RunManifest manifest_from_json(const nlohmann::json& j);

struct RunOutcome {
  std::string run_dir;
  std::string best_class;
  Configuration best_config;
  std::optional<CurriculumSchedule> best_curriculum;  // curriculum search only
  double best_objective = 0.0;
  double total_cost = 0.0;
  std::size_t trial_count = 0;  // replayed + fresh
  std::size_t replayed = 0;
};

/// Runs (or resumes) one search and persists its artifacts under
/// output_dir/run_id:
///   manifest.json     the RunManifest
///   trials.jsonl      one audit record per evaluation, appended live
///   best_config.json  winning class + configuration + objective
///   summary.json      machine-readable totals, byte-stable per (inputs, seed)
///
/// A fresh run refuses a run id whose manifest already exists; resume
/// requires the stored manifest to match (workers may differ), replays
/// trials.jsonl instead of re-running those trials, and appends only new
/// records, so a finished run is a no-op to resume.
RunOutcome execute_run(const RunManifest& manifest, bool resume);

}  // namespace stride
