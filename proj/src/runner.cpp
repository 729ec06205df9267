#include "stride/runner.hpp"

#include <cmath>
#include <filesystem>
#include <memory>
#include <stdexcept>

#include "stride/ecco.hpp"
#include "stride/grm.hpp"
#include "stride/json_io.hpp"
#include "stride/records.hpp"
#include "stride/subprocess.hpp"
#include "stride/synthetic.hpp"
#include "stride/timfbo.hpp"
#include "stride/verify_io.hpp"

namespace stride {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

bool is_synthetic(const std::string& trainer_command) {
  return trainer_command.empty() || trainer_command == "synthetic";
}

void check_manifest(const RunManifest& m) {
  if (m.run_id.empty()) throw std::invalid_argument("run id must not be empty");
  if (m.run_id.find('/') != std::string::npos)
    throw std::invalid_argument("run id must not contain '/'");
  if (m.strategy != "grm" && m.strategy != "timfbo" && m.strategy != "ecco")
    throw std::invalid_argument("unknown strategy: " + m.strategy);
  if (m.workers < 1) throw std::invalid_argument("workers must be >= 1");
  if (!fs::exists(m.config_path))
    throw std::runtime_error("config file not found: " + m.config_path);
}

// workers and output_dir may change between invocations; results are
// worker-count independent and the directory we found the manifest in wins.
void check_resume_matches(const RunManifest& stored, const RunManifest& m) {
  if (stored.run_id != m.run_id || stored.strategy != m.strategy ||
      stored.config_path != m.config_path ||
      stored.trainer_command != m.trainer_command || stored.seed != m.seed ||
      stored.budget != m.budget) {
    throw std::runtime_error("run " + m.run_id +
                             " was started with different settings; refusing to resume");
  }
}

int budget_as_count(double budget, const char* what) {
  const double r = std::round(budget);
  if (!(r > 0.0) || r > 1e9 || r != budget)
    throw std::invalid_argument(std::string("budget for ") + what +
                                " must be a positive whole number");
  return static_cast<int>(r);
}

// Deepest rung trains full_epochs; each step down divides epochs by eta.
// Small benchmarks get fewer rungs so the cheapest rung still has >= 1 epoch.
FidelitySchedule schedule_for(int full_epochs) {
  const int eta = 2;
  int rungs = 1;
  while (rungs < 3 && (1 << rungs) <= full_epochs) ++rungs;
  return FidelitySchedule::geometric(full_epochs, rungs, eta);
}

json best_config_json(const RunOutcome& out) {
  json j = {{"class", out.best_class},
            {"config", config_to_json(out.best_config)},
            {"objective", out.best_objective}};
  if (out.best_curriculum) j["curriculum"] = curriculum_to_json(*out.best_curriculum);
  return j;
}

json summary_json(const RunManifest& m, const RunOutcome& out) {
  return {{"run_id", m.run_id},
          {"strategy", m.strategy},
          {"seed", m.seed},
          {"trials", out.trial_count},
          {"total_cost", out.total_cost},
          {"best_class", out.best_class},
          {"best_objective", out.best_objective}};
}

void run_grm(const RunManifest& m, const SyntheticBenchmark& bench, Trainer& trainer,
             const std::vector<json>& prior_records, const std::string& trials_path,
             RunOutcome& out) {
  const SearchSpace& space = bench.space();
  const ActionSet actions = discretize(space, DiscretizeOptions{}, m.seed);
  GrmConfig cfg;
  if (m.budget > 0.0) cfg.max_episodes = budget_as_count(m.budget, "grm (episodes)");
  cfg.workers = m.workers;

  std::vector<SearchEpisode> prior;
  prior.reserve(prior_records.size());
  for (const auto& r : prior_records) prior.push_back(episode_from_json(space, r));
  out.replayed = prior.size();

  const auto on_episode = [&](const SearchEpisode& e) {
    append_jsonl(trials_path, episode_to_json(e));
  };
  const GrmResult res = grm_search(space, actions, trainer, cfg, m.seed, on_episode,
                                   prior.empty() ? nullptr : &prior);

  bool first = true;
  for (const auto& [class_name, action] : res.policy) {
    const double q = res.qtable.q(class_name, action);
    if (first || q > out.best_objective) {
      out.best_class = class_name;
      out.best_config = actions.at(action);
      out.best_objective = q;
      first = false;
    }
  }
  out.total_cost = static_cast<double>(res.phase1_epochs + res.phase2_epochs);
  out.trial_count = res.episodes.size();
}

void run_timfbo(const RunManifest& m, const SyntheticBenchmark& bench, Trainer& trainer,
                const std::vector<json>& prior_records, const std::string& trials_path,
                RunOutcome& out) {
  const SearchSpace& space = bench.space();
  const FidelitySchedule schedule = schedule_for(bench.full_epochs());
  MfboConfig cfg;
  if (m.budget > 0.0) cfg.budget = m.budget;
  cfg.workers = m.workers;

  std::vector<MfboTrial> prior;
  prior.reserve(prior_records.size());
  for (const auto& r : prior_records) prior.push_back(mfbo_trial_from_json(space, r));
  out.replayed = prior.size();

  const auto on_trial = [&](const MfboTrial& t) {
    append_jsonl(trials_path, mfbo_trial_to_json(t));
  };
  const MfboResult res = timfbo_search(space, trainer, schedule, nullptr, cfg, m.seed,
                                       on_trial, prior.empty() ? nullptr : &prior);

  out.best_class = res.best_class;
  out.best_config = res.best_config;
  out.best_objective = res.best_objective;
  out.total_cost = res.total_cost;
  out.trial_count = res.history.size();
}

void run_ecco(const RunManifest& m, const SyntheticBenchmark& bench, Trainer& trainer,
              const std::vector<json>& prior_records, const std::string& trials_path,
              RunOutcome& out) {
  const SearchSpace& space = bench.space();
  EccoConfig cfg;
  if (m.budget > 0.0) cfg.generations = budget_as_count(m.budget, "ecco (generations)");
  cfg.workers = m.workers;

  std::vector<EccoEval> prior;
  prior.reserve(prior_records.size());
  for (const auto& r : prior_records) prior.push_back(ecco_eval_from_json(space, r));
  out.replayed = prior.size();

  const auto on_eval = [&](const EccoEval& e) {
    append_jsonl(trials_path, ecco_eval_to_json(e));
  };
  const EccoResult res = ecco_search(space, trainer, cfg, m.seed, on_eval,
                                     prior.empty() ? nullptr : &prior);

  out.best_class = cfg.class_name.empty() ? space.classes.front().name : cfg.class_name;
  out.best_config = res.best.hyperparams;
  out.best_curriculum = res.best.curriculum;
  out.best_objective = res.best_fitness.scalar;
  double cost = 0.0;
  for (const auto& e : res.evaluations) cost += e.fitness.cost;
  out.total_cost = cost;
  out.trial_count = res.evaluations.size();
}

}  // namespace

json manifest_to_json(const RunManifest& m) {
  return {{"run_id", m.run_id},
          {"strategy", m.strategy},
          {"config_path", m.config_path},
          {"trainer_command", m.trainer_command},
          {"seed", m.seed},
          {"budget", m.budget},
          {"workers", m.workers},
          {"output_dir", m.output_dir}};
}

RunManifest manifest_from_json(const json& j) {
  RunManifest m;
  m.run_id = j.at("run_id").get<std::string>();
  m.strategy = j.at("strategy").get<std::string>();
  m.config_path = j.at("config_path").get<std::string>();
  m.trainer_command = j.at("trainer_command").get<std::string>();
  m.seed = j.at("seed").get<std::uint64_t>();
  m.budget = j.at("budget").get<double>();
  m.workers = j.at("workers").get<int>();
  m.output_dir = j.at("output_dir").get<std::string>();
  return m;
}

RunOutcome execute_run(const RunManifest& manifest, bool resume) {
  check_manifest(manifest);

  const SyntheticBenchmark bench = SyntheticBenchmark::from_file(manifest.config_path);
  std::unique_ptr<Trainer> trainer;
  if (is_synthetic(manifest.trainer_command)) {
    trainer = std::make_unique<SyntheticTrainer>(bench);
  } else {
    trainer = std::make_unique<SubprocessTrainer>(
        SubprocessTrainer::split_command(manifest.trainer_command), bench.full_epochs());
  }

  const fs::path run_dir = fs::path(manifest.output_dir) / manifest.run_id;
  const fs::path manifest_path = run_dir / "manifest.json";
  const fs::path trials_path = run_dir / "trials.jsonl";
  fs::create_directories(run_dir);

  std::vector<json> prior_records;
  if (fs::exists(manifest_path)) {
    if (!resume) {
      throw std::runtime_error("run id '" + manifest.run_id + "' already used in " +
                               manifest.output_dir + " (pass --resume to continue it)");
    }
    check_resume_matches(
        manifest_from_json(json::parse(read_text_file(manifest_path.string()))),
        manifest);
    if (fs::exists(trials_path)) prior_records = read_jsonl(trials_path.string());
  } else if (resume) {
    throw std::runtime_error("nothing to resume: " + manifest_path.string() +
                             " does not exist");
  }
  // Fresh runs truncate any leftover trial log from a run that died before
  // its manifest was written.
  write_text_file(manifest_path.string(), manifest_to_json(manifest).dump(2) + "\n");
  if (prior_records.empty() && fs::exists(trials_path)) fs::remove(trials_path);

  RunOutcome out;
  out.run_dir = run_dir.string();
  if (manifest.strategy == "grm") {
    run_grm(manifest, bench, *trainer, prior_records, trials_path.string(), out);
  } else if (manifest.strategy == "timfbo") {
    run_timfbo(manifest, bench, *trainer, prior_records, trials_path.string(), out);
  } else {
    run_ecco(manifest, bench, *trainer, prior_records, trials_path.string(), out);
  }

  write_text_file((run_dir / "best_config.json").string(),
                  best_config_json(out).dump(2) + "\n");
  write_text_file((run_dir / "summary.json").string(),
                  summary_json(manifest, out).dump(2) + "\n");
  return out;
}

}  // namespace stride
