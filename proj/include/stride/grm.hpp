#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "stride/trainer.hpp"

namespace stride {

/// Linear map from training-dynamics features to final performance, fit per
/// architecture class on completed trials.
struct RewardModel {
  ArchitectureClass cls;
  std::vector<double> weights;  // length = DynamicsFeatures::kDim
  double fit_residual = 0.0;    // root-mean-square training residual
};

/// Dense per-class action-value table with visit counts. Keys are created
/// once for the full class/action grid, so lookups never extend the table.
struct QTable {
  std::map<std::string, std::vector<double>> values;
  std::map<std::string, std::vector<long long>> visits;

  void init(const std::vector<ArchitectureClass>& classes, std::size_t n_actions);
  double q(const std::string& class_name, std::size_t action) const;
  long long visit_count(const std::string& class_name, std::size_t action) const;
};

struct GrmConfig {
  int num_samples_phase1 = 12;  // full-fidelity trials per class
  int max_episodes = 200;
  double eps_initial = 1.0;
  double eps_floor = 0.05;
  // Per-episode multiplicative decay; <= 0 selects the rate that reaches the
  // floor exactly at the last episode.
  double eps_decay = 0.0;
  // With cached probes the reward per (class, action) is deterministic, so
  // full overwrite makes Q converge to it after one visit. Lower alpha to
  // average when probes are re-drawn per episode.
  double alpha = 1.0;
  // Epochs per online probe trial; <= 0 selects ceil(0.2 * full_epochs).
  int partial_epochs = 0;
  bool clip_rewards = false;
  // Reuse the first probe of each (class, action) on revisits. Keeps online
  // cost at |actions| * partial_epochs no matter how many episodes run.
  bool cache_partial_trials = true;
  double ridge_lambda = 1e-6;
  int workers = 1;
};

/// One audit entry: a completed offline sample (phase 1) or one online
/// learning step (phase 2).
struct SearchEpisode {
  int index = 0;  // position within its phase
  int phase = 1;
  std::string class_name;
  std::size_t action_id = 0;
  Configuration config;
  DynamicsFeatures features;
  double reward = 0.0;             // phase 1: observed final performance
  std::optional<double> q_after;   // phase 2 only
  double epsilon = 0.0;            // phase 2 only
  bool reused_probe = false;       // phase 2: served from the probe cache
  int epochs_cost = 0;             // training epochs actually spent
};

struct GrmResult {
  std::map<std::string, std::size_t> policy;  // class -> greedy action
  QTable qtable;
  std::map<std::string, RewardModel> models;
  std::vector<SearchEpisode> episodes;
  long long phase1_epochs = 0;
  long long phase2_epochs = 0;
};

/// Ridge least squares of final performance on dynamics features.
/// Preconditions: one class, every trial completed, count >= feature dim.
RewardModel estimate_reward_model(const std::vector<TrialRecord>& trials,
                                  double ridge_lambda = 1e-6);

/// Same fit from bare (features, performance) pairs; used when replaying
/// persisted audit records.
RewardModel fit_reward_model(const ArchitectureClass& cls,
                             const std::vector<DynamicsFeatures>& features,
                             const std::vector<double>& performance,
                             double ridge_lambda = 1e-6);

/// Unclipped dot product W . v.
double predict_performance(const RewardModel& model, const DynamicsFeatures& v);

/// Epsilon-greedy action choice: explore uniformly with probability epsilon,
/// otherwise argmax Q with lowest-index tie-break. Deterministic per seed.
std::size_t select_action(const QTable& q, const ArchitectureClass& cls,
                          const ActionSet& actions, double epsilon,
                          std::uint64_t seed);

/// In-place update Q(s,a) += alpha * (reward - Q(s,a)); bumps the visit count.
void q_update(QTable& q, const ArchitectureClass& cls, std::size_t action,
              double reward, double alpha);

/// Nearest ActionSet member under Euclidean distance in the unit-cube
/// encoding; lowest index wins ties.
std::size_t nearest_action(const SearchSpace& space, const ActionSet& actions,
                           const Configuration& config);

/// Two-phase search. Phase 1 trains num_samples_phase1 random configurations
/// (snapped onto the action grid) per class at full fidelity, in parallel,
/// and fits one RewardModel per class. Phase 2 runs max_episodes sequential
/// epsilon-greedy steps, scoring each probe trial's dynamics features with
/// the class model as the Q-learning reward.
///
/// `on_episode` (optional) observes each audit entry as it is produced.
/// `prior` (optional) resumes a run: entries are replayed instead of
/// re-executed, in order, and must come from the same (space, actions, cfg,
/// seed); the remainder of the schedule then runs normally.
GrmResult grm_search(const SearchSpace& space, const ActionSet& actions,
                     Trainer& trainer, const GrmConfig& cfg, std::uint64_t seed,
                     const std::function<void(const SearchEpisode&)>& on_episode = {},
                     const std::vector<SearchEpisode>* prior = nullptr);

}  // namespace stride
