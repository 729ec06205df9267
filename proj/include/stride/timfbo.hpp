#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "stride/gp.hpp"
#include "stride/search_space.hpp"
#include "stride/trainer.hpp"

namespace stride {

/// Ladder of training fidelities with strictly increasing relative cost.
/// The surrogate sees each rung as one value of an extra input coordinate,
/// cost / top cost, so the top rung sits at 1.
struct FidelitySchedule {
  std::vector<FidelityLevel> rungs;
  std::vector<double> costs;
  int eta = 2;

  void validate() const;
  std::size_t top() const { return rungs.size() - 1; }
  double top_cost() const { return costs.back(); }
  double coordinate(std::size_t rung) const { return costs.at(rung) / costs.back(); }

  /// Rung epoch budgets full/eta^(R-1-r), full data at every rung, cost
  /// proportional to epochs. Requires eta^(R-1) <= full_epochs.
  static FidelitySchedule geometric(int full_epochs, int num_rungs, int eta);
};

/// Observations imported from a cheaper task, in the same unit-cube encoding
/// as the target space (no fidelity coordinate; transfer appends one).
struct ProxyPoint {
  std::vector<double> x;
  double y = 0.0;
};

struct ProxyDataset {
  std::vector<ProxyPoint> points;
  // Placed below every rung so proxy evidence is distinct from target data.
  double fidelity_coordinate = 0.0;
};

ProxyDataset make_proxy(const SearchSpace& space,
                        const std::vector<std::pair<Configuration, double>>& observations,
                        double fidelity_coordinate = 0.0);

/// Folds proxy points into the target surrogate with noise inflated by
/// 1/discount at the proxy fidelity coordinate. discount in (0, 1]; zero
/// would mean infinite noise and is rejected.
GpSurrogate transfer_init(const GpSurrogate& target, const ProxyDataset& proxy,
                          double discount);

/// Indices of the top ceil(n/eta) rung results, ranked by objective
/// descending with ties broken by earlier evaluation order.
std::vector<std::size_t> promote(const std::vector<double>& objectives, int eta);

struct MfboConfig {
  double budget = 30.0;  // total relative cost, same units as schedule costs
  int candidate_pool = 2048;
  int refine_top = 8;
  int refine_steps = 20;
  double refine_sigma = 0.05;
  double transfer_discount = 0.5;
  bool optimize_hyperparameters = false;
  int failure_cap = 10;
  int workers = 1;
  KernelParams kernel;  // length-scales default to 0.3 per coordinate when empty
};

/// One evaluated (or failed) trial, in proposal order.
struct MfboTrial {
  std::size_t index = 0;
  std::size_t bracket = 0;
  std::size_t rung = 0;
  std::string class_name;
  Configuration config;
  double objective = 0.0;  // NaN when failed
  double cost = 0.0;
  bool failed = false;
  std::string error;
};

struct MfboResult {
  std::string best_class;
  Configuration best_config;
  double best_objective = 0.0;
  // False when no full-fidelity trial succeeded and the incumbent is the
  // model-predicted best instead.
  bool best_is_full_fidelity = false;
  double total_cost = 0.0;
  std::vector<MfboTrial> history;
};

using MfboTrialCallback = std::function<void(const MfboTrial&)>;

/// Multi-fidelity Bayesian search: per bracket, propose a cohort by
/// cost-aware expected improvement over a seeded candidate pool (plus local
/// refinement), evaluate it up the rung ladder with successive-halving
/// promotion, and refresh the surrogate on every observation so far. While
/// no full-fidelity result exists, one top-rung cost stays reserved so the
/// budget always ends with an incumbent. Deterministic per seed for any
/// worker count; pass a prior history to resume without re-running trials.
MfboResult timfbo_search(const SearchSpace& space, Trainer& trainer,
                         const FidelitySchedule& schedule, const ProxyDataset* proxy,
                         const MfboConfig& config, std::uint64_t seed,
                         const MfboTrialCallback& on_trial = {},
                         const std::vector<MfboTrial>* prior = nullptr);

}  // namespace stride
