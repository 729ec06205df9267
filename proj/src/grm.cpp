#include "stride/grm.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <Eigen/Dense>

#include "stride/parallel.hpp"
#include "stride/rng.hpp"

namespace stride {

void QTable::init(const std::vector<ArchitectureClass>& classes,
                  std::size_t n_actions) {
  values.clear();
  visits.clear();
  for (const auto& c : classes) {
    values[c.name] = std::vector<double>(n_actions, 0.0);
    visits[c.name] = std::vector<long long>(n_actions, 0);
  }
}

double QTable::q(const std::string& class_name, std::size_t action) const {
  return values.at(class_name).at(action);
}

long long QTable::visit_count(const std::string& class_name,
                              std::size_t action) const {
  return visits.at(class_name).at(action);
}

RewardModel fit_reward_model(const ArchitectureClass& cls,
                             const std::vector<DynamicsFeatures>& features,
                             const std::vector<double>& performance,
                             double ridge_lambda) {
  const std::size_t n = features.size();
  const std::size_t d = DynamicsFeatures::kDim;
  if (n != performance.size())
    throw std::invalid_argument("feature/performance count mismatch");
  if (n < d)
    throw std::invalid_argument("insufficient trials: need at least " +
                                std::to_string(d) + ", got " + std::to_string(n));
  if (ridge_lambda < 0.0) throw std::invalid_argument("ridge lambda must be >= 0");

  Eigen::MatrixXd X(n, d);
  Eigen::VectorXd y(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < d; ++j) X(i, j) = features[i].v[j];
    y(i) = performance[i];
  }
  Eigen::MatrixXd A = X.transpose() * X;
  A.diagonal().array() += ridge_lambda;
  Eigen::VectorXd w = A.ldlt().solve(X.transpose() * y);

  RewardModel model;
  model.cls = cls;
  model.weights.assign(w.data(), w.data() + d);
  for (double wi : model.weights) {
    if (!std::isfinite(wi))
      throw std::runtime_error("reward model fit produced non-finite weights");
  }
  model.fit_residual = std::sqrt((X * w - y).squaredNorm() / static_cast<double>(n));
  return model;
}

RewardModel estimate_reward_model(const std::vector<TrialRecord>& trials,
                                  double ridge_lambda) {
  if (trials.empty()) throw std::invalid_argument("no trials to fit");
  const auto& cls = trials.front().arch;
  std::vector<DynamicsFeatures> features;
  std::vector<double> performance;
  features.reserve(trials.size());
  performance.reserve(trials.size());
  for (const auto& t : trials) {
    if (!(t.arch == cls))
      throw std::invalid_argument("trials mix architecture classes");
    if (!t.final_performance)
      throw std::invalid_argument("trial lacks final performance (not run to completion)");
    features.push_back(extract_dynamics_features(t.log));
    performance.push_back(*t.final_performance);
  }
  return fit_reward_model(cls, features, performance, ridge_lambda);
}

double predict_performance(const RewardModel& model, const DynamicsFeatures& v) {
  if (model.weights.size() != DynamicsFeatures::kDim)
    throw std::invalid_argument("reward model dimension mismatch");
  return v.dot(model.weights);
}

std::size_t select_action(const QTable& q, const ArchitectureClass& cls,
                          const ActionSet& actions, double epsilon,
                          std::uint64_t seed) {
  if (actions.size() == 0) throw std::invalid_argument("empty action set");
  if (!(epsilon >= 0.0 && epsilon <= 1.0))
    throw std::invalid_argument("epsilon must lie in [0,1]");
  auto rng = make_rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  if (unit(rng) < epsilon) {
    std::uniform_int_distribution<std::size_t> pick(0, actions.size() - 1);
    return pick(rng);
  }
  const auto& row = q.values.at(cls.name);
  std::size_t best = 0;
  for (std::size_t a = 1; a < row.size(); ++a) {
    if (row[a] > row[best]) best = a;
  }
  return best;
}

void q_update(QTable& q, const ArchitectureClass& cls, std::size_t action,
              double reward, double alpha) {
  if (!(alpha > 0.0 && alpha <= 1.0))
    throw std::invalid_argument("alpha must lie in (0,1]");
  double& cell = q.values.at(cls.name).at(action);
  cell += alpha * (reward - cell);
  ++q.visits.at(cls.name).at(action);
}

std::size_t nearest_action(const SearchSpace& space, const ActionSet& actions,
                           const Configuration& config) {
  if (actions.size() == 0) throw std::invalid_argument("empty action set");
  auto x = encode_unit_cube(space, config);
  std::size_t best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t a = 0; a < actions.size(); ++a) {
    auto ax = encode_unit_cube(space, actions.at(a));
    double d = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i)
      d += (x[i] - ax[i]) * (x[i] - ax[i]);
    if (d < best_d) {
      best_d = d;
      best = a;
    }
  }
  return best;
}

namespace {

struct ProbeKey {
  std::size_t class_index;
  std::size_t action;
  bool operator<(const ProbeKey& o) const {
    return class_index != o.class_index ? class_index < o.class_index
                                        : action < o.action;
  }
};

double epsilon_at(const GrmConfig& cfg, int episode) {
  double decay = cfg.eps_decay;
  if (decay <= 0.0) {
    decay = 1.0;
    if (cfg.max_episodes > 0 && cfg.eps_initial > 0.0 &&
        cfg.eps_floor > 0.0 && cfg.eps_floor < cfg.eps_initial) {
      decay = std::pow(cfg.eps_floor / cfg.eps_initial,
                       1.0 / static_cast<double>(cfg.max_episodes));
    }
  }
  double eps = cfg.eps_initial * std::pow(decay, static_cast<double>(episode));
  return std::clamp(std::max(eps, cfg.eps_floor), 0.0, 1.0);
}

}  // namespace

GrmResult grm_search(const SearchSpace& space, const ActionSet& actions,
                     Trainer& trainer, const GrmConfig& cfg, std::uint64_t seed,
                     const std::function<void(const SearchEpisode&)>& on_episode,
                     const std::vector<SearchEpisode>* prior) {
  space.validate();
  if (actions.size() == 0) throw std::invalid_argument("empty action set");
  if (cfg.num_samples_phase1 < static_cast<int>(DynamicsFeatures::kDim))
    throw std::invalid_argument("phase-1 sample count below feature dimension");
  if (cfg.max_episodes < 0) throw std::invalid_argument("negative episode count");
  if (!(cfg.alpha > 0.0 && cfg.alpha <= 1.0))
    throw std::invalid_argument("alpha must lie in (0,1]");
  if (!(cfg.eps_initial >= 0.0 && cfg.eps_initial <= 1.0))
    throw std::invalid_argument("epsilon must lie in [0,1]");

  const int full = trainer.full_epochs();
  const int partial = cfg.partial_epochs > 0
                          ? cfg.partial_epochs
                          : std::max(1, (full + 4) / 5);  // ceil(0.2 * full)
  const std::size_t n_classes = space.classes.size();
  const std::size_t per_class = static_cast<std::size_t>(cfg.num_samples_phase1);
  const std::size_t phase1_total = n_classes * per_class;

  std::vector<std::vector<double>> encoded;
  encoded.reserve(actions.size());
  for (const auto& a : actions.actions) encoded.push_back(encode_unit_cube(space, a));
  auto snap = [&](const Configuration& c) {
    auto x = encode_unit_cube(space, c);
    std::size_t best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t a = 0; a < encoded.size(); ++a) {
      double d = 0.0;
      for (std::size_t i = 0; i < x.size(); ++i)
        d += (x[i] - encoded[a][i]) * (x[i] - encoded[a][i]);
      if (d < best_d) {
        best_d = d;
        best = a;
      }
    }
    return best;
  };

  std::vector<const SearchEpisode*> prior_p1, prior_p2;
  if (prior != nullptr) {
    for (const auto& e : *prior) {
      if (e.phase == 1) {
        if (!prior_p2.empty())
          throw std::invalid_argument("resume records out of order");
        prior_p1.push_back(&e);
      } else {
        prior_p2.push_back(&e);
      }
    }
    if (prior_p1.size() > phase1_total ||
        prior_p2.size() > static_cast<std::size_t>(cfg.max_episodes))
      throw std::invalid_argument("resume records exceed the configured schedule");
  }

  GrmResult result;
  result.qtable.init(space.classes, actions.size());

  // Phase 1: full-fidelity samples, replayed where records exist, otherwise
  // executed (in parallel). Results are merged in plan order so the fit and
  // the audit trail are identical with or without resumption.
  //
  // Features are taken from the log truncated to the phase-2 probe budget:
  // the model must map early dynamics to final performance, so it has to be
  // fit on exactly the prefix length it will see online.
  auto truncate_to_partial = [&](const TrainingLog& log) {
    TrainingLog t = log;
    if (static_cast<int>(t.epochs.size()) > partial) {
      t.epochs.resize(static_cast<std::size_t>(partial));
      t.completed = partial;
      t.budget = partial;
    }
    return t;
  };
  auto run_sample = [&](std::size_t flat) -> SearchEpisode {
    const std::size_t ci = flat / per_class;
    const std::size_t k = flat % per_class;
    const auto& cls = space.classes[ci];
    Configuration sampled =
        sample_random(space, subseed(seed, "phase1-sample", ci, k));
    std::size_t aid = snap(sampled);
    TrialRecord trial;
    try {
      trial = trainer.run(cls, actions.at(aid),
                          FidelityLevel{full, 1.0, 1}, nullptr,
                          subseed(seed, "phase1-trial", ci, k));
    } catch (const TrainerError& e) {
      throw TrainerError(e.kind(),
                         "phase-1 sample " + std::to_string(k) + " for class " +
                             cls.name + ": " + e.what(),
                         e.partial_log());
    }
    if (!trial.final_performance)
      throw TrainerError(TrainerError::Kind::protocol,
                         "phase-1 trial returned no final performance for class " +
                             cls.name);
    SearchEpisode ep;
    ep.index = static_cast<int>(flat);
    ep.phase = 1;
    ep.class_name = cls.name;
    ep.action_id = aid;
    ep.config = actions.at(aid);
    ep.features = extract_dynamics_features(truncate_to_partial(trial.log));
    ep.reward = *trial.final_performance;
    ep.epochs_cost = trial.log.completed;
    return ep;
  };

  std::vector<std::size_t> missing;
  for (std::size_t flat = prior_p1.size(); flat < phase1_total; ++flat)
    missing.push_back(flat);
  auto fresh = parallel_map(missing.size(), cfg.workers, [&](std::size_t i) {
    return run_sample(missing[i]);
  });

  std::vector<std::vector<DynamicsFeatures>> class_features(n_classes);
  std::vector<std::vector<double>> class_perf(n_classes);
  for (std::size_t flat = 0; flat < phase1_total; ++flat) {
    SearchEpisode ep;
    bool replayed = flat < prior_p1.size();
    if (replayed) {
      ep = *prior_p1[flat];
      if (ep.class_name != space.classes[flat / per_class].name)
        throw std::invalid_argument("resume records do not match this schedule");
    } else {
      ep = fresh[flat - prior_p1.size()];
    }
    class_features[flat / per_class].push_back(ep.features);
    class_perf[flat / per_class].push_back(ep.reward);
    result.phase1_epochs += ep.epochs_cost;
    if (!replayed && on_episode) on_episode(ep);
    result.episodes.push_back(std::move(ep));
  }

  for (std::size_t ci = 0; ci < n_classes; ++ci) {
    const auto& cls = space.classes[ci];
    result.models[cls.name] = fit_reward_model(cls, class_features[ci],
                                               class_perf[ci], cfg.ridge_lambda);
  }

  // Phase 2: sequential epsilon-greedy learning on probe-trial rewards.
  std::map<ProbeKey, DynamicsFeatures> probe_cache;
  auto class_index_of = [&](const std::string& name) {
    for (std::size_t i = 0; i < n_classes; ++i)
      if (space.classes[i].name == name) return i;
    throw std::invalid_argument("resume record names unknown class " + name);
  };

  int episode = 0;
  for (const auto* pe : prior_p2) {
    SearchEpisode ep = *pe;
    std::size_t ci = class_index_of(ep.class_name);
    if (ep.action_id >= actions.size())
      throw std::invalid_argument("resume record action out of range");
    probe_cache.emplace(ProbeKey{ci, ep.action_id}, ep.features);
    q_update(result.qtable, space.classes[ci], ep.action_id, ep.reward, cfg.alpha);
    result.phase2_epochs += ep.epochs_cost;
    result.episodes.push_back(std::move(ep));
    ++episode;
  }

  for (; episode < cfg.max_episodes; ++episode) {
    double eps = epsilon_at(cfg, episode);

    std::size_t ci = 0;
    if (n_classes > 1) {
      auto crng = make_rng(subseed(seed, "ep-class", static_cast<std::uint64_t>(episode)));
      std::uniform_real_distribution<double> unit(0.0, 1.0);
      if (unit(crng) < eps) {
        std::uniform_int_distribution<std::size_t> pick(0, n_classes - 1);
        ci = pick(crng);
      } else {
        double best_v = -std::numeric_limits<double>::infinity();
        for (std::size_t c = 0; c < n_classes; ++c) {
          const auto& row = result.qtable.values.at(space.classes[c].name);
          double v = *std::max_element(row.begin(), row.end());
          if (v > best_v) {
            best_v = v;
            ci = c;
          }
        }
      }
    }
    const auto& cls = space.classes[ci];

    std::size_t aid =
        select_action(result.qtable, cls, actions, eps,
                      subseed(seed, "ep-action", static_cast<std::uint64_t>(episode)));

    SearchEpisode ep;
    ep.index = episode;
    ep.phase = 2;
    ep.class_name = cls.name;
    ep.action_id = aid;
    ep.config = actions.at(aid);
    ep.epsilon = eps;

    ProbeKey key{ci, aid};
    auto hit = probe_cache.find(key);
    if (cfg.cache_partial_trials && hit != probe_cache.end()) {
      ep.features = hit->second;
      ep.reused_probe = true;
      ep.epochs_cost = 0;
    } else {
      std::uint64_t probe_seed =
          cfg.cache_partial_trials
              ? subseed(seed, "probe-trial", ci, aid)
              : subseed(seed, "probe-trial", (ci << 32) ^ aid,
                        static_cast<std::uint64_t>(episode));
      TrialRecord trial;
      try {
        trial = trainer.run(cls, actions.at(aid), FidelityLevel{partial, 1.0, 0},
                            nullptr, probe_seed);
      } catch (const TrainerError& e) {
        throw TrainerError(e.kind(),
                           "episode " + std::to_string(episode) + ": " + e.what(),
                           e.partial_log());
      }
      ep.features = extract_dynamics_features(trial.log);
      ep.epochs_cost = trial.log.completed;
      probe_cache.emplace(key, ep.features);
    }

    double reward = predict_performance(result.models.at(cls.name), ep.features);
    if (cfg.clip_rewards) reward = std::clamp(reward, 0.0, 1.0);
    ep.reward = reward;
    q_update(result.qtable, cls, aid, reward, cfg.alpha);
    ep.q_after = result.qtable.q(cls.name, aid);
    result.phase2_epochs += ep.epochs_cost;
    if (on_episode) on_episode(ep);
    result.episodes.push_back(std::move(ep));
  }

  for (const auto& cls : space.classes) {
    const auto& row = result.qtable.values.at(cls.name);
    std::size_t best = 0;
    for (std::size_t a = 1; a < row.size(); ++a)
      if (row[a] > row[best]) best = a;
    result.policy[cls.name] = best;
  }
  return result;
}

}  // namespace stride
