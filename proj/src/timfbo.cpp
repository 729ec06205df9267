#include "stride/timfbo.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>
#include <sstream>
#include <stdexcept>

#include "stride/parallel.hpp"
#include "stride/rng.hpp"

namespace stride {

void FidelitySchedule::validate() const {
  if (rungs.empty()) throw std::invalid_argument("fidelity schedule needs at least one rung");
  if (rungs.size() != costs.size()) {
    throw std::invalid_argument("fidelity schedule has mismatched rung and cost counts");
  }
  if (eta < 2) throw std::invalid_argument("fidelity schedule eta must be >= 2");
  double prev = 0.0;
  for (std::size_t r = 0; r < rungs.size(); ++r) {
    if (rungs[r].epoch_budget < 1) {
      throw std::invalid_argument("fidelity rung epoch budget must be >= 1");
    }
    if (!(rungs[r].data_fraction > 0.0) || rungs[r].data_fraction > 1.0) {
      throw std::invalid_argument("fidelity rung data fraction must be in (0, 1]");
    }
    if (!(costs[r] > prev)) {
      throw std::invalid_argument("fidelity costs must be positive and strictly increasing");
    }
    prev = costs[r];
  }
}

FidelitySchedule FidelitySchedule::geometric(int full_epochs, int num_rungs, int eta) {
  if (full_epochs < 1 || num_rungs < 1 || eta < 2) {
    throw std::invalid_argument("geometric schedule needs full_epochs >= 1, num_rungs >= 1, eta >= 2");
  }
  if (std::pow(static_cast<double>(eta), num_rungs - 1) > static_cast<double>(full_epochs)) {
    throw std::invalid_argument("too many rungs for the epoch budget");
  }
  FidelitySchedule s;
  s.eta = eta;
  int prev = 0;
  for (int r = 0; r < num_rungs; ++r) {
    const double divisor = std::pow(static_cast<double>(eta), num_rungs - 1 - r);
    int epochs = static_cast<int>(std::llround(full_epochs / divisor));
    epochs = std::max(epochs, prev + 1);
    if (r == num_rungs - 1) epochs = full_epochs;
    FidelityLevel level;
    level.epoch_budget = epochs;
    level.data_fraction = 1.0;
    level.rung = r;
    s.rungs.push_back(level);
    s.costs.push_back(static_cast<double>(epochs) / full_epochs);
    prev = epochs;
  }
  s.validate();
  return s;
}

ProxyDataset make_proxy(const SearchSpace& space,
                        const std::vector<std::pair<Configuration, double>>& observations,
                        double fidelity_coordinate) {
  if (space.classes.size() > 1) {
    throw std::invalid_argument(
        "make_proxy handles single-class spaces; build multi-class proxy points explicitly");
  }
  ProxyDataset proxy;
  proxy.fidelity_coordinate = fidelity_coordinate;
  proxy.points.reserve(observations.size());
  for (const auto& [config, y] : observations) {
    ProxyPoint pt;
    pt.x = encode_unit_cube(space, config);
    pt.y = y;
    proxy.points.push_back(std::move(pt));
  }
  return proxy;
}

GpSurrogate transfer_init(const GpSurrogate& target, const ProxyDataset& proxy,
                          double discount) {
  if (!(discount > 0.0) || discount > 1.0) {
    throw std::invalid_argument("transfer discount must be in (0, 1]");
  }
  std::vector<GpObservation> obs = target.observations();
  for (const auto& pt : proxy.points) {
    if (pt.x.size() + 1 != target.dim()) {
      std::ostringstream msg;
      msg << "proxy point has " << pt.x.size() << " coordinates, surrogate expects "
          << target.dim() << " including the fidelity coordinate";
      throw std::invalid_argument(msg.str());
    }
    GpObservation o;
    o.x = pt.x;
    o.x.push_back(proxy.fidelity_coordinate);
    o.y = pt.y;
    o.noise_multiplier = 1.0 / discount;
    obs.push_back(std::move(o));
  }
  return GpSurrogate(std::move(obs), target.params());
}

std::vector<std::size_t> promote(const std::vector<double>& objectives, int eta) {
  if (objectives.empty()) throw std::invalid_argument("promote needs a non-empty rung");
  if (eta < 2) throw std::invalid_argument("promote needs eta >= 2");
  for (double y : objectives) {
    if (!std::isfinite(y)) throw std::invalid_argument("promote needs finite objectives");
  }
  const std::size_t keep =
      (objectives.size() + static_cast<std::size_t>(eta) - 1) / static_cast<std::size_t>(eta);
  std::vector<std::size_t> order(objectives.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  // stable_sort keeps earlier evaluation order among equal objectives
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return objectives[a] > objectives[b]; });
  order.resize(keep);
  return order;
}

namespace {

struct Proposal {
  std::size_t class_index = 0;
  Configuration config;
  std::vector<double> x;  // class one-hot block + unit cube, no fidelity coordinate
};

}  // namespace

MfboResult timfbo_search(const SearchSpace& space, Trainer& trainer,
                         const FidelitySchedule& schedule, const ProxyDataset* proxy,
                         const MfboConfig& config, std::uint64_t seed,
                         const MfboTrialCallback& on_trial,
                         const std::vector<MfboTrial>* prior) {
  space.validate();
  schedule.validate();
  if (!(config.budget >= schedule.top_cost())) {
    throw std::invalid_argument("budget must cover at least one full-fidelity trial");
  }
  if (config.candidate_pool < 1) throw std::invalid_argument("candidate pool must be positive");
  if (config.refine_top < 0 || config.refine_steps < 0 || config.refine_sigma < 0.0) {
    throw std::invalid_argument("refinement settings must be non-negative");
  }
  if (config.failure_cap < 0) throw std::invalid_argument("failure cap must be non-negative");
  if (config.workers < 1) throw std::invalid_argument("worker count must be >= 1");

  const std::size_t num_classes = space.classes.size();
  const std::size_t class_block = num_classes > 1 ? num_classes : 0;
  const std::size_t gp_dim = class_block + encode_dim(space) + 1;

  KernelParams kernel = config.kernel;
  if (kernel.length_scales.empty()) {
    kernel.length_scales.assign(gp_dim, 0.3);
  } else if (kernel.length_scales.size() != gp_dim) {
    std::ostringstream msg;
    msg << "kernel has " << kernel.length_scales.size() << " length-scales, search input has "
        << gp_dim << " coordinates";
    throw std::invalid_argument(msg.str());
  }

  std::vector<GpObservation> base_obs;
  double proxy_best = -std::numeric_limits<double>::infinity();
  if (proxy != nullptr && !proxy->points.empty()) {
    base_obs =
        transfer_init(GpSurrogate({}, kernel), *proxy, config.transfer_discount).observations();
    for (const auto& pt : proxy->points) proxy_best = std::max(proxy_best, pt.y);
  }

  const std::size_t num_rungs = schedule.rungs.size();
  std::size_t cohort0 = 1;
  for (std::size_t r = 1; r < num_rungs; ++r) cohort0 *= static_cast<std::size_t>(schedule.eta);

  std::vector<MfboTrial> history;
  std::vector<GpObservation> target_obs;
  double spent = 0.0;
  int failures = 0;
  std::optional<MfboTrial> best_full;
  double best_seen = -std::numeric_limits<double>::infinity();
  bool any_success = false;
  std::size_t replay_pos = 0;

  auto encode_with_class = [&](std::size_t class_index, const Configuration& cfg) {
    std::vector<double> x;
    if (class_block > 0) {
      x.assign(class_block, 0.0);
      x[class_index] = 1.0;
    }
    const std::vector<double> unit = encode_unit_cube(space, cfg);
    x.insert(x.end(), unit.begin(), unit.end());
    return x;
  };

  auto class_index_of = [&](const std::string& name) -> std::size_t {
    for (std::size_t i = 0; i < num_classes; ++i) {
      if (space.classes[i].name == name) return i;
    }
    throw std::invalid_argument("unknown class in history: " + name);
  };

  auto fit_surrogate = [&]() {
    std::vector<GpObservation> obs = base_obs;
    obs.insert(obs.end(), target_obs.begin(), target_obs.end());
    return gp_fit(std::move(obs), kernel, config.optimize_hyperparameters);
  };

  auto f_star = [&]() {
    if (any_success) return best_seen;
    if (std::isfinite(proxy_best)) return proxy_best;
    return 0.0;
  };

  auto score_point = [&](const GpSurrogate& gp, const std::vector<double>& x, double fid_coord,
                         double cost, double fstar) {
    std::vector<double> q = x;
    q.push_back(fid_coord);
    const GpPosterior post = gp.posterior(q);
    const double ei = expected_improvement(post.mean, std::sqrt(post.variance), fstar);
    return cost_aware_acquisition(ei, cost);
  };

  // Reconstructs a proposal from a perturbed encoding: decode snaps integers
  // and categorical blocks to admissible values, then re-encode.
  auto snap = [&](std::size_t fallback_class, const std::vector<double>& x) {
    Proposal p;
    p.class_index = fallback_class;
    if (class_block > 0) {
      p.class_index = static_cast<std::size_t>(
          std::max_element(x.begin(), x.begin() + static_cast<std::ptrdiff_t>(class_block)) -
          x.begin());
    }
    const std::vector<double> unit(x.begin() + static_cast<std::ptrdiff_t>(class_block), x.end());
    p.config = decode_unit_cube(space, unit);
    p.x = encode_with_class(p.class_index, p.config);
    return p;
  };

  auto propose_cohort = [&](const GpSurrogate& gp, std::size_t bracket, std::size_t want,
                            std::size_t rung) {
    const double fid_coord = schedule.coordinate(rung);
    const double rung_cost = schedule.costs[rung];
    const double fstar = f_star();

    auto rng = make_rng(subseed(seed, "mfbo-pool", bracket));
    std::vector<Proposal> pool;
    pool.reserve(static_cast<std::size_t>(config.candidate_pool));
    std::uniform_int_distribution<std::size_t> class_pick(0, num_classes - 1);
    for (int i = 0; i < config.candidate_pool; ++i) {
      Proposal p;
      p.class_index = num_classes > 1 ? class_pick(rng) : 0;
      p.config = sample_random(space, rng);
      p.x = encode_with_class(p.class_index, p.config);
      pool.push_back(std::move(p));
    }

    std::vector<double> scores =
        parallel_map(pool.size(), config.workers, [&](std::size_t i) {
          return score_point(gp, pool[i].x, fid_coord, rung_cost, fstar);
        });

    std::vector<std::size_t> order(pool.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    auto rank = [&] {
      std::stable_sort(order.begin(), order.end(),
                       [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
    };
    rank();

    const std::size_t refine_n =
        std::min<std::size_t>(static_cast<std::size_t>(config.refine_top), order.size());
    for (std::size_t r = 0; r < refine_n; ++r) {
      const std::size_t ci = order[r];
      auto rrng = make_rng(subseed(seed, "mfbo-refine", bracket, r));
      std::normal_distribution<double> jump(0.0, config.refine_sigma);
      for (int step = 0; step < config.refine_steps; ++step) {
        std::vector<double> x = pool[ci].x;
        for (double& c : x) c = std::clamp(c + jump(rrng), 0.0, 1.0);
        Proposal moved = snap(pool[ci].class_index, x);
        const double s = score_point(gp, moved.x, fid_coord, rung_cost, fstar);
        if (s > scores[ci]) {
          pool[ci] = std::move(moved);
          scores[ci] = s;
        }
      }
    }
    rank();

    std::vector<Proposal> cohort;
    std::vector<const std::vector<double>*> seen;
    for (std::size_t oi = 0; oi < order.size() && cohort.size() < want; ++oi) {
      const Proposal& p = pool[order[oi]];
      const bool dup = std::any_of(seen.begin(), seen.end(),
                                   [&](const std::vector<double>* s) { return *s == p.x; });
      if (!dup) {
        seen.push_back(&p.x);
        cohort.push_back(p);
      }
    }
    // Tiny or heavily duplicated spaces: pad so the bracket keeps its shape.
    for (std::size_t oi = 0; cohort.size() < want && oi < order.size(); ++oi) {
      cohort.push_back(pool[order[oi]]);
    }
    return cohort;
  };

  auto run_plan = [&](const std::vector<Proposal>& plan, std::size_t bracket, std::size_t rung) {
    const double cost = schedule.costs[rung];
    const std::size_t base_index = history.size();
    std::vector<MfboTrial> out(plan.size());
    std::vector<bool> fresh_flag(plan.size(), false);
    std::vector<std::size_t> fresh;
    for (std::size_t i = 0; i < plan.size(); ++i) {
      const std::size_t gi = base_index + i;
      if (prior != nullptr && replay_pos < prior->size()) {
        const MfboTrial& prev = (*prior)[replay_pos];
        if (prev.index != gi || prev.bracket != bracket || prev.rung != rung ||
            prev.class_name != space.classes[plan[i].class_index].name ||
            !(prev.config == plan[i].config)) {
          throw std::invalid_argument("prior history diverges at trial " + std::to_string(gi));
        }
        out[i] = prev;
        ++replay_pos;
      } else {
        fresh_flag[i] = true;
        fresh.push_back(i);
      }
    }

    if (!fresh.empty()) {
      std::vector<MfboTrial> ran =
          parallel_map(fresh.size(), config.workers, [&](std::size_t fi) {
            const std::size_t i = fresh[fi];
            const std::size_t gi = base_index + i;
            const Proposal& p = plan[i];
            MfboTrial t;
            t.index = gi;
            t.bracket = bracket;
            t.rung = rung;
            t.class_name = space.classes[p.class_index].name;
            t.config = p.config;
            t.cost = cost;
            try {
              const TrialRecord rec =
                  trainer.run(space.classes[p.class_index], p.config, schedule.rungs[rung],
                              nullptr, subseed(seed, "mfbo-trial", gi));
              t.objective = trial_objective(rec);
            } catch (const TrainerError& err) {
              t.failed = true;
              t.objective = std::numeric_limits<double>::quiet_NaN();
              t.error = err.what();
            }
            return t;
          });
      for (std::size_t fi = 0; fi < fresh.size(); ++fi) out[fresh[fi]] = std::move(ran[fi]);
    }

    for (std::size_t i = 0; i < out.size(); ++i) {
      const MfboTrial& t = out[i];
      spent += t.cost;
      history.push_back(t);
      if (on_trial && fresh_flag[i]) on_trial(t);
      if (t.failed) {
        ++failures;
        if (failures > config.failure_cap) {
          throw std::runtime_error("failure cap exceeded at trial " + std::to_string(t.index) +
                                   ": " + t.error);
        }
      } else {
        GpObservation o;
        o.x = plan[i].x;
        o.x.push_back(schedule.coordinate(rung));
        o.y = t.objective;
        target_obs.push_back(std::move(o));
        any_success = true;
        best_seen = std::max(best_seen, t.objective);
        if (rung == schedule.top() && (!best_full || t.objective > best_full->objective)) {
          best_full = t;
        }
      }
    }
    return out;
  };

  // Budget room for `want` trials at a rung; while no full-fidelity result
  // exists, one top-rung cost stays reserved so the run can always finish
  // with a full evaluation.
  auto affordable = [&](std::size_t rung, std::size_t want) -> std::size_t {
    const double reserve = (rung == schedule.top() || best_full) ? 0.0 : schedule.top_cost();
    const double room = config.budget - spent - reserve;
    if (room < schedule.costs[rung] - 1e-9) return 0;
    const auto k = static_cast<std::size_t>(std::floor(room / schedule.costs[rung] + 1e-9));
    return std::min(k, want);
  };

  std::size_t bracket = 0;
  while (true) {
    std::size_t k0 = affordable(0, cohort0);
    if (k0 == 0) break;
    const GpSurrogate gp = fit_surrogate();
    std::vector<Proposal> cohort = propose_cohort(gp, bracket, k0, 0);
    for (std::size_t rung = 0; rung < num_rungs && !cohort.empty(); ++rung) {
      const std::size_t k = affordable(rung, cohort.size());
      if (k == 0) break;
      cohort.resize(k);
      const std::vector<MfboTrial> results = run_plan(cohort, bracket, rung);
      if (rung + 1 == num_rungs) break;
      std::vector<std::size_t> ok;
      std::vector<double> ys;
      for (std::size_t i = 0; i < results.size(); ++i) {
        if (!results[i].failed) {
          ok.push_back(i);
          ys.push_back(results[i].objective);
        }
      }
      if (ys.empty()) break;
      // promote returns rank order (best first) so a later budget cut keeps
      // the most promising survivors
      std::vector<Proposal> next;
      for (std::size_t a : promote(ys, schedule.eta)) next.push_back(cohort[ok[a]]);
      cohort = std::move(next);
    }
    ++bracket;
  }

  // The reserve guarantees this is affordable unless top-rung failures ate
  // the budget; in that case fall through to the model-predicted incumbent.
  if (!best_full && spent + schedule.top_cost() <= config.budget + 1e-9) {
    const GpSurrogate gp = fit_surrogate();
    std::vector<Proposal> cands;
    for (const MfboTrial& t : history) {
      if (t.failed) continue;
      Proposal p;
      p.class_index = class_index_of(t.class_name);
      p.config = t.config;
      p.x = encode_with_class(p.class_index, p.config);
      cands.push_back(std::move(p));
    }
    auto rng = make_rng(subseed(seed, "mfbo-last"));
    std::uniform_int_distribution<std::size_t> class_pick(0, num_classes - 1);
    for (int i = 0; i < config.candidate_pool; ++i) {
      Proposal p;
      p.class_index = num_classes > 1 ? class_pick(rng) : 0;
      p.config = sample_random(space, rng);
      p.x = encode_with_class(p.class_index, p.config);
      cands.push_back(std::move(p));
    }
    const std::vector<double> means =
        parallel_map(cands.size(), config.workers, [&](std::size_t i) {
          std::vector<double> q = cands[i].x;
          q.push_back(1.0);
          return gp.posterior(q).mean;
        });
    std::size_t pick = 0;
    for (std::size_t i = 1; i < cands.size(); ++i) {
      if (means[i] > means[pick]) pick = i;
    }
    run_plan({cands[pick]}, bracket, schedule.top());
  }

  MfboResult result;
  result.total_cost = spent;
  if (best_full) {
    result.best_class = best_full->class_name;
    result.best_config = best_full->config;
    result.best_objective = best_full->objective;
    result.best_is_full_fidelity = true;
  } else {
    if (!any_success) {
      throw std::runtime_error("no trial succeeded within the budget");
    }
    const GpSurrogate gp = fit_surrogate();
    std::optional<std::size_t> pick;
    double pick_mean = 0.0;
    for (std::size_t i = 0; i < history.size(); ++i) {
      if (history[i].failed) continue;
      std::vector<double> q =
          encode_with_class(class_index_of(history[i].class_name), history[i].config);
      q.push_back(1.0);
      const double mean = gp.posterior(q).mean;
      if (!pick || mean > pick_mean) {
        pick = i;
        pick_mean = mean;
      }
    }
    result.best_class = history[*pick].class_name;
    result.best_config = history[*pick].config;
    result.best_objective = pick_mean;
    result.best_is_full_fidelity = false;
  }
  result.history = std::move(history);
  return result;
}

}  // namespace stride
