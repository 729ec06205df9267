#include "stride/ecco.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <sstream>
#include <stdexcept>

#include "stride/parallel.hpp"
#include "stride/rng.hpp"

namespace stride {

namespace {

// Worst-scalar sentinel for failed trials; any real trial scores above it.
constexpr double kFailedScalar = -1e9;

void check_rate(double rate, const char* name) {
  if (!(rate >= 0.0) || rate > 1.0) {
    throw std::invalid_argument(std::string("mutation rate ") + name + " must be in [0, 1]");
  }
}

double clamp(double v, double lo, double hi) { return std::min(std::max(v, lo), hi); }

std::int64_t clamp_int(double v, std::int64_t lo, std::int64_t hi) {
  const auto r = static_cast<std::int64_t>(std::llround(v));
  return std::min(std::max(r, lo), hi);
}

}  // namespace

std::vector<std::string> validate_genome(const SearchSpace& space, const Genome& g,
                                         int total_epochs) {
  std::vector<std::string> violations = validate_config(space, g.hyperparams);
  for (const std::string& v : g.curriculum.validate(total_epochs)) {
    violations.push_back("curriculum: " + v);
  }
  return violations;
}

std::pair<double, double> sbx_crossover(double p1, double p2, double eta, double lo,
                                        double hi, std::mt19937_64& rng) {
  if (!(eta > 0.0)) throw std::invalid_argument("sbx eta must be positive");
  if (!(lo <= hi)) throw std::invalid_argument("sbx bounds must satisfy lo <= hi");
  if (p1 < lo || p1 > hi || p2 < lo || p2 > hi) {
    throw std::invalid_argument("sbx parents must lie within the bounds");
  }
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double u = unit(rng);  // always drawn, so gene streams stay aligned
  if (p1 == p2) return {p1, p2};
  const double beta = u <= 0.5 ? std::pow(2.0 * u, 1.0 / (eta + 1.0))
                               : std::pow(1.0 / (2.0 * (1.0 - u)), 1.0 / (eta + 1.0));
  const double c1 = 0.5 * ((1.0 + beta) * p1 + (1.0 - beta) * p2);
  const double c2 = 0.5 * ((1.0 - beta) * p1 + (1.0 + beta) * p2);
  return {clamp(c1, lo, hi), clamp(c2, lo, hi)};
}

std::pair<double, double> sbx_crossover(double p1, double p2, double eta, double lo,
                                        double hi, std::uint64_t seed) {
  auto rng = make_rng(seed);
  return sbx_crossover(p1, p2, eta, lo, hi, rng);
}

CurriculumSchedule repair_curriculum(CurriculumSchedule schedule, int total_epochs) {
  if (total_epochs < 2) {
    throw std::invalid_argument("a curriculum needs at least two training epochs");
  }
  if (schedule.stages.empty()) {
    throw std::invalid_argument("cannot repair a schedule with no stages");
  }
  if (schedule.stages.size() > static_cast<std::size_t>(total_epochs - 1)) {
    schedule.stages.resize(static_cast<std::size_t>(total_epochs - 1));
  }
  const int n = static_cast<int>(schedule.stages.size());
  schedule.stages[0].start_epoch = 1;
  int prev = 1;
  for (int i = 1; i < n; ++i) {
    // leave room for the stages after this one, each needing a later epoch
    const int hi_bound = total_epochs - 1 - (n - 1 - i);
    const int lo_bound = prev + 1;
    int start = schedule.stages[i].start_epoch;
    start = std::min(std::max(start, lo_bound), hi_bound);
    schedule.stages[i].start_epoch = start;
    prev = start;
  }
  std::set<ConditionTag> running;
  for (auto& stage : schedule.stages) {
    stage.conditions.insert(running.begin(), running.end());
    if (stage.conditions.empty()) stage.conditions.insert(ConditionTag{});
    running = stage.conditions;
  }
  return schedule;
}

CurriculumSchedule random_curriculum(int total_epochs, int max_stages,
                                     std::mt19937_64& rng) {
  if (total_epochs < 2) {
    throw std::invalid_argument("a curriculum needs at least two training epochs");
  }
  if (max_stages < 1) throw std::invalid_argument("max_stages must be >= 1");
  const int cap = std::min(max_stages, total_epochs - 1);
  std::uniform_int_distribution<int> stage_pick(1, cap);
  const int n = stage_pick(rng);

  std::set<int> starts{1};
  if (n > 1) {
    std::uniform_int_distribution<int> start_pick(2, total_epochs - 1);
    while (static_cast<int>(starts.size()) < n) starts.insert(start_pick(rng));
  }

  std::vector<ConditionTag> order = all_conditions();
  std::shuffle(order.begin(), order.end(), rng);
  std::uniform_int_distribution<int> count_pick(1, static_cast<int>(order.size()));
  std::vector<int> counts(static_cast<std::size_t>(n));
  for (int& c : counts) c = count_pick(rng);
  std::sort(counts.begin(), counts.end());

  CurriculumSchedule schedule;
  std::size_t i = 0;
  for (int start : starts) {
    CurriculumStage stage;
    stage.start_epoch = start;
    stage.conditions.insert(order.begin(), order.begin() + counts[i]);
    schedule.stages.push_back(std::move(stage));
    ++i;
  }
  return schedule;
}

std::pair<Genome, Genome> cross_genomes(const Genome& a, const Genome& b,
                                        const SearchSpace& space, int total_epochs,
                                        double sbx_eta, std::mt19937_64& rng) {
  Genome c1 = a;
  Genome c2 = b;
  for (const ParameterSpec& spec : space.params) {
    const ParamValue& va = a.hyperparams.assignments.at(spec.name);
    const ParamValue& vb = b.hyperparams.assignments.at(spec.name);
    if (const auto* cont = std::get_if<ContinuousParam>(&spec.kind)) {
      const auto [x, y] =
          sbx_crossover(std::get<double>(va), std::get<double>(vb), sbx_eta, cont->lo,
                        cont->hi, rng);
      c1.hyperparams.assignments[spec.name] = x;
      c2.hyperparams.assignments[spec.name] = y;
    } else if (const auto* integer = std::get_if<IntegerParam>(&spec.kind)) {
      const auto [x, y] = sbx_crossover(static_cast<double>(std::get<std::int64_t>(va)),
                                        static_cast<double>(std::get<std::int64_t>(vb)),
                                        sbx_eta, static_cast<double>(integer->lo),
                                        static_cast<double>(integer->hi), rng);
      c1.hyperparams.assignments[spec.name] = clamp_int(x, integer->lo, integer->hi);
      c2.hyperparams.assignments[spec.name] = clamp_int(y, integer->lo, integer->hi);
    } else if (std::holds_alternative<CategoricalParam>(spec.kind)) {
      const auto [x, y] = uniform_crossover(std::get<std::string>(va),
                                            std::get<std::string>(vb), rng);
      c1.hyperparams.assignments[spec.name] = x;
      c2.hyperparams.assignments[spec.name] = y;
    } else {
      // integer tuples swap atomically so element structure survives
      const auto [x, y] = uniform_crossover(std::get<std::vector<std::int64_t>>(va),
                                            std::get<std::vector<std::int64_t>>(vb), rng);
      c1.hyperparams.assignments[spec.name] = x;
      c2.hyperparams.assignments[spec.name] = y;
    }
  }

  const auto& sa = a.curriculum.stages;
  const auto& sb = b.curriculum.stages;
  std::uniform_int_distribution<std::size_t> cut_pick(1, std::min(sa.size(), sb.size()));
  const std::size_t cut = cut_pick(rng);
  c1.curriculum.stages.assign(sa.begin(), sa.begin() + static_cast<std::ptrdiff_t>(cut));
  c1.curriculum.stages.insert(c1.curriculum.stages.end(),
                              sb.begin() + static_cast<std::ptrdiff_t>(std::min(cut, sb.size())),
                              sb.end());
  c2.curriculum.stages.assign(sb.begin(), sb.begin() + static_cast<std::ptrdiff_t>(std::min(cut, sb.size())));
  c2.curriculum.stages.insert(c2.curriculum.stages.end(),
                              sa.begin() + static_cast<std::ptrdiff_t>(cut), sa.end());
  c1.curriculum = repair_curriculum(std::move(c1.curriculum), total_epochs);
  c2.curriculum = repair_curriculum(std::move(c2.curriculum), total_epochs);
  return {c1, c2};
}

Genome mutate_genome(const Genome& g, const MutationRates& rates, const SearchSpace& space,
                     int total_epochs, std::mt19937_64& rng) {
  check_rate(rates.continuous, "continuous");
  check_rate(rates.categorical, "categorical");
  check_rate(rates.boundary_shift, "boundary_shift");
  check_rate(rates.condition_add, "condition_add");

  Genome m = g;
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (const ParameterSpec& spec : space.params) {
    ParamValue& value = m.hyperparams.assignments.at(spec.name);
    if (const auto* cont = std::get_if<ContinuousParam>(&spec.kind)) {
      if (unit(rng) < rates.continuous) {
        std::normal_distribution<double> nudge(0.0, 0.1 * (cont->hi - cont->lo));
        value = clamp(std::get<double>(value) + nudge(rng), cont->lo, cont->hi);
      }
    } else if (const auto* integer = std::get_if<IntegerParam>(&spec.kind)) {
      if (unit(rng) < rates.continuous) {
        std::normal_distribution<double> nudge(
            0.0, 0.1 * static_cast<double>(integer->hi - integer->lo));
        value = clamp_int(static_cast<double>(std::get<std::int64_t>(value)) + nudge(rng),
                          integer->lo, integer->hi);
      }
    } else if (const auto* cat = std::get_if<CategoricalParam>(&spec.kind)) {
      if (unit(rng) < rates.categorical) {
        std::uniform_int_distribution<std::size_t> pick(0, cat->values.size() - 1);
        value = cat->values[pick(rng)];
      }
    } else {
      const auto& tuple = std::get<IntTupleParam>(spec.kind);
      auto elems = std::get<std::vector<std::int64_t>>(value);
      for (std::size_t e = 0; e < elems.size(); ++e) {
        if (unit(rng) < rates.continuous) {
          std::normal_distribution<double> nudge(
              0.0, 0.1 * static_cast<double>(tuple.hi[e] - tuple.lo[e]));
          elems[e] = clamp_int(static_cast<double>(elems[e]) + nudge(rng), tuple.lo[e],
                               tuple.hi[e]);
        }
      }
      value = elems;
    }
  }

  auto& stages = m.curriculum.stages;
  for (std::size_t i = 1; i < stages.size(); ++i) {  // the first stage is pinned to epoch 1
    if (unit(rng) < rates.boundary_shift) {
      std::uniform_int_distribution<int> magnitude(1, 5);
      const int shift = magnitude(rng) * (unit(rng) < 0.5 ? -1 : 1);
      stages[i].start_epoch += shift;
    }
  }
  const std::vector<ConditionTag> all = all_conditions();
  for (auto& stage : stages) {
    if (unit(rng) < rates.condition_add) {
      std::vector<ConditionTag> missing;
      for (const ConditionTag& tag : all) {
        if (!stage.conditions.count(tag)) missing.push_back(tag);
      }
      if (!missing.empty()) {
        std::uniform_int_distribution<std::size_t> pick(0, missing.size() - 1);
        // the repair pass carries the new tag into every later stage
        stage.conditions.insert(missing[pick(rng)]);
      }
    }
  }
  m.curriculum = repair_curriculum(std::move(m.curriculum), total_epochs);
  return m;
}

Genome mutate_genome(const Genome& g, const MutationRates& rates, const SearchSpace& space,
                     int total_epochs, std::uint64_t seed) {
  auto rng = make_rng(seed);
  return mutate_genome(g, rates, space, total_epochs, rng);
}

std::size_t tournament_select(const std::vector<Fitness>& fitness, int k,
                              std::mt19937_64& rng) {
  if (fitness.empty()) throw std::invalid_argument("tournament over an empty population");
  if (k < 1) throw std::invalid_argument("tournament size must be >= 1");
  std::uniform_int_distribution<std::size_t> pick(0, fitness.size() - 1);
  std::size_t best = pick(rng);
  for (int i = 1; i < k; ++i) {
    const std::size_t c = pick(rng);
    if (fitness[c].scalar > fitness[best].scalar ||
        (fitness[c].scalar == fitness[best].scalar && c < best)) {
      best = c;
    }
  }
  return best;
}

Fitness evaluate_fitness(const Genome& g, Trainer& trainer, const ArchitectureClass& arch,
                         double lambda, double reference_cost, std::uint64_t seed) {
  if (!(reference_cost > 0.0)) throw std::invalid_argument("reference cost must be positive");
  FidelityLevel full;
  full.epoch_budget = trainer.full_epochs();
  full.data_fraction = 1.0;
  full.rung = 0;

  Fitness f;
  try {
    const TrialRecord rec = trainer.run(arch, g.hyperparams, full, &g.curriculum, seed);
    f.performance = trial_objective(rec);
    double cost = 0.0;
    for (int t = 1; t <= rec.log.completed; ++t) cost += g.curriculum.coverage_at(t);
    f.cost = cost;
    f.scalar = f.performance - lambda * (cost / reference_cost);
  } catch (const TrainerError& err) {
    (void)err;
    f.failed = true;
    f.scalar = kFailedScalar;
  }
  return f;
}

EccoResult ecco_search(const SearchSpace& space, Trainer& trainer, const EccoConfig& config,
                       std::uint64_t seed, const EccoEvalCallback& on_eval,
                       const std::vector<EccoEval>* prior) {
  space.validate();
  if (config.pop_size < 2) throw std::invalid_argument("population needs at least two genomes");
  if (config.generations < 0) throw std::invalid_argument("generations must be >= 0");
  if (config.tournament_k < 1) throw std::invalid_argument("tournament size must be >= 1");
  if (config.max_init_stages < 1) throw std::invalid_argument("max_init_stages must be >= 1");
  if (config.failure_cap < 0) throw std::invalid_argument("failure cap must be non-negative");
  if (config.workers < 1) throw std::invalid_argument("worker count must be >= 1");
  check_rate(config.rates.continuous, "continuous");
  check_rate(config.rates.categorical, "categorical");
  check_rate(config.rates.boundary_shift, "boundary_shift");
  check_rate(config.rates.condition_add, "condition_add");

  const int total_epochs = trainer.full_epochs();
  if (total_epochs < 2) {
    throw std::invalid_argument("curriculum evolution needs at least two training epochs");
  }
  ArchitectureClass arch;
  if (config.class_name.empty()) {
    arch = space.classes.front();
  } else if (space.has_class(config.class_name)) {
    arch = ArchitectureClass{config.class_name};
  } else {
    throw std::invalid_argument("unknown class: " + config.class_name);
  }
  // a full-curriculum run trains every epoch at coverage 1
  const double reference_cost = static_cast<double>(total_epochs);

  std::vector<EccoEval> evals;
  std::size_t replay_pos = 0;
  int failures = 0;

  auto evaluate_slots = [&](int gen, const std::vector<Genome>& pop,
                            std::vector<Fitness>& fits, const std::vector<int>& slots) {
    std::vector<int> fresh;
    for (int slot : slots) {
      if (prior != nullptr && replay_pos < prior->size()) {
        const EccoEval& prev = (*prior)[replay_pos];
        if (prev.generation != gen || prev.slot != slot ||
            !(prev.genome == pop[static_cast<std::size_t>(slot)])) {
          std::ostringstream msg;
          msg << "prior history diverges at generation " << gen << " slot " << slot;
          throw std::invalid_argument(msg.str());
        }
        fits[static_cast<std::size_t>(slot)] = prev.fitness;
        evals.push_back(prev);
        ++replay_pos;
        if (prev.fitness.failed && ++failures > config.failure_cap) {
          throw std::runtime_error("failure cap exceeded at generation " +
                                   std::to_string(gen));
        }
      } else {
        fresh.push_back(slot);
      }
    }
    if (fresh.empty()) return;
    const std::vector<Fitness> results =
        parallel_map(fresh.size(), config.workers, [&](std::size_t i) {
          const int slot = fresh[i];
          return evaluate_fitness(pop[static_cast<std::size_t>(slot)], trainer, arch,
                                  config.lambda, reference_cost,
                                  subseed(seed, "ecco-eval", static_cast<std::uint64_t>(gen),
                                          static_cast<std::uint64_t>(slot)));
        });
    for (std::size_t i = 0; i < fresh.size(); ++i) {
      const int slot = fresh[i];
      fits[static_cast<std::size_t>(slot)] = results[i];
      EccoEval ev;
      ev.generation = gen;
      ev.slot = slot;
      ev.genome = pop[static_cast<std::size_t>(slot)];
      ev.fitness = results[i];
      evals.push_back(ev);
      if (on_eval) on_eval(evals.back());
      if (results[i].failed && ++failures > config.failure_cap) {
        throw std::runtime_error("failure cap exceeded at generation " + std::to_string(gen) +
                                 " slot " + std::to_string(slot));
      }
    }
  };

  auto best_index = [](const std::vector<Fitness>& fits) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < fits.size(); ++i) {
      if (fits[i].scalar > fits[best].scalar) best = i;
    }
    return best;
  };

  std::vector<Genome> pop(static_cast<std::size_t>(config.pop_size));
  for (int i = 0; i < config.pop_size; ++i) {
    auto rng = make_rng(subseed(seed, "ecco-init", static_cast<std::uint64_t>(i)));
    pop[static_cast<std::size_t>(i)].hyperparams = sample_random(space, rng);
    pop[static_cast<std::size_t>(i)].curriculum =
        random_curriculum(total_epochs, config.max_init_stages, rng);
  }
  std::vector<Fitness> fits(pop.size());
  std::vector<int> all_slots(pop.size());
  for (std::size_t i = 0; i < pop.size(); ++i) all_slots[i] = static_cast<int>(i);
  evaluate_slots(0, pop, fits, all_slots);

  std::size_t bi = best_index(fits);
  Genome best = pop[bi];
  Fitness best_fit = fits[bi];

  std::vector<GenerationStats> history;
  history.reserve(static_cast<std::size_t>(config.generations));
  std::vector<int> breed_slots(all_slots.begin() + 1, all_slots.end());

  for (int gen = 1; gen <= config.generations; ++gen) {
    std::vector<Genome> next(pop.size());
    std::vector<Fitness> next_fits(pop.size());
    const std::size_t elite = best_index(fits);
    next[0] = pop[elite];
    next_fits[0] = fits[elite];  // carried forward, not re-evaluated
    for (int j = 1; j < config.pop_size; ++j) {
      auto rng = make_rng(subseed(seed, "ecco-breed", static_cast<std::uint64_t>(gen),
                                  static_cast<std::uint64_t>(j)));
      const std::size_t pa = tournament_select(fits, config.tournament_k, rng);
      const std::size_t pb = tournament_select(fits, config.tournament_k, rng);
      const auto children =
          cross_genomes(pop[pa], pop[pb], space, total_epochs, config.sbx_eta, rng);
      next[static_cast<std::size_t>(j)] =
          mutate_genome(children.first, config.rates, space, total_epochs, rng);
    }
    pop = std::move(next);
    fits = std::move(next_fits);
    evaluate_slots(gen, pop, fits, breed_slots);

    const std::size_t gb = best_index(fits);
    if (fits[gb].scalar > best_fit.scalar) {
      best = pop[gb];
      best_fit = fits[gb];
    }
    double mean = 0.0;
    for (const Fitness& f : fits) mean += f.scalar;
    mean /= static_cast<double>(fits.size());
    GenerationStats stats;
    stats.generation = gen;
    stats.best_scalar = fits[gb].scalar;
    stats.mean_scalar = mean;
    history.push_back(stats);
  }

  EccoResult result;
  result.best = std::move(best);
  result.best_fitness = best_fit;
  result.history = std::move(history);
  result.evaluations = std::move(evals);
  return result;
}

}  // namespace stride
