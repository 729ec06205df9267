#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "stride/curriculum.hpp"
#include "stride/search_space.hpp"
#include "stride/trainer.hpp"

namespace stride {

/// Jointly evolved unit: a hyperparameter assignment plus a staged data
/// curriculum.
struct Genome {
  Configuration hyperparams;
  CurriculumSchedule curriculum;

  bool operator==(const Genome&) const = default;
};

/// Dual objective: validation performance discounted by relative cost.
struct Fitness {
  double performance = 0.0;
  double cost = 0.0;  // coverage-weighted epochs actually trained
  double scalar = 0.0;
  bool failed = false;
};

/// Per-gene mutation probabilities. Zero everywhere is the identity.
struct MutationRates {
  double continuous = 0.25;      // Gaussian nudge, sigma = 10% of the range
  double categorical = 0.1;      // uniform resample
  double boundary_shift = 0.3;   // stage start moved by +-uniform(1..5), then repaired
  double condition_add = 0.15;   // stage gains one missing condition tag
};

/// Violations of either genome component; empty means valid.
std::vector<std::string> validate_genome(const SearchSpace& space, const Genome& g,
                                         int total_epochs);

/// Simulated binary crossover on one real gene. Children straddle the
/// parents with spread controlled by eta and are clipped to [lo, hi];
/// identical parents pass through exactly, and the children's midpoint
/// equals the parents' midpoint before clipping.
std::pair<double, double> sbx_crossover(double p1, double p2, double eta, double lo,
                                        double hi, std::mt19937_64& rng);
std::pair<double, double> sbx_crossover(double p1, double p2, double eta, double lo,
                                        double hi, std::uint64_t seed);

/// Each child independently inherits from either parent with probability 1/2.
template <typename T>
std::pair<T, T> uniform_crossover(const T& p1, const T& p2, std::mt19937_64& rng) {
  std::bernoulli_distribution coin(0.5);
  const T& c1 = coin(rng) ? p1 : p2;
  const T& c2 = coin(rng) ? p1 : p2;
  return {c1, c2};
}
template <typename T>
std::pair<T, T> uniform_crossover(const T& p1, const T& p2, std::uint64_t seed) {
  auto rng = std::mt19937_64(seed);
  return uniform_crossover(p1, p2, rng);
}

/// Restores a schedule to validity in place: first stage pinned to epoch 1,
/// starts clamped into strictly increasing order below total_epochs, and
/// condition sets expanded along the stage chain so they only ever grow.
CurriculumSchedule repair_curriculum(CurriculumSchedule schedule, int total_epochs);

/// Seeded valid random schedule with 1..max_stages stages.
CurriculumSchedule random_curriculum(int total_epochs, int max_stages,
                                     std::mt19937_64& rng);

/// Gene-wise crossover: SBX for continuous and integer genes, uniform for
/// categoricals and integer tuples (kept atomic), one-point crossover on the
/// stage lists followed by repair.
std::pair<Genome, Genome> cross_genomes(const Genome& a, const Genome& b,
                                        const SearchSpace& space, int total_epochs,
                                        double sbx_eta, std::mt19937_64& rng);

/// Per-gene perturbations plus curriculum boundary shifts and condition
/// additions; the result is repaired, never invalid.
Genome mutate_genome(const Genome& g, const MutationRates& rates, const SearchSpace& space,
                     int total_epochs, std::mt19937_64& rng);
Genome mutate_genome(const Genome& g, const MutationRates& rates, const SearchSpace& space,
                     int total_epochs, std::uint64_t seed);

/// Index of the best of k uniform draws (with replacement); equal scalars go
/// to the earliest population index.
std::size_t tournament_select(const std::vector<Fitness>& fitness, int k,
                              std::mt19937_64& rng);

/// Runs one full-epoch curriculum trial and scores it:
/// scalar = performance - lambda * cost / reference_cost, where cost is the
/// sum over trained epochs of the curriculum's condition coverage. A trial
/// failure yields the worst-scalar sentinel, flagged.
Fitness evaluate_fitness(const Genome& g, Trainer& trainer, const ArchitectureClass& arch,
                         double lambda, double reference_cost, std::uint64_t seed);

struct EccoConfig {
  int pop_size = 16;
  int generations = 30;
  double lambda = 0.1;
  double sbx_eta = 15.0;
  int tournament_k = 3;
  int max_init_stages = 3;
  MutationRates rates;
  std::string class_name;  // empty: first class in the space
  int failure_cap = 10;
  int workers = 1;
};

/// One fitness evaluation, in run order: the whole initial population is
/// generation 0; later generations evaluate slots 1..pop_size-1 because the
/// elite keeps its carried fitness.
struct EccoEval {
  int generation = 0;
  int slot = 0;
  Genome genome;
  Fitness fitness;
};

struct GenerationStats {
  int generation = 0;  // 1-based over evolved generations
  double best_scalar = 0.0;
  double mean_scalar = 0.0;
};

struct EccoResult {
  Genome best;
  Fitness best_fitness;
  std::vector<GenerationStats> history;  // one entry per evolved generation
  std::vector<EccoEval> evaluations;     // audit trail, replayable
};

using EccoEvalCallback = std::function<void(const EccoEval&)>;

/// Generational loop: evaluate everyone, copy the single best forward with
/// its fitness (so the per-generation best scalar never decreases), breed the
/// rest by tournament -> crossover -> mutation.
///
/// Reproducibility contract (also used by resume): member i of the initial
/// population is drawn from subseed(seed, "ecco-init", i) (configuration,
/// then curriculum, one stream); the trial seed of (generation g, slot i) is
/// subseed(seed, "ecco-eval", g, i); slot j > 0 of generation g is bred from
/// one stream seeded subseed(seed, "ecco-breed", g, j) consumed in the order
/// tournament, tournament, cross_genomes, mutate_genome, keeping the first
/// crossover child. Results are independent of the worker count; pass a
/// prior evaluation list to resume without re-running trials.
EccoResult ecco_search(const SearchSpace& space, Trainer& trainer, const EccoConfig& config,
                       std::uint64_t seed, const EccoEvalCallback& on_eval = {},
                       const std::vector<EccoEval>* prior = nullptr);

}  // namespace stride
