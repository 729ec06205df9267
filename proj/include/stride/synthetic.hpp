#pragma once

#include <map>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "stride/trainer.hpp"

namespace stride {

/// Exponential-decay loss curve parameters for one architecture class.
/// Performance peaks at a planted optimum configuration and falls off with
/// squared distance in the unit-cube encoding; better configurations also
/// converge faster, so early dynamics carry signal about final quality.
struct CurveParams {
  double p_best = 0.9;          // performance at the planted optimum
  double p_spread = 0.6;        // performance drop at the farthest corner
  double initial_loss = 2.5;    // L0
  double rate_base = 0.15;      // decay rate at the farthest corner
  double rate_gain = 0.5;       // extra rate at the optimum
  double batch_var_coeff = 0.05;  // batch-loss variance per unit of loss
};

struct ClassTarget {
  Configuration optimum;
  CurveParams curve;
};

/// Closed-form training simulator:
///   loss(t) = Linf + (L0 - Linf) * exp(-r * t) + noise, clipped at 0
/// with Linf = 1 - P and r both smooth functions of the encoded
/// configuration. The planted optimum and its performance are stored, so
/// searches can be scored against exact ground truth.
///
/// Reduced data fraction raises the asymptote by data_penalty * (1 - frac).
/// A curriculum schedule modulates the asymptote through its condition
/// coverage: final performance loses coverage_penalty * (1 - final coverage)
/// and earliness_weight * mean_t(1 - coverage(t)).
class SyntheticBenchmark {
 public:
  SyntheticBenchmark(SearchSpace space, int full_epochs, double noise,
                     std::map<std::string, ClassTarget> targets);

  /// Plants one optimum per class by seeded sampling.
  static SyntheticBenchmark make_default(SearchSpace space, int full_epochs,
                                         double noise, std::uint64_t seed);

  static SyntheticBenchmark from_json_text(const std::string& text);
  static SyntheticBenchmark from_file(const std::string& path);
  std::string to_json_text() const;

  const SearchSpace& space() const { return space_; }
  int full_epochs() const { return full_epochs_; }
  double noise() const { return noise_; }
  void set_noise(double sigma) { noise_ = sigma; }
  double data_penalty = 0.05;
  double performance_noise = 0.0;
  double coverage_penalty = 0.3;   // cost of never seeing some conditions
  double earliness_weight = 0.2;   // cost of introducing conditions late

  /// Ground-truth full-fidelity performance of a configuration (no
  /// curriculum, full data).
  double p_true(const std::string& class_name, const Configuration& config) const;

  /// Performance including data-fraction and curriculum effects.
  double p_effective(const std::string& class_name, const Configuration& config,
                     double data_fraction, const CurriculumSchedule* curriculum,
                     int total_epochs) const;

  /// Noise-free loss at a 1-based epoch.
  double clean_loss(const std::string& class_name, const Configuration& config,
                    int epoch, double data_fraction,
                    const CurriculumSchedule* curriculum, int total_epochs) const;

  TrialRecord simulate(const ArchitectureClass& arch, const Configuration& config,
                       const FidelityLevel& fidelity,
                       const CurriculumSchedule* curriculum,
                       std::uint64_t seed) const;

  /// Planted argmax of p_true over every class, with its value.
  std::pair<Configuration, double> optimum() const;
  std::pair<Configuration, double> optimum_for(const std::string& class_name) const;
  const std::string& best_class() const;

  /// Analytic maximum of performance - lambda * (cost / full cost) over all
  /// configurations and valid curriculum schedules at full fidelity, where a
  /// trial's cost is the coverage-weighted epoch count.
  double best_curriculum_scalar(double lambda) const;

  /// Coverage-weighted epoch cost of a schedule over total_epochs, in units
  /// of full-coverage epochs.
  static double curriculum_cost(const CurriculumSchedule& schedule,
                                int total_epochs);

 private:
  struct ClassModel {
    ClassTarget target;
    std::vector<double> x_star;
    double q_max = 1.0;
  };

  const ClassModel& model(const std::string& class_name) const;
  double q_norm(const ClassModel& m, const Configuration& config) const;

  SearchSpace space_;
  int full_epochs_;
  double noise_;
  std::map<std::string, ClassModel> models_;
};

TrialRecord simulate_training(const SyntheticBenchmark& bench,
                              const ArchitectureClass& arch,
                              const Configuration& config,
                              const FidelityLevel& fidelity, std::uint64_t seed);

std::pair<Configuration, double> benchmark_optimum(const SyntheticBenchmark& bench);

/// In-process Trainer backed by the simulator.
class SyntheticTrainer : public Trainer {
 public:
  explicit SyntheticTrainer(SyntheticBenchmark bench) : bench_(std::move(bench)) {}

  TrialRecord run(const ArchitectureClass& arch, const Configuration& config,
                  const FidelityLevel& fidelity, const CurriculumSchedule* curriculum,
                  std::uint64_t seed) override {
    return bench_.simulate(arch, config, fidelity, curriculum, seed);
  }

  int full_epochs() const override { return bench_.full_epochs(); }

  const SyntheticBenchmark& benchmark() const { return bench_; }

 private:
  SyntheticBenchmark bench_;
};

}  // namespace stride
