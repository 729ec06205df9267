#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "stride/curriculum.hpp"
#include "stride/search_space.hpp"

namespace stride {

struct EpochRecord {
  int epoch = 0;  // 1-based
  double train_loss = 0.0;
  double batch_loss_variance = 0.0;
  std::optional<double> val_metric;
};

struct TrainingLog {
  std::vector<EpochRecord> epochs;
  int budget = 0;     // epochs requested
  int completed = 0;  // epochs actually run

  std::vector<std::string> validate() const;
};

/// Cheapness level of a trial. Rungs are ordered by strictly increasing cost.
struct FidelityLevel {
  int epoch_budget = 1;
  double data_fraction = 1.0;
  int rung = 0;
};

struct TrialRecord {
  ArchitectureClass arch;
  Configuration config;
  FidelityLevel fidelity;
  TrainingLog log;
  // Present only when the trial ran to completion (full data, full epochs).
  std::optional<double> final_performance;
};

/// Fixed-order summary of a training log:
///   [0] bias 1.0
///   [1] first-epoch loss
///   [2] last-epoch loss
///   [3] mean per-epoch loss delta
///   [4] least-squares slope of log(loss) vs epoch (positive losses only)
///   [5] variance of the last min(3, completed) epochs' batch-loss variances
/// Delta and slope are 0 whenever fewer than 2 usable epochs exist.
struct DynamicsFeatures {
  static constexpr std::size_t kDim = 6;
  std::array<double, kDim> v{};

  double dot(const std::vector<double>& w) const;
};

DynamicsFeatures extract_dynamics_features(const TrainingLog& log);

class TrainerError : public std::runtime_error {
 public:
  enum class Kind { launch, protocol, timeout };

  TrainerError(Kind kind, const std::string& message,
               std::optional<TrainingLog> partial = std::nullopt)
      : std::runtime_error(message), kind_(kind), partial_(std::move(partial)) {}

  Kind kind() const { return kind_; }
  const std::optional<TrainingLog>& partial_log() const { return partial_; }

 private:
  Kind kind_;
  std::optional<TrainingLog> partial_;
};

/// Evaluation environment for one trial. Implementations must be safe to
/// call from several worker threads at once.
class Trainer {
 public:
  virtual ~Trainer() = default;

  virtual TrialRecord run(const ArchitectureClass& arch, const Configuration& config,
                          const FidelityLevel& fidelity,
                          const CurriculumSchedule* curriculum,
                          std::uint64_t seed) = 0;

  /// Epoch count of a run-to-completion trial.
  virtual int full_epochs() const = 0;
};

inline TrialRecord run_trial(Trainer& trainer, const ArchitectureClass& arch,
                             const Configuration& config,
                             const FidelityLevel& fidelity, std::uint64_t seed) {
  return trainer.run(arch, config, fidelity, nullptr, seed);
}

/// Observed objective of a trial for search loops: final performance when the
/// trial completed, otherwise the latest validation metric if the trainer
/// reported one, otherwise 1 - last training loss clamped to [0,1].
double trial_objective(const TrialRecord& trial);

}  // namespace stride
