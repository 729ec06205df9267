#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "stride/trainer.hpp"

namespace stride {

/// One trial request as it crosses the process boundary.
struct TrialRequest {
  std::string architecture;
  Configuration config;
  int epoch_budget = 1;
  double data_fraction = 1.0;
  std::optional<CurriculumSchedule> curriculum;
  std::uint64_t seed = 0;
};

/// Wire format, one object per line. The engine writes a single request to
/// the worker's stdin; the worker answers with one epoch record per line and
/// a final line carrying `final_performance` (a number or null).
std::string format_trial_request(const ArchitectureClass& arch, const Configuration& config,
                                 const FidelityLevel& fidelity,
                                 const CurriculumSchedule* curriculum, std::uint64_t seed);
TrialRequest parse_trial_request(const SearchSpace& space, const std::string& line);

std::string format_epoch_record(const EpochRecord& e);
std::string format_terminal_record(const std::optional<double>& final_performance);

/// Trainer that launches one worker process per trial and speaks the line
/// protocol above. Each call is independent, so trials can run from several
/// threads at once; a trial that overruns its deadline is killed (whole
/// process group) and reported as a timeout.
class SubprocessTrainer : public Trainer {
 public:
  SubprocessTrainer(std::vector<std::string> argv, int full_epochs,
                    double timeout_seconds = 3600.0);

  TrialRecord run(const ArchitectureClass& arch, const Configuration& config,
                  const FidelityLevel& fidelity, const CurriculumSchedule* curriculum,
                  std::uint64_t seed) override;

  int full_epochs() const override { return full_epochs_; }

  /// Whitespace tokenization for command lines given as one string.
  static std::vector<std::string> split_command(const std::string& command);

 private:
  std::vector<std::string> argv_;
  int full_epochs_;
  double timeout_seconds_;
};

}  // namespace stride
