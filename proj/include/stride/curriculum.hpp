#pragma once

#include <set>
#include <vector>

#include "stride/conditions.hpp"

namespace stride {

/// Staged expansion of the training conditions over epochs. Stage k applies
/// from start_epoch until the next stage begins.
struct CurriculumStage {
  int start_epoch = 1;
  std::set<ConditionTag> conditions;

  bool operator==(const CurriculumStage&) const = default;
};

struct CurriculumSchedule {
  std::vector<CurriculumStage> stages;

  bool operator==(const CurriculumSchedule&) const = default;

  /// Violation messages against the schedule invariants: start epochs
  /// strictly increasing with the first at 1, every start below
  /// total_epochs, non-empty condition sets that only ever expand.
  std::vector<std::string> validate(int total_epochs) const;

  /// Condition set active at a 1-based epoch.
  const std::set<ConditionTag>& conditions_at(int epoch) const;

  /// Fraction of the 16 possible conditions active at a 1-based epoch.
  double coverage_at(int epoch) const;
};

/// Single stage starting at epoch 1 with every condition enabled.
CurriculumSchedule full_curriculum();

}  // namespace stride
