#include "stride/curriculum.hpp"

#include <algorithm>

namespace stride {

std::vector<std::string> CurriculumSchedule::validate(int total_epochs) const {
  std::vector<std::string> out;
  if (stages.empty()) {
    out.push_back("curriculum has no stages");
    return out;
  }
  if (stages.front().start_epoch != 1)
    out.push_back("first stage must start at epoch 1");
  for (std::size_t i = 0; i < stages.size(); ++i) {
    const auto& st = stages[i];
    if (st.conditions.empty())
      out.push_back("stage " + std::to_string(i) + " has no conditions");
    if (st.start_epoch >= total_epochs)
      out.push_back("stage " + std::to_string(i) + " starts at epoch " +
                    std::to_string(st.start_epoch) + " but training has only " +
                    std::to_string(total_epochs) + " epochs");
    if (i > 0) {
      if (st.start_epoch <= stages[i - 1].start_epoch)
        out.push_back("stage " + std::to_string(i) + " does not start after stage " +
                      std::to_string(i - 1));
      if (!std::includes(st.conditions.begin(), st.conditions.end(),
                         stages[i - 1].conditions.begin(),
                         stages[i - 1].conditions.end()))
        out.push_back("stage " + std::to_string(i) +
                      " drops conditions from the previous stage");
    }
  }
  return out;
}

const std::set<ConditionTag>& CurriculumSchedule::conditions_at(int epoch) const {
  const CurriculumStage* active = &stages.front();
  for (const auto& st : stages) {
    if (st.start_epoch <= epoch) active = &st;
  }
  return active->conditions;
}

double CurriculumSchedule::coverage_at(int epoch) const {
  return static_cast<double>(conditions_at(epoch).size()) / 16.0;
}

CurriculumSchedule full_curriculum() {
  CurriculumSchedule s;
  CurriculumStage st;
  st.start_epoch = 1;
  for (const auto& c : all_conditions()) st.conditions.insert(c);
  s.stages.push_back(std::move(st));
  return s;
}

}  // namespace stride
