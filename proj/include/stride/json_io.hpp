#pragma once

#include <json.hpp>

#include "stride/curriculum.hpp"
#include "stride/search_space.hpp"
#include "stride/trainer.hpp"

namespace stride {

nlohmann::json value_to_json(const ParamValue& v);
/// Reads a value using the parameter spec to fix the type (integer literals
/// coerce to double for continuous parameters and so on).
ParamValue value_from_json(const ParameterSpec& spec, const nlohmann::json& j);

nlohmann::json config_to_json(const Configuration& config);
Configuration config_from_json(const SearchSpace& space, const nlohmann::json& j);

nlohmann::json curriculum_to_json(const CurriculumSchedule& schedule);
CurriculumSchedule curriculum_from_json(const nlohmann::json& j);

nlohmann::json log_to_json(const TrainingLog& log);
TrainingLog log_from_json(const nlohmann::json& j);

nlohmann::json fidelity_to_json(const FidelityLevel& f);
FidelityLevel fidelity_from_json(const nlohmann::json& j);

nlohmann::json trial_to_json(const TrialRecord& t);
TrialRecord trial_from_json(const SearchSpace& space, const nlohmann::json& j);

}  // namespace stride
