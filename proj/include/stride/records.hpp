#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "stride/ecco.hpp"
#include "stride/grm.hpp"
#include "stride/timfbo.hpp"

namespace stride {

/// Audit-record serialization. Doubles round-trip exactly; a failed-trial
/// objective (NaN) maps to JSON null.
nlohmann::json episode_to_json(const SearchEpisode& e);
SearchEpisode episode_from_json(const SearchSpace& space, const nlohmann::json& j);

nlohmann::json mfbo_trial_to_json(const MfboTrial& t);
MfboTrial mfbo_trial_from_json(const SearchSpace& space, const nlohmann::json& j);

nlohmann::json ecco_eval_to_json(const EccoEval& e);
EccoEval ecco_eval_from_json(const SearchSpace& space, const nlohmann::json& j);

/// One record per line. Reading rejects malformed lines with their number.
std::vector<nlohmann::json> read_jsonl(const std::string& path);
void append_jsonl(const std::string& path, const nlohmann::json& record);

}  // namespace stride
