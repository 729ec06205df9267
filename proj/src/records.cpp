#include "stride/records.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>

#include "stride/json_io.hpp"

namespace stride {

using nlohmann::json;

json episode_to_json(const SearchEpisode& e) {
  json j = {{"index", e.index},
            {"phase", e.phase},
            {"class", e.class_name},
            {"action_id", e.action_id},
            {"config", config_to_json(e.config)},
            {"features", e.features.v},
            {"reward", e.reward},
            {"epsilon", e.epsilon},
            {"reused_probe", e.reused_probe},
            {"epochs_cost", e.epochs_cost}};
  j["q_after"] = e.q_after ? json(*e.q_after) : json(nullptr);
  return j;
}

SearchEpisode episode_from_json(const SearchSpace& space, const json& j) {
  SearchEpisode e;
  e.index = j.at("index").get<int>();
  e.phase = j.at("phase").get<int>();
  e.class_name = j.at("class").get<std::string>();
  e.action_id = j.at("action_id").get<std::size_t>();
  e.config = config_from_json(space, j.at("config"));
  const auto& feats = j.at("features");
  if (feats.size() != DynamicsFeatures::kDim)
    throw std::runtime_error("episode features must have " +
                             std::to_string(DynamicsFeatures::kDim) + " entries");
  for (std::size_t i = 0; i < DynamicsFeatures::kDim; ++i)
    e.features.v[i] = feats.at(i).get<double>();
  e.reward = j.at("reward").get<double>();
  if (!j.at("q_after").is_null()) e.q_after = j.at("q_after").get<double>();
  e.epsilon = j.at("epsilon").get<double>();
  e.reused_probe = j.at("reused_probe").get<bool>();
  e.epochs_cost = j.at("epochs_cost").get<int>();
  return e;
}

json mfbo_trial_to_json(const MfboTrial& t) {
  json j = {{"index", t.index},
            {"bracket", t.bracket},
            {"rung", t.rung},
            {"class", t.class_name},
            {"config", config_to_json(t.config)},
            {"cost", t.cost},
            {"failed", t.failed},
            {"error", t.error}};
  j["objective"] = std::isnan(t.objective) ? json(nullptr) : json(t.objective);
  return j;
}

MfboTrial mfbo_trial_from_json(const SearchSpace& space, const json& j) {
  MfboTrial t;
  t.index = j.at("index").get<std::size_t>();
  t.bracket = j.at("bracket").get<std::size_t>();
  t.rung = j.at("rung").get<std::size_t>();
  t.class_name = j.at("class").get<std::string>();
  t.config = config_from_json(space, j.at("config"));
  t.objective = j.at("objective").is_null() ? std::nan("")
                                            : j.at("objective").get<double>();
  t.cost = j.at("cost").get<double>();
  t.failed = j.at("failed").get<bool>();
  t.error = j.at("error").get<std::string>();
  return t;
}

json ecco_eval_to_json(const EccoEval& e) {
  return {{"generation", e.generation},
          {"slot", e.slot},
          {"config", config_to_json(e.genome.hyperparams)},
          {"curriculum", curriculum_to_json(e.genome.curriculum)},
          {"fitness",
           {{"performance", e.fitness.performance},
            {"cost", e.fitness.cost},
            {"scalar", e.fitness.scalar},
            {"failed", e.fitness.failed}}}};
}

EccoEval ecco_eval_from_json(const SearchSpace& space, const json& j) {
  EccoEval e;
  e.generation = j.at("generation").get<int>();
  e.slot = j.at("slot").get<int>();
  e.genome.hyperparams = config_from_json(space, j.at("config"));
  e.genome.curriculum = curriculum_from_json(j.at("curriculum"));
  const auto& f = j.at("fitness");
  e.fitness.performance = f.at("performance").get<double>();
  e.fitness.cost = f.at("cost").get<double>();
  e.fitness.scalar = f.at("scalar").get<double>();
  e.fitness.failed = f.at("failed").get<bool>();
  return e;
}

std::vector<json> read_jsonl(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::vector<json> records;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      records.push_back(json::parse(line));
    } catch (const json::parse_error& err) {
      throw std::runtime_error(path + " line " + std::to_string(line_no) +
                               ": " + err.what());
    }
  }
  return records;
}

void append_jsonl(const std::string& path, const json& record) {
  std::ofstream out(path, std::ios::app);
  if (!out) throw std::runtime_error("cannot open " + path + " for append");
  out << record.dump() << "\n";
  out.flush();
  if (!out) throw std::runtime_error("write to " + path + " failed");
}

}  // namespace stride
