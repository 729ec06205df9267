#include "stride/json_io.hpp"

namespace stride {

using nlohmann::json;

json value_to_json(const ParamValue& v) {
  if (const auto* d = std::get_if<double>(&v)) return *d;
  if (const auto* i = std::get_if<std::int64_t>(&v)) return *i;
  if (const auto* s = std::get_if<std::string>(&v)) return *s;
  return std::get<std::vector<std::int64_t>>(v);
}

ParamValue value_from_json(const ParameterSpec& spec, const json& j) {
  if (std::holds_alternative<ContinuousParam>(spec.kind)) {
    return j.get<double>();
  }
  if (std::holds_alternative<IntegerParam>(spec.kind)) {
    return j.get<std::int64_t>();
  }
  if (std::holds_alternative<CategoricalParam>(spec.kind)) {
    return j.get<std::string>();
  }
  return j.get<std::vector<std::int64_t>>();
}

json config_to_json(const Configuration& config) {
  json j = json::object();
  for (const auto& [name, value] : config.assignments)
    j[name] = value_to_json(value);
  return j;
}

Configuration config_from_json(const SearchSpace& space, const json& j) {
  Configuration cfg;
  for (const auto& [name, value] : j.items()) {
    cfg.assignments[name] = value_from_json(space.param(name), value);
  }
  return cfg;
}

json curriculum_to_json(const CurriculumSchedule& schedule) {
  json stages = json::array();
  for (const auto& st : schedule.stages) {
    json conds = json::array();
    for (const auto& c : st.conditions) conds.push_back(to_string(c));
    stages.push_back({{"start_epoch", st.start_epoch}, {"conditions", conds}});
  }
  return stages;
}

CurriculumSchedule curriculum_from_json(const json& j) {
  CurriculumSchedule s;
  for (const auto& stj : j) {
    CurriculumStage st;
    st.start_epoch = stj.at("start_epoch").get<int>();
    for (const auto& c : stj.at("conditions"))
      st.conditions.insert(condition_from_string(c.get<std::string>()));
    s.stages.push_back(std::move(st));
  }
  return s;
}

json log_to_json(const TrainingLog& log) {
  json epochs = json::array();
  for (const auto& e : log.epochs) {
    json ej = {{"epoch", e.epoch},
               {"train_loss", e.train_loss},
               {"batch_loss_variance", e.batch_loss_variance}};
    if (e.val_metric) ej["val_metric"] = *e.val_metric;
    epochs.push_back(std::move(ej));
  }
  return {{"epochs", epochs}, {"budget", log.budget}, {"completed", log.completed}};
}

TrainingLog log_from_json(const json& j) {
  TrainingLog log;
  log.budget = j.at("budget").get<int>();
  log.completed = j.at("completed").get<int>();
  for (const auto& ej : j.at("epochs")) {
    EpochRecord e;
    e.epoch = ej.at("epoch").get<int>();
    e.train_loss = ej.at("train_loss").get<double>();
    e.batch_loss_variance = ej.at("batch_loss_variance").get<double>();
    if (ej.contains("val_metric") && !ej.at("val_metric").is_null())
      e.val_metric = ej.at("val_metric").get<double>();
    log.epochs.push_back(std::move(e));
  }
  return log;
}

json fidelity_to_json(const FidelityLevel& f) {
  return {{"epoch_budget", f.epoch_budget},
          {"data_fraction", f.data_fraction},
          {"rung", f.rung}};
}

FidelityLevel fidelity_from_json(const json& j) {
  FidelityLevel f;
  f.epoch_budget = j.at("epoch_budget").get<int>();
  f.data_fraction = j.at("data_fraction").get<double>();
  f.rung = j.value("rung", 0);
  return f;
}

json trial_to_json(const TrialRecord& t) {
  json j = {{"arch", t.arch.name},
            {"config", config_to_json(t.config)},
            {"fidelity", fidelity_to_json(t.fidelity)},
            {"log", log_to_json(t.log)}};
  j["final_performance"] =
      t.final_performance ? json(*t.final_performance) : json(nullptr);
  return j;
}

TrialRecord trial_from_json(const SearchSpace& space, const json& j) {
  TrialRecord t;
  t.arch.name = j.at("arch").get<std::string>();
  t.config = config_from_json(space, j.at("config"));
  t.fidelity = fidelity_from_json(j.at("fidelity"));
  t.log = log_from_json(j.at("log"));
  if (!j.at("final_performance").is_null())
    t.final_performance = j.at("final_performance").get<double>();
  return t;
}

}  // namespace stride
