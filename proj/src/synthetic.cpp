#include "stride/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "stride/json_io.hpp"
#include "stride/rng.hpp"

namespace stride {

namespace {

double clamp01(double v) { return std::clamp(v, 0.0, 1.0); }

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open file: " + path);
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

}  // namespace

SyntheticBenchmark::SyntheticBenchmark(SearchSpace space, int full_epochs,
                                       double noise,
                                       std::map<std::string, ClassTarget> targets)
    : space_(std::move(space)), full_epochs_(full_epochs), noise_(noise) {
  space_.validate();
  if (full_epochs_ < 1) throw std::runtime_error("full_epochs must be >= 1");
  if (noise_ < 0.0) throw std::runtime_error("noise must be >= 0");
  for (const auto& cls : space_.classes) {
    auto it = targets.find(cls.name);
    if (it == targets.end())
      throw std::runtime_error("no target curve for class " + cls.name);
    const ClassTarget& t = it->second;
    if (!(t.curve.p_best > 0.0 && t.curve.p_best <= 1.0))
      throw std::runtime_error("p_best must lie in (0,1] for class " + cls.name);
    if (t.curve.p_spread < 0.0 || t.curve.rate_base <= 0.0 ||
        t.curve.rate_gain < 0.0 || t.curve.initial_loss <= 0.0 ||
        t.curve.batch_var_coeff < 0.0)
      throw std::runtime_error("invalid curve parameters for class " + cls.name);
    ClassModel m;
    m.target = t;
    m.x_star = encode_unit_cube(space_, t.optimum);
    m.q_max = 0.0;
    for (double xi : m.x_star)
      m.q_max += std::max(xi * xi, (1.0 - xi) * (1.0 - xi));
    models_.emplace(cls.name, std::move(m));
  }
}

SyntheticBenchmark SyntheticBenchmark::make_default(SearchSpace space,
                                                    int full_epochs, double noise,
                                                    std::uint64_t seed) {
  space.validate();
  std::map<std::string, ClassTarget> targets;
  for (std::size_t i = 0; i < space.classes.size(); ++i) {
    ClassTarget t;
    t.optimum = sample_random(space, subseed(seed, "plant-optimum", i));
    // Later classes peak slightly lower so one class dominates outright.
    t.curve.p_best = std::max(0.5, 0.9 - 0.02 * static_cast<double>(i));
    targets.emplace(space.classes[i].name, std::move(t));
  }
  return SyntheticBenchmark(std::move(space), full_epochs, noise, std::move(targets));
}

const SyntheticBenchmark::ClassModel& SyntheticBenchmark::model(
    const std::string& class_name) const {
  auto it = models_.find(class_name);
  if (it == models_.end())
    throw std::runtime_error("unknown architecture class: " + class_name);
  return it->second;
}

double SyntheticBenchmark::q_norm(const ClassModel& m,
                                  const Configuration& config) const {
  std::vector<double> x = encode_unit_cube(space_, config);
  double q = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    double d = x[i] - m.x_star[i];
    q += d * d;
  }
  return m.q_max > 0.0 ? q / m.q_max : 0.0;
}

double SyntheticBenchmark::p_true(const std::string& class_name,
                                  const Configuration& config) const {
  const ClassModel& m = model(class_name);
  return clamp01(m.target.curve.p_best - m.target.curve.p_spread * q_norm(m, config));
}

double SyntheticBenchmark::p_effective(const std::string& class_name,
                                       const Configuration& config,
                                       double data_fraction,
                                       const CurriculumSchedule* curriculum,
                                       int total_epochs) const {
  const ClassModel& m = model(class_name);
  double p = m.target.curve.p_best - m.target.curve.p_spread * q_norm(m, config);
  p -= data_penalty * (1.0 - std::clamp(data_fraction, 0.0, 1.0));
  if (curriculum != nullptr && total_epochs >= 1) {
    double missing_mean = 0.0;
    for (int t = 1; t <= total_epochs; ++t)
      missing_mean += 1.0 - curriculum->coverage_at(t);
    missing_mean /= static_cast<double>(total_epochs);
    p -= coverage_penalty * (1.0 - curriculum->coverage_at(total_epochs));
    p -= earliness_weight * missing_mean;
  }
  return clamp01(p);
}

double SyntheticBenchmark::clean_loss(const std::string& class_name,
                                      const Configuration& config, int epoch,
                                      double data_fraction,
                                      const CurriculumSchedule* curriculum,
                                      int total_epochs) const {
  const ClassModel& m = model(class_name);
  double p = p_effective(class_name, config, data_fraction, curriculum, total_epochs);
  double linf = 1.0 - p;
  double rate = m.target.curve.rate_base +
                m.target.curve.rate_gain * (1.0 - q_norm(m, config));
  return linf + (m.target.curve.initial_loss - linf) *
                    std::exp(-rate * static_cast<double>(epoch));
}

TrialRecord SyntheticBenchmark::simulate(const ArchitectureClass& arch,
                                         const Configuration& config,
                                         const FidelityLevel& fidelity,
                                         const CurriculumSchedule* curriculum,
                                         std::uint64_t seed) const {
  const ClassModel& m = model(arch.name);
  if (fidelity.epoch_budget < 1)
    throw std::invalid_argument("epoch budget must be >= 1");
  if (!(fidelity.data_fraction > 0.0 && fidelity.data_fraction <= 1.0))
    throw std::invalid_argument("data fraction must lie in (0,1]");
  if (curriculum != nullptr) {
    auto violations = curriculum->validate(full_epochs_);
    if (!violations.empty())
      throw std::invalid_argument("invalid curriculum: " + violations.front());
  }

  double p_eff = p_effective(arch.name, config, fidelity.data_fraction, curriculum,
                             full_epochs_);
  double linf = 1.0 - p_eff;
  double rate = m.target.curve.rate_base +
                m.target.curve.rate_gain * (1.0 - q_norm(m, config));

  auto rng = make_rng(subseed(seed, "synthetic-trial"));
  std::normal_distribution<double> gauss(0.0, 1.0);

  TrialRecord trial;
  trial.arch = arch;
  trial.config = config;
  trial.fidelity = fidelity;
  trial.log.budget = fidelity.epoch_budget;
  trial.log.completed = fidelity.epoch_budget;
  trial.log.epochs.reserve(static_cast<std::size_t>(fidelity.epoch_budget));
  for (int t = 1; t <= fidelity.epoch_budget; ++t) {
    double clean = linf + (m.target.curve.initial_loss - linf) *
                              std::exp(-rate * static_cast<double>(t));
    double observed = clean;
    if (noise_ > 0.0) observed += noise_ * gauss(rng);
    observed = std::max(0.0, observed);
    EpochRecord rec;
    rec.epoch = t;
    rec.train_loss = observed;
    rec.batch_loss_variance = m.target.curve.batch_var_coeff * observed;
    rec.val_metric = clamp01(1.0 - clean);
    trial.log.epochs.push_back(rec);
  }

  if (fidelity.data_fraction >= 1.0 && fidelity.epoch_budget >= full_epochs_) {
    double final_p = p_eff;
    if (performance_noise > 0.0) final_p += performance_noise * gauss(rng);
    trial.final_performance = clamp01(final_p);
  }
  return trial;
}

std::pair<Configuration, double> SyntheticBenchmark::optimum() const {
  return optimum_for(best_class());
}

std::pair<Configuration, double> SyntheticBenchmark::optimum_for(
    const std::string& class_name) const {
  const ClassModel& m = model(class_name);
  return {m.target.optimum, clamp01(m.target.curve.p_best)};
}

const std::string& SyntheticBenchmark::best_class() const {
  if (models_.empty()) throw std::runtime_error("benchmark has no classes");
  const std::string* best = nullptr;
  double best_p = -1.0;
  for (const auto& [name, m] : models_) {
    if (m.target.curve.p_best > best_p) {
      best_p = m.target.curve.p_best;
      best = &name;
    }
  }
  return *best;
}

double SyntheticBenchmark::best_curriculum_scalar(double lambda) const {
  const int total = full_epochs_;
  if (total < 2)
    throw std::invalid_argument(
        "curriculum schedules need at least 2 training epochs");
  double p_star = clamp01(model(best_class()).target.curve.p_best);

  // Performance minus lambda * (cost / full cost) is linear in each epoch's
  // coverage, so the maximum over valid schedules sits at one of three
  // profiles: full coverage throughout, minimal coverage throughout, or
  // minimal coverage with a jump to full at the last admissible stage start.
  auto scalar_of = [&](double coverage_sum, double final_coverage) {
    double mean = coverage_sum / static_cast<double>(total);
    double perf = p_star - coverage_penalty * (1.0 - final_coverage) -
                  earliness_weight * (1.0 - mean);
    return clamp01(perf) - lambda * mean;
  };

  double best = scalar_of(static_cast<double>(total), 1.0);
  best = std::max(best, scalar_of(static_cast<double>(total) / 16.0, 1.0 / 16.0));
  if (total >= 3) {
    double cov_sum = static_cast<double>(total - 2) / 16.0 + 2.0;
    best = std::max(best, scalar_of(cov_sum, 1.0));
  }
  return best;
}

double SyntheticBenchmark::curriculum_cost(const CurriculumSchedule& schedule,
                                           int total_epochs) {
  double sum = 0.0;
  for (int t = 1; t <= total_epochs; ++t) sum += schedule.coverage_at(t);
  return sum;
}

TrialRecord simulate_training(const SyntheticBenchmark& bench,
                              const ArchitectureClass& arch,
                              const Configuration& config,
                              const FidelityLevel& fidelity, std::uint64_t seed) {
  return bench.simulate(arch, config, fidelity, nullptr, seed);
}

std::pair<Configuration, double> benchmark_optimum(const SyntheticBenchmark& bench) {
  return bench.optimum();
}

namespace {

CurveParams curve_from_json(const nlohmann::json& j) {
  CurveParams c;
  c.p_best = j.value("p_best", c.p_best);
  c.p_spread = j.value("p_spread", c.p_spread);
  c.initial_loss = j.value("initial_loss", c.initial_loss);
  c.rate_base = j.value("rate_base", c.rate_base);
  c.rate_gain = j.value("rate_gain", c.rate_gain);
  c.batch_var_coeff = j.value("batch_var_coeff", c.batch_var_coeff);
  return c;
}

nlohmann::json curve_to_json(const CurveParams& c) {
  return {{"p_best", c.p_best},
          {"p_spread", c.p_spread},
          {"initial_loss", c.initial_loss},
          {"rate_base", c.rate_base},
          {"rate_gain", c.rate_gain},
          {"batch_var_coeff", c.batch_var_coeff}};
}

}  // namespace

SyntheticBenchmark SyntheticBenchmark::from_json_text(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw std::runtime_error(std::string("benchmark config is not valid JSON: ") +
                             e.what());
  }
  if (!j.is_object()) throw std::runtime_error("benchmark config must be an object");

  SearchSpace space;
  if (j.contains("space")) {
    space = space_from_json_text(j.at("space").dump());
  } else if (j.contains("space_file")) {
    space = space_from_file(j.at("space_file").get<std::string>());
  } else {
    throw std::runtime_error("benchmark config needs \"space\" or \"space_file\"");
  }

  if (!j.contains("full_epochs"))
    throw std::runtime_error("benchmark config needs \"full_epochs\"");
  int full_epochs = j.at("full_epochs").get<int>();
  double noise = j.value("noise", 0.01);

  if (j.contains("targets")) {
    std::map<std::string, ClassTarget> targets;
    for (const auto& [name, tj] : j.at("targets").items()) {
      ClassTarget t;
      if (!tj.contains("optimum"))
        throw std::runtime_error("target for class " + name + " needs \"optimum\"");
      t.optimum = config_from_json(space, tj.at("optimum"));
      if (tj.contains("curve")) t.curve = curve_from_json(tj.at("curve"));
      targets.emplace(name, std::move(t));
    }
    SyntheticBenchmark bench(std::move(space), full_epochs, noise,
                             std::move(targets));
    bench.data_penalty = j.value("data_penalty", bench.data_penalty);
    bench.performance_noise = j.value("performance_noise", bench.performance_noise);
    bench.coverage_penalty = j.value("coverage_penalty", bench.coverage_penalty);
    bench.earliness_weight = j.value("earliness_weight", bench.earliness_weight);
    return bench;
  }

  auto plant_seed = j.value("plant_seed", std::uint64_t{1});
  SyntheticBenchmark bench =
      make_default(std::move(space), full_epochs, noise, plant_seed);
  bench.data_penalty = j.value("data_penalty", bench.data_penalty);
  bench.performance_noise = j.value("performance_noise", bench.performance_noise);
  bench.coverage_penalty = j.value("coverage_penalty", bench.coverage_penalty);
  bench.earliness_weight = j.value("earliness_weight", bench.earliness_weight);
  return bench;
}

SyntheticBenchmark SyntheticBenchmark::from_file(const std::string& path) {
  return from_json_text(read_text_file(path));
}

std::string SyntheticBenchmark::to_json_text() const {
  nlohmann::json j;
  j["space"] = nlohmann::json::parse(space_to_json_text(space_));
  j["full_epochs"] = full_epochs_;
  j["noise"] = noise_;
  j["data_penalty"] = data_penalty;
  j["performance_noise"] = performance_noise;
  j["coverage_penalty"] = coverage_penalty;
  j["earliness_weight"] = earliness_weight;
  nlohmann::json targets = nlohmann::json::object();
  for (const auto& [name, m] : models_) {
    targets[name] = {{"optimum", config_to_json(m.target.optimum)},
                     {"curve", curve_to_json(m.target.curve)}};
  }
  j["targets"] = std::move(targets);
  return j.dump(2) + "\n";
}

}  // namespace stride
