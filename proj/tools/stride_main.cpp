#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <set>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "stride/runner.hpp"
#include "stride/verify.hpp"
#include "stride/verify_io.hpp"

namespace fs = std::filesystem;

namespace {

struct SearchArgs {
  std::string strategy;
  std::string config_path;
  std::string trainer_cmd;
  std::string benchmark = "synthetic";
  std::string output;
  std::string run_id;
  std::uint64_t seed = 0;
  double budget = 0.0;
  int workers = 1;
  bool resume = false;
};

struct EvalArgs {
  std::string scores;
  std::string threshold;
  std::string manifest;
  std::string output;
};

struct OverlapArgs {
  std::vector<std::string> files;
  std::string output;
};

std::string default_output_root() {
  const char* env = std::getenv("STRIDE_OUTPUT_ROOT");
  return (env != nullptr && *env != '\0') ? env : "runs";
}

int run_search(const SearchArgs& a) {
  stride::RunManifest m;
  m.run_id = a.run_id.empty() ? a.strategy + "-" + std::to_string(a.seed) : a.run_id;
  m.strategy = a.strategy;
  m.config_path = a.config_path;
  m.trainer_command = a.trainer_cmd.empty() ? "synthetic" : a.trainer_cmd;
  m.seed = a.seed;
  m.budget = a.budget;
  m.workers = a.workers;
  m.output_dir = a.output;

  const stride::RunOutcome out = stride::execute_run(m, a.resume);
  std::cout << "run " << m.run_id << ": " << out.trial_count << " trials ("
            << out.replayed << " replayed), total cost " << out.total_cost << "\n"
            << "best class " << out.best_class << ", objective " << out.best_objective
            << "\n"
            << "artifacts in " << out.run_dir << "\n";
  return 0;
}

int run_eval(const EvalArgs& a) {
  const std::vector<stride::ManifestEntry> entries =
      stride::parse_manifest(stride::read_text_file(a.manifest));
  const stride::Submission sub =
      stride::parse_submission(stride::read_text_file(a.scores),
                               stride::read_text_file(a.threshold), entries.size());
  const stride::ScoreSet set = stride::build_score_set(entries, sub);
  const stride::MetricsReport report = stride::compute_metrics(set, sub.threshold);

  std::cout << std::fixed << std::setprecision(2);
  std::cout << "EER     " << report.eer << "\n";
  std::cout << "FMR100  " << report.fmr100
            << (report.fmr100_low_resolution ? "  (low resolution: under 100 impostors)"
                                             : "")
            << "\n";
  std::cout << "ACC     " << report.acc << "\n";
  std::cout << "BACC    " << report.bacc << "\n";
  std::cout << "FNMR    " << report.fnmr << "\n";
  std::cout << "FMR     " << report.fmr << "\n";

  if (!a.output.empty()) {
    fs::create_directories(a.output);
    const fs::path dir(a.output);
    stride::write_text_file((dir / "metrics.json").string(),
                            stride::metrics_to_json(report).dump(2) + "\n");
    stride::write_text_file((dir / "det.csv").string(),
                            stride::det_to_csv(report.det_points));
    const nlohmann::json strat = {
        {"footwear",
         stride::stratified_to_json(stride::stratified_eer(set, stride::StratifyBy::footwear))},
        {"speed",
         stride::stratified_to_json(stride::stratified_eer(set, stride::StratifyBy::speed))},
        {"condition",
         stride::stratified_to_json(stride::stratified_eer(set, stride::StratifyBy::condition))}};
    stride::write_text_file((dir / "stratified.json").string(), strat.dump(2) + "\n");
  }
  return 0;
}

int run_overlap(const OverlapArgs& a) {
  std::vector<stride::ModelDecisions> models;
  std::set<std::string> used;
  for (const auto& file : a.files) {
    // Name models by file stem; fall back to the full path on collisions.
    std::string name = fs::path(file).stem().string();
    if (!used.insert(name).second) name = file;
    models.push_back(stride::parse_decisions(name, stride::read_text_file(file)));
  }
  const stride::OverlapReport report = stride::misclassification_overlap(models);

  for (const auto& p : report.pairwise) {
    std::cout << report.models[p.a] << " & " << report.models[p.b] << ": " << p.count
              << "\n";
  }
  std::cout << "common to all " << report.models.size() << " models: "
            << report.common.size() << " (false matches " << report.common_false_matches
            << ", false non-matches " << report.common_false_non_matches << ")\n";

  if (!a.output.empty()) {
    fs::create_directories(a.output);
    stride::write_text_file((fs::path(a.output) / "overlap.json").string(),
                            stride::overlap_to_json(report).dump(2) + "\n");
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"footstep-verification toolkit: searches, submission scoring, reports"};
  app.require_subcommand(1);

  SearchArgs s;
  s.output = default_output_root();
  CLI::App* search = app.add_subcommand("search", "run one search strategy on a benchmark");
  search->add_option("strategy", s.strategy, "one of grm, timfbo, ecco")
      ->required()
      ->check(CLI::IsMember({"grm", "timfbo", "ecco"}));
  search->add_option("--config", s.config_path, "benchmark definition file (json)")
      ->required()
      ->check(CLI::ExistingFile);
  search->add_option("--seed", s.seed, "master seed");
  search->add_option("--budget", s.budget,
                     "episodes (grm), total relative cost (timfbo) or generations "
                     "(ecco); <= 0 keeps the strategy default");
  search->add_option("--workers", s.workers, "parallel trial workers")
      ->check(CLI::PositiveNumber);
  search->add_option("--output", s.output,
                     "output root (default $STRIDE_OUTPUT_ROOT, else ./runs)");
  search->add_option("--run-id", s.run_id, "run directory name (default <strategy>-<seed>)");
  search->add_flag("--resume", s.resume, "continue an existing run from its trial log");
  CLI::Option* bench_opt =
      search->add_option("--benchmark", s.benchmark, "in-process trainer; only 'synthetic'")
          ->check(CLI::IsMember({"synthetic"}));
  search->add_option("--trainer-cmd", s.trainer_cmd,
                     "worker command line, launched once per trial")
      ->excludes(bench_opt);

  EvalArgs e;
  CLI::App* eval = app.add_subcommand("eval", "score a submission against a manifest");
  eval->add_option("--scores", e.scores, "submission scores, one per line")
      ->required()
      ->check(CLI::ExistingFile);
  eval->add_option("--threshold", e.threshold, "submission decision threshold file")
      ->required()
      ->check(CLI::ExistingFile);
  eval->add_option("--manifest", e.manifest, "ground-truth manifest (csv)")
      ->required()
      ->check(CLI::ExistingFile);
  eval->add_option("--output", e.output,
                   "directory for metrics.json, det.csv and stratified.json");

  OverlapArgs o;
  CLI::App* overlap =
      app.add_subcommand("overlap", "compare misclassified probes across models");
  overlap->add_option("files", o.files, "decision files, one per model")
      ->required()
      ->expected(2, -1)
      ->check(CLI::ExistingFile);
  overlap->add_option("--output", o.output, "directory for overlap.json");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    const int code = app.exit(err);
    return code == 0 ? 0 : 2;
  }

  try {
    if (search->parsed()) return run_search(s);
    if (eval->parsed()) return run_eval(e);
    return run_overlap(o);
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << "\n";
    return 1;
  }
}
