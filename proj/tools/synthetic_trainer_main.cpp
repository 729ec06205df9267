#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "stride/subprocess.hpp"
#include "stride/synthetic.hpp"

// Worker-side half of the trial protocol: reads one request line from stdin,
// simulates it against the benchmark definition, and streams the epoch
// records plus the terminal record back on stdout.
int main(int argc, char** argv) {
  CLI::App app{"closed-form training simulator speaking the trial line protocol"};
  std::string benchmark_path;
  app.add_option("--benchmark", benchmark_path, "benchmark definition file (json)")
      ->required();
  CLI11_PARSE(app, argc, argv);

  try {
    const stride::SyntheticBenchmark bench =
        stride::SyntheticBenchmark::from_file(benchmark_path);

    std::string line;
    if (!std::getline(std::cin, line)) {
      std::cerr << "no trial request on stdin\n";
      return 1;
    }
    const stride::TrialRequest req = stride::parse_trial_request(bench.space(), line);

    stride::FidelityLevel fidelity;
    fidelity.epoch_budget = req.epoch_budget;
    fidelity.data_fraction = req.data_fraction;
    const stride::TrialRecord trial =
        bench.simulate({req.architecture}, req.config, fidelity,
                       req.curriculum ? &*req.curriculum : nullptr, req.seed);

    for (const auto& epoch : trial.log.epochs) {
      std::cout << stride::format_epoch_record(epoch);
    }
    std::cout << stride::format_terminal_record(trial.final_performance);
    std::cout.flush();
    return 0;
  } catch (const std::exception& e) {
    std::cerr << e.what() << "\n";
    return 1;
  }
}
