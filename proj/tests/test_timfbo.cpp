#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <map>
#include <random>
#include <vector>

#include "doctest.h"
#include "stride/rng.hpp"
#include "stride/synthetic.hpp"
#include "stride/timfbo.hpp"

using namespace stride;

namespace {

SearchSpace line_space() {
  SearchSpace s;
  s.classes = {{"net"}};
  s.params = {{"x", ContinuousParam{0.0, 1.0, false}}};
  return s;
}

SyntheticBenchmark line_bench(double optimum_x, int full_epochs, double noise) {
  Configuration opt;
  opt.assignments["x"] = optimum_x;
  std::map<std::string, ClassTarget> targets;
  targets["net"] = ClassTarget{opt, CurveParams{}};
  return SyntheticBenchmark(line_space(), full_epochs, noise, std::move(targets));
}

MfboConfig quick_config(double budget) {
  MfboConfig cfg;
  cfg.budget = budget;
  cfg.candidate_pool = 256;
  cfg.refine_top = 4;
  cfg.refine_steps = 8;
  return cfg;
}

// Brute-force reference: sort (objective desc, index asc) and slice.
std::vector<std::size_t> sort_and_slice(const std::vector<double>& ys, int eta) {
  std::vector<std::pair<double, std::size_t>> v;
  for (std::size_t i = 0; i < ys.size(); ++i) v.emplace_back(ys[i], i);
  std::sort(v.begin(), v.end(), [](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first > b.first;
    return a.second < b.second;
  });
  const std::size_t keep = (ys.size() + static_cast<std::size_t>(eta) - 1) /
                           static_cast<std::size_t>(eta);
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < keep; ++i) out.push_back(v[i].second);
  return out;
}

class CountingTrainer : public Trainer {
 public:
  explicit CountingTrainer(SyntheticBenchmark bench) : inner_(std::move(bench)) {}

  TrialRecord run(const ArchitectureClass& arch, const Configuration& config,
                  const FidelityLevel& fidelity, const CurriculumSchedule* curriculum,
                  std::uint64_t seed) override {
    ++calls_;
    return inner_.run(arch, config, fidelity, curriculum, seed);
  }

  int full_epochs() const override { return inner_.full_epochs(); }
  int calls() const { return calls_.load(); }

 private:
  SyntheticTrainer inner_;
  std::atomic<int> calls_{0};
};

class FailingTrainer : public Trainer {
 public:
  TrialRecord run(const ArchitectureClass&, const Configuration&, const FidelityLevel&,
                  const CurriculumSchedule*, std::uint64_t) override {
    throw TrainerError(TrainerError::Kind::launch, "deliberate failure");
  }
  int full_epochs() const override { return 16; }
};

// Fails on the left third of the line, succeeds elsewhere.
class PartialTrainer : public Trainer {
 public:
  explicit PartialTrainer(SyntheticBenchmark bench) : inner_(std::move(bench)) {}

  TrialRecord run(const ArchitectureClass& arch, const Configuration& config,
                  const FidelityLevel& fidelity, const CurriculumSchedule* curriculum,
                  std::uint64_t seed) override {
    if (std::get<double>(config.assignments.at("x")) < 0.33) {
      throw TrainerError(TrainerError::Kind::protocol, "bad region");
    }
    return inner_.run(arch, config, fidelity, curriculum, seed);
  }

  int full_epochs() const override { return inner_.full_epochs(); }

 private:
  SyntheticTrainer inner_;
};

bool same_history(const std::vector<MfboTrial>& a, const std::vector<MfboTrial>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const bool objectives_match =
        (a[i].failed && b[i].failed) || a[i].objective == b[i].objective;
    if (a[i].index != b[i].index || a[i].bracket != b[i].bracket || a[i].rung != b[i].rung ||
        a[i].class_name != b[i].class_name || !(a[i].config == b[i].config) ||
        !objectives_match || a[i].cost != b[i].cost || a[i].failed != b[i].failed) {
      return false;
    }
  }
  return true;
}

}  // namespace

TEST_CASE("geometric schedules halve epoch budgets down from the top") {
  const FidelitySchedule s = FidelitySchedule::geometric(16, 3, 2);
  REQUIRE(s.rungs.size() == 3);
  CHECK(s.rungs[0].epoch_budget == 4);
  CHECK(s.rungs[1].epoch_budget == 8);
  CHECK(s.rungs[2].epoch_budget == 16);
  CHECK(s.costs[0] == doctest::Approx(0.25));
  CHECK(s.costs[1] == doctest::Approx(0.5));
  CHECK(s.costs[2] == doctest::Approx(1.0));
  CHECK(s.coordinate(0) == doctest::Approx(0.25));
  CHECK(s.coordinate(2) == doctest::Approx(1.0));
  CHECK(s.top() == 2);
  for (const auto& rung : s.rungs) CHECK(rung.data_fraction == 1.0);

  const FidelitySchedule odd = FidelitySchedule::geometric(5, 3, 2);
  CHECK(odd.rungs[0].epoch_budget >= 1);
  CHECK(odd.rungs[1].epoch_budget > odd.rungs[0].epoch_budget);
  CHECK(odd.rungs[2].epoch_budget == 5);

  CHECK_THROWS_AS(FidelitySchedule::geometric(4, 4, 2), std::invalid_argument);
  CHECK_THROWS_AS(FidelitySchedule::geometric(16, 3, 1), std::invalid_argument);
}

TEST_CASE("schedule validation rejects malformed ladders") {
  FidelitySchedule s = FidelitySchedule::geometric(16, 3, 2);
  FidelitySchedule bad = s;
  bad.costs[1] = 0.25;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = s;
  bad.eta = 1;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = s;
  bad.rungs[0].data_fraction = 0.0;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = s;
  bad.costs.pop_back();
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad.rungs.clear();
  bad.costs.clear();
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}

TEST_CASE("promotion keeps the top ceil(n/eta) with earlier-index ties") {
  CHECK(promote({0.1, 0.9, 0.5, 0.7, 0.2, 0.8, 0.3, 0.6, 0.4}, 3) ==
        std::vector<std::size_t>{1, 5, 3});
  CHECK(promote({0.3, 0.4}, 3) == std::vector<std::size_t>{1});
  CHECK(promote({0.5}, 2) == std::vector<std::size_t>{0});
  // equal objectives: the earlier evaluation wins the last slot
  CHECK(promote({0.5, 0.5, 0.5, 0.1}, 2) == std::vector<std::size_t>{0, 1});
  CHECK_THROWS_AS(promote({}, 2), std::invalid_argument);
  CHECK_THROWS_AS(promote({0.5}, 1), std::invalid_argument);
  CHECK_THROWS_AS(promote({std::nan("")}, 2), std::invalid_argument);
}

TEST_CASE("promotion matches the sort-and-slice oracle on random rungs") {
  auto rng = make_rng(31);
  std::uniform_int_distribution<int> size_pick(1, 40);
  std::uniform_int_distribution<int> eta_pick(2, 5);
  std::uniform_int_distribution<int> tenth(0, 9);
  for (int round = 0; round < 100; ++round) {
    const int n = size_pick(rng);
    const int eta = eta_pick(rng);
    std::vector<double> ys(static_cast<std::size_t>(n));
    for (double& y : ys) y = tenth(rng) / 10.0;  // coarse values force ties
    const auto got = promote(ys, eta);
    CHECK(got == sort_and_slice(ys, eta));
    CHECK(got.size() == (ys.size() + static_cast<std::size_t>(eta) - 1) /
                            static_cast<std::size_t>(eta));
    for (std::size_t idx : got) CHECK(idx < ys.size());
  }
}

TEST_CASE("transfer with discount one at the target coordinate is a plain fit") {
  std::vector<GpObservation> target{{{0.2, 1.0}, 0.6, 1.0}, {{0.7, 1.0}, 0.4, 1.0}};
  const KernelParams params = KernelParams::defaults(2);

  ProxyDataset proxy;
  proxy.fidelity_coordinate = 1.0;
  proxy.points = {{{0.5}, 0.9}, {{0.9}, 0.2}};

  const GpSurrogate warm = transfer_init(GpSurrogate(target, params), proxy, 1.0);
  std::vector<GpObservation> merged = target;
  merged.push_back({{0.5, 1.0}, 0.9, 1.0});
  merged.push_back({{0.9, 1.0}, 0.2, 1.0});
  const GpSurrogate direct(merged, params);

  for (double q : {0.0, 0.25, 0.5, 0.75, 1.0}) {
    const GpPosterior a = warm.posterior({q, 1.0});
    const GpPosterior b = direct.posterior({q, 1.0});
    CHECK(a.mean == doctest::Approx(b.mean).epsilon(1e-12));
    CHECK(a.variance == doctest::Approx(b.variance).epsilon(1e-12));
  }
}

TEST_CASE("a vanishing discount makes the proxy invisible") {
  std::vector<GpObservation> target{{{0.2, 1.0}, 0.6, 1.0}, {{0.7, 1.0}, 0.4, 1.0}};
  const KernelParams params = KernelParams::defaults(2);
  ProxyDataset proxy;
  proxy.fidelity_coordinate = 0.0;
  proxy.points = {{{0.3}, 5.0}, {{0.6}, -5.0}};

  const GpSurrogate cold(target, params);
  // shrinking the discount shrinks the proxy's pull on the posterior
  double prev_gap = std::numeric_limits<double>::infinity();
  for (double discount : {1e-1, 1e-3, 1e-5, 1e-9}) {
    const GpSurrogate warm = transfer_init(cold, proxy, discount);
    double gap = 0.0;
    for (const auto& pt : proxy.points) {
      std::vector<double> q = pt.x;
      q.push_back(0.0);
      gap = std::max(gap, std::abs(warm.posterior(q).mean - cold.posterior(q).mean));
      gap = std::max(gap,
                     std::abs(warm.posterior(q).variance - cold.posterior(q).variance));
    }
    CHECK(gap < prev_gap);
    prev_gap = gap;
  }
  CHECK(prev_gap < 1e-3);  // washed out entirely at discount 1e-9
}

TEST_CASE("transfer validates the discount and dimensions") {
  const GpSurrogate target({}, KernelParams::defaults(2));
  ProxyDataset proxy;
  proxy.points = {{{0.5}, 0.9}};
  CHECK_THROWS_AS(transfer_init(target, proxy, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(transfer_init(target, proxy, -0.5), std::invalid_argument);
  CHECK_THROWS_AS(transfer_init(target, proxy, 1.5), std::invalid_argument);
  ProxyDataset wide;
  wide.points = {{{0.5, 0.5, 0.5}, 0.9}};
  CHECK_THROWS_AS(transfer_init(target, wide, 1.0), std::invalid_argument);
}

TEST_CASE("make_proxy encodes configurations into the unit cube") {
  const SearchSpace space = line_space();
  Configuration c;
  c.assignments["x"] = 0.25;
  const ProxyDataset proxy = make_proxy(space, {{c, 0.8}}, 0.0);
  REQUIRE(proxy.points.size() == 1);
  CHECK(proxy.points[0].x == std::vector<double>{0.25});
  CHECK(proxy.points[0].y == 0.8);

  SearchSpace multi = line_space();
  multi.classes.push_back({"other"});
  CHECK_THROWS_AS(make_proxy(multi, {{c, 0.8}}, 0.0), std::invalid_argument);
}

TEST_CASE("the search climbs the bowl to the planted optimum") {
  const SyntheticBenchmark bench = line_bench(0.3, 16, 0.005);
  const FidelitySchedule schedule = FidelitySchedule::geometric(16, 3, 2);
  const double best_p = benchmark_optimum(bench).second;
  int hits = 0;
  for (std::uint64_t seed : {1ULL, 2ULL, 3ULL, 4ULL, 5ULL}) {
    SyntheticTrainer trainer(bench);
    const MfboResult res = timfbo_search(line_space(), trainer, schedule, nullptr,
                                         quick_config(10.0), seed);
    CHECK(res.best_is_full_fidelity);
    CHECK(res.best_class == "net");
    double total = 0.0;
    for (const auto& t : res.history) {
      total += t.cost;
      CHECK(t.rung < schedule.rungs.size());
      CHECK(t.index < res.history.size());
    }
    CHECK(res.total_cost == doctest::Approx(total).epsilon(1e-12));
    CHECK(res.total_cost <= 10.0 + schedule.top_cost() + 1e-9);
    if (std::abs(res.best_objective - best_p) <= 0.05) ++hits;
  }
  CHECK(hits >= 4);
}

TEST_CASE("a budget of exactly one full trial runs exactly one full trial") {
  const SyntheticBenchmark bench = line_bench(0.3, 16, 0.005);
  const FidelitySchedule schedule = FidelitySchedule::geometric(16, 3, 2);
  SyntheticTrainer trainer(bench);
  const MfboResult res =
      timfbo_search(line_space(), trainer, schedule, nullptr, quick_config(1.0), 7);
  REQUIRE(res.history.size() == 1);
  CHECK(res.history[0].rung == schedule.top());
  CHECK(res.history[0].cost == doctest::Approx(1.0));
  CHECK(res.best_is_full_fidelity);
  CHECK(res.total_cost == doctest::Approx(1.0));
}

TEST_CASE("searches are reproducible across runs and worker counts") {
  const SyntheticBenchmark bench = line_bench(0.4, 16, 0.01);
  const FidelitySchedule schedule = FidelitySchedule::geometric(16, 3, 2);
  MfboConfig cfg = quick_config(6.0);

  SyntheticTrainer t1(bench);
  const MfboResult a = timfbo_search(line_space(), t1, schedule, nullptr, cfg, 42);
  SyntheticTrainer t2(bench);
  const MfboResult b = timfbo_search(line_space(), t2, schedule, nullptr, cfg, 42);
  CHECK(same_history(a.history, b.history));
  CHECK(a.best_objective == b.best_objective);
  CHECK(a.best_config == b.best_config);

  cfg.workers = 4;
  SyntheticTrainer t3(bench);
  const MfboResult c = timfbo_search(line_space(), t3, schedule, nullptr, cfg, 42);
  CHECK(same_history(a.history, c.history));
  CHECK(a.best_objective == c.best_objective);
  CHECK(a.best_config == c.best_config);
}

TEST_CASE("a full prior history replays without invoking the trainer") {
  const SyntheticBenchmark bench = line_bench(0.4, 16, 0.01);
  const FidelitySchedule schedule = FidelitySchedule::geometric(16, 3, 2);
  const MfboConfig cfg = quick_config(5.0);

  SyntheticTrainer first(bench);
  const MfboResult full = timfbo_search(line_space(), first, schedule, nullptr, cfg, 11);

  CountingTrainer replay(bench);
  const MfboResult resumed =
      timfbo_search(line_space(), replay, schedule, nullptr, cfg, 11, {}, &full.history);
  CHECK(replay.calls() == 0);
  CHECK(same_history(full.history, resumed.history));
  CHECK(resumed.best_objective == full.best_objective);

  // a prefix resumes mid-run and finishes identically
  const std::vector<MfboTrial> prefix(full.history.begin(), full.history.begin() + 5);
  CountingTrainer partial(bench);
  const MfboResult continued =
      timfbo_search(line_space(), partial, schedule, nullptr, cfg, 11, {}, &prefix);
  CHECK(partial.calls() == static_cast<int>(full.history.size()) - 5);
  CHECK(same_history(full.history, continued.history));

  // a corrupted prior is rejected
  std::vector<MfboTrial> wrong = prefix;
  wrong[2].config.assignments["x"] = 0.123456;
  CHECK_THROWS_AS(
      timfbo_search(line_space(), partial, schedule, nullptr, cfg, 11, {}, &wrong),
      std::invalid_argument);
}

TEST_CASE("trial failures are recorded and capped") {
  const FidelitySchedule schedule = FidelitySchedule::geometric(16, 3, 2);
  MfboConfig cfg = quick_config(20.0);
  cfg.failure_cap = 5;

  FailingTrainer always;
  int observed = 0;
  CHECK_THROWS_AS(timfbo_search(line_space(), always, schedule, nullptr, cfg, 3,
                                [&](const MfboTrial& t) { observed += t.failed ? 1 : 0; }),
                  std::runtime_error);
  CHECK(observed == 6);  // cap + the one that crossed it

  // failures under the cap are skipped and the search still finds the bowl
  const SyntheticBenchmark bench = line_bench(0.7, 16, 0.005);
  PartialTrainer flaky(bench);
  cfg.failure_cap = 1000;
  const MfboResult res = timfbo_search(line_space(), flaky, schedule, nullptr, cfg, 9);
  int failed = 0;
  for (const auto& t : res.history) {
    if (t.failed) {
      ++failed;
      CHECK(t.error.find("bad region") != std::string::npos);
      CHECK(std::isnan(t.objective));
    }
  }
  CHECK(failed > 0);
  CHECK(res.best_is_full_fidelity);
  CHECK(std::abs(res.best_objective - benchmark_optimum(bench).second) < 0.1);
}

TEST_CASE("an informative proxy warm start does not hurt and usually helps") {
  const SyntheticBenchmark bench = line_bench(0.35, 16, 0.005);
  const FidelitySchedule schedule = FidelitySchedule::geometric(16, 3, 2);
  const SearchSpace space = line_space();

  std::vector<std::pair<Configuration, double>> proxy_obs;
  for (int i = 0; i <= 16; ++i) {
    Configuration c;
    c.assignments["x"] = i / 16.0;
    proxy_obs.emplace_back(c, bench.p_true("net", c));
  }
  const ProxyDataset proxy = make_proxy(space, proxy_obs, 0.0);

  const MfboConfig cfg = quick_config(4.0);
  std::vector<double> warm_scores, cold_scores;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    SyntheticTrainer tw(bench);
    warm_scores.push_back(
        timfbo_search(space, tw, schedule, &proxy, cfg, seed).best_objective);
    SyntheticTrainer tc(bench);
    cold_scores.push_back(
        timfbo_search(space, tc, schedule, nullptr, cfg, seed).best_objective);
  }
  double warm_sum = 0.0, cold_sum = 0.0;
  int losses = 0;
  for (std::size_t i = 0; i < warm_scores.size(); ++i) {
    warm_sum += warm_scores[i];
    cold_sum += cold_scores[i];
    if (warm_scores[i] < cold_scores[i] - 1e-9) ++losses;
  }
  CHECK(warm_sum >= cold_sum);
  CHECK(losses <= 3);
}

TEST_CASE("multi-class searches report the winning class") {
  SearchSpace space = line_space();
  space.classes = {{"small"}, {"large"}};

  Configuration opt_small, opt_large;
  opt_small.assignments["x"] = 0.2;
  opt_large.assignments["x"] = 0.8;
  CurveParams weak;
  weak.p_best = 0.65;
  std::map<std::string, ClassTarget> targets;
  targets["small"] = ClassTarget{opt_small, weak};
  targets["large"] = ClassTarget{opt_large, CurveParams{}};  // p_best 0.9
  const SyntheticBenchmark bench(space, 16, 0.005, std::move(targets));

  const FidelitySchedule schedule = FidelitySchedule::geometric(16, 3, 2);
  int large_wins = 0;
  for (std::uint64_t seed : {1ULL, 2ULL, 3ULL}) {
    SyntheticTrainer trainer(bench);
    const MfboResult res =
        timfbo_search(space, trainer, schedule, nullptr, quick_config(12.0), seed);
    CHECK(res.best_objective > 0.8);
    if (res.best_class == "large") ++large_wins;
  }
  CHECK(large_wins == 3);
}

TEST_CASE("search configuration is validated up front") {
  const SyntheticBenchmark bench = line_bench(0.3, 16, 0.005);
  SyntheticTrainer trainer(bench);
  const FidelitySchedule schedule = FidelitySchedule::geometric(16, 3, 2);

  MfboConfig cfg = quick_config(0.5);  // below one full trial
  CHECK_THROWS_AS(timfbo_search(line_space(), trainer, schedule, nullptr, cfg, 1),
                  std::invalid_argument);
  cfg = quick_config(5.0);
  cfg.candidate_pool = 0;
  CHECK_THROWS_AS(timfbo_search(line_space(), trainer, schedule, nullptr, cfg, 1),
                  std::invalid_argument);
  cfg = quick_config(5.0);
  cfg.workers = 0;
  CHECK_THROWS_AS(timfbo_search(line_space(), trainer, schedule, nullptr, cfg, 1),
                  std::invalid_argument);
  cfg = quick_config(5.0);
  cfg.kernel.length_scales = {0.3};  // wrong dimension for x + fidelity
  CHECK_THROWS_AS(timfbo_search(line_space(), trainer, schedule, nullptr, cfg, 1),
                  std::invalid_argument);
}
