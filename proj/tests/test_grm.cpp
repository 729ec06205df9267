#include <doctest.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <random>
#include <vector>

#include "stride/grm.hpp"
#include "stride/rng.hpp"
#include "stride/synthetic.hpp"

using namespace stride;

namespace {

TrainingLog random_log(std::mt19937_64& rng, int n_epochs) {
  std::uniform_real_distribution<double> step(-0.3, 0.1);
  std::uniform_real_distribution<double> bv(0.0, 0.5);
  TrainingLog log;
  double level = std::uniform_real_distribution<double>(0.5, 3.0)(rng);
  for (int t = 1; t <= n_epochs; ++t) {
    EpochRecord e;
    e.epoch = t;
    level = std::max(0.05, level + step(rng));
    e.train_loss = level;
    e.batch_loss_variance = bv(rng);
    log.epochs.push_back(e);
  }
  log.budget = log.completed = n_epochs;
  return log;
}

// Gauss-Jordan solve in long double, independent of the Eigen path.
std::vector<double> ridge_oracle(const std::vector<DynamicsFeatures>& feats,
                                 const std::vector<double>& y, double lambda) {
  const std::size_t d = DynamicsFeatures::kDim;
  std::vector<std::vector<long double>> a(d, std::vector<long double>(d + 1, 0.0L));
  for (std::size_t i = 0; i < feats.size(); ++i) {
    for (std::size_t r = 0; r < d; ++r) {
      for (std::size_t c = 0; c < d; ++c)
        a[r][c] += static_cast<long double>(feats[i].v[r]) * feats[i].v[c];
      a[r][d] += static_cast<long double>(feats[i].v[r]) * y[i];
    }
  }
  for (std::size_t r = 0; r < d; ++r) a[r][r] += lambda;
  for (std::size_t col = 0; col < d; ++col) {
    std::size_t piv = col;
    for (std::size_t r = col + 1; r < d; ++r)
      if (std::fabs(static_cast<double>(a[r][col])) >
          std::fabs(static_cast<double>(a[piv][col])))
        piv = r;
    std::swap(a[piv], a[col]);
    long double p = a[col][col];
    for (std::size_t c = col; c <= d; ++c) a[col][c] /= p;
    for (std::size_t r = 0; r < d; ++r) {
      if (r == col) continue;
      long double f = a[r][col];
      for (std::size_t c = col; c <= d; ++c) a[r][c] -= f * a[col][c];
    }
  }
  std::vector<double> w(d);
  for (std::size_t r = 0; r < d; ++r) w[r] = static_cast<double>(a[r][d]);
  return w;
}

std::vector<TrialRecord> linear_trials(std::uint64_t seed, int n,
                                       const std::array<double, 6>& w_true,
                                       double noise_sigma) {
  auto rng = make_rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::vector<TrialRecord> trials;
  for (int i = 0; i < n; ++i) {
    TrialRecord t;
    t.arch = {"net"};
    t.fidelity = FidelityLevel{10, 1.0, 1};
    // varied lengths keep the mean-delta feature from being an exact linear
    // combination of the first/last-loss features across the whole sample
    int len = 5 + static_cast<int>(rng() % 10);
    t.log = random_log(rng, len);
    auto v = extract_dynamics_features(t.log);
    double p = 0.0;
    for (std::size_t j = 0; j < 6; ++j) p += w_true[j] * v.v[j];
    if (noise_sigma > 0.0) p += noise_sigma * gauss(rng);
    t.final_performance = p;
    trials.push_back(std::move(t));
  }
  return trials;
}

SearchSpace line_space() {
  SearchSpace s;
  s.classes = {{"net"}};
  s.params = {{"x", ContinuousParam{0.0, 1.0, false}}};
  return s;
}

}  // namespace

TEST_CASE("exact linear data is recovered with zero regularization") {
  std::array<double, 6> w_true = {0.4, -0.05, 0.12, 0.3, -0.2, 0.07};
  auto trials = linear_trials(11, 20, w_true, 0.0);
  auto model = estimate_reward_model(trials, 0.0);
  REQUIRE(model.weights.size() == 6);
  for (std::size_t j = 0; j < 6; ++j)
    CHECK(std::fabs(model.weights[j] - w_true[j]) < 1e-8);
  CHECK(model.fit_residual < 1e-8);
}

TEST_CASE("noisy fits match an independent normal-equation solver") {
  std::array<double, 6> w_true = {0.5, -0.1, 0.2, 0.0, -0.3, 0.15};
  for (std::uint64_t seed : {1ULL, 2ULL, 3ULL, 4ULL, 5ULL}) {
    auto trials = linear_trials(seed, 40, w_true, 0.01);
    auto model = estimate_reward_model(trials, 1e-6);
    std::vector<DynamicsFeatures> feats;
    std::vector<double> y;
    for (const auto& t : trials) {
      feats.push_back(extract_dynamics_features(t.log));
      y.push_back(*t.final_performance);
    }
    auto w_ref = ridge_oracle(feats, y, 1e-6);
    for (std::size_t j = 0; j < 6; ++j)
      CHECK(model.weights[j] == doctest::Approx(w_ref[j]).epsilon(1e-7));
    CHECK(model.fit_residual < 0.02);
  }
}

TEST_CASE("reward model preconditions are enforced") {
  std::array<double, 6> w_true = {0.4, 0, 0, 0, 0, 0};
  auto trials = linear_trials(7, 3, w_true, 0.0);
  CHECK_THROWS_WITH_AS(estimate_reward_model(trials, 0.0),
                       doctest::Contains("insufficient trials"),
                       std::invalid_argument);

  auto mixed = linear_trials(8, 10, w_true, 0.0);
  mixed[4].arch = {"other"};
  CHECK_THROWS_AS(estimate_reward_model(mixed, 0.0), std::invalid_argument);

  auto incomplete = linear_trials(9, 10, w_true, 0.0);
  incomplete[2].final_performance.reset();
  CHECK_THROWS_AS(estimate_reward_model(incomplete, 0.0), std::invalid_argument);

  CHECK_THROWS_AS(estimate_reward_model({}, 0.0), std::invalid_argument);
}

TEST_CASE("rank correlation of predictions holds under mild noise") {
  // statistical: over 20 seeds, at least 18 must reach rho >= 0.8
  std::array<double, 6> w_true = {0.45, -0.08, 0.1, 0.25, -0.15, 0.05};
  int passes = 0;
  for (std::uint64_t seed = 100; seed < 120; ++seed) {
    auto train = linear_trials(seed, 30, w_true, 0.01);
    auto held = linear_trials(seed + 1000, 25, w_true, 0.01);
    auto model = estimate_reward_model(train, 1e-6);

    std::vector<double> pred, truth;
    for (const auto& t : held) {
      pred.push_back(predict_performance(model, extract_dynamics_features(t.log)));
      double p = 0.0;
      auto v = extract_dynamics_features(t.log);
      for (std::size_t j = 0; j < 6; ++j) p += w_true[j] * v.v[j];
      truth.push_back(p);
    }
    auto rank = [](const std::vector<double>& xs) {
      std::vector<std::size_t> idx(xs.size());
      for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
      std::sort(idx.begin(), idx.end(),
                [&](std::size_t a, std::size_t b) { return xs[a] < xs[b]; });
      std::vector<double> r(xs.size());
      for (std::size_t i = 0; i < idx.size(); ++i) r[idx[i]] = static_cast<double>(i);
      return r;
    };
    auto ra = rank(pred);
    auto rb = rank(truth);
    double n = static_cast<double>(ra.size());
    double d2 = 0.0;
    for (std::size_t i = 0; i < ra.size(); ++i)
      d2 += (ra[i] - rb[i]) * (ra[i] - rb[i]);
    double rho = 1.0 - 6.0 * d2 / (n * (n * n - 1.0));
    if (rho >= 0.8) ++passes;
  }
  CHECK(passes >= 18);
}

TEST_CASE("prediction is an exact dot product") {
  RewardModel m;
  m.cls = {"net"};
  m.weights = {0.5, 0, 0, 0, 0, 0};
  DynamicsFeatures v;
  v.v = {1.0, 2.0, 1.5, -0.1, -0.2, 0.01};
  CHECK(predict_performance(m, v) == 0.5);

  m.weights = {0, 0, 0, 0, 0, 0};
  CHECK(predict_performance(m, v) == 0.0);

  auto rng = make_rng(55);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int i = 0; i < 100; ++i) {
    for (auto& w : m.weights) w = u(rng);
    for (auto& x : v.v) x = u(rng);
    double manual = 0.0;
    for (std::size_t j = 0; j < 6; ++j) manual += m.weights[j] * v.v[j];
    CHECK(predict_performance(m, v) == doctest::Approx(manual).epsilon(1e-12));
  }

  m.weights.resize(4);
  CHECK_THROWS_AS(predict_performance(m, v), std::invalid_argument);
}

TEST_CASE("greedy selection takes the argmax with lowest-index ties") {
  SearchSpace s = line_space();
  ActionSet actions = discretize(s, DiscretizeOptions{3, 512}, 1);
  QTable q;
  q.init(s.classes, actions.size());

  q.values["net"] = {0.1, 0.9, 0.3};
  CHECK(select_action(q, {"net"}, actions, 0.0, 42) == 1);

  q.values["net"] = {0.5, 0.5, 0.5};
  CHECK(select_action(q, {"net"}, actions, 0.0, 42) == 0);

  CHECK_THROWS_AS(select_action(q, {"net"}, actions, 1.5, 42),
                  std::invalid_argument);
  CHECK_THROWS_AS(select_action(q, {"net"}, ActionSet{}, 0.5, 42),
                  std::invalid_argument);
}

TEST_CASE("full exploration is uniform over actions") {
  SearchSpace s;
  s.classes = {{"net"}};
  s.params = {{"opt", CategoricalParam{{"a", "b", "c", "d"}}}};
  ActionSet actions = discretize(s, DiscretizeOptions{2, 512}, 1);
  REQUIRE(actions.size() == 4);
  QTable q;
  q.init(s.classes, 4);
  std::array<int, 4> freq{};
  const int n = 100000;
  for (int i = 0; i < n; ++i)
    ++freq[select_action(q, {"net"}, actions, 1.0, subseed(9, "draw", i))];
  for (int a = 0; a < 4; ++a) {
    double f = static_cast<double>(freq[a]) / n;
    CHECK(std::abs(f - 0.25) < 0.01);
  }
}

TEST_CASE("q updates move toward the reward and count visits") {
  SearchSpace s = line_space();
  QTable q;
  q.init(s.classes, 3);

  q_update(q, {"net"}, 1, 0.7, 1.0);
  CHECK(q.q("net", 1) == 0.7);  // alpha 1 overwrites
  CHECK(q.visit_count("net", 1) == 1);

  q.values["net"][2] = 0.2;
  q_update(q, {"net"}, 2, 0.6, 0.5);
  CHECK(q.q("net", 2) == doctest::Approx(0.4));

  // geometric contraction toward a fixed reward
  double gap = std::fabs(q.q("net", 0) - 0.9);
  for (int i = 0; i < 10; ++i) {
    q_update(q, {"net"}, 0, 0.9, 0.3);
    double next = std::fabs(q.q("net", 0) - 0.9);
    CHECK(next == doctest::Approx(gap * 0.7).epsilon(1e-12));
    gap = next;
  }

  CHECK_THROWS_AS(q_update(q, {"net"}, 0, 0.5, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(q_update(q, {"net"}, 0, 0.5, 1.5), std::invalid_argument);
}

TEST_CASE("snapping picks the closest grid action") {
  SearchSpace s = line_space();
  ActionSet actions = discretize(s, DiscretizeOptions{5, 512}, 1);  // 0,.25,.5,.75,1
  Configuration c;
  c.assignments["x"] = 0.63;
  CHECK(nearest_action(s, actions, c) ==
        [&] {
          std::size_t best = 0;
          double bd = 1e9;
          for (std::size_t a = 0; a < actions.size(); ++a) {
            double xa = std::get<double>(actions.at(a).assignments.at("x"));
            if (std::fabs(xa - 0.63) < bd) {
              bd = std::fabs(xa - 0.63);
              best = a;
            }
          }
          return best;
        }());
}

namespace {

struct BowlFixture {
  SearchSpace space;
  ActionSet actions;
  SyntheticBenchmark bench;
  std::size_t best_action;

  BowlFixture()
      : space(line_space()),
        actions(discretize(space, DiscretizeOptions{8, 512}, 3)),
        bench([&] {
          Configuration opt;
          opt.assignments["x"] = 0.3;
          CurveParams curve;
          std::map<std::string, ClassTarget> targets;
          targets["net"] = ClassTarget{opt, curve};
          return SyntheticBenchmark(line_space(), 20, 0.005, std::move(targets));
        }()) {
    best_action = 0;
    double best_p = -1.0;
    for (std::size_t a = 0; a < actions.size(); ++a) {
      double p = bench.p_true("net", actions.at(a));
      if (p > best_p) {
        best_p = p;
        best_action = a;
      }
    }
  }
};

}  // namespace

TEST_CASE("the search policy finds the best grid action on the bowl") {
  BowlFixture fx;
  SyntheticTrainer trainer(fx.bench);
  GrmConfig cfg;
  int hits = 0;
  for (std::uint64_t seed : {1ULL, 2ULL, 3ULL, 4ULL, 5ULL}) {
    auto result = grm_search(fx.space, fx.actions, trainer, cfg, seed);
    REQUIRE(result.policy.count("net") == 1);
    if (result.policy.at("net") == fx.best_action) ++hits;

    // argmax consistency: the policy attains the row maximum exactly
    const auto& row = result.qtable.values.at("net");
    CHECK(row[result.policy.at("net")] == *std::max_element(row.begin(), row.end()));

    // audit bookkeeping
    CHECK(result.episodes.size() ==
          static_cast<std::size_t>(cfg.num_samples_phase1 + cfg.max_episodes));
    CHECK(result.phase1_epochs == cfg.num_samples_phase1 * 20);
    CHECK(result.phase2_epochs <= static_cast<long long>(fx.actions.size()) * 4);
  }
  CHECK(hits >= 4);
}

TEST_CASE("zero episodes degenerate to the tie-break policy") {
  BowlFixture fx;
  SyntheticTrainer trainer(fx.bench);
  GrmConfig cfg;
  cfg.max_episodes = 0;
  auto result = grm_search(fx.space, fx.actions, trainer, cfg, 5);
  CHECK(result.policy.at("net") == 0);
  CHECK(result.episodes.size() == static_cast<std::size_t>(cfg.num_samples_phase1));
}

TEST_CASE("a resumed search reproduces the uninterrupted run exactly") {
  BowlFixture fx;
  SyntheticTrainer trainer(fx.bench);
  GrmConfig cfg;
  cfg.max_episodes = 60;

  auto full_run = grm_search(fx.space, fx.actions, trainer, cfg, 77);

  for (std::size_t cut : {4UL, 12UL, 40UL}) {
    std::vector<SearchEpisode> prefix(full_run.episodes.begin(),
                                      full_run.episodes.begin() + cut);
    auto resumed = grm_search(fx.space, fx.actions, trainer, cfg, 77, {}, &prefix);
    CHECK(resumed.policy == full_run.policy);
    CHECK(resumed.phase1_epochs == full_run.phase1_epochs);
    CHECK(resumed.phase2_epochs == full_run.phase2_epochs);
    REQUIRE(resumed.episodes.size() == full_run.episodes.size());
    for (std::size_t i = 0; i < full_run.episodes.size(); ++i) {
      CHECK(resumed.episodes[i].class_name == full_run.episodes[i].class_name);
      CHECK(resumed.episodes[i].action_id == full_run.episodes[i].action_id);
      CHECK(resumed.episodes[i].reward == full_run.episodes[i].reward);
    }
    CHECK(resumed.qtable.values.at("net") == full_run.qtable.values.at("net"));
  }
}

TEST_CASE("worker count does not change the result") {
  BowlFixture fx;
  SyntheticTrainer trainer(fx.bench);
  GrmConfig cfg1;
  cfg1.workers = 1;
  GrmConfig cfg4 = cfg1;
  cfg4.workers = 4;
  auto r1 = grm_search(fx.space, fx.actions, trainer, cfg1, 31);
  auto r4 = grm_search(fx.space, fx.actions, trainer, cfg4, 31);
  CHECK(r1.policy == r4.policy);
  CHECK(r1.qtable.values.at("net") == r4.qtable.values.at("net"));
  REQUIRE(r1.episodes.size() == r4.episodes.size());
  for (std::size_t i = 0; i < r1.episodes.size(); ++i)
    CHECK(r1.episodes[i].reward == r4.episodes[i].reward);
}

TEST_CASE("rescaled rewards leave the greedy argmax unchanged") {
  SearchSpace s = line_space();
  QTable qa, qb;
  qa.init(s.classes, 5);
  qb.init(s.classes, 5);
  auto rng = make_rng(202);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::uniform_int_distribution<std::size_t> pick(0, 4);
  for (int i = 0; i < 200; ++i) {
    std::size_t a = pick(rng);
    double r = u(rng);
    q_update(qa, {"net"}, a, r, 0.3);
    q_update(qb, {"net"}, a, 3.7 * r, 0.3);
  }
  const auto& ra = qa.values.at("net");
  const auto& rb = qb.values.at("net");
  CHECK(std::max_element(ra.begin(), ra.end()) - ra.begin() ==
        std::max_element(rb.begin(), rb.end()) - rb.begin());
}

TEST_CASE("multi-class searches keep the table keyed to known pairs only") {
  SearchSpace s = line_space();
  s.classes = {{"alpha"}, {"beta"}};
  auto bench = SyntheticBenchmark::make_default(s, 10, 0.005, 9);
  SyntheticTrainer trainer(bench);
  ActionSet actions = discretize(s, DiscretizeOptions{6, 512}, 2);
  GrmConfig cfg;
  cfg.max_episodes = 80;
  auto result = grm_search(s, actions, trainer, cfg, 4);
  CHECK(result.qtable.values.size() == 2);
  CHECK(result.qtable.values.at("alpha").size() == actions.size());
  CHECK(result.qtable.values.at("beta").size() == actions.size());
  CHECK(result.policy.size() == 2);
  CHECK(result.models.size() == 2);
  for (const auto& [name, row] : result.qtable.values)
    CHECK(row[result.policy.at(name)] == *std::max_element(row.begin(), row.end()));
}
