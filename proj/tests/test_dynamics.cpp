#include <doctest.h>

#include <cmath>
#include <vector>

#include "stride/trainer.hpp"

using namespace stride;

namespace {

TrainingLog make_log(const std::vector<double>& losses,
                     const std::vector<double>& batch_vars) {
  TrainingLog log;
  for (std::size_t i = 0; i < losses.size(); ++i) {
    EpochRecord e;
    e.epoch = static_cast<int>(i + 1);
    e.train_loss = losses[i];
    e.batch_loss_variance = i < batch_vars.size() ? batch_vars[i] : 0.0;
    log.epochs.push_back(e);
  }
  log.budget = static_cast<int>(losses.size());
  log.completed = static_cast<int>(losses.size());
  return log;
}

// Covariance-form least squares, coded independently of the implementation.
double slope_oracle(const std::vector<double>& xs, const std::vector<double>& ys) {
  long double mx = 0, my = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    mx += xs[i];
    my += ys[i];
  }
  mx /= xs.size();
  my /= ys.size();
  long double num = 0, den = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    num += (xs[i] - mx) * (ys[i] - my);
    den += (xs[i] - mx) * (xs[i] - mx);
  }
  return static_cast<double>(num / den);
}

}  // namespace

TEST_CASE("single-epoch logs use the degenerate conventions") {
  auto log = make_log({2.0}, {0.1});
  auto f = extract_dynamics_features(log);
  CHECK(f.v[0] == 1.0);
  CHECK(f.v[1] == 2.0);
  CHECK(f.v[2] == 2.0);
  CHECK(f.v[3] == 0.0);
  CHECK(f.v[4] == 0.0);
  CHECK(f.v[5] == 0.0);
}

TEST_CASE("slope feature matches an independent least-squares fit") {
  std::vector<double> losses, xs, ys;
  for (int t = 1; t <= 20; ++t) {
    double loss = 0.2 + 0.8 * std::exp(-0.5 * t);
    losses.push_back(loss);
    xs.push_back(t);
    ys.push_back(std::log(loss));
  }
  auto f = extract_dynamics_features(make_log(losses, std::vector<double>(20, 0.0)));
  CHECK(f.v[4] == doctest::Approx(slope_oracle(xs, ys)).epsilon(1e-6));
}

TEST_CASE("constant loss gives zero delta and zero slope") {
  auto f = extract_dynamics_features(
      make_log(std::vector<double>(8, 1.0), std::vector<double>(8, 0.3)));
  CHECK(f.v[3] == 0.0);
  CHECK(f.v[4] == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(f.v[5] == doctest::Approx(0.0));
}

TEST_CASE("strictly decreasing curves have negative delta and slope") {
  std::vector<double> losses;
  for (int t = 1; t <= 15; ++t) losses.push_back(2.0 / t);
  auto f = extract_dynamics_features(make_log(losses, std::vector<double>(15, 0.0)));
  CHECK(f.v[3] < 0.0);
  CHECK(f.v[4] < 0.0);
}

TEST_CASE("mean delta telescopes to (last - first) / (n - 1)") {
  std::vector<double> losses = {3.0, 2.2, 1.9, 1.2, 1.0};
  auto f = extract_dynamics_features(make_log(losses, std::vector<double>(5, 0.0)));
  CHECK(f.v[3] == doctest::Approx((1.0 - 3.0) / 4.0));
}

TEST_CASE("zero-loss epochs are excluded from the log fit") {
  std::vector<double> losses = {1.0, 0.0, 0.25};
  auto f = extract_dynamics_features(make_log(losses, std::vector<double>(3, 0.0)));
  // only epochs 1 and 3 remain: slope = (log .25 - log 1) / (3 - 1)
  CHECK(f.v[4] == doctest::Approx(std::log(0.25) / 2.0));

  // with fewer than two positive losses the slope falls back to 0
  auto g = extract_dynamics_features(make_log({0.0, 0.0, 0.5}, {0, 0, 0}));
  CHECK(g.v[4] == 0.0);
}

TEST_CASE("terminal variance feature uses the last three epochs only") {
  std::vector<double> bv = {9.0, 9.0, 0.1, 0.2, 0.3};
  auto f =
      extract_dynamics_features(make_log(std::vector<double>(5, 1.0), bv));
  double mean = (0.1 + 0.2 + 0.3) / 3.0;
  double expect = ((0.1 - mean) * (0.1 - mean) + (0.2 - mean) * (0.2 - mean) +
                   (0.3 - mean) * (0.3 - mean)) /
                  3.0;
  CHECK(f.v[5] == doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("relabeled epochs produce identical features") {
  std::vector<double> losses = {2.0, 1.4, 1.1, 0.9};
  std::vector<double> bv = {0.4, 0.3, 0.2, 0.1};
  auto log1 = make_log(losses, bv);
  auto log2 = log1;
  for (auto& e : log2.epochs) e.epoch += 10;  // order preserved, labels shifted
  auto f1 = extract_dynamics_features(log1);
  auto f2 = extract_dynamics_features(log2);
  for (std::size_t i = 0; i < DynamicsFeatures::kDim; ++i)
    CHECK(f1.v[i] == f2.v[i]);
}

TEST_CASE("empty logs are rejected") {
  TrainingLog log;
  CHECK_THROWS(extract_dynamics_features(log));
}

TEST_CASE("log validation flags structural problems") {
  auto good = make_log({1.0, 0.9}, {0.1, 0.1});
  CHECK(good.validate().empty());

  auto bad_start = good;
  bad_start.epochs[0].epoch = 0;
  bad_start.epochs[1].epoch = 1;
  CHECK(!bad_start.validate().empty());

  auto gap = good;
  gap.epochs[1].epoch = 5;
  CHECK(!gap.validate().empty());

  auto neg = good;
  neg.epochs[0].train_loss = -0.5;
  CHECK(!neg.validate().empty());

  auto over = good;
  over.budget = 1;
  CHECK(!over.validate().empty());
}

TEST_CASE("trial objective prefers final performance, then val metric, then loss") {
  TrialRecord t;
  t.log = make_log({2.0, 0.4}, {0, 0});

  CHECK(trial_objective(t) == doctest::Approx(0.6));  // 1 - last loss

  t.log.epochs[0].val_metric = 0.3;
  CHECK(trial_objective(t) == doctest::Approx(0.3));  // latest reported val

  t.log.epochs[1].val_metric = 0.55;
  CHECK(trial_objective(t) == doctest::Approx(0.55));

  t.final_performance = 0.8;
  CHECK(trial_objective(t) == doctest::Approx(0.8));
}
