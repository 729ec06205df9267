#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "stride/rng.hpp"
#include "stride/search_space.hpp"

using namespace stride;

namespace {

SearchSpace video_space() {
  SearchSpace s;
  s.classes = {{"R2plus1D"}, {"ViT"}, {"Swin"}, {"ConvNeXt"}};
  s.params = {
      {"lr", ContinuousParam{1e-4, 1e-1, true}},
      {"batch_size", IntegerParam{16, 256}},
      {"optimizer", CategoricalParam{{"Adam", "AdamW", "SGD"}}},
      {"loss", CategoricalParam{{"TripletMarginLoss", "CrossEntropy"}}},
      {"layer_sizes", IntTupleParam{{1, 1, 1, 1, 1}, {6, 6, 6, 6, 6}}},
      {"sample_size", IntTupleParam{{8, 8, 8}, {64, 64, 64}}},
      {"normalization", CategoricalParam{{"minmax", "zscore"}}},
      {"vertical_flip", CategoricalParam{{"true", "false"}}},
      {"rotation", CategoricalParam{{"true", "false"}}},
      {"grad_clip", ContinuousParam{0.5, 20.0, false}},
  };
  return s;
}

SearchSpace tiny_space() {
  SearchSpace s;
  s.classes = {{"net"}};
  s.params = {
      {"x", ContinuousParam{0.0, 1.0, false}},
      {"opt", CategoricalParam{{"a", "b"}}},
  };
  return s;
}

}  // namespace

TEST_CASE("space validation rejects structural defects") {
  SearchSpace s = tiny_space();
  CHECK_NOTHROW(s.validate());

  SearchSpace no_class = s;
  no_class.classes.clear();
  CHECK_THROWS_AS(no_class.validate(), SpaceError);

  SearchSpace dup = s;
  dup.params.push_back({"x", IntegerParam{0, 3}});
  CHECK_THROWS_AS(dup.validate(), SpaceError);

  SearchSpace bad_log = s;
  bad_log.params[0] = {"x", ContinuousParam{0.0, 1.0, true}};
  CHECK_THROWS_AS(bad_log.validate(), SpaceError);

  SearchSpace bad_bounds = s;
  bad_bounds.params[0] = {"x", ContinuousParam{2.0, 1.0, false}};
  CHECK_THROWS_AS(bad_bounds.validate(), SpaceError);
}

TEST_CASE("singleton categorical always yields its only value") {
  SearchSpace s;
  s.classes = {{"net"}};
  s.params = {{"optimizer", CategoricalParam{{"Adam"}}}};
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    auto c = sample_random(s, seed);
    CHECK(std::get<std::string>(c.assignments.at("optimizer")) == "Adam");
  }
}

TEST_CASE("log-uniform sampling centers on the geometric midpoint") {
  SearchSpace s;
  s.classes = {{"net"}};
  s.params = {{"lr", ContinuousParam{1e-4, 1e-1, true}}};
  auto rng = make_rng(12345);
  std::vector<double> log10s;
  for (int i = 0; i < 10000; ++i) {
    auto c = sample_random(s, rng);
    log10s.push_back(std::log10(std::get<double>(c.assignments.at("lr"))));
  }
  std::sort(log10s.begin(), log10s.end());
  double median = 0.5 * (log10s[4999] + log10s[5000]);
  CHECK(std::abs(median - (-2.5)) < 0.05);
}

TEST_CASE("log-uniform sampling spends a third of mass per decade") {
  SearchSpace s;
  s.classes = {{"net"}};
  s.params = {{"lr", ContinuousParam{1e-4, 1e-1, true}}};
  auto rng = make_rng(777);
  int below = 0;
  const int n = 100000;
  for (int i = 0; i < n; ++i) {
    auto c = sample_random(s, rng);
    if (std::get<double>(c.assignments.at("lr")) < 1e-3) ++below;
  }
  double frac = static_cast<double>(below) / n;
  CHECK(std::abs(frac - 1.0 / 3.0) < 0.02);
}

TEST_CASE("every random sample passes validation") {
  SearchSpace s = video_space();
  for (std::uint64_t seed = 0; seed < 10000; ++seed) {
    auto c = sample_random(s, seed);
    auto violations = validate_config(s, c);
    if (!violations.empty()) {
      CAPTURE(violations.front());
      REQUIRE(violations.empty());
    }
  }
}

TEST_CASE("a typical video training configuration validates cleanly") {
  SearchSpace s = video_space();
  Configuration c;
  c.assignments["lr"] = 0.001;
  c.assignments["batch_size"] = std::int64_t{128};
  c.assignments["optimizer"] = std::string("Adam");
  c.assignments["loss"] = std::string("TripletMarginLoss");
  c.assignments["layer_sizes"] = std::vector<std::int64_t>{3, 3, 3, 3, 3};
  c.assignments["sample_size"] = std::vector<std::int64_t>{32, 32, 32};
  c.assignments["normalization"] = std::string("minmax");
  c.assignments["vertical_flip"] = std::string("true");
  c.assignments["rotation"] = std::string("true");
  c.assignments["grad_clip"] = 10.0;
  CHECK(validate_config(s, c).empty());
}

TEST_CASE("violations name the offending parameter") {
  SearchSpace s = video_space();
  auto c = sample_random(s, 3);

  SUBCASE("out-of-bound continuous value") {
    c.assignments["lr"] = -1.0;
    auto v = validate_config(s, c);
    REQUIRE(v.size() == 1);
    CHECK(v.front().find("lr") != std::string::npos);
  }
  SUBCASE("missing key") {
    c.assignments.erase("optimizer");
    auto v = validate_config(s, c);
    REQUIRE(v.size() == 1);
    CHECK(v.front().find("optimizer") != std::string::npos);
  }
  SUBCASE("unknown key") {
    c.assignments["warmup"] = 1.0;
    auto v = validate_config(s, c);
    REQUIRE(v.size() == 1);
    CHECK(v.front().find("warmup") != std::string::npos);
  }
  SUBCASE("categorical non-membership") {
    c.assignments["optimizer"] = std::string("RMSProp");
    auto v = validate_config(s, c);
    REQUIRE(v.size() == 1);
    CHECK(v.front().find("optimizer") != std::string::npos);
  }
  SUBCASE("tuple length mismatch") {
    c.assignments["sample_size"] = std::vector<std::int64_t>{32, 32};
    auto v = validate_config(s, c);
    REQUIRE(v.size() == 1);
    CHECK(v.front().find("sample_size") != std::string::npos);
  }
}

TEST_CASE("discretization of a small product enumerates it exactly") {
  SearchSpace s = tiny_space();
  DiscretizeOptions opts;
  opts.bins_per_continuous = 3;
  opts.max_actions = 512;
  auto actions = discretize(s, opts, 42);
  CHECK(actions.size() == 6);

  std::set<std::pair<double, std::string>> seen;
  for (const auto& a : actions.actions) {
    CHECK(validate_config(s, a).empty());
    seen.insert({std::get<double>(a.assignments.at("x")),
                 std::get<std::string>(a.assignments.at("opt"))});
  }
  CHECK(seen.size() == 6);
}

TEST_CASE("discretization is deterministic per seed") {
  SearchSpace s = video_space();
  DiscretizeOptions opts;
  opts.bins_per_continuous = 4;
  opts.max_actions = 64;
  auto a = discretize(s, opts, 9);
  auto b = discretize(s, opts, 9);
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(a.at(i) == b.at(i));
}

TEST_CASE("discretization caps a huge product at exactly the limit") {
  SearchSpace s = video_space();
  DiscretizeOptions opts;
  opts.bins_per_continuous = 8;
  opts.max_actions = 1000;
  auto actions = discretize(s, opts, 5);
  CHECK(actions.size() == 1000);
  std::set<std::string> distinct;
  for (const auto& a : actions.actions) {
    CHECK(validate_config(s, a).empty());
    std::string key;
    for (const auto& [k, v] : a.assignments) key += k + "=" + to_string(v) + ";";
    distinct.insert(key);
  }
  CHECK(distinct.size() == 1000);
}

TEST_CASE("unit-cube encoding maps bounds to 0 and 1") {
  SearchSpace s = tiny_space();
  auto c = sample_random(s, 0);
  c.assignments["x"] = 0.0;
  CHECK(encode_unit_cube(s, c)[0] == doctest::Approx(0.0));
  c.assignments["x"] = 1.0;
  CHECK(encode_unit_cube(s, c)[0] == doctest::Approx(1.0));

  SearchSpace lg;
  lg.classes = {{"net"}};
  lg.params = {{"lr", ContinuousParam{1e-4, 1e-1, true}}};
  Configuration d;
  d.assignments["lr"] = 1e-4;
  CHECK(encode_unit_cube(lg, d)[0] == doctest::Approx(0.0));
  d.assignments["lr"] = 1e-1;
  CHECK(encode_unit_cube(lg, d)[0] == doctest::Approx(1.0));
  d.assignments["lr"] = std::pow(10.0, -2.5);
  CHECK(encode_unit_cube(lg, d)[0] == doctest::Approx(0.5));
}

TEST_CASE("one-hot blocks select exactly the chosen category") {
  SearchSpace s;
  s.classes = {{"net"}};
  s.params = {{"optimizer", CategoricalParam{{"Adam", "AdamW", "SGD"}}}};
  Configuration c;
  c.assignments["optimizer"] = std::string("AdamW");
  auto x = encode_unit_cube(s, c);
  REQUIRE(x.size() == 3);
  CHECK(x[0] == 0.0);
  CHECK(x[1] == 1.0);
  CHECK(x[2] == 0.0);
}

TEST_CASE("encoding stays in the unit cube and one-hot blocks sum to one") {
  SearchSpace s = video_space();
  for (std::uint64_t seed = 100; seed < 400; ++seed) {
    auto c = sample_random(s, seed);
    auto x = encode_unit_cube(s, c);
    REQUIRE(x.size() == encode_dim(s));
    for (double xi : x) {
      CHECK(xi >= 0.0);
      CHECK(xi <= 1.0);
    }
    // one-hot blocks: optimizer(3), loss(2), normalization(2), flips(2), rotation(2)
    std::size_t pos = 1 + 1;  // lr, batch_size
    double sum_opt = x[pos] + x[pos + 1] + x[pos + 2];
    CHECK(sum_opt == doctest::Approx(1.0));
  }
}

TEST_CASE("decode inverts encode on random configurations") {
  SearchSpace s = video_space();
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    auto c = sample_random(s, seed);
    auto x = encode_unit_cube(s, c);
    auto back = decode_unit_cube(s, x);
    for (const auto& [name, value] : c.assignments) {
      const auto& rv = back.assignments.at(name);
      if (const auto* d = std::get_if<double>(&value)) {
        CHECK(std::get<double>(rv) == doctest::Approx(*d).epsilon(1e-9));
      } else {
        CHECK(rv == value);
      }
    }
  }
}

TEST_CASE("space JSON round-trips") {
  SearchSpace s = video_space();
  auto text = space_to_json_text(s);
  SearchSpace back = space_from_json_text(text);
  REQUIRE(back.classes.size() == s.classes.size());
  REQUIRE(back.params.size() == s.params.size());
  // behavioral equivalence: same samples, same encoding
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    auto c1 = sample_random(s, seed);
    auto c2 = sample_random(back, seed);
    CHECK(c1 == c2);
    CHECK(encode_unit_cube(s, c1) == encode_unit_cube(back, c2));
  }
}

TEST_CASE("per-class overrides replace the shared spec") {
  SearchSpace s = tiny_space();
  s.overrides["net"] = {{"x", ContinuousParam{5.0, 6.0, false}}};
  CHECK_NOTHROW(s.validate());
  auto specs = s.params_for("net");
  bool found = false;
  for (const auto& p : specs) {
    if (p.name == "x") {
      found = true;
      CHECK(std::get<ContinuousParam>(p.kind).lo == 5.0);
    }
  }
  CHECK(found);
  CHECK_THROWS_AS(s.params_for("ghost"), SpaceError);
}
