#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>

#include "fastdiff/errors.hpp"
#include "fastdiff/experiment_harness.hpp"

using namespace fastdiff;

namespace {

ExperimentPlan small_plan() {
  ExperimentPlan plan;
  ReactionPolynomial f(1);
  f.add_term({1}, 1.0).add_term({3}, -1.0);
  plan.system.reactions = {f};
  plan.system.diffusion = {1.0};
  const auto a = EdgeAmplitudes::power(0.1, 2.0);
  plan.noise.species.push_back({a, a, a, a});
  plan.K = 4;
  const Truncation tr = plan.truncation();
  plan.u0 = {make_coefficients(tr, {{{0, 0}, 0.3}, {{1, 1}, 0.05}})};
  plan.epsilons = {0.4, 0.3, 0.2};
  plan.paths = 4;
  plan.h = 1e-4;
  plan.T0 = 0.02;
  plan.save_interval = 0.01;
  plan.self_convergence = false;
  plan.seed = 17;
  plan.tail_tol = 1e-3;
  return plan;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

EpsilonSummary freq(double f, double lo, double hi) {
  EpsilonSummary s;
  s.exceed_frequency = f;
  s.wilson_low = lo;
  s.wilson_high = hi;
  return s;
}

}  // namespace

TEST_CASE("line fit") {
  const auto r = fit_line({1, 2, 3, 4}, {3, 5, 7, 9});
  CHECK(r.slope == doctest::Approx(2.0));
  CHECK(r.intercept == doctest::Approx(1.0));
  CHECK(r.r_squared == doctest::Approx(1.0));
  const auto n = fit_line({0, 1, 2}, {0, 1, 0});
  CHECK(n.slope == doctest::Approx(0.0));
  CHECK(n.r_squared == doctest::Approx(0.0));
  CHECK(fit_line({1}, {1}).slope == 0.0);
}

TEST_CASE("Wilson score interval") {
  const auto [lo0, hi0] = wilson_interval(0, 10);
  const double z2 = 1.959963984540054 * 1.959963984540054;
  CHECK(lo0 == 0.0);
  CHECK(hi0 == doctest::Approx(z2 / (10 + z2)));
  const auto [lo, hi] = wilson_interval(5, 10);
  CHECK(lo == doctest::Approx(1.0 - hi));
  CHECK(lo == doctest::Approx(0.236593090).epsilon(1e-8));
  CHECK(wilson_interval(10, 10).second == doctest::Approx(1.0));
}

TEST_CASE("type 7 quantile") {
  CHECK(quantile({4, 1, 3, 2}, 0.5) == doctest::Approx(2.5));
  CHECK(quantile({1, 2, 3, 4, 5}, 0.9) == doctest::Approx(4.6));
  CHECK(quantile({7}, 0.3) == 7.0);
  CHECK(quantile({}, 0.5) == 0.0);
}

TEST_CASE("trend test allows one overlapping increase") {
  CHECK(nonincreasing_with_overlap({freq(0.5, 0.3, 0.7), freq(0.4, 0.2, 0.6), freq(0.1, 0.0, 0.3)}));
  CHECK(nonincreasing_with_overlap({freq(0.4, 0.2, 0.6), freq(0.5, 0.3, 0.7), freq(0.1, 0.0, 0.3)}));
  CHECK_FALSE(nonincreasing_with_overlap({freq(0.1, 0.0, 0.2), freq(0.9, 0.7, 1.0)}));
  CHECK_FALSE(nonincreasing_with_overlap(
      {freq(0.3, 0.1, 0.5), freq(0.4, 0.2, 0.6), freq(0.45, 0.25, 0.65)}));
}

TEST_CASE("plan validation") {
  auto plan = small_plan();
  CHECK_NOTHROW(plan.validate());
  plan.epsilons = {};
  CHECK_THROWS_AS(plan.validate(), ConfigError);
  plan = small_plan();
  plan.epsilons = {0.2, 0.3};
  CHECK_THROWS_AS(plan.validate(), ConfigError);
  plan = small_plan();
  plan.kappa = 0.2;  // above 1 / (2m + 1) for m = 3
  CHECK_THROWS_AS(plan.validate(), ConfigError);
  plan = small_plan();
  plan.save_interval = 0.01005;
  CHECK_THROWS_AS(plan.validate(), ConfigError);
}

TEST_CASE("sweep output does not depend on the worker count") {
  auto plan = small_plan();
  const auto one = run_sweep(plan);
  plan.workers = 3;
  const auto three = run_sweep(plan);
  REQUIRE(one.records.size() == 12);
  REQUIRE(three.records.size() == 12);
  for (std::size_t i = 0; i < one.records.size(); ++i) {
    CHECK(one.records[i].sup_error == three.records[i].sup_error);
    CHECK(one.records[i].eps_index == static_cast<int>(i) / 4);
  }
  const auto dir = std::filesystem::temp_directory_path() / "fastdiff-harness-test";
  std::filesystem::remove_all(dir);
  write_sweep_outputs((dir / "a").string(), one, "{}");
  write_sweep_outputs((dir / "b").string(), three, "{}");
  CHECK(slurp(dir / "a" / "results.csv") == slurp(dir / "b" / "results.csv"));
  CHECK(slurp(dir / "a" / "paths.csv") == slurp(dir / "b" / "paths.csv"));
  CHECK_FALSE(slurp(dir / "a" / "results.csv").empty());
  std::filesystem::remove_all(dir);

  REQUIRE(one.summaries.size() == 3);
  for (const auto& s : one.summaries) {
    CHECK(s.paths == 4);
    CHECK(s.wilson_low <= s.exceed_frequency);
    CHECK(s.exceed_frequency <= s.wilson_high);
    CHECK(s.median <= s.q90);
  }
  const auto again = probability_estimate(plan, one, plan.threshold_kappa);
  for (std::size_t i = 0; i < again.size(); ++i) {
    CHECK(again[i].exceedances == one.summaries[i].exceedances);
  }
}

TEST_CASE("case2 initial fluctuation scales with epsilon") {
  auto plan = small_plan();
  CHECK(initial_field(plan, 0.1)[0](1, 1) == 0.05);
  plan.system.regime = Regime::case2;
  const auto u = initial_field(plan, 0.1);
  CHECK(u[0](0, 0) == 0.3);
  CHECK(u[0](1, 1) == doctest::Approx(0.005));
}

TEST_CASE("numbers round-trip through their text form") {
  for (double v : {0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23}) {
    CHECK(std::stod(format_number(v)) == v);
  }
}

TEST_CASE("exact OU transition reaches the stationary variance") {
  const double pi2 = std::numbers::pi * std::numbers::pi;
  const auto [var, se] = ou_stationary_sample(2.0, 1.0, pi2, 20000, 5.0, 3);
  CHECK(std::abs(var - 1.0 / pi2) < 4.0 * se);
  CHECK(se < 0.02 / pi2);
}

TEST_CASE("averaging errors shrink with epsilon") {
  AveragingPlan plan;
  plan.epsilons = {0.2, 0.1, 0.05};
  plan.paths = 2000;
  plan.T = 0.5;
  const auto rep = averaging_check(plan);
  REQUIRE(rep.rows.size() == 3);
  CHECK(rep.stationary_variance == doctest::Approx(2.0 / (2.0 * plan.lambda)));
  CHECK(rep.rows[2].mean_abs_integral < rep.rows[0].mean_abs_integral);
  CHECK(rep.integral_fit.slope > 0.6);
}
