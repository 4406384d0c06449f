#include <doctest.h>

#include <cmath>
#include <numbers>

#include "fastdiff/errors.hpp"
#include "fastdiff/spde_solver.hpp"
#include "oracles.hpp"

using namespace fastdiff;

namespace {

SystemSpec scalar_system(ReactionPolynomial f, double eps, Regime regime = Regime::case1) {
  SystemSpec s;
  s.n = 1;
  s.diffusion = {1.0};
  s.reactions = {std::move(f)};
  s.epsilon = eps;
  s.regime = regime;
  return s;
}

BoundaryNoiseSpec noise(int species, double c, Regime regime = Regime::case1, double alpha0 = 0.0) {
  BoundaryNoiseSpec s;
  s.regime = regime;
  const auto a = EdgeAmplitudes::power(c, 2.0, alpha0);
  for (int i = 0; i < species; ++i) s.species.push_back({a, a, a, a});
  return s;
}

ReactionPolynomial cubic() {
  ReactionPolynomial f(1);
  f.add_term({1}, 1.0).add_term({3}, -1.0);
  return f;
}

}  // namespace

TEST_CASE("heat equation modes decay exactly") {
  const Truncation tr(4, 9);
  const double eps = 0.5, h = 1e-3;
  SpdeSolver solver(scalar_system(ReactionPolynomial(1), eps), noise(1, 0.0), tr, h);
  auto u0 = std::vector<CoefficientArray>{make_coefficients(tr, {{{1, 0}, 1.0}, {{0, 0}, 0.3}})};
  const auto traj = solver.simulate_path(u0, 0.05, {0.0, 0.05}, RandomStream(1, 0));
  REQUIRE(traj.times.size() == 2);
  const double lambda = std::numbers::pi * std::numbers::pi;
  CHECK(traj.coeffs[1][0](1, 0) ==
        doctest::Approx(std::exp(-lambda * 0.05 / (eps * eps))).epsilon(1e-12));
  CHECK(traj.coeffs[1][0](0, 0) == doctest::Approx(0.3).epsilon(1e-15));
}

TEST_CASE("case1 noise leaves the mean unchanged without reaction") {
  const Truncation tr(6, 13);
  SpdeSolver solver(scalar_system(ReactionPolynomial(1), 0.2), noise(1, 0.3), tr, 1e-5);
  auto u0 = std::vector<CoefficientArray>{make_coefficients(tr, {{{0, 0}, 0.7}})};
  const auto traj = solver.simulate_path(u0, 0.01, {0.0, 0.005, 0.01}, RandomStream(9, 2));
  for (const auto& row : traj.coeffs) CHECK(row[0](0, 0) == 0.7);
  CHECK(traj.coeffs.back()[0](1, 0) != 0.0);  // fluctuations did move
}

TEST_CASE("L^p norm on the grid") {
  const Truncation tr(3, 7);
  SpdeSolver solver(scalar_system(cubic(), 0.5), noise(1, 0.0), tr, 1e-4);
  const std::vector<CoefficientArray> u{make_coefficients(tr, {{{1, 0}, 1.0}})};
  CHECK(solver.lp_norm(u, 4.0) == doctest::Approx(std::pow(1.5, 0.25)).epsilon(1e-13));
  CHECK(solver.lp_norm(u, 2.0) == doctest::Approx(1.0));
  const std::vector<CoefficientArray> w{make_coefficients(tr, {{{1, 2}, 0.6}, {{0, 0}, 0.8}})};
  CHECK(solver.lp_norm(w, 2.0) == doctest::Approx(1.0));
  // odd p exercises the general branch; constant field gives its value
  const std::vector<CoefficientArray> c{make_coefficients(tr, {{{0, 0}, 0.4}})};
  CHECK(solver.lp_norm(c, 3.0) == doctest::Approx(0.4));
  CHECK_THROWS_AS(solver.lp_norm(c, 0.5), std::invalid_argument);
}

TEST_CASE("dealiased cubic matches the exact cosine convolution") {
  const int K = 5;
  const Truncation tr(K, 2 * K + 1);
  SpdeSolver solver(scalar_system(cubic(), 0.5), noise(1, 0.0), tr, 1e-4);
  CoefficientArray a(K + 1, K + 1);
  for (int i = 0; i <= K; ++i)
    for (int j = 0; j <= K; ++j) a(i, j) = std::sin(1.0 + i + 2.3 * j) / (1 + i + j);
  const auto f = solver.reaction_coefficients({a});
  const Eigen::MatrixXd cube = oracle::cosine_product(oracle::cosine_product(a, a), a);
  const Eigen::MatrixXd expected = a - cube.topLeftCorner(K + 1, K + 1);
  CHECK((f[0] - expected).cwiseAbs().maxCoeff() < 1e-12);
  CHECK(solver.padded_grid() > 2 * K);
}

TEST_CASE("two-species product term matches the convolution") {
  const int K = 4;
  const Truncation tr(K, 2 * K + 1);
  SystemSpec s;
  s.n = 2;
  s.diffusion = {1.0, 2.0};
  ReactionPolynomial f1(2), f2(2);
  f1.add_term({1, 2}, -1.0);
  f2.add_term({1, 2}, 1.0);
  s.reactions = {f1, f2};
  s.epsilon = 0.5;
  SpdeSolver solver(s, noise(2, 0.0), tr, 1e-4);
  CoefficientArray a = CoefficientArray::Zero(K + 1, K + 1), b = a;
  a(0, 0) = 0.5;
  a(1, 2) = 0.2;
  b(0, 0) = 0.4;
  b(3, 1) = -0.3;
  b(2, 2) = 0.1;
  const auto f = solver.reaction_coefficients({a, b});
  const Eigen::MatrixXd prod = oracle::cosine_product(a, oracle::cosine_product(b, b));
  CHECK((f[0] + prod.topLeftCorner(K + 1, K + 1)).cwiseAbs().maxCoeff() < 1e-13);
  CHECK((f[1] + f[0]).cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("autocatalytic system conserves the total mean") {
  const int K = 6;
  const Truncation tr(K, 2 * K + 1);
  SystemSpec s;
  s.n = 2;
  s.diffusion = {1.0, 1.0};
  ReactionPolynomial f1(2), f2(2);
  f1.add_term({1, 2}, -1.0);
  f2.add_term({1, 2}, 1.0);
  s.reactions = {f1, f2};
  s.epsilon = 0.3;
  SpdeSolver solver(s, noise(2, 0.0), tr, 1e-5);
  const std::vector<CoefficientArray> u0{make_coefficients(tr, {{{0, 0}, 0.6}, {{1, 0}, 0.1}}),
                                         make_coefficients(tr, {{{0, 0}, 0.4}, {{0, 1}, 0.1}})};
  const auto traj = solver.simulate_path(u0, 0.02, {0.0, 0.01, 0.02}, RandomStream(1, 0));
  for (const auto& row : traj.coeffs) {
    CHECK(std::abs(row[0](0, 0) + row[1](0, 0) - 1.0) < 1e-12);
  }
  CHECK(traj.coeffs.back()[0](0, 0) < 0.6);
}

TEST_CASE("step guard, cutoff and grid checks") {
  const Truncation tr(4, 9);
  CHECK_THROWS_AS(SpdeSolver(scalar_system(cubic(), 0.1), noise(1, 0.0), tr, 0.5), ConfigError);
  SolverOptions loose;
  loose.enforce_step_guard = false;
  CHECK_NOTHROW(SpdeSolver(scalar_system(cubic(), 0.1), noise(1, 0.0), tr, 0.5, loose));

  SpdeSolver solver(scalar_system(cubic(), 0.1), noise(1, 0.0), tr, 1e-4);
  CHECK(solver.cutoff_level() == doctest::Approx(std::pow(0.1, -0.1)));
  CHECK(solver.h() <= solver.step_bound());
  const std::vector<CoefficientArray> big{make_coefficients(tr, {{{0, 0}, 5.0}})};
  const auto traj = solver.simulate_path(big, 0.01, {0.0, 0.01}, RandomStream(1, 0));
  CHECK(traj.stopped);
  CHECK(traj.stop_time == 0.0);
  CHECK(traj.times.empty());

  CHECK(steps_to(0.3, 0.1) == 3);
  CHECK_THROWS_AS(steps_to(0.35, 0.1), ConfigError);
  CHECK_THROWS_AS(
      SpdeSolver(scalar_system(cubic(), 0.1), noise(1, 0.1, Regime::case2, 0.1), tr, 1e-4),
      ConfigError);
}

TEST_CASE("paths are reproducible and depend on the stream") {
  const Truncation tr(6, 13);
  SpdeSolver solver(scalar_system(cubic(), 0.2), noise(1, 0.1), tr, 4e-6);
  const std::vector<CoefficientArray> u0{make_coefficients(tr, {{{0, 0}, 0.5}})};
  const auto a = solver.simulate_path(u0, 0.002, {0.002}, RandomStream(3, 1));
  const auto b = solver.simulate_path(u0, 0.002, {0.002}, RandomStream(3, 1));
  const auto c = solver.simulate_path(u0, 0.002, {0.002}, RandomStream(3, 2));
  CHECK((a.coeffs[0][0] - b.coeffs[0][0]).cwiseAbs().maxCoeff() == 0.0);
  CHECK((a.coeffs[0][0] - c.coeffs[0][0]).cwiseAbs().maxCoeff() > 0.0);
}

TEST_CASE("substepped noise couples a coarse run to a fine one") {
  const Truncation tr(6, 13);
  const double h = 1e-5;
  SolverOptions sub;
  sub.noise_substeps = 2;
  SpdeSolver coarse(scalar_system(ReactionPolynomial(1), 0.2), noise(1, 0.2), tr, h, sub);
  SpdeSolver fine(scalar_system(ReactionPolynomial(1), 0.2), noise(1, 0.2), tr, h / 2);
  const std::vector<CoefficientArray> u0{make_coefficients(tr, {{{0, 0}, 0.5}, {{2, 1}, 0.1}})};
  const RandomStream stream(8, 0);
  const auto a = coarse.simulate_path(u0, 0.001, {0.001}, stream);
  const auto b = fine.simulate_path(u0, 0.001, {0.001}, stream);
  // without reaction both are exact, so they agree up to rounding
  CHECK((a.coeffs[0][0] - b.coeffs[0][0]).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("case2 mean mode follows reaction plus recorded increments") {
  const Truncation tr(6, 13);
  const double h = 4e-6;
  SpdeSolver solver(scalar_system(cubic(), 0.2, Regime::case2), noise(1, 0.2, Regime::case2, 0.1),
                    tr, h);
  auto state = solver.initial_state({make_coefficients(tr, {{{0, 0}, 0.5}})});
  const RandomStream stream(4, 0);
  double expected = 0.5;
  for (int k = 0; k < 200; ++k) {
    const double f00 = solver.reaction_coefficients(state.coeffs)[0](0, 0);
    const auto db = solver.step(state, stream);
    expected += h * f00 + db[0];
  }
  CHECK(std::abs(state.mean(0) - expected) < 1e-14);
  CHECK(state.mean(0) != doctest::Approx(0.5));
}
