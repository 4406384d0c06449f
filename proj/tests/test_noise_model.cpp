#include <doctest.h>

#include <cmath>
#include <numbers>

#include "fastdiff/errors.hpp"
#include "fastdiff/noise_model.hpp"
#include "oracles.hpp"

using namespace fastdiff;

namespace {

BoundaryNoiseSpec uniform_power(double c, double mu, Regime regime = Regime::case1,
                                double alpha0 = 0.0) {
  BoundaryNoiseSpec s;
  s.regime = regime;
  const auto a = EdgeAmplitudes::power(c, mu, alpha0);
  s.species.push_back({a, a, a, a});
  return s;
}

}  // namespace

TEST_CASE("amplitude laws") {
  const auto p = EdgeAmplitudes::power(0.5, 2.0, 0.1);
  CHECK(p.alpha(0) == 0.1);
  CHECK(p.alpha(3) == doctest::Approx(0.5 / 9.0));
  const auto l = EdgeAmplitudes::list({1.0, 0.0, 2.0});
  CHECK(l.alpha(1) == 1.0);
  CHECK(l.alpha(3) == 2.0);
  CHECK(l.alpha(9) == 0.0);
  CHECK(l.active_above(2));
  CHECK_FALSE(l.active_above(3));
  CHECK_FALSE(EdgeAmplitudes::silent().active_above(0));
}

TEST_CASE("trace coupling picks the matching edge mode") {
  const double r2 = std::numbers::sqrt2;
  CHECK(trace_coupling(Edge::bottom, 2, {2, 3}) == doctest::Approx(r2));
  CHECK(trace_coupling(Edge::top, 2, {2, 3}) == doctest::Approx(-r2));
  CHECK(trace_coupling(Edge::bottom, 1, {2, 3}) == 0.0);
  CHECK(trace_coupling(Edge::left, 3, {2, 3}) == doctest::Approx(r2));
  CHECK(trace_coupling(Edge::right, 3, {1, 3}) == doctest::Approx(-r2));
  CHECK(trace_coupling(Edge::left, 0, {0, 0}) == 1.0);
}

TEST_CASE("diagonal of q agrees with the trace oracle") {
  const auto spec = uniform_power(0.3, 2.0);
  const Truncation tr(8, 17);
  const auto cov = assemble_covariance(spec, tr);
  const oracle::PowerLaw law{0.3, 2.0, 0.0};
  const oracle::PowerLaw edges[4] = {law, law, law, law};
  for (int k1 = 0; k1 <= 8; ++k1) {
    for (int k2 = 0; k2 <= 8; ++k2) {
      CHECK(cov.entry(0, {k1, k2}, {k1, k2}) ==
            doctest::Approx(oracle::trace_variance(edges, k1, k2)).scale(1e-30));
    }
  }
}

TEST_CASE("q is the trace product and positive semidefinite") {
  BoundaryNoiseSpec spec;
  spec.species.push_back({EdgeAmplitudes::list({0.3, 0.1, 0.05}), EdgeAmplitudes::power(0.2, 1.5),
                          EdgeAmplitudes::silent(), EdgeAmplitudes::list({0.0, 0.4})});
  const Truncation tr(6, 13);
  const auto cov = assemble_covariance(spec, tr);
  const Eigen::MatrixXd T = cov.trace_matrix(0);
  const Eigen::MatrixXd q = T * cov.alpha_squared(0).asDiagonal() * T.transpose();
  CHECK((q - cov.matrix(0)).cwiseAbs().maxCoeff() < 1e-14);
  CHECK(relative_min_eigenvalue(cov.matrix(0)) > -1e-10);
  // cross entries through a shared bottom-edge mode: (1,0) and (1,2)
  CHECK(cov.entry(0, {1, 0}, {1, 2}) ==
        doctest::Approx(0.3 * 0.3 * 1.0 * std::numbers::sqrt2 +
                        0.2 * 0.2 * 1.0 * std::numbers::sqrt2));
  // no shared edge mode
  CHECK(cov.entry(0, {1, 1}, {2, 3}) == 0.0);
}

TEST_CASE("silent noise gives a zero covariance") {
  BoundaryNoiseSpec spec;
  const auto s = EdgeAmplitudes::silent();
  spec.species.push_back({s, s, s, s});
  const auto cov = assemble_covariance(spec, Truncation(4, 9));
  CHECK(cov.matrix(0).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("a band too small for any active edge mode is a configuration error") {
  BoundaryNoiseSpec spec;
  const auto s = EdgeAmplitudes::silent();
  spec.species.push_back({EdgeAmplitudes::list({0.0, 0.0, 0.0, 1.0}), s, s, s});
  CHECK_THROWS_AS(assemble_covariance(spec, Truncation(2, 5)), ConfigError);
  CHECK_NOTHROW(assemble_covariance(spec, Truncation(4, 9)));
}

TEST_CASE("validation of noise specifications") {
  CHECK_NOTHROW(uniform_power(0.1, 2.0).validate(3));
  CHECK_THROWS_AS(uniform_power(0.1, 2.0, Regime::case1, 0.2).validate(3), ConfigError);
  CHECK_NOTHROW(uniform_power(0.1, 2.0, Regime::case2, 0.2).validate(3));
  CHECK_THROWS_AS(uniform_power(-0.1, 2.0).validate(3), ConfigError);
  // 2 mu - 1/2 - 1/(2m) must exceed 1
  CHECK_THROWS_AS(uniform_power(0.1, 0.8).validate(3), ConfigError);
  CHECK_NOTHROW(uniform_power(0.1, 0.9).validate(3));
  BoundaryNoiseSpec neg;
  neg.species.push_back({EdgeAmplitudes::list({0.1, -0.2}), EdgeAmplitudes::silent(),
                         EdgeAmplitudes::silent(), EdgeAmplitudes::silent()});
  CHECK_THROWS_AS(neg.validate(3), ConfigError);
  BoundaryNoiseSpec empty;
  CHECK_THROWS_AS(empty.validate(3), ConfigError);
}

TEST_CASE("edge increments have variance dt and drive the mean in case2") {
  const auto spec = uniform_power(0.1, 2.0, Regime::case2, 0.3);
  CHECK(mean_noise_amplitude(spec, 0) == doctest::Approx(0.6));
  CHECK(mean_noise_amplitude(uniform_power(0.1, 2.0), 0) == 0.0);
  const RandomStream stream(11, 0);
  const double dt = 0.01;
  double s2 = 0.0, sm2 = 0.0;
  const int n = 20000;
  for (int k = 0; k < n; ++k) {
    const auto inc = sample_edge_increments(spec, 4, dt, stream, k);
    s2 += inc.at(0, Edge::left, 2) * inc.at(0, Edge::left, 2);
    const double m = mean_driver_increment(spec, 0, inc);
    sm2 += m * m;
  }
  CHECK(s2 / n == doctest::Approx(dt).epsilon(0.05));
  CHECK(sm2 / n == doctest::Approx(0.36 * dt).epsilon(0.05));
}
