#include <doctest.h>

#include <cmath>
#include <numbers>

#include "fastdiff/ou_convolution.hpp"

using namespace fastdiff;

namespace {

BoundaryNoiseSpec symmetric_spec(Regime regime, double c, double alpha0 = 0.0) {
  BoundaryNoiseSpec s;
  s.regime = regime;
  const auto a = EdgeAmplitudes::power(c, 2.0, alpha0);
  s.species.push_back({a, a, a, a});
  return s;
}

// Reference one-step covariance of dZ = -L Z dt + sigma dW~ with E[dW~ dW~^T] = q dt.
Eigen::MatrixXd reference_covariance(const Eigen::MatrixXd& q, const Eigen::VectorXd& lambda,
                                     double d, double eps, double h, double sigma2) {
  const int n = static_cast<int>(q.rows());
  Eigen::MatrixXd c(n, n);
  for (int a = 0; a < n; ++a) {
    for (int b = 0; b < n; ++b) {
      const double s = d * (lambda(a) + lambda(b)) / (eps * eps);
      c(a, b) = sigma2 * q(a, b) * (s == 0.0 ? h : (1.0 - std::exp(-s * h)) / s);
    }
  }
  return c;
}

}  // namespace

TEST_CASE("one-step kernel limits") {
  CHECK(one_step_covariance_kernel(Regime::case1, 0.5, 1.0, 0.0, 0.01) ==
        doctest::Approx(0.04));
  CHECK(one_step_covariance_kernel(Regime::case2, 0.5, 1.0, 0.0, 0.01) ==
        doctest::Approx(0.01));
  // fully relaxed: 1/(d lambda) in units of eps^-2 sigma^2
  CHECK(one_step_covariance_kernel(Regime::case1, 0.1, 2.0, 10.0, 1.0) ==
        doctest::Approx(1.0 / (2.0 * 10.0)));
  CHECK(one_step_covariance_kernel(Regime::case2, 0.1, 2.0, 10.0, 1.0) ==
        doctest::Approx(0.01 / (2.0 * 10.0)));
  // small exponent: no cancellation
  const double k = one_step_covariance_kernel(Regime::case1, 1.0, 1.0, 1e-3, 1e-9);
  CHECK(k == doctest::Approx(1e-9 * (1.0 - 0.5e-12)).epsilon(1e-14));
}

TEST_CASE("propagator reproduces the exact one-step covariance") {
  const auto spec = symmetric_spec(Regime::case1, 0.4);
  const Truncation tr(6, 13);
  const auto cov = assemble_covariance(spec, tr);
  const double eps = 0.2, h = 1e-4, d = 1.3;
  const auto prop = OUPropagator::for_species(cov, spec, 0, d, eps, h);
  const int n = tr.mode_count() - 1;
  Eigen::VectorXd lambda(n);
  for (int f = 1; f <= n; ++f) lambda(f - 1) = eigenvalue(tr.mode_at(f));
  const Eigen::MatrixXd q = cov.matrix(0).bottomRightCorner(n, n);
  const Eigen::MatrixXd ref = reference_covariance(q, lambda, d, eps, h, 1.0 / (eps * eps));
  CHECK((prop.covariance() - ref).cwiseAbs().maxCoeff() < 1e-12 * ref.cwiseAbs().maxCoeff());
  // symmetric edges separate the modes by the parity of (k1, k2)
  CHECK(prop.block_count() == 4);
  for (int j = 0; j < n; ++j) {
    CHECK(prop.decay()(j) == doctest::Approx(std::exp(-d * lambda(j) * h / (eps * eps))));
  }
}

TEST_CASE("case2 conditional sampling keeps the joint covariance") {
  const auto spec = symmetric_spec(Regime::case2, 0.3, 0.2);
  const Truncation tr(4, 9);
  const auto cov = assemble_covariance(spec, tr);
  const double eps = 0.25, h = 2e-3;
  const auto prop = OUPropagator::for_species(cov, spec, 0, 1.0, eps, h);
  CHECK(prop.mean_increment_variance() == doctest::Approx(4 * 0.04 * h));
  const int n = tr.mode_count() - 1;
  Eigen::VectorXd lambda(n);
  for (int f = 1; f <= n; ++f) lambda(f - 1) = eigenvalue(tr.mode_at(f));
  const Eigen::MatrixXd q = cov.matrix(0).bottomRightCorner(n, n);
  const Eigen::MatrixXd ref = reference_covariance(q, lambda, 1.0, eps, h, 1.0);
  CHECK((prop.covariance() - ref).cwiseAbs().maxCoeff() < 1e-12 * ref.cwiseAbs().maxCoeff());

  // Monte Carlo: E[G dB] against the exact cross covariance of mode (1,0)
  const int j = tr.flat({1, 0}) - 1;
  const double s = 1.0 * lambda(j) / (eps * eps);
  const double exact_cross = cov.entry(0, {1, 0}, {0, 0}) * (1.0 - std::exp(-s * h)) / s;
  OUState st{Eigen::VectorXd::Zero(n), 0};
  const RandomStream stream(5, 0);
  std::vector<double> normals;
  Eigen::VectorXd inc(n);
  double cross = 0.0, db2 = 0.0;
  const int samples = 40000;
  for (int k = 0; k < samples; ++k) {
    const double db = ou_step_into(prop, st, stream, spec, 0, normals, inc);
    cross += inc(j) * db;
    db2 += db * db;
  }
  CHECK(db2 / samples == doctest::Approx(prop.mean_increment_variance()).epsilon(0.03));
  CHECK(cross / samples == doctest::Approx(exact_cross).epsilon(0.05));
}

TEST_CASE("increments have the factor covariance") {
  OUPropagator::Inputs in;
  in.regime = Regime::case1;
  in.epsilon = 0.5;
  in.diffusion = 1.0;
  in.h = 0.01;
  in.eigenvalues = Eigen::Vector2d(std::numbers::pi * std::numbers::pi,
                                   2 * std::numbers::pi * std::numbers::pi);
  in.q = (Eigen::Matrix2d() << 2.0, 0.8, 0.8, 1.0).finished();
  const OUPropagator prop(in);
  const Eigen::MatrixXd c = prop.covariance();
  BoundaryNoiseSpec none;
  none.species.resize(1);
  OUState st{Eigen::VectorXd::Zero(2), 0};
  const RandomStream stream(77, 0);
  std::vector<double> normals;
  Eigen::VectorXd inc(2);
  Eigen::Matrix2d acc = Eigen::Matrix2d::Zero();
  const int samples = 50000;
  for (int k = 0; k < samples; ++k) {
    ou_step_into(prop, st, stream, none, 0, normals, inc);
    acc += inc * inc.transpose();
  }
  acc /= samples;
  for (int a = 0; a < 2; ++a) {
    for (int b = 0; b < 2; ++b) {
      CHECK(acc(a, b) == doctest::Approx(c(a, b)).epsilon(0.04));
    }
  }
}

TEST_CASE("stationary variance") {
  const double pi2 = std::numbers::pi * std::numbers::pi;
  CHECK(stationary_variance(Regime::case1, 0.1, 2.0, 1.0, pi2) == doctest::Approx(1.0 / pi2));
  CHECK(stationary_variance(Regime::case2, 0.1, 2.0, 1.0, pi2) ==
        doctest::Approx(0.01 / pi2));
  CHECK_THROWS_AS(stationary_variance(Regime::case1, 0.1, 2.0, 1.0, 0.0), std::domain_error);
}

TEST_CASE("fluctuation packing round trip and the correction process") {
  CoefficientArray c(3, 3);
  c << 9, 1, 2, 3, 4, 5, 6, 7, 8;
  const Eigen::VectorXd v = pack_fluctuation(c);
  CHECK(v.size() == 8);
  CHECK(v(0) == 1.0);  // flat order (0,1), (0,2), (1,0), ...
  CHECK(v(2) == 3.0);
  CoefficientArray back = CoefficientArray::Zero(3, 3);
  unpack_fluctuation(v, back);
  CHECK(back(0, 0) == 0.0);
  CHECK(back(2, 2) == 8.0);

  const Eigen::VectorXd rates = Eigen::VectorXd::LinSpaced(8, 1.0, 8.0);
  const Eigen::VectorXd z = Eigen::VectorXd::Constant(8, 0.5);
  const CoefficientArray q = correction_process(c, z, rates, 0.2);
  CHECK(q(0, 0) == 0.0);
  CHECK(q(0, 1) == doctest::Approx(1.0 * std::exp(-0.2) + 0.5));
  CHECK(q(2, 2) == doctest::Approx(8.0 * std::exp(-8.0 * 0.2) + 0.5));
}

TEST_CASE("silent noise yields a rank-zero propagator") {
  BoundaryNoiseSpec spec;
  const auto s = EdgeAmplitudes::silent();
  spec.species.push_back({s, s, s, s});
  const Truncation tr(3, 7);
  const auto prop = OUPropagator::for_species(assemble_covariance(spec, tr), spec, 0, 1.0, 0.1, 1e-4);
  CHECK(prop.rank() == 0);
  OUState st{Eigen::VectorXd::Zero(prop.dimension()), 0};
  std::vector<double> normals;
  Eigen::VectorXd inc(prop.dimension());
  ou_step_into(prop, st, RandomStream(1, 0), spec, 0, normals, inc);
  CHECK(inc.cwiseAbs().maxCoeff() == 0.0);
}
