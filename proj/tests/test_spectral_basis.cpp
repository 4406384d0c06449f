#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "fastdiff/spectral_basis.hpp"
#include "oracles.hpp"

using namespace fastdiff;

TEST_CASE("eigenvalues and eigen ordering") {
  const double pi2 = std::numbers::pi * std::numbers::pi;
  CHECK(eigenvalue({0, 0}) == 0.0);
  CHECK(eigenvalue({1, 0}) == doctest::Approx(pi2));
  CHECK(eigenvalue({1, 2}) == doctest::Approx(5 * pi2));
  CHECK(eigen_order_less({1, 0}, {1, 1}));
  CHECK(eigen_order_less({0, 1}, {1, 0}));  // equal eigenvalue, lexicographic
  CHECK_FALSE(eigen_order_less({2, 0}, {1, 1}));
}

TEST_CASE("edge basis values at the boundary are exact") {
  CHECK(edge_basis_eval(0, 0.3) == 1.0);
  CHECK(edge_basis_eval(5, 0.0) == std::numbers::sqrt2);
  CHECK(edge_basis_eval(5, 1.0) == -std::numbers::sqrt2);
  CHECK(edge_basis_eval(6, 1.0) == std::numbers::sqrt2);
  CHECK_THROWS_AS(edge_basis_eval(1, 1.5), std::domain_error);
  CHECK_THROWS_AS(edge_basis_eval(-1, 0.5), std::domain_error);
}

TEST_CASE("basis is orthonormal under Gauss-Legendre quadrature") {
  const auto q = oracle::gauss_legendre(60);
  for (int a = 0; a <= 8; ++a) {
    for (int b = 0; b <= 8; ++b) {
      double s = 0.0;
      for (std::size_t i = 0; i < q.nodes.size(); ++i) {
        s += q.weights[i] * edge_basis_eval(a, q.nodes[i]) * edge_basis_eval(b, q.nodes[i]);
      }
      CHECK(s == doctest::Approx(a == b ? 1.0 : 0.0).epsilon(1e-12).scale(1.0));
    }
  }
}

TEST_CASE("transform round trip and Parseval on band-limited fields") {
  std::mt19937_64 rng(7);
  std::normal_distribution<double> N;
  for (int K : {0, 1, 5, 16}) {
    for (int n : {2 * K + 1, 2 * K + 6}) {
      SpectralTransform T(K, n);
      CoefficientArray c(K + 1, K + 1);
      for (int i = 0; i < c.size(); ++i) c.data()[i] = N(rng);
      const GridValues g = T.inverse(c);
      CHECK((T.forward(g) - c).cwiseAbs().maxCoeff() < 1e-12);
      const double grid_l2 = std::sqrt(g.squaredNorm() / (double(n) * n));
      CHECK(grid_l2 == doctest::Approx(c.norm()).epsilon(1e-10));
    }
  }
}

TEST_CASE("inverse transform matches pointwise evaluation") {
  const Truncation tr(4, 11);
  SpectralTransform T(tr);
  CoefficientArray c = CoefficientArray::Zero(5, 5);
  c(2, 3) = 1.5;
  c(0, 1) = -0.25;
  const GridValues g = T.inverse(c);
  for (int i = 0; i < 11; ++i) {
    for (int j = 0; j < 11; ++j) {
      const double x = T.node(i), y = T.node(j);
      CHECK(g(i, j) == doctest::Approx(1.5 * basis_eval({2, 3}, x, y) -
                                       0.25 * basis_eval({0, 1}, x, y)));
    }
  }
}

TEST_CASE("size mismatches are rejected") {
  SpectralTransform T(3, 7);
  CHECK_THROWS_AS(T.inverse(CoefficientArray::Zero(3, 3)), std::invalid_argument);
  CHECK_THROWS_AS(T.forward(GridValues::Zero(6, 6)), std::invalid_argument);
  CHECK_THROWS_AS(Truncation(4, 8), std::invalid_argument);
  CHECK_THROWS_AS(SpectralTransform(3, 3), std::invalid_argument);
}

TEST_CASE("mean and fluctuation projections") {
  CoefficientArray c = CoefficientArray::Constant(3, 3, 2.0);
  c(0, 0) = 0.7;
  CHECK(project_mean(c) == 0.7);
  const CoefficientArray s = project_fluctuation(c);
  CHECK(s(0, 0) == 0.0);
  CHECK(s(1, 2) == 2.0);
  CHECK(project_mean(s + CoefficientArray::Zero(3, 3)) == 0.0);
}

TEST_CASE("balanced sign counts") {
  const std::vector<int> a{1, 1};
  CHECK(count_balanced_signs(a) == 2);
  const std::vector<int> b{1, 2, 3};
  CHECK(count_balanced_signs(b) == 2);  // 1+2-3, -1-2+3
  const std::vector<int> c{1, 2};
  CHECK(count_balanced_signs(c) == 0);
  const std::vector<int> none{};
  CHECK(count_balanced_signs(none) == 1);
}

TEST_CASE("mean_of_product agrees with the quadrature oracle") {
  std::mt19937 rng(3);
  std::uniform_int_distribution<int> k(0, 6);
  for (int trial = 0; trial < 200; ++trial) {
    const int count = 1 + trial % 5;
    std::vector<ModeIndex> modes;
    std::vector<std::pair<int, int>> raw;
    for (int i = 0; i < count; ++i) {
      modes.push_back({k(rng), k(rng)});
      raw.emplace_back(modes.back().k1, modes.back().k2);
    }
    CHECK(mean_of_product(modes) == doctest::Approx(oracle::product_mean(raw)).scale(1.0).epsilon(1e-12));
  }
  const std::vector<ModeIndex> pair{{2, 1}, {2, 1}};
  CHECK(mean_of_product(pair) == doctest::Approx(1.0));
  const std::vector<ModeIndex> single{{0, 3}};
  CHECK(mean_of_product(single) == 0.0);
}

TEST_CASE("axis mean of a product of four equal modes") {
  // integral of (sqrt2 cos)^4 = 4 * 3/8
  const std::vector<int> f{3, 3, 3, 3};
  CHECK(axis_mean_of_product(f) == doctest::Approx(1.5));
}
