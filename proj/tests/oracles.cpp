#include "oracles.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace oracle {

Quadrature gauss_legendre(int n) {
  Quadrature q;
  q.nodes.resize(n);
  q.weights.resize(n);
  for (int i = 0; i < n; ++i) {
    // Newton iteration on P_n from the Chebyshev-like initial guess
    double x = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = x;
      for (int k = 2; k <= n; ++k) {
        const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      dp = n * (x * p1 - p0) / (x * x - 1.0);
      const double dx = p1 / dp;
      x -= dx;
      if (std::abs(dx) < 1e-16) break;
    }
    q.nodes[i] = 0.5 * (1.0 - x);
    q.weights[i] = 1.0 / ((1.0 - x * x) * dp * dp);
  }
  return q;
}

double cosine(int l, double z) {
  return l == 0 ? 1.0 : std::numbers::sqrt2 * std::cos(std::numbers::pi * l * z);
}

double product_mean(const std::vector<std::pair<int, int>>& modes) {
  int total = 0;
  for (const auto& [a, b] : modes) total += a + b;
  const Quadrature q = gauss_legendre(total + 24);
  double sx = 0.0, sy = 0.0;
  // separable: the integral is the product of the two axis integrals
  for (std::size_t i = 0; i < q.nodes.size(); ++i) {
    double px = 1.0, py = 1.0;
    for (const auto& [a, b] : modes) {
      px *= cosine(a, q.nodes[i]);
      py *= cosine(b, q.nodes[i]);
    }
    sx += q.weights[i] * px;
    sy += q.weights[i] * py;
  }
  return sx * sy;
}

double PowerLaw::operator()(int l) const {
  return l == 0 ? alpha0 : c * std::pow(static_cast<double>(l), -mu);
}

double trace_variance(const PowerLaw (&edges)[4], int k1, int k2) {
  const auto sq = [](double v) { return v * v; };
  const double t1_0 = cosine(k2, 0.0), t1_1 = cosine(k2, 1.0);
  const double t2_0 = cosine(k1, 0.0), t2_1 = cosine(k1, 1.0);
  return sq(edges[0](k1) * t1_0) + sq(edges[1](k1) * t1_1) + sq(edges[2](k2) * t2_0) +
         sq(edges[3](k2) * t2_1);
}

double stationary_variance_at(const PowerLaw (&edges)[4], double d, int K, double x, double y) {
  const double pi2 = std::numbers::pi * std::numbers::pi;
  std::vector<std::pair<int, int>> modes;
  for (int k1 = 0; k1 <= K; ++k1)
    for (int k2 = 0; k2 <= K; ++k2)
      if (k1 != 0 || k2 != 0) modes.emplace_back(k1, k2);
  double s = 0.0;
  for (const auto& [a1, a2] : modes) {
    const double ga = cosine(a1, x) * cosine(a2, y);
    for (const auto& [b1, b2] : modes) {
      double q = 0.0;
      if (a1 == b1) {
        const double e0 = edges[0](a1), e1 = edges[1](a1);
        q += e0 * e0 * cosine(a2, 0.0) * cosine(b2, 0.0) + e1 * e1 * cosine(a2, 1.0) * cosine(b2, 1.0);
      }
      if (a2 == b2) {
        const double e2 = edges[2](a2), e3 = edges[3](a2);
        q += e2 * e2 * cosine(a1, 0.0) * cosine(b1, 0.0) + e3 * e3 * cosine(a1, 1.0) * cosine(b1, 1.0);
      }
      if (q == 0.0) continue;
      const double lam = pi2 * (a1 * a1 + a2 * a2 + b1 * b1 + b2 * b2);
      s += q / (d * lam) * ga * cosine(b1, x) * cosine(b2, y);
    }
  }
  return s;
}

double c2_band(const PowerLaw (&edges)[4], double d, int K) {
  const double pi2 = std::numbers::pi * std::numbers::pi;
  double s = 0.0;
  for (int k1 = 0; k1 <= K; ++k1) {
    for (int k2 = 0; k2 <= K; ++k2) {
      if (k1 == 0 && k2 == 0) continue;
      s += trace_variance(edges, k1, k2) / (2.0 * d * pi2 * (k1 * k1 + k2 * k2));
    }
  }
  return s;
}

double c2_richardson(const PowerLaw (&edges)[4], double d, int K) {
  if (K % 4 != 0) throw std::invalid_argument("c2_richardson: K must be divisible by 4");
  const double a = c2_band(edges, d, K / 4);
  const double b = c2_band(edges, d, K / 2);
  const double c = c2_band(edges, d, K);
  // error ~ e1/K + e2/K^2: eliminate both
  const double r1 = 2.0 * b - a;
  const double r2 = 2.0 * c - b;
  return (4.0 * r2 - r1) / 3.0;
}

namespace {

// 1-D product of cosine series, full length (degree doubles).
std::vector<double> axis_product(int a, int b) {
  std::vector<double> out(a + b + 1, 0.0);
  if (a == 0 || b == 0) {
    out[a + b] = 1.0;
    return out;
  }
  const double r = 1.0 / std::numbers::sqrt2;
  out[a + b] += r;
  if (a == b) out[0] += 1.0;
  else out[std::abs(a - b)] += r;
  return out;
}

}  // namespace

Eigen::MatrixXd cosine_product(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  const int ka = static_cast<int>(a.rows()) - 1;
  const int kb = static_cast<int>(b.rows()) - 1;
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(ka + kb + 1, ka + kb + 1);
  for (int a1 = 0; a1 <= ka; ++a1)
    for (int a2 = 0; a2 <= ka; ++a2) {
      if (a(a1, a2) == 0.0) continue;
      for (int b1 = 0; b1 <= kb; ++b1)
        for (int b2 = 0; b2 <= kb; ++b2) {
          if (b(b1, b2) == 0.0) continue;
          const auto px = axis_product(a1, b1);
          const auto py = axis_product(a2, b2);
          for (std::size_t i = 0; i < px.size(); ++i) {
            if (px[i] == 0.0) continue;
            for (std::size_t j = 0; j < py.size(); ++j) {
              out(i, j) += a(a1, a2) * b(b1, b2) * px[i] * py[j];
            }
          }
        }
    }
  return out;
}

double slope(const std::vector<double>& x, const std::vector<double>& y) {
  const double n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i] / n;
    my += y[i] / n;
  }
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
  }
  return sxy / sxx;
}

}  // namespace oracle
