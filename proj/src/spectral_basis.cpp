#include "fastdiff/spectral_basis.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace fastdiff {

namespace {
constexpr double kSqrt2 = std::numbers::sqrt2;
constexpr double kPi = std::numbers::pi;
}  // namespace

bool eigen_order_less(ModeIndex a, ModeIndex b) {
  const int la = a.k1 * a.k1 + a.k2 * a.k2;
  const int lb = b.k1 * b.k1 + b.k2 * b.k2;
  if (la != lb) return la < lb;
  return a < b;
}

Truncation::Truncation(int max_mode, int grid_points) : K(max_mode), grid_n(grid_points) {
  if (K < 0) throw std::invalid_argument("truncation: K must be nonnegative");
  if (grid_n < 2 * K + 1) {
    throw std::invalid_argument("truncation: grid_n = " + std::to_string(grid_n) +
                                " is below 2K+1 = " + std::to_string(2 * K + 1));
  }
}

Truncation Truncation::with_min_grid(int max_mode) { return {max_mode, 2 * max_mode + 1}; }

double eigenvalue(ModeIndex k) {
  return kPi * kPi * (static_cast<double>(k.k1) * k.k1 + static_cast<double>(k.k2) * k.k2);
}

double edge_basis_eval(int l, double z) {
  if (!(z >= 0.0 && z <= 1.0)) throw std::domain_error("edge_basis_eval: z outside [0,1]");
  if (l < 0) throw std::domain_error("edge_basis_eval: negative mode");
  if (l == 0) return 1.0;
  // cos(pi l z) evaluated exactly at the endpoints so traces are +-sqrt(2) to the bit
  if (z == 0.0) return kSqrt2;
  if (z == 1.0) return (l % 2 == 0) ? kSqrt2 : -kSqrt2;
  return kSqrt2 * std::cos(kPi * l * z);
}

double basis_eval(ModeIndex k, double x, double y) {
  return edge_basis_eval(k.k1, x) * edge_basis_eval(k.k2, y);
}

SpectralTransform::SpectralTransform(int max_mode, int grid_points)
    : max_mode_(max_mode), grid_points_(grid_points) {
  if (max_mode < 0 || grid_points <= max_mode) {
    throw std::invalid_argument("SpectralTransform: need grid_points > K >= 0");
  }
  synthesis_.resize(grid_points, max_mode + 1);
  for (int i = 0; i < grid_points; ++i) {
    for (int l = 0; l <= max_mode; ++l) synthesis_(i, l) = edge_basis_eval(l, node(i));
  }
  analysis_ = synthesis_.transpose() / static_cast<double>(grid_points);
}

GridValues SpectralTransform::inverse(const CoefficientArray& coeffs) const {
  GridValues out;
  inverse_into(coeffs, out);
  return out;
}

CoefficientArray SpectralTransform::forward(const GridValues& values) const {
  CoefficientArray out;
  forward_into(values, out);
  return out;
}

void SpectralTransform::inverse_into(const CoefficientArray& coeffs, GridValues& out) const {
  if (coeffs.rows() != max_mode_ + 1 || coeffs.cols() != max_mode_ + 1) {
    throw std::invalid_argument("inverse_transform: coefficient array size mismatch");
  }
  inverse_scratch_.noalias() = synthesis_ * coeffs;
  out.noalias() = inverse_scratch_ * synthesis_.transpose();
}

void SpectralTransform::forward_into(const GridValues& values, CoefficientArray& out) const {
  if (values.rows() != grid_points_ || values.cols() != grid_points_) {
    throw std::invalid_argument("forward_transform: grid size mismatch");
  }
  forward_scratch_.noalias() = analysis_ * values;
  out.noalias() = forward_scratch_ * analysis_.transpose();
}

double project_mean(const CoefficientArray& u) { return u(0, 0); }

CoefficientArray project_fluctuation(const CoefficientArray& u) {
  CoefficientArray s = u;
  if (s.size() > 0) s(0, 0) = 0.0;
  return s;
}

long long count_balanced_signs(std::span<const int> frequencies) {
  int total = 0;
  for (int l : frequencies) total += std::abs(l);
  // counts[s + total] = number of partial sign patterns summing to s
  std::vector<long long> counts(2 * total + 1, 0), next(counts.size());
  counts[total] = 1;
  for (int l : frequencies) {
    if (l == 0) continue;
    std::fill(next.begin(), next.end(), 0);
    for (int s = 0; s <= 2 * total; ++s) {
      if (counts[s] == 0) continue;
      if (s + l <= 2 * total) next[s + l] += counts[s];
      if (s - l >= 0) next[s - l] += counts[s];
    }
    counts.swap(next);
  }
  return counts[total];
}

double axis_mean_of_product(std::span<const int> frequencies) {
  int nonzero = 0;
  for (int l : frequencies) {
    if (l < 0) throw std::domain_error("axis_mean_of_product: negative mode");
    if (l != 0) ++nonzero;
  }
  if (nonzero == 0) return 1.0;
  const long long patterns = count_balanced_signs(frequencies);
  if (patterns == 0) return 0.0;
  // (sqrt 2)^n 2^{-n} = 2^{-n/2}
  return static_cast<double>(patterns) * std::pow(2.0, -0.5 * nonzero);
}

double mean_of_product(std::span<const ModeIndex> modes) {
  if (modes.empty()) return 1.0;
  thread_local std::vector<int> xs, ys;
  xs.clear();
  ys.clear();
  for (const auto& m : modes) {
    xs.push_back(m.k1);
    ys.push_back(m.k2);
  }
  const double mx = axis_mean_of_product(xs);
  if (mx == 0.0) return 0.0;
  return mx * axis_mean_of_product(ys);
}

}  // namespace fastdiff
