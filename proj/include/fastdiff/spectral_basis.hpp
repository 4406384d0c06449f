#pragma once

#include <compare>
#include <cstddef>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace fastdiff {

/// Index (k1, k2) of the cosine eigenfunction g_k(x,y) = f_{k1}(x) f_{k2}(y)
/// of the Neumann Laplacian on the unit square.
struct ModeIndex {
  int k1 = 0;
  int k2 = 0;

  friend constexpr auto operator<=>(const ModeIndex&, const ModeIndex&) = default;

  constexpr bool is_kernel() const { return k1 == 0 && k2 == 0; }
};

/// Orders modes by eigenvalue, ties broken lexicographically.
bool eigen_order_less(ModeIndex a, ModeIndex b);

/// Square band 0 <= k1,k2 <= K with a uniform midpoint grid of grid_n points
/// per axis.
struct Truncation {
  int K = 0;
  int grid_n = 1;

  Truncation() = default;
  Truncation(int max_mode, int grid_points);
  /// Smallest admissible grid for the band.
  static Truncation with_min_grid(int max_mode);

  int modes_per_axis() const { return K + 1; }
  int mode_count() const { return (K + 1) * (K + 1); }
  bool contains(ModeIndex k) const {
    return k.k1 >= 0 && k.k2 >= 0 && k.k1 <= K && k.k2 <= K;
  }
  /// Row-major flat position of a retained mode; (0,0) is position 0.
  int flat(ModeIndex k) const { return k.k1 * (K + 1) + k.k2; }
  ModeIndex mode_at(int flat_index) const {
    return {flat_index / (K + 1), flat_index % (K + 1)};
  }
};

/// pi^2 (k1^2 + k2^2)
double eigenvalue(ModeIndex k);

/// f_0 = 1, f_l(z) = sqrt(2) cos(pi l z). Throws std::domain_error for z outside [0,1].
double edge_basis_eval(int l, double z);

double basis_eval(ModeIndex k, double x, double y);

/// Coefficients of one scalar field: entry (k1, k2) is <u, g_{(k1,k2)}>.
using CoefficientArray = Eigen::MatrixXd;

/// Grid values of one scalar field: entry (i, j) is u(x_i, y_j) with
/// x_i = (i + 1/2)/n.
using GridValues = Eigen::MatrixXd;

/// Separable cosine transform between the retained band and a midpoint grid.
/// The forward direction is the midpoint quadrature of <u, g_k>, which is
/// exact on products of two retained modes whenever grid_n > K.
class SpectralTransform {
 public:
  SpectralTransform(int max_mode, int grid_points);
  explicit SpectralTransform(const Truncation& trunc)
      : SpectralTransform(trunc.K, trunc.grid_n) {}

  int max_mode() const { return max_mode_; }
  int grid_points() const { return grid_points_; }
  double node(int i) const { return (i + 0.5) / grid_points_; }

  GridValues inverse(const CoefficientArray& coeffs) const;
  CoefficientArray forward(const GridValues& values) const;

  void inverse_into(const CoefficientArray& coeffs, GridValues& out) const;
  void forward_into(const GridValues& values, CoefficientArray& out) const;

 private:
  int max_mode_;
  int grid_points_;
  Eigen::MatrixXd synthesis_;  // grid_points x (K+1), f_l(x_i)
  Eigen::MatrixXd analysis_;   // (K+1) x grid_points, f_l(x_i)/n
  mutable Eigen::MatrixXd inverse_scratch_;
  mutable Eigen::MatrixXd forward_scratch_;
};

/// P_c u: the (0,0) coefficient (|G| = 1, g_0 = 1).
double project_mean(const CoefficientArray& u);

/// P_s u: copy of u with the (0,0) coefficient zeroed.
CoefficientArray project_fluctuation(const CoefficientArray& u);

/// Number of sign vectors s in {+1,-1}^n with sum_i s_i l_i = 0.
long long count_balanced_signs(std::span<const int> frequencies);

/// Integral over [0,1] of prod_i f_{l_i}(z), computed exactly.
double axis_mean_of_product(std::span<const int> frequencies);

/// Integral over the unit square of prod_i g_{k_i}, computed exactly by
/// sign-pattern counting per axis.
double mean_of_product(std::span<const ModeIndex> modes);

}  // namespace fastdiff
