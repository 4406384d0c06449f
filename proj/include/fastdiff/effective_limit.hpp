#pragma once

#include <array>
#include <span>
#include <string>
#include <vector>

#include "fastdiff/noise_model.hpp"
#include "fastdiff/random_stream.hpp"
#include "fastdiff/reaction_polynomial.hpp"
#include "fastdiff/spde_solver.hpp"
#include "fastdiff/spectral_basis.hpp"

namespace fastdiff {

/// Which modes enter C_l. `series` is the constant of the full equation;
/// `band` sums only the retained modes, which is the exact constant of the
/// Galerkin system the solver integrates.
enum class ConstantScope { series, band };

/// Noise-induced constant C_l = P_c E[(Z^s)^l] under the stationary law of
/// the fast OU field, Cov(Z_{i,a}, Z_{i,b}) = q^i_ab / (d_i (lambda_a + lambda_b)).
struct EffectiveConstant {
  MultiIndex ell;
  double value = 0.0;
  double tail_bound = 0.0;  ///< bound on |C_l - value| from modes outside the band
  int K = 0;
  std::string method;  ///< "odd component", "zero noise", "diagonal series", "band sum", "variance field"
};

/// C_l for the retained band plus remainder handling:
///  * any odd l_i gives exactly 0;
///  * |l| = 2 sums q_jj / (2 d lambda_j) over the band, adds the closed-form
///    sum over interior modes beyond K that share a retained edge mode, and
///    estimates the edge modes beyond K from the amplitude law;
///  * |l| >= 4 integrates prod_i (l_i - 1)!! sigma_i^{l_i} exactly on a grid,
///    sigma_i^2(x) being the stationary variance field, and uses the change
///    from K/2 to K as the tail estimate.
/// Throws TruncationError when tail_bound exceeds tail_tol * |value|.
/// With ConstantScope::band the value is the retained-band sum alone and no
/// tail is estimated or checked.
EffectiveConstant c_ell(const MultiIndex& ell, const BoundaryNoiseSpec& spec,
                        const Truncation& trunc, std::span<const double> diffusion,
                        double tail_tol = 1e-6, ConstantScope scope = ConstantScope::series);

/// Wick sum over the retained band only: for every perfect matching of the
/// |l| factors within species, sum prod c_ab * P_c(prod g). Cost grows like
/// nnz(q)^{|l|/2}; intended for small bands and cross-checks.
double c_ell_matching_sum(const MultiIndex& ell, const InteriorCovariance& cov,
                          std::span<const double> diffusion);

/// Stationary variance field sigma_i^2 on the n x n midpoint grid over the band.
GridValues variance_field(const BoundaryNoiseSpec& spec, const Truncation& trunc, int species,
                          double diffusion, int grid_points);

/// Plain band sum of q_jj / (2 d lambda_j) over 0 <= k1,k2 <= K, edge band = K.
double c2_band_sum(const BoundaryNoiseSpec& spec, int species, double diffusion, int K);

/// Richardson extrapolation of c2_band_sum over K/4, K/2, K (K divisible by 4),
/// cancelling the 1/K and 1/K^2 terms of the missing modes.
double c2_band_richardson(const BoundaryNoiseSpec& spec, int species, double diffusion, int K);

struct SeriesValue {
  double value = 0.0;
  double tail_bound = 0.0;
};

/// Literal two-index closed form for the scalar heat example,
///   (1/(2 pi^2)) sum_{k1,k2 >= 1} (a1(k1)^2 + 2 a2(k1)^2 + a3(k2)^2 + 2 a4(k2)^2) / (k1^2 + k2^2),
/// edges ordered bottom, top, left, right. The inner sum is closed
/// ((pi k coth(pi k) - 1) / (2 k^2)); the outer sum is summed with an
/// integral tail. Throws ConfigError when a power law has mu <= 0.
SeriesValue closed_form_c2_heat(const std::array<EdgeAmplitudes, 4>& alpha);

/// Exact C_2 for one species and d = 1 in terms of the edge amplitudes:
///   (1/(2 pi^2)) sum_e sum_l alpha_{e,l}^2 R(l),  R(0) = pi^2/3,  R(l) = pi coth(pi l)/l.
SeriesValue edge_series_c2(const std::array<EdgeAmplitudes, 4>& alpha);

/// Effective reaction for the spatial means.
struct LimitSystem {
  Regime regime = Regime::case1;
  std::vector<ReactionPolynomial> drift;       ///< F + G
  std::vector<ReactionPolynomial> correction;  ///< G
  std::vector<double> brownian_amplitude;      ///< case2 only
  std::vector<EffectiveConstant> constants;    ///< every C_l that entered G
  int species() const { return static_cast<int>(drift.size()); }
};

/// case1: drift_i = F_i + sum over even l with 2 <= |l| <= m of (C_l / l!) D^l F_i.
/// case2: drift_i = F_i, amplitude_i = sqrt(sum_e alpha_{i_e,0}^2).
LimitSystem build_limit_system(const SystemSpec& system, const BoundaryNoiseSpec& spec,
                               const Truncation& trunc, double tail_tol = 1e-6,
                               ConstantScope scope = ConstantScope::series);

struct LimitTrajectory {
  std::vector<double> times;
  std::vector<std::vector<double>> values;  ///< [save][species]
  bool positivity_stopped = false;
  double stop_time = 0.0;  ///< T_1 (= T when not stopped)
  /// Cumulative driver B_i at each save time (case2).
  std::vector<std::vector<double>> driver;
};

/// Driving noise for the case2 limit: fresh increments from `stream`, or the
/// increments recorded by the SPDE run (step `recorded_h`, [species][step]).
struct LimitNoise {
  const RandomStream* stream = nullptr;
  const std::vector<std::vector<double>>* recorded = nullptr;
  double recorded_h = 0.0;
};

/// RK4 in case1, Euler-Maruyama in case2. With `positivity_stop`, stops at
/// the first step where a component is negative. Throws NumericalError on
/// non-finite values.
LimitTrajectory integrate_limit(const LimitSystem& system, const std::vector<double>& b0,
                                double T, double h, const std::vector<double>& save_times,
                                const LimitNoise& noise = {}, bool positivity_stop = false);

}  // namespace fastdiff
