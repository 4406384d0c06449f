#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "fastdiff/noise_model.hpp"
#include "fastdiff/random_stream.hpp"
#include "fastdiff/spectral_basis.hpp"

namespace fastdiff {

/// Modes with eps^-2 d lambda h above this are fully relaxed after one step.
inline constexpr double kRelaxedExponent = 36.0;

/// sigma_eps^2 (1 - exp(-(L_a + L_b) h)) / (L_a + L_b) with L = eps^-2 d lambda,
/// evaluated without overflow. sigma_eps^2 is eps^-2 in case1 and 1 in case2.
double one_step_covariance_kernel(Regime regime, double epsilon, double diffusion,
                                  double lambda_sum, double h);

/// Immutable one-step transition of the fast OU processes of one species:
///   Z(t+h) = E o Z(t) + G,  G ~ N(0, C_h),
/// exact in law for dZ_j = -eps^-2 d lambda_j Z_j dt + sigma_eps dW~_j.
///
/// In case2 the mean-mode driver dB = sum_e alpha_{e,0} dbeta_{e,0} is
/// correlated with the fluctuation increments. The propagator then samples
/// G conditionally on dB:  G = r dB + L xi,  with L a factor of the Schur
/// complement, so the same dB can be handed to the limit SDE.
///
/// The factor is computed per connected block of the covariance, ignoring
/// correlations below 1e-12 (round-off of cancelling edge terms). Symmetric edge noise splits the modes by parity, which cuts the
/// cost of a draw roughly fourfold.
class OUPropagator {
 public:
  struct Inputs {
    Regime regime = Regime::case1;
    double epsilon = 1.0;
    double diffusion = 1.0;
    double h = 0.0;
    Eigen::VectorXd eigenvalues;       ///< lambda_j of the fluctuation modes
    Eigen::MatrixXd q;                 ///< q over the fluctuation modes
    double q_mean = 0.0;               ///< q_{00}; 0 when the mean is not driven
    Eigen::VectorXd q_mean_cross;      ///< q_{j,00}; empty when q_mean = 0
  };

  explicit OUPropagator(Inputs in);

  /// Propagator for species i over all fluctuation modes of the truncation
  /// (flat ordering with (0,0) removed).
  static OUPropagator for_species(const InteriorCovariance& cov, const BoundaryNoiseSpec& spec,
                                  int species, double diffusion, double epsilon, double h);

  int dimension() const { return static_cast<int>(decay_.size()); }
  int rank() const { return static_cast<int>(factor_.cols()); }
  double h() const { return in_.h; }
  double epsilon() const { return in_.epsilon; }
  Regime regime() const { return in_.regime; }

  /// eps^-2 d lambda_j
  const Eigen::VectorXd& rates() const { return rates_; }
  const Eigen::VectorXd& decay() const { return decay_; }
  /// Dense factor with C_h = L L^T (case1) or the Schur complement (case2);
  /// column k is multiplied by the k-th normal of a draw.
  const Eigen::MatrixXd& factor() const { return factor_; }
  int block_count() const { return static_cast<int>(blocks_.size()); }
  const Eigen::VectorXd& mean_regression() const { return regression_; }
  double mean_increment_variance() const { return mean_var_; }

  /// Full one-step covariance C_h of the fluctuation increments (unconditioned).
  Eigen::MatrixXd covariance() const;

  /// G = r dB + L xi; `normals` must hold rank() standard normals. Not safe
  /// to call concurrently on one propagator.
  void increment(std::span<const double> normals, double mean_increment,
                 Eigen::Ref<Eigen::VectorXd> out) const;

 private:
  struct Block {
    std::vector<int> rows;
    Eigen::MatrixXd factor;
  };
  void factor_blocks(const Eigen::MatrixXd& c);

  Inputs in_;
  Eigen::VectorXd rates_;
  Eigen::VectorXd decay_;
  Eigen::VectorXd regression_;
  double mean_var_ = 0.0;
  Eigen::MatrixXd factor_;
  std::vector<Block> blocks_;
  mutable Eigen::VectorXd block_scratch_;
};

/// Current values of Z_{i,j} for one species plus the step counter that keys
/// the random stream.
struct OUState {
  Eigen::VectorXd z;
  std::uint64_t step = 0;
};

/// Draws one step from `stream` (already bound to the species) and advances
/// `state`. In case2 the mean-driver increment is formed from the l = 0 edge
/// Brownians of `edge_stream` (bound to the same species) and returned.
struct OUStepResult {
  Eigen::VectorXd increment;
  double mean_increment = 0.0;
};

OUStepResult ou_step(const OUPropagator& prop, OUState& state, const RandomStream& stream,
                     const BoundaryNoiseSpec& spec, int species);

/// In-place variant used by the SPDE time loop; `normals` is scratch.
double ou_step_into(const OUPropagator& prop, OUState& state, const RandomStream& stream,
                    const BoundaryNoiseSpec& spec, int species, std::vector<double>& normals,
                    Eigen::Ref<Eigen::VectorXd> increment);

/// Stationary E|Z_{i,j}|^2 = q_jj / (2 d lambda_j) in case1, eps^2 times that in case2.
double stationary_variance(Regime regime, double epsilon, double q_jj, double diffusion,
                           double lambda);

/// Q(t) = exp(eps^-2 t A_s) psi0 + Z^s(t) for one species. `z` is over the
/// fluctuation modes in flat order without (0,0).
CoefficientArray correction_process(const CoefficientArray& psi0, const Eigen::VectorXd& z,
                                    const Eigen::VectorXd& rates, double t);

/// Packs the fluctuation modes of a coefficient array into a vector (flat
/// order, (0,0) dropped) and back.
Eigen::VectorXd pack_fluctuation(const CoefficientArray& c);
void unpack_fluctuation(const Eigen::VectorXd& v, CoefficientArray& c);

}  // namespace fastdiff
