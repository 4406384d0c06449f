#pragma once

#include <memory>
#include <vector>

#include <Eigen/Dense>

#include "fastdiff/noise_model.hpp"
#include "fastdiff/ou_convolution.hpp"
#include "fastdiff/random_stream.hpp"
#include "fastdiff/reaction_polynomial.hpp"
#include "fastdiff/spectral_basis.hpp"

namespace fastdiff {

/// The reaction-diffusion system  du = eps^-2 A u dt + F(u) dt + boundary noise,
/// A_i = d_i Laplacian with Neumann conditions.
struct SystemSpec {
  int n = 1;
  std::vector<double> diffusion;
  std::vector<ReactionPolynomial> reactions;
  double epsilon = 0.1;
  Regime regime = Regime::case1;

  /// m = max_i deg F_i (at least 1 for the cutoff/guard formulas).
  int max_degree() const;
  void validate() const;
};

struct SolverOptions {
  /// Cutoff exponent: the path stops once ||u||_{L^{2m}} > eps^{-kappa}.
  double kappa = 0.1;
  /// Reject steps above 0.5 / (1 + Lip F on ||u||_inf <= 2 eps^{-kappa}).
  bool enforce_step_guard = true;
  /// Sum this many fine OU increments per step (h is split evenly). Used to
  /// couple a coarse run to a finer one drawing identical noise.
  int noise_substeps = 1;
};

/// Spectral coefficients of every species, the attached OU processes, and
/// the cutoff flag.
struct SpectralState {
  double t = 0.0;
  std::uint64_t step = 0;
  std::vector<CoefficientArray> coeffs;
  std::vector<OUState> ou;
  bool stopped = false;
  double stop_time = 0.0;

  /// Mean mode a_i.
  double mean(int species) const { return coeffs[species](0, 0); }
};

/// Sampled output of one path.
struct Trajectory {
  std::vector<double> times;
  std::vector<std::vector<CoefficientArray>> coeffs;  ///< [save][species]
  std::vector<std::vector<Eigen::VectorXd>> ou;       ///< [save][species]
  bool stopped = false;                               ///< the cutoff time tau* was hit
  double stop_time = 0.0;                             ///< tau* (or T when not stopped)
  /// case2 only, when requested: mean-driver increments [species][step].
  std::vector<std::vector<double>> mean_increments;
  double h = 0.0;
};

/// Exponential-Euler integrator of the mild formulation in the cosine basis.
/// The diffusion part and the stochastic convolution are exact; the reaction
/// is evaluated pseudospectrally on a padded grid that makes the Galerkin
/// projection of F(u) exact for polynomials of degree m.
class SpdeSolver {
 public:
  SpdeSolver(SystemSpec system, BoundaryNoiseSpec noise, Truncation trunc, double h,
             SolverOptions options = {});

  const SystemSpec& system() const { return system_; }
  const BoundaryNoiseSpec& noise() const { return noise_; }
  const Truncation& truncation() const { return trunc_; }
  const InteriorCovariance& covariance() const { return *cov_; }
  const OUPropagator& propagator(int species) const { return props_[species]; }
  double h() const { return h_; }
  double cutoff_level() const { return cutoff_; }
  int padded_grid() const { return padded_.grid_points(); }

  /// 0.5 / (1 + Lipschitz bound of F on the sup ball of radius 2 eps^{-kappa}).
  double step_bound() const;

  SpectralState initial_state(const std::vector<CoefficientArray>& u0) const;

  /// One exponential-Euler step. Returns the mean-driver increments (zero in
  /// case1). Sets the stop flag without advancing when the cutoff trips.
  /// Throws NumericalError on non-finite values.
  std::vector<double> step(SpectralState& state, const RandomStream& stream) const;

  /// Galerkin projection of F(u) onto the retained band, per species.
  std::vector<CoefficientArray> reaction_coefficients(
      const std::vector<CoefficientArray>& coeffs) const;

  /// Runs to T (rounded to the step grid) recording the listed save times,
  /// which must lie on the step grid.
  Trajectory simulate_path(const std::vector<CoefficientArray>& u0, double T,
                           const std::vector<double>& save_times, const RandomStream& stream,
                           bool record_mean_increments = false) const;

  /// Discrete L^p norm of the state with pointwise Euclidean norm over species.
  double lp_norm(const std::vector<CoefficientArray>& coeffs, double p) const;

 private:
  double l2m_norm_on_grid() const;
  void evaluate_grid(const std::vector<CoefficientArray>& coeffs) const;
  void compute_reaction(const std::vector<CoefficientArray>& coeffs) const;

  SystemSpec system_;
  BoundaryNoiseSpec noise_;
  Truncation trunc_;
  double h_;
  SolverOptions options_;
  double cutoff_;
  std::shared_ptr<const InteriorCovariance> cov_;
  std::vector<OUPropagator> props_;
  SpectralTransform padded_;
  SpectralTransform plain_;
  std::vector<CoefficientArray> decay_;
  std::vector<CoefficientArray> phi1_;

  // per-call scratch; a solver is used by one thread at a time
  mutable std::vector<GridValues> grid_;
  mutable std::vector<GridValues> reaction_grid_;
  mutable std::vector<std::vector<Eigen::ArrayXXd>> powers_;
  mutable std::vector<CoefficientArray> reaction_;
  mutable Eigen::ArrayXXd term_;
  mutable Eigen::ArrayXXd norm_sq_;
  mutable Eigen::ArrayXXd norm_pow_;
  mutable std::vector<double> normals_;
  mutable Eigen::VectorXd increment_;
  mutable Eigen::VectorXd fine_increment_;
};

/// Steps needed to reach t with step h; throws when t is off the grid.
std::uint64_t steps_to(double t, double h);

/// Builds a coefficient array with the given (mode -> value) entries.
CoefficientArray make_coefficients(const Truncation& trunc,
                                   std::initializer_list<std::pair<ModeIndex, double>> entries);

}  // namespace fastdiff
