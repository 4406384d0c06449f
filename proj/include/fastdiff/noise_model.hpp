#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "fastdiff/random_stream.hpp"
#include "fastdiff/spectral_basis.hpp"

namespace fastdiff {

/// The four sides of the unit square, each carrying an independent
/// cylindrical Wiener process expanded in the 1-D family f_l.
enum class Edge : int { bottom = 0, top = 1, left = 2, right = 3 };  // y=0, y=1, x=0, x=1

inline constexpr std::array<Edge, 4> kEdges{Edge::bottom, Edge::top, Edge::left, Edge::right};

const char* edge_name(Edge e);

/// Scaling regime of the boundary noise.
///   case1: mass-conserving (alpha_{.,0} = 0) and sigma_eps = 1/eps
///   case2: sigma_eps = 1, the mean modes are driven directly
enum class Regime { case1, case2 };

/// Amplitudes alpha_l of one edge process: alpha_0 plus either a power law
/// c l^{-mu} for l >= 1 or an explicit list (values[0] is alpha_1).
struct EdgeAmplitudes {
  enum class Law { power, list };

  double alpha0 = 0.0;
  Law law = Law::power;
  double c = 0.0;
  double mu = 2.0;
  std::vector<double> values;

  static EdgeAmplitudes power(double c, double mu, double alpha0 = 0.0);
  static EdgeAmplitudes list(std::vector<double> values, double alpha0 = 0.0);
  static EdgeAmplitudes silent() { return power(0.0, 2.0); }

  double alpha(int l) const;
  bool active_above(int l) const;  ///< any nonzero amplitude with index > l
};

/// Boundary noise for n species: per species and edge an amplitude sequence.
struct BoundaryNoiseSpec {
  Regime regime = Regime::case1;
  std::vector<std::array<EdgeAmplitudes, 4>> species;  ///< indexed [i][edge]
  /// K_b; values below zero mean "same as the interior cutoff".
  int boundary_cutoff = -1;

  int species_count() const { return static_cast<int>(species.size()); }
  const EdgeAmplitudes& at(int i, Edge e) const {
    return species.at(i)[static_cast<int>(e)];
  }
  int effective_cutoff(const Truncation& trunc) const {
    return boundary_cutoff < 0 ? trunc.K : boundary_cutoff;
  }

  /// Throws ConfigError when amplitudes are negative, when case1 carries a
  /// nonzero alpha_0, or when a power law violates 2 mu - 1/2 - 1/(2m) > 1.
  void validate(int max_degree) const;
};

/// <f_l on edge e, trace of g_j on e>: the weight with which edge mode l of
/// edge e drives interior mode j.
double trace_coupling(Edge e, int l, ModeIndex j);

/// Interior covariance q^i[j,k] = (1/t) E[W~_{i,j}(t) W~_{i,k}(t)] over the
/// retained band, together with the trace matrix that produces it.
/// Cross-species covariance is identically zero and is not stored.
class InteriorCovariance {
 public:
  InteriorCovariance(const BoundaryNoiseSpec& spec, const Truncation& trunc);

  const Truncation& truncation() const { return trunc_; }
  int species_count() const { return static_cast<int>(alpha_sq_.size()); }
  int boundary_cutoff() const { return boundary_cutoff_; }

  /// Entry q^i[j,k], evaluated directly from the sparse trace structure.
  double entry(int species, ModeIndex j, ModeIndex k) const;

  /// Dense q^i over the flat mode ordering of the truncation.
  const Eigen::MatrixXd& matrix(int species) const;

  /// Dense T^i: rows = flat interior modes, columns = (edge, l) with
  /// column index edge * (K_b + 1) + l.
  Eigen::MatrixXd trace_matrix(int species) const;

  /// alpha^2 for (edge, l), same column ordering as trace_matrix.
  const Eigen::VectorXd& alpha_squared(int species) const { return alpha_sq_[species]; }

  double alpha_sq(int species, Edge e, int l) const {
    return alpha_sq_[species](static_cast<int>(e) * (boundary_cutoff_ + 1) + l);
  }

 private:
  Truncation trunc_;
  int boundary_cutoff_;
  std::vector<Eigen::VectorXd> alpha_sq_;
  mutable std::vector<std::optional<Eigen::MatrixXd>> dense_;
};

/// Builds q for every species; verifies each block is PSD to 1e-10 ||q||.
/// Throws ConfigError when no edge mode with nonzero amplitude fits in the
/// truncation while the spec itself is not silent.
InteriorCovariance assemble_covariance(const BoundaryNoiseSpec& spec, const Truncation& trunc);

/// Independent N(0, dt) increments of the edge Brownians beta_{i,e,l} for one
/// time step; the l = 0 column is what drives the mean modes in case2.
struct EdgeIncrements {
  int boundary_cutoff = 0;
  std::vector<std::array<std::vector<double>, 4>> values;  ///< [species][edge][l]

  double at(int species, Edge e, int l) const {
    return values[species][static_cast<int>(e)][l];
  }
};

EdgeIncrements sample_edge_increments(const BoundaryNoiseSpec& spec, int boundary_cutoff,
                                      double dt, const RandomStream& stream, std::uint64_t step);

/// Standard deviation per unit sqrt(time) of the mean-mode driver of species i:
/// sqrt(sum_e alpha_{i_e,0}^2). Zero in case1.
double mean_noise_amplitude(const BoundaryNoiseSpec& spec, int species);

/// sum_e alpha_{i_e,0} dbeta_{i_e,0} for one step of edge increments.
double mean_driver_increment(const BoundaryNoiseSpec& spec, int species,
                             const EdgeIncrements& increments);

/// Smallest eigenvalue of a symmetric matrix relative to its spectral norm.
double relative_min_eigenvalue(const Eigen::MatrixXd& sym);

}  // namespace fastdiff
