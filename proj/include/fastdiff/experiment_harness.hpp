#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "fastdiff/effective_limit.hpp"
#include "fastdiff/noise_model.hpp"
#include "fastdiff/spde_solver.hpp"

namespace fastdiff {

/// One epsilon-sweep: the system, the noise, the initial field, the
/// numerical grid and the Monte-Carlo sizes.
struct ExperimentPlan {
  SystemSpec system;  ///< epsilon is overwritten per sweep point
  BoundaryNoiseSpec noise;
  std::vector<CoefficientArray> u0;  ///< per species, (K+1) x (K+1)

  std::vector<double> epsilons;
  int paths = 32;
  int K = 16;
  int grid_n = 0;           ///< 0 selects 2K + 1
  double h = 0.0;           ///< absolute step; 0 selects h_per_eps2 * eps^2
  double h_per_eps2 = 1e-4;
  double T0 = 1.0;
  double save_interval = 0.01;
  double p = 2.0;
  double kappa = 0.1;
  std::uint64_t seed = 0;
  bool positivity_stop = false;
  bool self_convergence = true;
  int self_convergence_paths = 8;
  double threshold_kappa = 0.02;
  double tail_tol = 1e-6;
  /// Constants of the limit the paths are compared with. `band` matches the
  /// simulated Galerkin system; `series` adds the modes beyond K.
  ConstantScope limit_constants = ConstantScope::band;
  int workers = 1;

  Truncation truncation() const;
  double step(double epsilon) const;
  /// Throws ConfigError on an unusable plan.
  void validate() const;
};

/// Initial field at `epsilon`: the configured mean plus the configured
/// fluctuation psi(0), which enters as eps psi(0) in case2.
std::vector<CoefficientArray> initial_field(const ExperimentPlan& plan, double epsilon);

/// Sup-in-time error of one path and its stopping information.
struct PathRecord {
  int eps_index = 0;
  double epsilon = 0.0;
  int path = 0;
  std::uint64_t seed = 0;
  double sup_error = 0.0;
  bool tau_stopped = false;
  double tau = 0.0;
  bool positivity_stopped = false;
  double T1 = 0.0;
  int saves_used = 0;
};

struct EpsilonSummary {
  double epsilon = 0.0;
  double h = 0.0;
  int paths = 0;
  double mean = 0.0;
  double median = 0.0;
  double q90 = 0.0;
  double tau_stop_fraction = 0.0;
  double T1_stop_fraction = 0.0;
  double threshold = 0.0;
  int exceedances = 0;
  double exceed_frequency = 0.0;
  double wilson_low = 0.0;
  double wilson_high = 0.0;
};

struct Regression {
  double slope = 0.0;
  double intercept = 0.0;
  double r_squared = 0.0;
};

struct SelfConvergence {
  bool ran = false;
  double epsilon = 0.0;
  int paths = 0;
  double median_discrepancy = 0.0;  ///< median over paths of sup_t ||u_h - u_{h/2}||
  double ratio = 0.0;               ///< median_discrepancy / median eps-error
  bool h_biased = false;
};

struct SweepResult {
  std::vector<EpsilonSummary> summaries;
  std::vector<PathRecord> records;  ///< ordered by (eps_index, path)
  Regression regression;
  bool regression_valid = false;
  SelfConvergence self_convergence;
  /// limit system actually integrated (case1 constants included)
  LimitSystem limit;
  /// sweep list order is eps-decreasing; the exceedance frequency should not increase along it
  bool exceedance_trend_ok = false;
};

/// Least squares fit of y on x.
Regression fit_line(const std::vector<double>& x, const std::vector<double>& y);

/// Wilson score interval for k successes in n trials (z = 1.96 by default).
std::pair<double, double> wilson_interval(int k, int n, double z = 1.959963984540054);

/// Sample quantile with linear interpolation (type 7).
double quantile(std::vector<double> v, double q);

/// True when the sequence never increases, allowing one increase whose
/// confidence intervals overlap.
bool nonincreasing_with_overlap(const std::vector<EpsilonSummary>& s);

/// Runs every (eps, path) item on `plan.workers` threads and reduces in
/// (eps, path) order. Throws CutoffAbort if every path of some eps stopped at
/// the cutoff time.
SweepResult run_sweep(const ExperimentPlan& plan);

/// Exceedance frequency of eps^{1 - 2 m k - k} per eps with Wilson intervals,
/// recomputed from the path records for another threshold exponent k.
std::vector<EpsilonSummary> probability_estimate(const ExperimentPlan& plan,
                                                 const SweepResult& sweep,
                                                 double threshold_kappa);

/// Writes `content` to `<target>.tmp` and renames it over `target`.
void write_atomically(const std::filesystem::path& target, const std::string& content);

/// "%.17g": round-trips every double, locale independent.
std::string format_number(double v);

/// Files: results.csv, paths.csv, report.json (written via temp + rename).
void write_sweep_outputs(const std::string& directory, const SweepResult& result,
                         const std::string& resolved_config_json);

/// Scalar OU averaging experiment for dZ = -eps^-2 d lambda Z dt + eps^-1 sqrt(q) dW, Z(0) = 0.
struct AveragingPlan {
  std::vector<double> epsilons{0.2, 0.1, 0.05, 0.025};
  double q = 2.0;
  double d = 1.0;
  double lambda = 9.869604401089358;
  double T = 1.0;
  int paths = 10000;
  double step_ratio = 0.2;  ///< eps^-2 d lambda h
  std::uint64_t seed = 0;
  int workers = 1;
};

struct AveragingRow {
  double epsilon = 0.0;
  double mean_abs_integral = 0.0;      ///< E |(1/T) int Z dt|
  double mean_abs_square_dev = 0.0;    ///< E |(1/T) int Z^2 dt - q/(2 d lambda)|
  double mean_square_dev = 0.0;        ///< E[(1/T) int Z^2 dt] - q/(2 d lambda)
  double se_abs_integral = 0.0;
  double se_abs_square_dev = 0.0;
};

struct AveragingReport {
  double stationary_variance = 0.0;
  std::vector<AveragingRow> rows;
  Regression integral_fit;  ///< log E|int Z| vs log eps
  Regression square_fit;    ///< log E|int Z^2 - v| vs log eps
};

AveragingReport averaging_check(const AveragingPlan& plan);

/// Empirical variance of Z(t_end) for a single case1 OU mode started at 0,
/// sampled with the exact transition; returns (variance, standard error).
std::pair<double, double> ou_stationary_sample(double q, double d, double lambda, int paths,
                                               double t_end, std::uint64_t seed);

}  // namespace fastdiff
