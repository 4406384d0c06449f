#include "fastdiff/spde_solver.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "fastdiff/errors.hpp"

namespace fastdiff {

namespace {

int dealiased_grid(const Truncation& trunc, int degree) {
  // the midpoint rule integrates F(u) g_k exactly once N > (m + 1) K / 2
  const int needed = (std::max(degree, 1) + 1) * trunc.K / 2 + 1;
  return std::max(trunc.grid_n, needed);
}

double integer_power(double x, int p) {
  double r = 1.0;
  for (int k = 0; k < p; ++k) r *= x;
  return r;
}

}  // namespace

int SystemSpec::max_degree() const {
  int m = 1;
  for (const auto& f : reactions) m = std::max(m, f.degree());
  return m;
}

void SystemSpec::validate() const {
  if (n < 1) throw ConfigError("species count must be at least 1", "/system/n");
  if (static_cast<int>(diffusion.size()) != n) {
    throw ConfigError("expected " + std::to_string(n) + " diffusion constants", "/system/d");
  }
  for (int i = 0; i < n; ++i) {
    if (!(diffusion[i] > 0.0) || !std::isfinite(diffusion[i])) {
      throw ConfigError("diffusion constant must be positive", "/system/d/" + std::to_string(i));
    }
  }
  if (static_cast<int>(reactions.size()) != n) {
    throw ConfigError("expected " + std::to_string(n) + " reaction polynomials",
                      "/system/reactions");
  }
  for (int i = 0; i < n; ++i) {
    if (reactions[i].variables() != n) {
      throw ConfigError("reaction polynomial has the wrong number of variables",
                        "/system/reactions/" + std::to_string(i));
    }
  }
  if (!(epsilon > 0.0 && epsilon < 1.0)) {
    throw ConfigError("epsilon must lie in (0, 1)", "/experiment/epsilons");
  }
}

std::uint64_t steps_to(double t, double h) {
  if (!(h > 0.0)) throw std::invalid_argument("steps_to: h must be positive");
  if (t < 0.0) throw std::invalid_argument("steps_to: negative time");
  const double r = t / h;
  const double n = std::round(r);
  if (std::abs(r - n) > 1e-6) {
    throw ConfigError("time " + std::to_string(t) + " is not a multiple of the step " +
                      std::to_string(h));
  }
  return static_cast<std::uint64_t>(n);
}

CoefficientArray make_coefficients(const Truncation& trunc,
                                   std::initializer_list<std::pair<ModeIndex, double>> entries) {
  CoefficientArray c = CoefficientArray::Zero(trunc.K + 1, trunc.K + 1);
  for (const auto& [k, v] : entries) {
    if (!trunc.contains(k)) throw std::invalid_argument("make_coefficients: mode outside band");
    c(k.k1, k.k2) += v;
  }
  return c;
}

SpdeSolver::SpdeSolver(SystemSpec system, BoundaryNoiseSpec noise, Truncation trunc, double h,
                       SolverOptions options)
    : system_(std::move(system)),
      noise_(std::move(noise)),
      trunc_(trunc),
      h_(h),
      options_(options),
      padded_(trunc.K, dealiased_grid(trunc, 1)),
      plain_(trunc) {
  system_.validate();
  if (noise_.species_count() != system_.n) {
    throw ConfigError("noise must list one entry per species", "/noise");
  }
  if (noise_.regime != system_.regime) {
    throw ConfigError("noise regime differs from the system regime", "/noise");
  }
  noise_.validate(system_.max_degree());
  if (!(h_ > 0.0) || !std::isfinite(h_)) throw ConfigError("h must be positive", "/numerics/h");
  if (!(options_.kappa > 0.0)) throw ConfigError("kappa must be positive", "/numerics/kappa");
  if (options_.noise_substeps < 1) throw std::invalid_argument("noise_substeps must be >= 1");

  const int m = system_.max_degree();
  padded_ = SpectralTransform(trunc_.K, dealiased_grid(trunc_, m));
  cutoff_ = std::pow(system_.epsilon, -options_.kappa);
  if (options_.enforce_step_guard && h_ > step_bound()) {
    throw ConfigError("h = " + std::to_string(h_) + " exceeds the reaction step bound " +
                          std::to_string(step_bound()),
                      "/numerics/h");
  }

  cov_ = std::make_shared<const InteriorCovariance>(assemble_covariance(noise_, trunc_));
  const double fine_h = h_ / options_.noise_substeps;
  const double eps2 = system_.epsilon * system_.epsilon;
  const int km = trunc_.K + 1;
  for (int i = 0; i < system_.n; ++i) {
    props_.push_back(OUPropagator::for_species(*cov_, noise_, i, system_.diffusion[i],
                                               system_.epsilon, fine_h));
    CoefficientArray e(km, km);
    CoefficientArray p(km, km);
    for (int k1 = 0; k1 < km; ++k1) {
      for (int k2 = 0; k2 < km; ++k2) {
        const double rate = system_.diffusion[i] * eigenvalue({k1, k2}) / eps2;
        const double x = rate * h_;
        if (x == 0.0) {
          e(k1, k2) = 1.0;
          p(k1, k2) = h_;
        } else {
          e(k1, k2) = x > 745.0 ? 0.0 : std::exp(-x);
          p(k1, k2) = -std::expm1(-x) / rate;
        }
      }
    }
    decay_.push_back(std::move(e));
    phi1_.push_back(std::move(p));
  }

  grid_.resize(system_.n);
  reaction_grid_.resize(system_.n);
  reaction_.resize(system_.n);
  powers_.resize(system_.n);
  increment_.resize(trunc_.mode_count() - 1);
  fine_increment_.resize(trunc_.mode_count() - 1);
}

double SpdeSolver::step_bound() const {
  const double radius = 2.0 * std::pow(system_.epsilon, -options_.kappa);
  double lip = 0.0;
  for (const auto& f : system_.reactions) lip += f.lipschitz_bound(radius);
  return 0.5 / (1.0 + lip);
}

SpectralState SpdeSolver::initial_state(const std::vector<CoefficientArray>& u0) const {
  if (static_cast<int>(u0.size()) != system_.n) {
    throw std::invalid_argument("initial_state: expected one coefficient array per species");
  }
  SpectralState s;
  for (int i = 0; i < system_.n; ++i) {
    if (u0[i].rows() != trunc_.K + 1 || u0[i].cols() != trunc_.K + 1) {
      throw std::invalid_argument("initial_state: coefficient array does not match the band");
    }
    s.coeffs.push_back(u0[i]);
    OUState z;
    z.z = Eigen::VectorXd::Zero(trunc_.mode_count() - 1);
    s.ou.push_back(std::move(z));
  }
  return s;
}

void SpdeSolver::evaluate_grid(const std::vector<CoefficientArray>& coeffs) const {
  for (int i = 0; i < system_.n; ++i) padded_.inverse_into(coeffs[i], grid_[i]);
}

double SpdeSolver::l2m_norm_on_grid() const {
  const int m = system_.max_degree();
  norm_sq_ = grid_[0].array().square();
  for (int i = 1; i < system_.n; ++i) norm_sq_ += grid_[i].array().square();
  norm_pow_ = norm_sq_;
  for (int k = 1; k < m; ++k) norm_pow_ *= norm_sq_;
  return std::pow(norm_pow_.mean(), 1.0 / (2.0 * m));
}

void SpdeSolver::compute_reaction(const std::vector<CoefficientArray>& coeffs) const {
  evaluate_grid(coeffs);
  const int m = system_.max_degree();
  const int n = padded_.grid_points();
  for (int i = 0; i < system_.n; ++i) {
    auto& pw = powers_[i];
    pw.resize(static_cast<std::size_t>(m + 1));
    pw[1] = grid_[i].array();
    for (int k = 2; k <= m; ++k) pw[k] = pw[k - 1] * pw[1];
  }
  term_.resize(n, n);
  for (int i = 0; i < system_.n; ++i) {
    GridValues& r = reaction_grid_[i];
    r.setZero(n, n);
    for (const auto& [powers, c] : system_.reactions[i].terms()) {
      term_.setConstant(c);
      for (int s = 0; s < system_.n; ++s) {
        if (powers[s] > 0) term_ *= powers_[s][powers[s]];
      }
      r.array() += term_;
    }
    padded_.forward_into(r, reaction_[i]);
  }
}

std::vector<CoefficientArray> SpdeSolver::reaction_coefficients(
    const std::vector<CoefficientArray>& coeffs) const {
  compute_reaction(coeffs);
  return reaction_;
}

std::vector<double> SpdeSolver::step(SpectralState& state, const RandomStream& stream) const {
  std::vector<double> mean_inc(static_cast<std::size_t>(system_.n), 0.0);
  if (state.stopped) return mean_inc;
  compute_reaction(state.coeffs);
  const std::vector<CoefficientArray>& f = reaction_;
  if (l2m_norm_on_grid() > cutoff_) {
    state.stopped = true;
    state.stop_time = state.t;
    return mean_inc;
  }
  const int km = trunc_.K + 1;
  for (int i = 0; i < system_.n; ++i) {
    const OUPropagator& prop = props_[i];
    OUState& ou = state.ou[i];
    increment_.setZero();
    double db = 0.0;
    for (int s = 0; s < options_.noise_substeps; ++s) {
      db += ou_step_into(prop, ou, stream, noise_, i, normals_, fine_increment_);
      increment_.array() = prop.decay().array() * increment_.array() + fine_increment_.array();
    }
    CoefficientArray& c = state.coeffs[i];
    const double mean = c(0, 0) + h_ * f[i](0, 0) + db;
    c.array() = decay_[i].array() * c.array() + phi1_[i].array() * f[i].array();
    for (int k1 = 0, q = -1; k1 < km; ++k1) {
      for (int k2 = 0; k2 < km; ++k2, ++q) {
        if (q >= 0) c(k1, k2) += increment_(q);
      }
    }
    c(0, 0) = mean;
    mean_inc[i] = db;
    if (!c.allFinite()) {
      throw NumericalError("non-finite coefficients in species " + std::to_string(i + 1) +
                               " at t = " + std::to_string(state.t + h_),
                           state.t + h_);
    }
  }
  ++state.step;
  state.t = static_cast<double>(state.step) * h_;
  return mean_inc;
}

Trajectory SpdeSolver::simulate_path(const std::vector<CoefficientArray>& u0, double T,
                                     const std::vector<double>& save_times,
                                     const RandomStream& stream,
                                     bool record_mean_increments) const {
  const std::uint64_t total = steps_to(T, h_);
  std::vector<std::uint64_t> saves;
  for (double t : save_times) {
    const std::uint64_t k = steps_to(t, h_);
    if (k > total) throw ConfigError("save time beyond T");
    saves.push_back(k);
  }
  std::sort(saves.begin(), saves.end());
  saves.erase(std::unique(saves.begin(), saves.end()), saves.end());

  Trajectory out;
  out.h = h_;
  const bool record = record_mean_increments && system_.regime == Regime::case2;
  if (record) {
    out.mean_increments.assign(static_cast<std::size_t>(system_.n), {});
    for (auto& v : out.mean_increments) v.reserve(total);
  }
  SpectralState state = initial_state(u0);
  std::size_t next = 0;
  for (std::uint64_t n = 0; n <= total; ++n) {
    if (next < saves.size() && saves[next] == n) {
      evaluate_grid(state.coeffs);
      if (l2m_norm_on_grid() > cutoff_) {
        state.stopped = true;
        state.stop_time = state.t;
        break;
      }
      out.times.push_back(state.t);
      out.coeffs.push_back(state.coeffs);
      std::vector<Eigen::VectorXd> z;
      for (const auto& o : state.ou) z.push_back(o.z);
      out.ou.push_back(std::move(z));
      ++next;
    }
    if (n == total) break;
    const std::vector<double> db = step(state, stream);
    if (state.stopped) break;
    if (record) {
      for (int i = 0; i < system_.n; ++i) out.mean_increments[i].push_back(db[i]);
    }
  }
  out.stopped = state.stopped;
  out.stop_time = state.stopped ? state.stop_time : static_cast<double>(total) * h_;
  return out;
}

double SpdeSolver::lp_norm(const std::vector<CoefficientArray>& coeffs, double p) const {
  if (!(p >= 1.0)) throw std::invalid_argument("lp_norm: p must be at least 1");
  if (static_cast<int>(coeffs.size()) != system_.n) {
    throw std::invalid_argument("lp_norm: expected one coefficient array per species");
  }
  if (p == 2.0) {
    // Parseval: the basis is orthonormal
    double s = 0.0;
    for (const auto& c : coeffs) s += c.squaredNorm();
    return std::sqrt(s);
  }
  Eigen::ArrayXXd sq;
  for (int i = 0; i < system_.n; ++i) {
    const GridValues g = plain_.inverse(coeffs[i]);
    if (i == 0) {
      sq = g.array().square();
    } else {
      sq += g.array().square();
    }
  }
  const double half = p / 2.0;
  const bool even = std::floor(half) == half;
  double mean = 0.0;
  if (even) {
    const int e = static_cast<int>(half);
    for (Eigen::Index k = 0; k < sq.size(); ++k) mean += integer_power(sq(k), e);
  } else {
    for (Eigen::Index k = 0; k < sq.size(); ++k) mean += std::pow(sq(k), half);
  }
  mean /= static_cast<double>(sq.size());
  return std::pow(mean, 1.0 / p);
}

}  // namespace fastdiff
