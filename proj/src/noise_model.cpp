#include "fastdiff/noise_model.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include <Eigen/Eigenvalues>

#include "fastdiff/errors.hpp"

namespace fastdiff {

namespace {

// Dense PSD verification is skipped above this many modes; q = T D T^T is
// PSD by construction and the check costs O(modes^3).
constexpr int kMaxModesForPsdCheck = 2000;

double trace_value(int l, double z) { return edge_basis_eval(l, z); }

std::string species_edge(int i, Edge e) {
  return "noise[" + std::to_string(i) + "][" + std::to_string(static_cast<int>(e)) + "]";
}

}  // namespace

const char* edge_name(Edge e) {
  switch (e) {
    case Edge::bottom: return "y=0";
    case Edge::top: return "y=1";
    case Edge::left: return "x=0";
    case Edge::right: return "x=1";
  }
  return "?";
}

EdgeAmplitudes EdgeAmplitudes::power(double c, double mu, double alpha0) {
  EdgeAmplitudes a;
  a.law = Law::power;
  a.c = c;
  a.mu = mu;
  a.alpha0 = alpha0;
  return a;
}

EdgeAmplitudes EdgeAmplitudes::list(std::vector<double> values, double alpha0) {
  EdgeAmplitudes a;
  a.law = Law::list;
  a.values = std::move(values);
  a.alpha0 = alpha0;
  return a;
}

double EdgeAmplitudes::alpha(int l) const {
  if (l < 0) throw std::domain_error("EdgeAmplitudes::alpha: negative mode");
  if (l == 0) return alpha0;
  if (law == Law::power) return c == 0.0 ? 0.0 : c * std::pow(static_cast<double>(l), -mu);
  const auto idx = static_cast<std::size_t>(l - 1);
  return idx < values.size() ? values[idx] : 0.0;
}

bool EdgeAmplitudes::active_above(int l) const {
  if (law == Law::power) return c != 0.0;
  for (std::size_t idx = static_cast<std::size_t>(std::max(l, 0)); idx < values.size(); ++idx) {
    if (values[idx] != 0.0) return true;
  }
  return false;
}

void BoundaryNoiseSpec::validate(int max_degree) const {
  if (species.empty()) throw ConfigError("noise spec has no species", "/noise");
  for (int i = 0; i < species_count(); ++i) {
    for (Edge e : kEdges) {
      const auto& a = at(i, e);
      const std::string where = "/" + species_edge(i, e);
      if (!(a.alpha0 >= 0.0) || !std::isfinite(a.alpha0)) {
        throw ConfigError("alpha0 must be finite and nonnegative", where + "/alpha0");
      }
      if (regime == Regime::case1 && a.alpha0 != 0.0) {
        throw ConfigError("case1 noise must be mass-conserving (alpha0 = 0)", where + "/alpha0");
      }
      if (a.law == EdgeAmplitudes::Law::power) {
        if (!(a.c >= 0.0) || !std::isfinite(a.c)) {
          throw ConfigError("power-law amplitude c must be nonnegative", where + "/c");
        }
        const double m = std::max(max_degree, 1);
        if (a.c > 0.0 && !(2.0 * a.mu - 0.5 - 1.0 / (2.0 * m) > 1.0)) {
          throw ConfigError("power-law decay mu = " + std::to_string(a.mu) +
                                " too slow: need 2 mu - 1/2 - 1/(2m) > 1",
                            where + "/mu");
        }
      } else {
        for (std::size_t k = 0; k < a.values.size(); ++k) {
          if (!(a.values[k] >= 0.0) || !std::isfinite(a.values[k])) {
            throw ConfigError("amplitudes must be finite and nonnegative",
                              where + "/values/" + std::to_string(k));
          }
        }
      }
    }
  }
}

double trace_coupling(Edge e, int l, ModeIndex j) {
  switch (e) {
    case Edge::bottom: return l == j.k1 ? trace_value(j.k2, 0.0) : 0.0;
    case Edge::top: return l == j.k1 ? trace_value(j.k2, 1.0) : 0.0;
    case Edge::left: return l == j.k2 ? trace_value(j.k1, 0.0) : 0.0;
    case Edge::right: return l == j.k2 ? trace_value(j.k1, 1.0) : 0.0;
  }
  return 0.0;
}

InteriorCovariance::InteriorCovariance(const BoundaryNoiseSpec& spec, const Truncation& trunc)
    : trunc_(trunc), boundary_cutoff_(spec.effective_cutoff(trunc)) {
  const int kb = boundary_cutoff_;
  for (int i = 0; i < spec.species_count(); ++i) {
    Eigen::VectorXd a2(4 * (kb + 1));
    for (Edge e : kEdges) {
      for (int l = 0; l <= kb; ++l) {
        const double a = spec.at(i, e).alpha(l);
        a2(static_cast<int>(e) * (kb + 1) + l) = a * a;
      }
    }
    alpha_sq_.push_back(std::move(a2));
  }
  dense_.resize(alpha_sq_.size());
}

double InteriorCovariance::entry(int species, ModeIndex j, ModeIndex k) const {
  const int kb = boundary_cutoff_;
  double q = 0.0;
  if (j.k1 == k.k1 && j.k1 <= kb) {
    q += alpha_sq(species, Edge::bottom, j.k1) * trace_value(j.k2, 0.0) * trace_value(k.k2, 0.0);
    q += alpha_sq(species, Edge::top, j.k1) * trace_value(j.k2, 1.0) * trace_value(k.k2, 1.0);
  }
  if (j.k2 == k.k2 && j.k2 <= kb) {
    q += alpha_sq(species, Edge::left, j.k2) * trace_value(j.k1, 0.0) * trace_value(k.k1, 0.0);
    q += alpha_sq(species, Edge::right, j.k2) * trace_value(j.k1, 1.0) * trace_value(k.k1, 1.0);
  }
  return q;
}

Eigen::MatrixXd InteriorCovariance::trace_matrix(int species) const {
  (void)species;  // the trace structure is the same for every species
  const int kb = boundary_cutoff_;
  const int n = trunc_.mode_count();
  Eigen::MatrixXd t = Eigen::MatrixXd::Zero(n, 4 * (kb + 1));
  for (int f = 0; f < n; ++f) {
    const ModeIndex j = trunc_.mode_at(f);
    for (Edge e : kEdges) {
      for (int l = 0; l <= kb; ++l) t(f, static_cast<int>(e) * (kb + 1) + l) = trace_coupling(e, l, j);
    }
  }
  return t;
}

const Eigen::MatrixXd& InteriorCovariance::matrix(int species) const {
  auto& slot = dense_.at(species);
  if (!slot) {
    const Eigen::MatrixXd t = trace_matrix(species);
    Eigen::MatrixXd q = t * alpha_sq_[species].asDiagonal() * t.transpose();
    slot = 0.5 * (q + q.transpose());
  }
  return *slot;
}

double relative_min_eigenvalue(const Eigen::MatrixXd& sym) {
  if (sym.size() == 0) return 0.0;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sym, Eigen::EigenvaluesOnly);
  const auto& ev = es.eigenvalues();
  const double scale = std::max(std::abs(ev(0)), std::abs(ev(ev.size() - 1)));
  return scale == 0.0 ? 0.0 : ev(0) / scale;
}

InteriorCovariance assemble_covariance(const BoundaryNoiseSpec& spec, const Truncation& trunc) {
  InteriorCovariance cov(spec, trunc);
  const int kb = cov.boundary_cutoff();
  if (kb > trunc.K) {
    throw ConfigError("boundary cutoff K_b = " + std::to_string(kb) +
                      " exceeds interior cutoff K = " + std::to_string(trunc.K));
  }
  for (int i = 0; i < spec.species_count(); ++i) {
    bool spec_active = false;
    for (Edge e : kEdges) {
      const auto& a = spec.at(i, e);
      spec_active = spec_active || a.alpha0 != 0.0 || a.active_above(0);
    }
    if (spec_active && cov.alpha_squared(i).maxCoeff() == 0.0) {
      throw ConfigError("species " + std::to_string(i) +
                        ": no active edge mode fits inside the truncation (K_b = " +
                        std::to_string(kb) + ")");
    }
    if (trunc.mode_count() <= kMaxModesForPsdCheck) {
      const double rel = relative_min_eigenvalue(cov.matrix(i));
      if (rel < -1e-10) {
        throw NumericalError("interior covariance of species " + std::to_string(i) +
                             " is not PSD (relative min eigenvalue " + std::to_string(rel) + ")");
      }
    }
  }
  return cov;
}

EdgeIncrements sample_edge_increments(const BoundaryNoiseSpec& spec, int boundary_cutoff,
                                      double dt, const RandomStream& stream, std::uint64_t step) {
  if (dt < 0.0) throw std::invalid_argument("sample_edge_increments: dt < 0");
  EdgeIncrements inc;
  inc.boundary_cutoff = boundary_cutoff;
  inc.values.resize(spec.species_count());
  const double scale = std::sqrt(dt);
  for (int i = 0; i < spec.species_count(); ++i) {
    for (Edge e : kEdges) {
      auto& v = inc.values[i][static_cast<int>(e)];
      v.assign(boundary_cutoff + 1, 0.0);
      if (dt == 0.0) continue;
      const auto channel = static_cast<Channel>(static_cast<int>(Channel::edge_bottom) +
                                                static_cast<int>(e));
      stream.with(static_cast<std::uint32_t>(i), channel).fill_normals(step, v);
      for (double& x : v) x *= scale;
    }
  }
  return inc;
}

double mean_noise_amplitude(const BoundaryNoiseSpec& spec, int species) {
  if (spec.regime == Regime::case1) return 0.0;
  double s = 0.0;
  for (Edge e : kEdges) {
    const double a = spec.at(species, e).alpha0;
    s += a * a;
  }
  return std::sqrt(s);
}

double mean_driver_increment(const BoundaryNoiseSpec& spec, int species,
                             const EdgeIncrements& increments) {
  if (spec.regime == Regime::case1) return 0.0;
  double s = 0.0;
  for (Edge e : kEdges) s += spec.at(species, e).alpha0 * increments.at(species, e, 0);
  return s;
}

}  // namespace fastdiff
