#include "fastdiff/ou_convolution.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include <Eigen/Eigenvalues>

#include "fastdiff/errors.hpp"

namespace fastdiff {

namespace {

// Eigenvalues of the increment covariance below this fraction of the largest
// carry no representable variance and are dropped from the factor.
constexpr double kFactorDropTolerance = 1e-14;
constexpr double kPsdTolerance = 1e-10;

double relaxation_fraction(double x) { return x > kRelaxedExponent ? 1.0 : -std::expm1(-x); }

// Eigenvectors of the symmetric block `c` scaled by sqrt(eigenvalue), largest
// first, keeping eigenvalues above kFactorDropTolerance * top.
Eigen::MatrixXd psd_factor(const Eigen::MatrixXd& c, double top) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (c + c.transpose()));
  if (es.info() != Eigen::Success) {
    throw NumericalError("OU increment covariance: eigendecomposition failed");
  }
  const auto& ev = es.eigenvalues();
  if (ev(0) < -kPsdTolerance * top) {
    throw NumericalError("OU increment covariance is indefinite (relative min eigenvalue " +
                         std::to_string(ev(0) / top) + ")");
  }
  int keep = 0;
  for (int k = 0; k < ev.size(); ++k) keep += ev(k) > kFactorDropTolerance * top ? 1 : 0;
  Eigen::MatrixXd f(c.rows(), keep);
  for (int k = 0; k < keep; ++k) {
    const int src = static_cast<int>(ev.size()) - 1 - k;
    f.col(k) = es.eigenvectors().col(src) * std::sqrt(ev(src));
  }
  return f;
}

// Correlations below this are round-off from cancelling edge contributions
// and are treated as structural zeros when splitting the covariance.
constexpr double kCouplingTolerance = 1e-12;

bool coupled(const Eigen::MatrixXd& c, int a, int b) {
  return std::abs(c(a, b)) > kCouplingTolerance * std::sqrt(c(a, a) * c(b, b));
}

// Connected components of the coupling graph of a covariance matrix, each
// listed in increasing index order; zero-variance rows are left out.
std::vector<std::vector<int>> coupled_blocks(const Eigen::MatrixXd& c) {
  const int n = static_cast<int>(c.rows());
  std::vector<int> label(n, -1);
  std::vector<std::vector<int>> blocks;
  for (int start = 0; start < n; ++start) {
    if (label[start] >= 0 || !(c(start, start) > 0.0)) continue;
    const int id = static_cast<int>(blocks.size());
    std::vector<int> members{start};
    label[start] = id;
    for (std::size_t head = 0; head < members.size(); ++head) {
      const int a = members[head];
      for (int b = 0; b < n; ++b) {
        if (label[b] < 0 && c(b, b) > 0.0 && coupled(c, a, b)) {
          label[b] = id;
          members.push_back(b);
        }
      }
    }
    std::sort(members.begin(), members.end());
    blocks.push_back(std::move(members));
  }
  return blocks;
}

}  // namespace

double one_step_covariance_kernel(Regime regime, double epsilon, double diffusion,
                                  double lambda_sum, double h) {
  const double eps2 = epsilon * epsilon;
  if (lambda_sum == 0.0) return regime == Regime::case1 ? h / eps2 : h;
  const double x = diffusion * lambda_sum * h / eps2;
  const double base = relaxation_fraction(x) / (diffusion * lambda_sum);
  return regime == Regime::case1 ? base : base * eps2;
}

OUPropagator::OUPropagator(Inputs in) : in_(std::move(in)) {
  const int n = static_cast<int>(in_.eigenvalues.size());
  if (in_.q.rows() != n || in_.q.cols() != n) {
    throw std::invalid_argument("OUPropagator: q does not match the mode count");
  }
  if (!(in_.h > 0.0)) throw std::invalid_argument("OUPropagator: h must be positive");
  if (!(in_.epsilon > 0.0)) throw std::invalid_argument("OUPropagator: epsilon must be positive");
  const double eps2 = in_.epsilon * in_.epsilon;

  rates_ = in_.eigenvalues * (in_.diffusion / eps2);
  decay_.resize(n);
  for (int j = 0; j < n; ++j) {
    const double x = rates_(j) * in_.h;
    decay_(j) = x > kRelaxedExponent ? 0.0 : std::exp(-x);
  }

  Eigen::MatrixXd c(n, n);
  for (int a = 0; a < n; ++a) {
    for (int b = a; b < n; ++b) {
      const double v = in_.q(a, b) == 0.0
                           ? 0.0
                           : in_.q(a, b) * one_step_covariance_kernel(
                                               in_.regime, in_.epsilon, in_.diffusion,
                                               in_.eigenvalues(a) + in_.eigenvalues(b), in_.h);
      c(a, b) = v;
      c(b, a) = v;
    }
  }

  regression_ = Eigen::VectorXd::Zero(n);
  if (in_.q_mean > 0.0) {
    if (in_.q_mean_cross.size() != n) {
      throw std::invalid_argument("OUPropagator: q_mean_cross does not match the mode count");
    }
    mean_var_ = in_.q_mean *
                one_step_covariance_kernel(in_.regime, in_.epsilon, in_.diffusion, 0.0, in_.h);
    for (int j = 0; j < n; ++j) {
      const double cross = in_.q_mean_cross(j) == 0.0
                               ? 0.0
                               : in_.q_mean_cross(j) *
                                     one_step_covariance_kernel(in_.regime, in_.epsilon,
                                                                in_.diffusion, in_.eigenvalues(j),
                                                                in_.h);
      regression_(j) = cross / mean_var_;
    }
    c.noalias() -= mean_var_ * regression_ * regression_.transpose();
  }
  factor_blocks(c);
}

void OUPropagator::factor_blocks(const Eigen::MatrixXd& c) {
  const int n = static_cast<int>(c.rows());
  blocks_.clear();
  double top = 0.0;
  for (int a = 0; a < n; ++a) top = std::max(top, c(a, a));
  int rank = 0;
  if (top > 0.0) {
    for (auto& members : coupled_blocks(c)) {
      const int m = static_cast<int>(members.size());
      Eigen::MatrixXd sub(m, m);
      for (int a = 0; a < m; ++a) {
        for (int b = 0; b < m; ++b) sub(a, b) = c(members[a], members[b]);
      }
      Block blk{std::move(members), psd_factor(sub, top)};
      if (blk.factor.cols() == 0) continue;
      rank += static_cast<int>(blk.factor.cols());
      blocks_.push_back(std::move(blk));
    }
  }
  factor_ = Eigen::MatrixXd::Zero(n, rank);
  int col = 0;
  for (const auto& blk : blocks_) {
    for (std::size_t a = 0; a < blk.rows.size(); ++a) {
      factor_.block(blk.rows[a], col, 1, blk.factor.cols()) = blk.factor.row(a);
    }
    col += static_cast<int>(blk.factor.cols());
  }
}

OUPropagator OUPropagator::for_species(const InteriorCovariance& cov,
                                       const BoundaryNoiseSpec& spec, int species,
                                       double diffusion, double epsilon, double h) {
  const Truncation& tr = cov.truncation();
  const int n = tr.mode_count() - 1;
  const Eigen::MatrixXd& qfull = cov.matrix(species);
  Inputs in;
  in.regime = spec.regime;
  in.epsilon = epsilon;
  in.diffusion = diffusion;
  in.h = h;
  in.eigenvalues.resize(n);
  for (int f = 1; f <= n; ++f) in.eigenvalues(f - 1) = eigenvalue(tr.mode_at(f));
  in.q = qfull.bottomRightCorner(n, n);
  if (spec.regime == Regime::case2 && qfull(0, 0) > 0.0) {
    in.q_mean = qfull(0, 0);
    in.q_mean_cross = qfull.col(0).tail(n);
  }
  return OUPropagator(std::move(in));
}

Eigen::MatrixXd OUPropagator::covariance() const {
  Eigen::MatrixXd c = factor_ * factor_.transpose();
  if (mean_var_ > 0.0) c.noalias() += mean_var_ * regression_ * regression_.transpose();
  return c;
}

void OUPropagator::increment(std::span<const double> normals, double mean_increment,
                             Eigen::Ref<Eigen::VectorXd> out) const {
  if (static_cast<int>(normals.size()) < rank()) {
    throw std::invalid_argument("OUPropagator::increment: too few normals");
  }
  out.setZero();
  int offset = 0;
  for (const auto& blk : blocks_) {
    const int r = static_cast<int>(blk.factor.cols());
    const Eigen::Map<const Eigen::VectorXd> xi(normals.data() + offset, r);
    block_scratch_.noalias() = blk.factor * xi;
    for (std::size_t a = 0; a < blk.rows.size(); ++a) out(blk.rows[a]) = block_scratch_(a);
    offset += r;
  }
  if (mean_var_ > 0.0) out.noalias() += mean_increment * regression_;
}

double ou_step_into(const OUPropagator& prop, OUState& state, const RandomStream& stream,
                    const BoundaryNoiseSpec& spec, int species, std::vector<double>& normals,
                    Eigen::Ref<Eigen::VectorXd> increment) {
  double mean_inc = 0.0;
  if (prop.mean_increment_variance() > 0.0) {
    const double sq = std::sqrt(prop.h());
    for (Edge e : kEdges) {
      const double a0 = spec.at(species, e).alpha0;
      if (a0 == 0.0) continue;
      const auto channel =
          static_cast<Channel>(static_cast<int>(Channel::edge_bottom) + static_cast<int>(e));
      mean_inc += a0 * sq *
                  stream.with(static_cast<std::uint32_t>(species), channel).normal(state.step, 0);
    }
  }
  normals.resize(static_cast<std::size_t>(prop.rank()));
  stream.with(static_cast<std::uint32_t>(species), Channel::ou_fluctuation)
      .fill_normals(state.step, normals);
  prop.increment(normals, mean_inc, increment);
  state.z.array() = prop.decay().array() * state.z.array() + increment.array();
  ++state.step;
  return mean_inc;
}

OUStepResult ou_step(const OUPropagator& prop, OUState& state, const RandomStream& stream,
                     const BoundaryNoiseSpec& spec, int species) {
  if (state.z.size() != prop.dimension()) {
    throw std::invalid_argument("ou_step: state dimension mismatch");
  }
  OUStepResult r;
  r.increment.resize(prop.dimension());
  std::vector<double> normals;
  r.mean_increment = ou_step_into(prop, state, stream, spec, species, normals, r.increment);
  return r;
}

double stationary_variance(Regime regime, double epsilon, double q_jj, double diffusion,
                           double lambda) {
  if (!(lambda > 0.0)) {
    throw std::domain_error("stationary_variance: the kernel mode has no stationary law");
  }
  const double v = q_jj / (2.0 * diffusion * lambda);
  return regime == Regime::case1 ? v : epsilon * epsilon * v;
}

Eigen::VectorXd pack_fluctuation(const CoefficientArray& c) {
  const int m = static_cast<int>(c.rows());
  Eigen::VectorXd v(m * m - 1);
  for (int f = 1; f < m * m; ++f) v(f - 1) = c(f / m, f % m);
  return v;
}

void unpack_fluctuation(const Eigen::VectorXd& v, CoefficientArray& c) {
  const int m = static_cast<int>(c.rows());
  if (v.size() != m * m - 1) throw std::invalid_argument("unpack_fluctuation: size mismatch");
  for (int f = 1; f < m * m; ++f) c(f / m, f % m) = v(f - 1);
}

CoefficientArray correction_process(const CoefficientArray& psi0, const Eigen::VectorXd& z,
                                    const Eigen::VectorXd& rates, double t) {
  if (z.size() != rates.size() || psi0.size() != z.size() + 1) {
    throw std::invalid_argument("correction_process: size mismatch");
  }
  const Eigen::VectorXd p = pack_fluctuation(psi0);
  Eigen::VectorXd q(z.size());
  for (int j = 0; j < z.size(); ++j) {
    const double x = rates(j) * t;
    q(j) = (x > 745.0 ? 0.0 : std::exp(-x)) * p(j) + z(j);
  }
  CoefficientArray out = CoefficientArray::Zero(psi0.rows(), psi0.cols());
  unpack_fluctuation(q, out);
  return out;
}

}  // namespace fastdiff
