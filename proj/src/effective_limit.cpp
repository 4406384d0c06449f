#include "fastdiff/effective_limit.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

#include "fastdiff/errors.hpp"

namespace fastdiff {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr int kExplicitTerms = 4000;

double coth(double x) { return 1.0 / std::tanh(x); }

/// sum over k2 >= 0 of f_{k2}(0)^2 / (l^2 + k2^2), the (0,0) mode excluded.
double line_sum(int l) {
  if (l == 0) return kPi * kPi / 3.0;
  return kPi * coth(kPi * l) / l;
}

/// 2 sum_{k > K} 1 / (l^2 + k^2): interior modes on the line of edge mode l
/// that fall outside the band.
double line_remainder(int l, int K) {
  double partial = l == 0 ? 0.0 : 1.0 / (static_cast<double>(l) * l);
  for (int k = K; k >= 1; --k) partial += 2.0 / (static_cast<double>(l) * l + static_cast<double>(k) * k);
  return std::max(0.0, line_sum(l) - partial);
}

/// Estimate and error bound of sum_{l > L} l^{-s} (s > 1).
SeriesValue power_tail(double s, int L) {
  SeriesValue t;
  t.value = std::pow(L + 0.5, 1.0 - s) / (s - 1.0);
  t.tail_bound = std::pow(static_cast<double>(L), -s);
  return t;
}

double double_factorial(int n) {
  double r = 1.0;
  for (int k = n; k > 1; k -= 2) r *= k;
  return r;
}

bool any_odd(const MultiIndex& ell) {
  return std::any_of(ell.begin(), ell.end(), [](int v) { return v % 2 != 0; });
}

bool has_amplitude(const EdgeAmplitudes& a) {
  if (a.alpha0 != 0.0) return true;
  if (a.law == EdgeAmplitudes::Law::power) return a.c != 0.0;
  return std::any_of(a.values.begin(), a.values.end(), [](double v) { return v != 0.0; });
}

void check_amplitude_law(const EdgeAmplitudes& a) {
  if (a.law == EdgeAmplitudes::Law::power && a.c != 0.0 && !(a.mu > 0.0)) {
    throw ConfigError("power-law amplitudes with mu <= 0 make the series diverge");
  }
}

/// C_2 contribution of species i, d = diffusion, from edge amplitudes l > Kb
/// when the edge band follows the interior band.
SeriesValue edge_tail_c2(const BoundaryNoiseSpec& spec, int species, int K, double diffusion) {
  SeriesValue out;
  const double scale = 1.0 / (2.0 * diffusion * kPi * kPi);
  for (Edge e : kEdges) {
    const EdgeAmplitudes& a = spec.at(species, e);
    if (a.law == EdgeAmplitudes::Law::list) {
      for (int l = K + 1; l <= static_cast<int>(a.values.size()); ++l) {
        out.value += scale * a.alpha(l) * a.alpha(l) * line_sum(l);
      }
    } else if (a.c != 0.0) {
      check_amplitude_law(a);
      const SeriesValue t = power_tail(2.0 * a.mu + 1.0, K);
      const double w = scale * a.c * a.c * kPi;
      out.value += w * t.value;
      out.tail_bound += w * coth(kPi * (K + 1)) * t.tail_bound + w * (coth(kPi * (K + 1)) - 1.0) * t.value;
    }
  }
  return out;
}

EffectiveConstant diagonal_series(const MultiIndex& ell, int species,
                                  const BoundaryNoiseSpec& spec, const Truncation& trunc,
                                  double diffusion) {
  const InteriorCovariance cov = assemble_covariance(spec, trunc);
  EffectiveConstant r;
  r.ell = ell;
  r.K = trunc.K;
  r.method = "diagonal series";
  double band = 0.0;
  for (int f = 1; f < trunc.mode_count(); ++f) {
    const ModeIndex j = trunc.mode_at(f);
    const double q = cov.entry(species, j, j);
    if (q != 0.0) band += q / (2.0 * diffusion * eigenvalue(j));
  }
  double cross = 0.0;
  const int kb = cov.boundary_cutoff();
  for (Edge e : kEdges) {
    for (int l = 0; l <= kb; ++l) {
      const double a2 = cov.alpha_sq(species, e, l);
      if (a2 != 0.0) cross += a2 * line_remainder(l, trunc.K);
    }
  }
  cross /= 2.0 * diffusion * kPi * kPi;
  SeriesValue edge;
  if (spec.boundary_cutoff < 0) edge = edge_tail_c2(spec, species, trunc.K, diffusion);
  r.value = band + cross + edge.value;
  r.tail_bound = edge.tail_bound + 1e-14 * std::abs(r.value);
  return r;
}

double field_integral(const MultiIndex& ell, const BoundaryNoiseSpec& spec,
                      const Truncation& trunc, std::span<const double> diffusion) {
  const int total = total_degree(ell);
  // sigma^2 has frequencies up to 2K, the product up to |l| K
  const int grid = total * trunc.K / 2 + 1;
  Eigen::ArrayXXd prod = Eigen::ArrayXXd::Ones(grid, grid);
  for (std::size_t i = 0; i < ell.size(); ++i) {
    if (ell[i] == 0) continue;
    const Eigen::ArrayXXd s2 =
        variance_field(spec, trunc, static_cast<int>(i), diffusion[i], grid).array();
    Eigen::ArrayXXd p = Eigen::ArrayXXd::Ones(grid, grid);
    for (int k = 0; k < ell[i] / 2; ++k) p *= s2;
    prod *= double_factorial(ell[i] - 1) * p;
  }
  return prod.mean();
}

}  // namespace

GridValues variance_field(const BoundaryNoiseSpec& spec, const Truncation& trunc, int species,
                          double diffusion, int grid_points) {
  const int K = trunc.K;
  const int kb = spec.effective_cutoff(trunc);
  if (kb > K) throw ConfigError("boundary cutoff exceeds the interior band");
  Eigen::MatrixXd synth(grid_points, K + 1);
  for (int i = 0; i < grid_points; ++i) {
    const double x = (i + 0.5) / grid_points;
    for (int k = 0; k <= K; ++k) synth(i, k) = edge_basis_eval(k, x);
  }
  GridValues out = GridValues::Zero(grid_points, grid_points);
  for (Edge e : kEdges) {
    const EdgeAmplitudes& amp = spec.at(species, e);
    const double z = (e == Edge::bottom || e == Edge::left) ? 0.0 : 1.0;
    for (int l = 0; l <= kb; ++l) {
      const double a = amp.alpha(l);
      if (a == 0.0) continue;
      Eigen::MatrixXd m = Eigen::MatrixXd::Zero(K + 1, K + 1);
      for (int p = 0; p <= K; ++p) {
        for (int q = 0; q <= K; ++q) {
          if (l == 0 && (p == 0 || q == 0)) continue;
          m(p, q) = edge_basis_eval(p, z) * edge_basis_eval(q, z) /
                    (2.0 * l * l + static_cast<double>(p) * p + static_cast<double>(q) * q);
        }
      }
      // 1-D profile along the coupled axis, f_l^2 along the edge direction
      const Eigen::VectorXd profile = ((synth * m).array() * synth.array()).rowwise().sum();
      const Eigen::VectorXd across = synth.col(l).array().square();
      const double w = a * a / (diffusion * kPi * kPi);
      if (e == Edge::bottom || e == Edge::top) {
        out.noalias() += w * across * profile.transpose();
      } else {
        out.noalias() += w * profile * across.transpose();
      }
    }
  }
  return out;
}

EffectiveConstant c_ell(const MultiIndex& ell, const BoundaryNoiseSpec& spec,
                        const Truncation& trunc, std::span<const double> diffusion,
                        double tail_tol, ConstantScope scope) {
  if (static_cast<int>(ell.size()) != spec.species_count() ||
      static_cast<int>(diffusion.size()) != spec.species_count()) {
    throw std::invalid_argument("c_ell: multi-index and diffusion must have one entry per species");
  }
  for (int v : ell) {
    if (v < 0) throw std::invalid_argument("c_ell: negative multi-index entry");
  }
  EffectiveConstant r;
  r.ell = ell;
  r.K = trunc.K;
  if (any_odd(ell)) {
    r.method = "odd component";
    return r;
  }
  const int total = total_degree(ell);
  if (total == 0) {
    r.value = 1.0;
    r.method = "empty product";
    return r;
  }
  bool silent = true;
  for (std::size_t i = 0; i < ell.size(); ++i) {
    if (ell[i] == 0) continue;
    for (Edge e : kEdges) silent = silent && !has_amplitude(spec.at(static_cast<int>(i), e));
  }
  if (silent) {
    r.method = "zero noise";
    return r;
  }
  if (scope == ConstantScope::band) {
    if (total == 2) {
      const int species = static_cast<int>(std::find(ell.begin(), ell.end(), 2) - ell.begin());
      const InteriorCovariance cov = assemble_covariance(spec, trunc);
      for (int f = 1; f < trunc.mode_count(); ++f) {
        const ModeIndex j = trunc.mode_at(f);
        r.value += cov.entry(species, j, j) / (2.0 * diffusion[species] * eigenvalue(j));
      }
      r.method = "band sum";
    } else {
      r.value = field_integral(ell, spec, trunc, diffusion);
      r.method = "variance field";
    }
    return r;
  }
  if (total == 2) {
    const int species = static_cast<int>(std::find(ell.begin(), ell.end(), 2) - ell.begin());
    r = diagonal_series(ell, species, spec, trunc, diffusion[species]);
  } else {
    r.method = "variance field";
    r.value = field_integral(ell, spec, trunc, diffusion);
    if (trunc.K >= 2) {
      BoundaryNoiseSpec coarse = spec;
      const Truncation half(trunc.K / 2, 2 * (trunc.K / 2) + 1);
      if (coarse.boundary_cutoff > half.K) coarse.boundary_cutoff = half.K;
      r.tail_bound = std::abs(r.value - field_integral(ell, coarse, half, diffusion));
    } else {
      r.tail_bound = std::abs(r.value);
    }
  }
  if (r.tail_bound > tail_tol * std::abs(r.value)) {
    const double ratio = r.tail_bound / (tail_tol * std::abs(r.value));
    const int suggested = static_cast<int>(std::ceil(trunc.K * std::max(2.0, ratio)));
    throw TruncationError("C_l tail bound " + std::to_string(r.tail_bound) +
                              " exceeds the tolerance at K = " + std::to_string(trunc.K),
                          suggested);
  }
  return r;
}

double c_ell_matching_sum(const MultiIndex& ell, const InteriorCovariance& cov,
                          std::span<const double> diffusion) {
  if (any_odd(ell)) return 0.0;
  const Truncation& tr = cov.truncation();
  std::vector<int> slot_species;
  for (std::size_t i = 0; i < ell.size(); ++i) {
    for (int k = 0; k < ell[i]; ++k) slot_species.push_back(static_cast<int>(i));
  }
  const int total = static_cast<int>(slot_species.size());
  if (total == 0) return 1.0;

  struct Pair {
    ModeIndex a, b;
    double c;
  };
  std::vector<std::vector<Pair>> pairs(ell.size());
  for (std::size_t i = 0; i < ell.size(); ++i) {
    if (ell[i] == 0) continue;
    const Eigen::MatrixXd& q = cov.matrix(static_cast<int>(i));
    for (int fa = 1; fa < tr.mode_count(); ++fa) {
      for (int fb = 1; fb < tr.mode_count(); ++fb) {
        if (q(fa, fb) == 0.0) continue;
        const ModeIndex a = tr.mode_at(fa);
        const ModeIndex b = tr.mode_at(fb);
        pairs[i].push_back(
            {a, b, q(fa, fb) / (diffusion[i] * (eigenvalue(a) + eigenvalue(b)))});
      }
    }
  }

  // enumerate perfect matchings of the slots; each pairs slots of one species
  std::vector<std::pair<int, int>> matching;
  std::vector<bool> used(static_cast<std::size_t>(total), false);
  std::vector<ModeIndex> modes(static_cast<std::size_t>(total));
  double sum = 0.0;

  auto assign = [&](auto&& self, std::size_t p, double weight) -> void {
    if (p == matching.size()) {
      sum += weight * mean_of_product(modes);
      return;
    }
    const auto [s, t] = matching[p];
    for (const Pair& pr : pairs[slot_species[s]]) {
      modes[s] = pr.a;
      modes[t] = pr.b;
      self(self, p + 1, weight * pr.c);
    }
  };
  auto match = [&](auto&& self) -> void {
    int first = -1;
    for (int k = 0; k < total; ++k) {
      if (!used[k]) {
        first = k;
        break;
      }
    }
    if (first < 0) {
      assign(assign, 0, 1.0);
      return;
    }
    used[first] = true;
    for (int k = first + 1; k < total; ++k) {
      if (used[k] || slot_species[k] != slot_species[first]) continue;
      used[k] = true;
      matching.emplace_back(first, k);
      self(self);
      matching.pop_back();
      used[k] = false;
    }
    used[first] = false;
  };
  match(match);
  return sum;
}

double c2_band_sum(const BoundaryNoiseSpec& spec, int species, double diffusion, int K) {
  BoundaryNoiseSpec s = spec;
  s.boundary_cutoff = -1;
  const Truncation trunc(K, 2 * K + 1);
  const InteriorCovariance cov(s, trunc);
  double band = 0.0;
  for (int f = 1; f < trunc.mode_count(); ++f) {
    const ModeIndex j = trunc.mode_at(f);
    band += cov.entry(species, j, j) / (2.0 * diffusion * eigenvalue(j));
  }
  return band;
}

double c2_band_richardson(const BoundaryNoiseSpec& spec, int species, double diffusion, int K) {
  if (K < 4 || K % 4 != 0) {
    throw std::invalid_argument("c2_band_richardson: K must be a positive multiple of 4");
  }
  const double c1 = c2_band_sum(spec, species, diffusion, K / 4);
  const double c2 = c2_band_sum(spec, species, diffusion, K / 2);
  const double c4 = c2_band_sum(spec, species, diffusion, K);
  const double r_half = 2.0 * c2 - c1;
  const double r_full = 2.0 * c4 - c2;
  return (4.0 * r_full - r_half) / 3.0;
}

SeriesValue closed_form_c2_heat(const std::array<EdgeAmplitudes, 4>& alpha) {
  static constexpr std::array<double, 4> kWeights{1.0, 2.0, 1.0, 2.0};
  auto inner = [](int k) {
    return (kPi * k * coth(kPi * k) - 1.0) / (2.0 * static_cast<double>(k) * k);
  };
  SeriesValue out;
  for (std::size_t e = 0; e < 4; ++e) {
    const EdgeAmplitudes& a = alpha[e];
    check_amplitude_law(a);
    const int last = a.law == EdgeAmplitudes::Law::list ? static_cast<int>(a.values.size())
                                                        : kExplicitTerms;
    double s = 0.0;
    for (int k = last; k >= 1; --k) s += a.alpha(k) * a.alpha(k) * inner(k);
    if (a.law == EdgeAmplitudes::Law::power && a.c != 0.0) {
      // inner(k) < pi / (2k) beyond the explicit range
      const SeriesValue t = power_tail(2.0 * a.mu + 1.0, last);
      s += a.c * a.c * 0.5 * kPi * t.value;
      out.tail_bound += kWeights[e] * a.c * a.c * 0.5 * kPi * (t.tail_bound + t.value / last);
    }
    out.value += kWeights[e] * s;
  }
  out.value /= 2.0 * kPi * kPi;
  out.tail_bound /= 2.0 * kPi * kPi;
  return out;
}

SeriesValue edge_series_c2(const std::array<EdgeAmplitudes, 4>& alpha) {
  SeriesValue out;
  for (const EdgeAmplitudes& a : alpha) {
    check_amplitude_law(a);
    const int last = a.law == EdgeAmplitudes::Law::list ? static_cast<int>(a.values.size())
                                                        : kExplicitTerms;
    double s = 0.0;
    for (int l = last; l >= 0; --l) s += a.alpha(l) * a.alpha(l) * line_sum(l);
    if (a.law == EdgeAmplitudes::Law::power && a.c != 0.0) {
      const SeriesValue t = power_tail(2.0 * a.mu + 1.0, last);
      s += a.c * a.c * kPi * t.value;
      out.tail_bound += a.c * a.c * kPi * (t.tail_bound + 1e-12 * t.value);
    }
    out.value += s;
  }
  out.value /= 2.0 * kPi * kPi;
  out.tail_bound /= 2.0 * kPi * kPi;
  return out;
}

LimitSystem build_limit_system(const SystemSpec& system, const BoundaryNoiseSpec& spec,
                               const Truncation& trunc, double tail_tol, ConstantScope scope) {
  system.validate();
  if (spec.species_count() != system.n) {
    throw ConfigError("noise must list one entry per species", "/noise");
  }
  LimitSystem out;
  out.regime = spec.regime;
  out.drift = system.reactions;
  out.correction.assign(static_cast<std::size_t>(system.n), ReactionPolynomial(system.n));
  out.brownian_amplitude.assign(static_cast<std::size_t>(system.n), 0.0);
  if (spec.regime == Regime::case2) {
    for (int i = 0; i < system.n; ++i) out.brownian_amplitude[i] = mean_noise_amplitude(spec, i);
    return out;
  }
  const int m = system.max_degree();
  for (int order = 2; order <= m; order += 2) {
    for (const MultiIndex& ell : multi_indices_of_order(system.n, order)) {
      if (any_odd(ell)) continue;
      bool touches = false;
      for (int i = 0; i < system.n; ++i) {
        touches = touches || !multi_index_derivative(system.reactions[i], ell).is_zero();
      }
      if (!touches) continue;
      const EffectiveConstant c = c_ell(ell, spec, trunc, system.diffusion, tail_tol, scope);
      out.constants.push_back(c);
      if (c.value == 0.0) continue;
      const double w = c.value / multi_factorial(ell);
      for (int i = 0; i < system.n; ++i) {
        out.correction[i] += multi_index_derivative(system.reactions[i], ell) * w;
      }
    }
  }
  for (int i = 0; i < system.n; ++i) {
    if (out.correction[i].degree() > m - 2) {
      throw std::logic_error("limit correction exceeds degree m - 2");
    }
    out.drift[i] += out.correction[i];
  }
  return out;
}

LimitTrajectory integrate_limit(const LimitSystem& system, const std::vector<double>& b0,
                                double T, double h, const std::vector<double>& save_times,
                                const LimitNoise& noise, bool positivity_stop) {
  const int n = system.species();
  if (static_cast<int>(b0.size()) != n) {
    throw std::invalid_argument("integrate_limit: b0 has the wrong size");
  }
  if (!(h > 0.0)) throw std::invalid_argument("integrate_limit: h must be positive");
  const std::uint64_t total = steps_to(T, h);
  std::vector<std::uint64_t> saves;
  for (double t : save_times) saves.push_back(steps_to(t, h));
  std::sort(saves.begin(), saves.end());
  saves.erase(std::unique(saves.begin(), saves.end()), saves.end());

  const bool stochastic = system.regime == Regime::case2;
  std::uint64_t ratio = 1;
  if (stochastic && noise.recorded != nullptr) {
    ratio = steps_to(h, noise.recorded_h);
    if (ratio == 0) throw std::invalid_argument("integrate_limit: recorded step exceeds h");
    for (const auto& v : *noise.recorded) {
      if (v.size() < total * ratio) {
        throw std::invalid_argument("integrate_limit: not enough recorded increments");
      }
    }
  } else if (stochastic && noise.stream == nullptr) {
    bool any = false;
    for (double a : system.brownian_amplitude) any = any || a != 0.0;
    if (any) throw std::invalid_argument("integrate_limit: case2 needs a noise source");
  }

  auto drift = [&](const std::vector<double>& b, std::vector<double>& out) {
    for (int i = 0; i < n; ++i) out[i] = system.drift[i].evaluate(b);
  };

  LimitTrajectory traj;
  std::vector<double> b = b0;
  std::vector<double> B(static_cast<std::size_t>(n), 0.0);
  std::vector<double> k1(n), k2(n), k3(n), k4(n), tmp(n), db(n);
  std::size_t next = 0;
  double t = 0.0;
  for (std::uint64_t step = 0;; ++step) {
    t = static_cast<double>(step) * h;
    if (next < saves.size() && saves[next] == step) {
      traj.times.push_back(t);
      traj.values.push_back(b);
      traj.driver.push_back(B);
      ++next;
    }
    if (step == total) break;
    if (!stochastic) {
      drift(b, k1);
      for (int i = 0; i < n; ++i) tmp[i] = b[i] + 0.5 * h * k1[i];
      drift(tmp, k2);
      for (int i = 0; i < n; ++i) tmp[i] = b[i] + 0.5 * h * k2[i];
      drift(tmp, k3);
      for (int i = 0; i < n; ++i) tmp[i] = b[i] + h * k3[i];
      drift(tmp, k4);
      for (int i = 0; i < n; ++i) b[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    } else {
      for (int i = 0; i < n; ++i) {
        if (noise.recorded != nullptr) {
          double s = 0.0;
          for (std::uint64_t r = 0; r < ratio; ++r) s += (*noise.recorded)[i][step * ratio + r];
          db[i] = s;
        } else if (system.brownian_amplitude[i] != 0.0) {
          db[i] = system.brownian_amplitude[i] * std::sqrt(h) *
                  noise.stream->with(static_cast<std::uint32_t>(i), Channel::limit_driver)
                      .normal(step, 0);
        } else {
          db[i] = 0.0;
        }
      }
      drift(b, k1);
      for (int i = 0; i < n; ++i) {
        b[i] += h * k1[i] + db[i];
        B[i] += db[i];
      }
    }
    for (int i = 0; i < n; ++i) {
      if (!std::isfinite(b[i])) {
        throw NumericalError("limit system blew up at t = " + std::to_string(t + h), t + h);
      }
    }
    if (positivity_stop && std::any_of(b.begin(), b.end(), [](double v) { return v < 0.0; })) {
      traj.positivity_stopped = true;
      traj.stop_time = t + h;
      return traj;
    }
  }
  traj.stop_time = static_cast<double>(total) * h;
  return traj;
}

}  // namespace fastdiff
