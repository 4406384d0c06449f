#include "fastdiff/experiment_harness.hpp"

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <limits>
#include <memory>
#include <mutex>
#include <numeric>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "fastdiff/errors.hpp"
#include "fastdiff/version.hpp"

namespace fastdiff {

namespace {

using nlohmann::ordered_json;

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string hex64(std::uint64_t v) {
  char buf[20];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

/// Runs fn(i) for i in [0, count) on `workers` threads. The first exception
/// thrown by any item is rethrown after all threads joined.
template <class Fn>
void parallel_for(int count, int workers, Fn&& fn) {
  workers = std::max(1, std::min(workers, count));
  std::atomic<int> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto body = [&](int worker) {
    for (;;) {
      const int i = next.fetch_add(1);
      if (i >= count) return;
      try {
        fn(i, worker);
      } catch (...) {
        std::lock_guard<std::mutex> lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next.store(count);
        return;
      }
    }
  };
  if (workers == 1) {
    body(0);
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) pool.emplace_back(body, w);
    for (auto& t : pool) t.join();
  }
  if (failure) std::rethrow_exception(failure);
}

/// Largest divisor g of `stride` with g h <= target (at least 1).
std::uint64_t coarse_factor(std::uint64_t stride, double h, double target) {
  for (std::uint64_t g = stride; g > 1; --g) {
    if (stride % g == 0 && static_cast<double>(g) * h <= target) return g;
  }
  return 1;
}

struct Grid {
  double h = 0.0;
  std::uint64_t stride = 1;
  double T = 0.0;
  std::vector<double> saves;
};

Grid make_grid(const ExperimentPlan& plan, double epsilon) {
  Grid g;
  g.h = plan.step(epsilon);
  g.stride = std::max<std::uint64_t>(
      1, static_cast<std::uint64_t>(std::llround(plan.save_interval / g.h)));
  const std::uint64_t count = static_cast<std::uint64_t>(
      std::floor(plan.T0 / (static_cast<double>(g.stride) * g.h) + 1e-9));
  for (std::uint64_t k = 0; k <= count; ++k) {
    g.saves.push_back(static_cast<double>(k * g.stride) * g.h);
  }
  g.T = g.saves.back();
  return g;
}

SystemSpec at_epsilon(const SystemSpec& s, double epsilon) {
  SystemSpec out = s;
  out.epsilon = epsilon;
  return out;
}

double field_error(const SpdeSolver& solver, const std::vector<CoefficientArray>& u,
                   const std::vector<CoefficientArray>* q, const std::vector<double>& b,
                   double p) {
  std::vector<CoefficientArray> diff = u;
  for (std::size_t i = 0; i < diff.size(); ++i) {
    if (q != nullptr) diff[i] -= (*q)[i];
    diff[i](0, 0) -= b[i];
  }
  return solver.lp_norm(diff, p);
}

PathRecord run_path(const ExperimentPlan& plan, const SpdeSolver& solver,
                    const LimitSystem& limit, int eps_index, int path, const Grid& grid) {
  const double eps = plan.epsilons[eps_index];
  const bool case2 = plan.system.regime == Regime::case2;
  const RandomStream stream(plan.seed, static_cast<std::uint32_t>(path));
  const auto u0 = initial_field(plan, eps);
  const Trajectory traj = solver.simulate_path(u0, grid.T, grid.saves, stream, case2);

  std::vector<double> b0;
  for (const auto& c : u0) b0.push_back(c(0, 0));
  LimitTrajectory lim;
  if (case2) {
    const double T = traj.stopped ? static_cast<double>(traj.mean_increments[0].size()) * grid.h
                                  : grid.T;
    std::vector<double> saves;
    for (double t : grid.saves) {
      if (t <= T + 0.5 * grid.h) saves.push_back(t);
    }
    LimitNoise noise;
    noise.recorded = &traj.mean_increments;
    noise.recorded_h = grid.h;
    lim = integrate_limit(limit, b0, saves.empty() ? 0.0 : saves.back(), grid.h, saves, noise,
                          plan.positivity_stop);
  } else {
    const double hl = static_cast<double>(coarse_factor(grid.stride, grid.h, 1e-3)) * grid.h;
    lim = integrate_limit(limit, b0, grid.T, hl, grid.saves, {}, plan.positivity_stop);
  }

  PathRecord r;
  r.eps_index = eps_index;
  r.epsilon = eps;
  r.path = path;
  r.seed = plan.seed;
  r.tau_stopped = traj.stopped;
  r.tau = traj.stop_time;
  r.positivity_stopped = lim.positivity_stopped;
  r.T1 = lim.stop_time;

  std::vector<CoefficientArray> psi0;
  for (const auto& c : u0) psi0.push_back(project_fluctuation(c));
  const std::size_t used = std::min(traj.times.size(), lim.times.size());
  double sup = 0.0;
  for (std::size_t s = 0; s < used; ++s) {
    double e;
    if (case2) {
      e = field_error(solver, traj.coeffs[s], nullptr, lim.values[s], plan.p);
    } else {
      std::vector<CoefficientArray> q;
      for (int i = 0; i < plan.system.n; ++i) {
        q.push_back(correction_process(psi0[i], traj.ou[s][i], solver.propagator(i).rates(),
                                       traj.times[s]));
      }
      e = field_error(solver, traj.coeffs[s], &q, lim.values[s], plan.p);
    }
    sup = std::max(sup, e);
  }
  r.sup_error = sup;
  r.saves_used = static_cast<int>(used);
  return r;
}

double self_convergence_discrepancy(const ExperimentPlan& plan, const SpdeSolver& coarse,
                                    const SpdeSolver& fine, int path, const Grid& coarse_grid) {
  const RandomStream stream(plan.seed, static_cast<std::uint32_t>(path));
  const auto u0 = initial_field(plan, coarse.system().epsilon);
  const Trajectory a = coarse.simulate_path(u0, coarse_grid.T, coarse_grid.saves, stream);
  const Trajectory b = fine.simulate_path(u0, coarse_grid.T, coarse_grid.saves, stream);
  const std::size_t used = std::min(a.times.size(), b.times.size());
  double sup = 0.0;
  for (std::size_t s = 0; s < used; ++s) {
    std::vector<CoefficientArray> diff = a.coeffs[s];
    for (std::size_t i = 0; i < diff.size(); ++i) diff[i] -= b.coeffs[s][i];
    sup = std::max(sup, coarse.lp_norm(diff, plan.p));
  }
  return sup;
}

double threshold_for(const ExperimentPlan& plan, double epsilon, double kappa) {
  const int m = plan.system.max_degree();
  return std::pow(epsilon, 1.0 - 2.0 * m * kappa - kappa);
}

void fill_exceedance(EpsilonSummary& s, const std::vector<PathRecord>& records, int eps_index,
                     double threshold) {
  s.threshold = threshold;
  int n = 0;
  int k = 0;
  for (const auto& r : records) {
    if (r.eps_index != eps_index) continue;
    ++n;
    if (r.sup_error > threshold) ++k;
  }
  s.exceedances = k;
  s.exceed_frequency = n > 0 ? static_cast<double>(k) / n : 0.0;
  const auto [lo, hi] = wilson_interval(k, n);
  s.wilson_low = lo;
  s.wilson_high = hi;
}

}  // namespace

void write_atomically(const std::filesystem::path& target, const std::string& content) {
  std::filesystem::path tmp = target;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out << content;
    if (!out) throw std::runtime_error("write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, target);
}

std::string format_number(double v) { return fmt(v); }

std::vector<CoefficientArray> initial_field(const ExperimentPlan& plan, double epsilon) {
  std::vector<CoefficientArray> u0 = plan.u0;
  if (plan.system.regime == Regime::case2) {
    for (auto& c : u0) {
      const double mean = c(0, 0);
      c *= epsilon;
      c(0, 0) = mean;
    }
  }
  return u0;
}

Truncation ExperimentPlan::truncation() const {
  return grid_n > 0 ? Truncation(K, grid_n) : Truncation::with_min_grid(K);
}

double ExperimentPlan::step(double epsilon) const {
  return h > 0.0 ? h : h_per_eps2 * epsilon * epsilon;
}

void ExperimentPlan::validate() const {
  if (epsilons.empty()) throw ConfigError("epsilons must not be empty", "/experiment/epsilons");
  for (std::size_t i = 0; i < epsilons.size(); ++i) {
    if (!(epsilons[i] > 0.0 && epsilons[i] < 1.0)) {
      throw ConfigError("epsilon must lie in (0, 1)", "/experiment/epsilons/" + std::to_string(i));
    }
    if (i > 0 && !(epsilons[i] < epsilons[i - 1])) {
      throw ConfigError("epsilons must be strictly decreasing", "/experiment/epsilons");
    }
  }
  if (paths < 1) throw ConfigError("paths must be positive", "/experiment/paths");
  if (K < 0) throw ConfigError("K must be nonnegative", "/numerics/K");
  if (grid_n != 0 && grid_n < 2 * K + 1) {
    throw ConfigError("grid_n must be at least 2K + 1", "/numerics/grid_n");
  }
  if (!(h > 0.0) && !(h_per_eps2 > 0.0)) {
    throw ConfigError("a positive h or h_per_eps2 is required", "/numerics/h");
  }
  if (!(T0 > 0.0)) throw ConfigError("T0 must be positive", "/numerics/T0");
  if (!(save_interval > 0.0) || save_interval > T0) {
    throw ConfigError("save_interval must lie in (0, T0]", "/numerics/save_interval");
  }
  if (!(p >= 1.0)) throw ConfigError("p must be at least 1", "/numerics/p");
  const int m = system.max_degree();
  const double kmax = system.regime == Regime::case1 ? 1.0 / (2 * m + 1) : 1.0 / (m + 2);
  if (!(kappa > 0.0 && kappa < kmax)) {
    throw ConfigError("kappa must lie in (0, " + fmt(kmax) + ")", "/numerics/kappa");
  }
  if (static_cast<int>(u0.size()) != system.n) {
    throw ConfigError("initial condition must list every species", "/system/u0");
  }
  for (const auto& c : u0) {
    if (c.rows() != K + 1 || c.cols() != K + 1) {
      throw ConfigError("initial condition does not match the band", "/system/u0");
    }
  }
  if (workers < 1) throw ConfigError("workers must be positive", "/experiment/workers");
  for (double eps : epsilons) {
    const double ratio = save_interval / step(eps);
    if (std::abs(ratio - std::round(ratio)) > 1e-6 * ratio) {
      throw ConfigError("save_interval must be a multiple of h at eps = " + fmt(eps),
                        "/numerics/save_interval");
    }
  }
}

Regression fit_line(const std::vector<double>& x, const std::vector<double>& y) {
  Regression r;
  const std::size_t n = x.size();
  if (n < 2 || y.size() != n) return r;
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx == 0.0) return r;
  r.slope = sxy / sxx;
  r.intercept = my - r.slope * mx;
  r.r_squared = syy == 0.0 ? 1.0 : (sxy * sxy) / (sxx * syy);
  return r;
}

std::pair<double, double> wilson_interval(int k, int n, double z) {
  if (n <= 0) return {0.0, 1.0};
  const double p = static_cast<double>(k) / n;
  const double z2 = z * z;
  const double denom = 1.0 + z2 / n;
  const double center = (p + z2 / (2.0 * n)) / denom;
  const double half = z * std::sqrt(p * (1.0 - p) / n + z2 / (4.0 * n * n)) / denom;
  return {std::max(0.0, center - half), std::min(1.0, center + half)};
}

double quantile(std::vector<double> v, double q) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const double pos = q * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

bool nonincreasing_with_overlap(const std::vector<EpsilonSummary>& s) {
  int allowed = 1;
  for (std::size_t i = 1; i < s.size(); ++i) {
    if (s[i].exceed_frequency <= s[i - 1].exceed_frequency) continue;
    const bool overlap = s[i].wilson_low <= s[i - 1].wilson_high;
    if (!overlap || allowed == 0) return false;
    --allowed;
  }
  return true;
}

SweepResult run_sweep(const ExperimentPlan& plan) {
  plan.validate();
  const Truncation trunc = plan.truncation();
  const int ne = static_cast<int>(plan.epsilons.size());

  SweepResult result;
  result.limit = build_limit_system(at_epsilon(plan.system, plan.epsilons[0]), plan.noise, trunc,
                                    plan.tail_tol, plan.limit_constants);

  std::vector<Grid> grids;
  for (double eps : plan.epsilons) grids.push_back(make_grid(plan, eps));

  SolverOptions opts;
  opts.kappa = plan.kappa;

  const int sc_paths = plan.self_convergence ? std::min(plan.paths, plan.self_convergence_paths) : 0;
  const int sweep_items = ne * plan.paths;
  const int total_items = sweep_items + sc_paths;
  const int workers = std::max(1, plan.workers);

  // solvers carry scratch buffers, so each worker owns its own set
  std::vector<std::vector<std::unique_ptr<SpdeSolver>>> solvers(
      static_cast<std::size_t>(workers));
  std::vector<std::unique_ptr<SpdeSolver>> coarse(static_cast<std::size_t>(workers));
  std::vector<std::unique_ptr<SpdeSolver>> fine(static_cast<std::size_t>(workers));
  for (auto& v : solvers) v.resize(static_cast<std::size_t>(ne));

  std::vector<PathRecord> records(static_cast<std::size_t>(sweep_items));
  std::vector<double> discrepancies(static_cast<std::size_t>(sc_paths), 0.0);
  const double finest = plan.epsilons.back();

  parallel_for(total_items, workers, [&](int item, int w) {
    if (item < sweep_items) {
      const int e = item / plan.paths;
      const int path = item % plan.paths;
      auto& solver = solvers[w][e];
      if (!solver) {
        solver = std::make_unique<SpdeSolver>(at_epsilon(plan.system, plan.epsilons[e]),
                                              plan.noise, trunc, grids[e].h, opts);
      }
      records[item] = run_path(plan, *solver, result.limit, e, path, grids[e]);
    } else {
      const int path = item - sweep_items;
      if (!coarse[w]) {
        SolverOptions c = opts;
        c.noise_substeps = 2;
        coarse[w] = std::make_unique<SpdeSolver>(at_epsilon(plan.system, finest), plan.noise,
                                                 trunc, grids.back().h, c);
        fine[w] = std::make_unique<SpdeSolver>(at_epsilon(plan.system, finest), plan.noise,
                                               trunc, 0.5 * grids.back().h, opts);
      }
      discrepancies[path] =
          self_convergence_discrepancy(plan, *coarse[w], *fine[w], path, grids.back());
    }
  });

  const int m = plan.system.max_degree();
  for (int e = 0; e < ne; ++e) {
    EpsilonSummary s;
    s.epsilon = plan.epsilons[e];
    s.h = grids[e].h;
    s.paths = plan.paths;
    std::vector<double> errs;
    int tau = 0, t1 = 0;
    for (int p = 0; p < plan.paths; ++p) {
      const PathRecord& r = records[e * plan.paths + p];
      errs.push_back(r.sup_error);
      tau += r.tau_stopped ? 1 : 0;
      t1 += r.positivity_stopped ? 1 : 0;
    }
    s.mean = std::accumulate(errs.begin(), errs.end(), 0.0) / errs.size();
    s.median = quantile(errs, 0.5);
    s.q90 = quantile(errs, 0.9);
    s.tau_stop_fraction = static_cast<double>(tau) / plan.paths;
    s.T1_stop_fraction = static_cast<double>(t1) / plan.paths;
    fill_exceedance(s, records, e, std::pow(s.epsilon, 1.0 - (2.0 * m + 1.0) * plan.threshold_kappa));
    if (tau == plan.paths) {
      throw CutoffAbort("every path stopped at the cutoff time for eps = " + fmt(s.epsilon) +
                        "; lower the noise amplitude or the initial data");
    }
    result.summaries.push_back(s);
  }
  result.records = std::move(records);

  std::vector<double> lx, ly;
  for (const auto& s : result.summaries) {
    if (s.median > 0.0) {
      lx.push_back(std::log(s.epsilon));
      ly.push_back(std::log(s.median));
    }
  }
  result.regression = fit_line(lx, ly);

  if (sc_paths > 0) {
    SelfConvergence& sc = result.self_convergence;
    sc.ran = true;
    sc.epsilon = finest;
    sc.paths = sc_paths;
    sc.median_discrepancy = quantile(discrepancies, 0.5);
    const double base = result.summaries.back().median;
    sc.ratio = base > 0.0 ? sc.median_discrepancy / base : 0.0;
    sc.h_biased = sc.ratio > 0.2;
  }
  result.regression_valid =
      lx.size() >= 3 && !(result.self_convergence.ran && result.self_convergence.h_biased);
  result.exceedance_trend_ok = nonincreasing_with_overlap(result.summaries);
  return result;
}

std::vector<EpsilonSummary> probability_estimate(const ExperimentPlan& plan,
                                                 const SweepResult& sweep,
                                                 double threshold_kappa) {
  std::vector<EpsilonSummary> out = sweep.summaries;
  for (std::size_t e = 0; e < out.size(); ++e) {
    double threshold;
    if (std::isinf(threshold_kappa)) {
      threshold = threshold_kappa > 0 ? 0.0 : std::numeric_limits<double>::infinity();
    } else {
      threshold = threshold_for(plan, out[e].epsilon, threshold_kappa);
    }
    fill_exceedance(out[e], sweep.records, static_cast<int>(e), threshold);
  }
  return out;
}

void write_sweep_outputs(const std::string& directory, const SweepResult& result,
                         const std::string& resolved_config_json) {
  namespace fs = std::filesystem;
  const fs::path dir(directory);
  fs::create_directories(dir);

  std::ostringstream res;
  res << "epsilon,h,paths,median_err,mean_err,q90_err,tau_stop_fraction,T1_stop_fraction,"
         "threshold,exceed_frequency,wilson_low,wilson_high\n";
  for (const auto& s : result.summaries) {
    res << fmt(s.epsilon) << ',' << fmt(s.h) << ',' << s.paths << ',' << fmt(s.median) << ','
        << fmt(s.mean) << ',' << fmt(s.q90) << ',' << fmt(s.tau_stop_fraction) << ','
        << fmt(s.T1_stop_fraction) << ',' << fmt(s.threshold) << ',' << fmt(s.exceed_frequency)
        << ',' << fmt(s.wilson_low) << ',' << fmt(s.wilson_high) << '\n';
  }
  write_atomically(dir / "results.csv", res.str());

  std::ostringstream paths;
  paths << "eps_index,epsilon,path,seed,sup_err,tau_stopped,tau,T1_stopped,T1,saves_used\n";
  for (const auto& r : result.records) {
    paths << r.eps_index << ',' << fmt(r.epsilon) << ',' << r.path << ',' << r.seed << ','
          << fmt(r.sup_error) << ',' << (r.tau_stopped ? 1 : 0) << ',' << fmt(r.tau) << ','
          << (r.positivity_stopped ? 1 : 0) << ',' << fmt(r.T1) << ',' << r.saves_used << '\n';
  }
  write_atomically(dir / "paths.csv", paths.str());

  ordered_json report;
  report["tool"] = "fastdiff";
  report["version"] = kVersion;
  report["config_hash"] = hex64(fnv1a(resolved_config_json));
  report["config"] = ordered_json::parse(resolved_config_json);
  ordered_json lim;
  lim["regime"] = result.limit.regime == Regime::case1 ? "case1" : "case2";
  for (int i = 0; i < result.limit.species(); ++i) {
    lim["drift"].push_back(result.limit.drift[i].to_string());
    lim["brownian_amplitude"].push_back(result.limit.brownian_amplitude[i]);
  }
  for (const auto& c : result.limit.constants) {
    lim["constants"].push_back({{"ell", c.ell},
                                {"value", c.value},
                                {"tail_bound", c.tail_bound},
                                {"K", c.K},
                                {"method", c.method}});
  }
  report["limit"] = lim;
  report["regression"] = {{"slope", result.regression.slope},
                          {"intercept", result.regression.intercept},
                          {"r_squared", result.regression.r_squared},
                          {"valid", result.regression_valid}};
  const SelfConvergence& sc = result.self_convergence;
  report["self_convergence"] = {{"ran", sc.ran},
                                {"epsilon", sc.epsilon},
                                {"paths", sc.paths},
                                {"median_discrepancy", sc.median_discrepancy},
                                {"ratio", sc.ratio},
                                {"h_biased", sc.h_biased}};
  report["exceedance_trend_ok"] = result.exceedance_trend_ok;
  for (const auto& s : result.summaries) {
    report["summaries"].push_back({{"epsilon", s.epsilon},
                                   {"median", s.median},
                                   {"q90", s.q90},
                                   {"tau_stop_fraction", s.tau_stop_fraction},
                                   {"exceed_frequency", s.exceed_frequency}});
  }
  write_atomically(dir / "report.json", report.dump(2) + "\n");
}

AveragingReport averaging_check(const AveragingPlan& plan) {
  if (plan.epsilons.empty()) throw ConfigError("epsilons must not be empty", "/experiment/epsilons");
  if (plan.paths < 2) throw ConfigError("averaging needs at least two paths");
  if (!(plan.d > 0.0 && plan.lambda > 0.0 && plan.T > 0.0 && plan.step_ratio > 0.0) ||
      plan.q < 0.0) {
    throw ConfigError("averaging parameters must be positive");
  }
  AveragingReport rep;
  rep.stationary_variance = plan.q / (2.0 * plan.d * plan.lambda);
  const int ne = static_cast<int>(plan.epsilons.size());
  std::vector<double> integ(static_cast<std::size_t>(ne) * plan.paths);
  std::vector<double> sq(integ.size());

  parallel_for(ne * plan.paths, plan.workers, [&](int item, int) {
    const int e = item / plan.paths;
    const int path = item % plan.paths;
    const double eps = plan.epsilons[e];
    const double rate = plan.d * plan.lambda / (eps * eps);
    const std::uint64_t steps =
        static_cast<std::uint64_t>(std::ceil(rate * plan.T / plan.step_ratio));
    const double h = plan.T / static_cast<double>(steps);
    const double decay = std::exp(-rate * h);
    const double sd =
        std::sqrt(plan.q / (eps * eps) * -std::expm1(-2.0 * rate * h) / (2.0 * rate));
    const RandomStream stream =
        RandomStream(plan.seed, static_cast<std::uint32_t>(path)).with(0, Channel::scalar_ou);
    constexpr std::size_t kChunk = 1024;
    std::array<double, kChunk> xi{};
    double z = 0.0, i1 = 0.0, i2 = 0.0;
    for (std::uint64_t n = 0; n < steps; ++n) {
      if (n % kChunk == 0) stream.fill_normals(n / kChunk, xi);
      const double next = decay * z + sd * xi[n % kChunk];
      i1 += 0.5 * h * (z + next);
      i2 += 0.5 * h * (z * z + next * next);
      z = next;
    }
    integ[item] = i1 / plan.T;
    sq[item] = i2 / plan.T - rep.stationary_variance;
  });

  std::vector<double> lx, ly1, ly2;
  for (int e = 0; e < ne; ++e) {
    AveragingRow row;
    row.epsilon = plan.epsilons[e];
    double s1 = 0, s1s = 0, s2 = 0, s2s = 0, s3 = 0;
    for (int p = 0; p < plan.paths; ++p) {
      const double a = std::abs(integ[e * plan.paths + p]);
      const double b = std::abs(sq[e * plan.paths + p]);
      s1 += a;
      s1s += a * a;
      s2 += b;
      s2s += b * b;
      s3 += sq[e * plan.paths + p];
    }
    const double n = plan.paths;
    row.mean_abs_integral = s1 / n;
    row.mean_abs_square_dev = s2 / n;
    row.mean_square_dev = s3 / n;
    row.se_abs_integral = std::sqrt(std::max(0.0, s1s / n - row.mean_abs_integral * row.mean_abs_integral) / (n - 1));
    row.se_abs_square_dev = std::sqrt(std::max(0.0, s2s / n - row.mean_abs_square_dev * row.mean_abs_square_dev) / (n - 1));
    rep.rows.push_back(row);
    if (row.mean_abs_integral > 0.0 && row.mean_abs_square_dev > 0.0) {
      lx.push_back(std::log(row.epsilon));
      ly1.push_back(std::log(row.mean_abs_integral));
      ly2.push_back(std::log(row.mean_abs_square_dev));
    }
  }
  rep.integral_fit = fit_line(lx, ly1);
  rep.square_fit = fit_line(lx, ly2);
  return rep;
}

std::pair<double, double> ou_stationary_sample(double q, double d, double lambda, int paths,
                                               double t_end, std::uint64_t seed) {
  if (paths < 2) throw std::invalid_argument("ou_stationary_sample: need at least two paths");
  constexpr int kSteps = 16;
  OUPropagator::Inputs in;
  in.regime = Regime::case1;
  in.epsilon = 1.0;
  in.diffusion = d;
  in.h = t_end / kSteps;
  in.eigenvalues = Eigen::VectorXd::Constant(1, lambda);
  in.q = Eigen::MatrixXd::Constant(1, 1, q);
  const OUPropagator prop(in);
  BoundaryNoiseSpec none;
  none.species.resize(1);
  double s2 = 0.0, s4 = 0.0;
  std::vector<double> normals;
  Eigen::VectorXd inc(1);
  for (int p = 0; p < paths; ++p) {
    OUState st;
    st.z = Eigen::VectorXd::Zero(1);
    const RandomStream stream(seed, static_cast<std::uint32_t>(p));
    for (int k = 0; k < kSteps; ++k) ou_step_into(prop, st, stream, none, 0, normals, inc);
    const double z2 = st.z(0) * st.z(0);
    s2 += z2;
    s4 += z2 * z2;
  }
  const double var = s2 / paths;
  const double se = std::sqrt(std::max(0.0, s4 / paths - var * var) / paths);
  return {var, se};
}

}  // namespace fastdiff
