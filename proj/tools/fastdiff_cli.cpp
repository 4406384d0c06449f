#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "fastdiff/config.hpp"
#include "fastdiff/effective_limit.hpp"
#include "fastdiff/errors.hpp"
#include "fastdiff/experiment_harness.hpp"
#include "fastdiff/spde_solver.hpp"
#include "fastdiff/version.hpp"

namespace fs = std::filesystem;
using namespace fastdiff;

namespace {

enum Exit { ok = 0, other = 1, invalid = 2, numerical = 3, cutoff = 4 };

struct Options {
  std::string config_path;
  std::string preset;
  std::optional<std::uint64_t> seed;
  std::optional<int> workers;
  std::string out;
  std::vector<std::string> sets;
  std::optional<double> epsilon;
};

// Precedence, lowest first: preset or config file, --set, FASTDIFF_WORKERS,
// then the dedicated flags.
Config resolve(const Options& o) {
  if (o.config_path.empty() == o.preset.empty()) {
    throw ConfigError("give exactly one of --config and --preset");
  }
  Json doc = o.preset.empty() ? load_json_file(o.config_path) : preset_document(o.preset);
  for (const auto& s : o.sets) {
    const auto eq = s.find('=');
    if (eq == std::string::npos || s.empty() || s[0] != '/') {
      throw ConfigError("--set expects /json/pointer=value, got \"" + s + "\"");
    }
    const std::string text = s.substr(eq + 1);
    Json value;
    try {
      value = Json::parse(text);
    } catch (const nlohmann::json::parse_error&) {
      value = text;
    }
    override_field(doc, s.substr(0, eq), value);
  }
  if (!o.workers) {
    if (const char* env = std::getenv("FASTDIFF_WORKERS")) {
      char* end = nullptr;
      const long w = std::strtol(env, &end, 10);
      if (end == env || *end != '\0' || w < 1) {
        throw ConfigError("FASTDIFF_WORKERS must be a positive integer");
      }
      override_field(doc, "/experiment/workers", static_cast<int>(w));
    }
  }
  if (o.seed) override_field(doc, "/experiment/seed", *o.seed);
  if (o.workers) override_field(doc, "/experiment/workers", *o.workers);
  if (!o.out.empty()) override_field(doc, "/output/directory", o.out);
  if (o.epsilon) override_field(doc, "/experiment/epsilons", Json::array({*o.epsilon}));
  return parse_config(doc);
}

std::string fmt(double v) { return format_number(v); }

SystemSpec at_epsilon(SystemSpec s, double eps) {
  s.epsilon = eps;
  return s;
}

std::vector<double> save_grid(double T, double interval) {
  std::vector<double> times;
  const auto count = static_cast<long long>(std::llround(T / interval));
  for (long long k = 0; k <= count; ++k) times.push_back(std::min(T, k * interval));
  return times;
}

fs::path prepare_dir(const Config& cfg) {
  fs::path dir(cfg.output_directory);
  fs::create_directories(dir);
  return dir;
}

// The embedded config must not depend on the worker count, so reruns with a
// different --workers stay byte-identical.
std::string reproducible_config(const Config& cfg) {
  Json doc = cfg.document;
  doc["experiment"].erase("workers");
  return doc.dump();
}

int cmd_constants(const Config& cfg) {
  if (cfg.system().regime != Regime::case1) {
    throw ConfigError("constants are defined for case1 configurations only", "/system/regime");
  }
  const Truncation trunc = cfg.plan.truncation();
  const auto& d = cfg.system().diffusion;
  Json report;
  report["tool"] = "fastdiff";
  report["version"] = kVersion;
  report["K"] = trunc.K;
  Json rows = Json::array();
  for (const auto& ell : cfg.constant_orders) {
    const EffectiveConstant c = c_ell(ell, cfg.noise(), trunc, d, cfg.plan.tail_tol);
    Json row = {{"ell", ell},
                {"value", c.value},
                {"K", c.K},
                {"tail_bound", c.tail_bound},
                {"method", c.method},
                {"band_value", c_ell(ell, cfg.noise(), trunc, d, cfg.plan.tail_tol,
                                     ConstantScope::band).value}};
    if (total_degree(ell) == 2) {
      int species = 0;
      while (ell[species] == 0) ++species;
      if (ell[species] == 2) {
        const auto& edges = cfg.noise().species[species];
        const SeriesValue exact = edge_series_c2(edges);
        row["edge_series"] = {{"value", exact.value / d[species]},
                              {"tail_bound", exact.tail_bound / d[species]}};
        if (cfg.system().n == 1) {
          const SeriesValue literal = closed_form_c2_heat(edges);
          const double gap = std::abs(literal.value - c.value);
          const double allowed = literal.tail_bound + c.tail_bound + 1e-8;
          row["closed_form"] = {{"value", literal.value},
                                {"tail_bound", literal.tail_bound},
                                {"difference", literal.value - c.value},
                                {"discrepancy", gap > allowed}};
        }
        if (cfg.constants_oracle) {
          const double oracle = c2_band_richardson(cfg.noise(), species, d[species], 200);
          row["oracle"] = {{"value", oracle},
                           {"K", 200},
                           {"relative_difference",
                            oracle != 0.0 ? (c.value - oracle) / std::abs(oracle) : c.value}};
        }
      }
    }
    rows.push_back(std::move(row));
    std::cout << "C_" << Json(ell).dump() << " = " << fmt(c.value) << "  (tail <= "
              << fmt(c.tail_bound) << ", " << c.method << ")\n";
  }
  report["constants"] = rows;
  const fs::path dir = prepare_dir(cfg);
  write_atomically(dir / "constants.json", report.dump(2) + "\n");
  std::cout << "wrote " << (dir / "constants.json").string() << "\n";
  return ok;
}

int cmd_simulate(const Config& cfg) {
  const ExperimentPlan& plan = cfg.plan;
  const double eps = plan.epsilons.front();
  const double h = plan.step(eps);
  SolverOptions opts;
  opts.kappa = plan.kappa;
  const SpdeSolver solver(at_epsilon(plan.system, eps), plan.noise, plan.truncation(), h, opts);
  const RandomStream stream(plan.seed, 0);
  const auto saves = save_grid(plan.T0, plan.save_interval);
  const Trajectory traj = solver.simulate_path(initial_field(plan, eps), plan.T0, saves, stream);

  std::ostringstream csv;
  csv << "t";
  for (int i = 0; i < plan.system.n; ++i) csv << ",mean_" << i;
  for (const auto& [s, k] : cfg.probes) csv << ",u" << s << "_" << k.k1 << "_" << k.k2;
  csv << ",lp_norm\n";
  for (std::size_t r = 0; r < traj.times.size(); ++r) {
    csv << fmt(traj.times[r]);
    for (int i = 0; i < plan.system.n; ++i) csv << ',' << fmt(traj.coeffs[r][i](0, 0));
    for (const auto& [s, k] : cfg.probes) csv << ',' << fmt(traj.coeffs[r][s](k.k1, k.k2));
    csv << ',' << fmt(solver.lp_norm(traj.coeffs[r], plan.p)) << '\n';
  }
  const fs::path dir = prepare_dir(cfg);
  write_atomically(dir / "trajectory.csv", csv.str());
  Json info = {{"epsilon", eps},
               {"h", h},
               {"cutoff_level", solver.cutoff_level()},
               {"stopped", traj.stopped},
               {"stop_time", traj.stop_time},
               {"config", cfg.document}};
  write_atomically(dir / "trajectory.json", info.dump(2) + "\n");
  std::cout << "eps = " << fmt(eps) << ", h = " << fmt(h) << ", " << traj.times.size()
            << " saved rows";
  if (traj.stopped) std::cout << ", cutoff reached at t = " << fmt(traj.stop_time);
  std::cout << "\nwrote " << (dir / "trajectory.csv").string() << "\n";
  return ok;
}

int cmd_limit(const Config& cfg) {
  const ExperimentPlan& plan = cfg.plan;
  const double eps = plan.epsilons.front();
  const LimitSystem sys =
      build_limit_system(at_epsilon(plan.system, eps), plan.noise, plan.truncation(),
                         plan.tail_tol, plan.limit_constants);
  std::vector<double> b0;
  for (const auto& u : plan.u0) b0.push_back(u(0, 0));
  const auto per_save = static_cast<long long>(std::ceil(plan.save_interval / 1e-3 - 1e-9));
  const double h = plan.save_interval / static_cast<double>(std::max(1LL, per_save));
  const RandomStream stream(plan.seed, 0);
  LimitNoise noise;
  noise.stream = &stream;
  const auto saves = save_grid(plan.T0, plan.save_interval);
  const LimitTrajectory traj =
      integrate_limit(sys, b0, plan.T0, h, saves, noise, plan.positivity_stop);

  const bool case2 = sys.regime == Regime::case2;
  std::ostringstream csv;
  csv << "t";
  for (int i = 0; i < sys.species(); ++i) csv << ",b_" << i;
  if (case2) {
    for (int i = 0; i < sys.species(); ++i) csv << ",B_" << i;
  }
  csv << '\n';
  for (std::size_t r = 0; r < traj.times.size(); ++r) {
    csv << fmt(traj.times[r]);
    for (double v : traj.values[r]) csv << ',' << fmt(v);
    if (case2) {
      for (double v : traj.driver[r]) csv << ',' << fmt(v);
    }
    csv << '\n';
  }
  const fs::path dir = prepare_dir(cfg);
  write_atomically(dir / "limit.csv", csv.str());
  for (int i = 0; i < sys.species(); ++i) {
    std::cout << "db_" << i << "/dt = " << sys.drift[i].to_string();
    if (case2) std::cout << " + " << fmt(sys.brownian_amplitude[i]) << " dW";
    std::cout << '\n';
  }
  if (traj.positivity_stopped) {
    std::cout << "a component turned negative at T1 = " << fmt(traj.stop_time) << '\n';
  }
  std::cout << "wrote " << (dir / "limit.csv").string() << "\n";
  return ok;
}

int cmd_sweep(const Config& cfg) {
  const SweepResult result = run_sweep(cfg.plan);
  const fs::path dir = prepare_dir(cfg);
  write_sweep_outputs(dir.string(), result, reproducible_config(cfg));
  std::cout << "epsilon      median_err     q90_err        tau_stop  exceed\n";
  for (const auto& s : result.summaries) {
    std::printf("%-12.6g %-14.6g %-14.6g %-9.3f %.3f\n", s.epsilon, s.median, s.q90,
                s.tau_stop_fraction, s.exceed_frequency);
  }
  if (result.regression_valid) {
    std::printf("slope %.4f, R^2 %.4f\n", result.regression.slope, result.regression.r_squared);
  }
  const SelfConvergence& sc = result.self_convergence;
  if (sc.ran) {
    std::printf("self-convergence at eps %.6g: ratio %.4g%s\n", sc.epsilon, sc.ratio,
                sc.h_biased ? " (h-biased)" : "");
  }
  std::cout << "wrote " << dir.string() << "/{results.csv,paths.csv,report.json}\n";
  return ok;
}

int cmd_average(const Config& cfg) {
  const AveragingReport rep = averaging_check(cfg.averaging);
  std::ostringstream csv;
  csv << "epsilon,mean_abs_integral,se_abs_integral,mean_abs_square_dev,se_abs_square_dev,"
         "mean_square_dev\n";
  for (const auto& r : rep.rows) {
    csv << fmt(r.epsilon) << ',' << fmt(r.mean_abs_integral) << ',' << fmt(r.se_abs_integral)
        << ',' << fmt(r.mean_abs_square_dev) << ',' << fmt(r.se_abs_square_dev) << ','
        << fmt(r.mean_square_dev) << '\n';
  }
  const fs::path dir = prepare_dir(cfg);
  write_atomically(dir / "averaging.csv", csv.str());
  std::printf("stationary variance %.6g\n", rep.stationary_variance);
  std::printf("slope of E|mean Z|:          %.4f (R^2 %.4f)\n", rep.integral_fit.slope,
              rep.integral_fit.r_squared);
  std::printf("slope of E|mean Z^2 - v|:    %.4f (R^2 %.4f)\n", rep.square_fit.slope,
              rep.square_fit.r_squared);
  std::cout << "wrote " << (dir / "averaging.csv").string() << "\n";
  return ok;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Spectral simulator and verification harness for reaction-diffusion equations "
               "with fast diffusion and stochastic Neumann boundary noise"};
  app.set_version_flag("--version", std::string(kVersion));
  app.require_subcommand(1);

  Options o;
  const auto add_common = [&o](CLI::App* sub) {
    sub->add_option("--config", o.config_path, "JSON configuration file");
    sub->add_option("--preset", o.preset, "built-in configuration")
        ->check(CLI::IsMember(preset_names()));
    sub->add_option("--seed", o.seed, "master seed (overrides /experiment/seed)");
    sub->add_option("--workers", o.workers, "worker threads (overrides FASTDIFF_WORKERS)")
        ->check(CLI::PositiveNumber);
    sub->add_option("--out", o.out, "output directory (overrides /output/directory)");
    sub->add_option("--set", o.sets, "override a config field: /json/pointer=value")
        ->take_all();
  };

  auto* constants = app.add_subcommand("constants", "effective constants C_l (case1)");
  auto* simulate = app.add_subcommand("simulate", "one SPDE path at the first epsilon");
  auto* limit = app.add_subcommand("limit", "the limit equation for the spatial means");
  auto* sweep = app.add_subcommand("sweep", "error sweep over epsilon");
  auto* average = app.add_subcommand("average", "scalar OU averaging check");
  for (auto* sub : {constants, simulate, limit, sweep, average}) add_common(sub);
  for (auto* sub : {simulate, limit}) {
    sub->add_option("--epsilon", o.epsilon, "epsilon (overrides /experiment/epsilons)");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? ok : invalid;
  }

  try {
    const Config cfg = resolve(o);
    if (constants->parsed()) return cmd_constants(cfg);
    if (simulate->parsed()) return cmd_simulate(cfg);
    if (limit->parsed()) return cmd_limit(cfg);
    if (sweep->parsed()) return cmd_sweep(cfg);
    if (average->parsed()) return cmd_average(cfg);
  } catch (const TruncationError& e) {
    std::cerr << "error: " << e.what() << " (try K >= " << e.suggested_K() << ")\n";
    return invalid;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return invalid;
  } catch (const NumericalError& e) {
    std::cerr << "numerical failure at t = " << e.time() << ": " << e.what() << "\n";
    return numerical;
  } catch (const CutoffAbort& e) {
    std::cerr << "aborted: " << e.what() << "\n";
    return cutoff;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return other;
  }
  return other;
}
