#include "fastdiff/config.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include "fastdiff/errors.hpp"

namespace fastdiff {
namespace {

std::string join_pointer(const std::string& base, const std::string& key) {
  std::string escaped;
  for (char c : key) {
    if (c == '~') escaped += "~0";
    else if (c == '/') escaped += "~1";
    else escaped += c;
  }
  return base + "/" + escaped;
}

std::string join_pointer(const std::string& base, std::size_t index) {
  return base + "/" + std::to_string(index);
}

// Read-only view of one JSON object with pointer-aware accessors.
class Node {
 public:
  Node(const Json& value, std::string pointer) : value_(value), pointer_(std::move(pointer)) {
    if (!value_.is_object()) throw ConfigError("expected an object", pointer_or_root());
  }

  void allow_only(std::initializer_list<const char*> keys) const {
    std::set<std::string> allowed(keys.begin(), keys.end());
    for (const auto& [key, _] : value_.items()) {
      if (!allowed.contains(key)) {
        throw ConfigError("unknown key", join_pointer(pointer_, key));
      }
    }
  }

  bool has(const char* key) const { return value_.contains(key); }
  const Json& raw(const char* key) const { return value_.at(key); }
  std::string at(const char* key) const { return join_pointer(pointer_, key); }

  Node child(const char* key) const {
    static const Json empty = Json::object();
    return has(key) ? Node(value_.at(key), at(key)) : Node(empty, at(key));
  }

  double number(const char* key, double fallback) const {
    return has(key) ? as_number(raw(key), at(key)) : fallback;
  }
  double number(const char* key) const {
    require(key);
    return as_number(raw(key), at(key));
  }
  long long integer(const char* key, long long fallback) const {
    return has(key) ? as_integer(raw(key), at(key)) : fallback;
  }
  long long integer(const char* key) const {
    require(key);
    return as_integer(raw(key), at(key));
  }
  bool boolean(const char* key, bool fallback) const {
    if (!has(key)) return fallback;
    if (!raw(key).is_boolean()) throw ConfigError("expected a boolean", at(key));
    return raw(key).get<bool>();
  }
  std::string string(const char* key, const std::string& fallback) const {
    if (!has(key)) return fallback;
    if (!raw(key).is_string()) throw ConfigError("expected a string", at(key));
    return raw(key).get<std::string>();
  }
  const Json& array(const char* key) const {
    require(key);
    if (!raw(key).is_array()) throw ConfigError("expected an array", at(key));
    return raw(key);
  }

  void require(const char* key) const {
    if (!has(key)) throw ConfigError("missing required key", at(key));
  }

  static double as_number(const Json& v, const std::string& ptr) {
    if (!v.is_number()) throw ConfigError("expected a number", ptr);
    const double x = v.get<double>();
    if (!std::isfinite(x)) throw ConfigError("expected a finite number", ptr);
    return x;
  }
  static long long as_integer(const Json& v, const std::string& ptr) {
    if (v.is_number_integer()) return v.get<long long>();
    if (v.is_number_float()) {
      const double x = v.get<double>();
      if (std::isfinite(x) && x == std::floor(x) && std::abs(x) < 9e15) {
        return static_cast<long long>(x);
      }
    }
    throw ConfigError("expected an integer", ptr);
  }

 private:
  std::string pointer_or_root() const { return pointer_.empty() ? "/" : pointer_; }

  const Json& value_;
  std::string pointer_;
};

std::vector<double> number_list(const Json& arr, const std::string& ptr) {
  if (!arr.is_array()) throw ConfigError("expected an array", ptr);
  std::vector<double> out;
  for (std::size_t i = 0; i < arr.size(); ++i) {
    out.push_back(Node::as_number(arr[i], join_pointer(ptr, i)));
  }
  return out;
}

std::vector<int> int_list(const Json& arr, const std::string& ptr) {
  if (!arr.is_array()) throw ConfigError("expected an array", ptr);
  std::vector<int> out;
  for (std::size_t i = 0; i < arr.size(); ++i) {
    out.push_back(static_cast<int>(Node::as_integer(arr[i], join_pointer(ptr, i))));
  }
  return out;
}

ModeIndex mode_index(const Json& v, const std::string& ptr) {
  const auto k = int_list(v, ptr);
  if (k.size() != 2 || k[0] < 0 || k[1] < 0) {
    throw ConfigError("expected a pair of non-negative mode indices", ptr);
  }
  return {k[0], k[1]};
}

Regime parse_regime(const std::string& s, const std::string& ptr) {
  if (s == "case1") return Regime::case1;
  if (s == "case2") return Regime::case2;
  throw ConfigError("regime must be \"case1\" or \"case2\"", ptr);
}

EdgeAmplitudes parse_edge(const Json& v, const std::string& ptr) {
  const Node e(v, ptr);
  e.allow_only({"alpha0", "law", "c", "mu", "values"});
  const double alpha0 = e.number("alpha0", 0.0);
  const std::string law = e.string("law", "power");
  if (law == "power") {
    if (e.has("values")) throw ConfigError("\"values\" requires law \"list\"", e.at("values"));
    return EdgeAmplitudes::power(e.number("c", 0.0), e.number("mu", 2.0), alpha0);
  }
  if (law == "list") {
    if (e.has("c") || e.has("mu")) {
      throw ConfigError("\"c\" and \"mu\" require law \"power\"", e.at(e.has("c") ? "c" : "mu"));
    }
    auto values = e.has("values") ? number_list(e.raw("values"), e.at("values"))
                                  : std::vector<double>{};
    return EdgeAmplitudes::list(std::move(values), alpha0);
  }
  throw ConfigError("law must be \"power\" or \"list\"", e.at("law"));
}

Json edge_document(const EdgeAmplitudes& a) {
  Json e = Json::object();
  e["alpha0"] = a.alpha0;
  if (a.law == EdgeAmplitudes::Law::power) {
    e["law"] = "power";
    e["c"] = a.c;
    e["mu"] = a.mu;
  } else {
    e["law"] = "list";
    e["values"] = a.values;
  }
  return e;
}

Json edge(double c, double mu, double alpha0 = 0.0) {
  return Json{{"alpha0", alpha0}, {"law", "power"}, {"c", c}, {"mu", mu}};
}

Json silent_edges() {
  return Json::array({edge(0, 2), edge(0, 2), edge(0, 2), edge(0, 2)});
}

Json heat_document(Regime regime) {
  const bool c1 = regime == Regime::case1;
  Json doc;
  doc["system"] = {
      {"n", 1},
      {"d", {1.0}},
      {"regime", c1 ? "case1" : "case2"},
      {"reactions", Json::array({Json::array({{{"powers", {1}}, {"coeff", 1.0}},
                                              {{"powers", {3}}, {"coeff", -1.0}}})})},
      {"u0",
       {{"mean", {0.5}},
        {"modes", Json::array({{{"species", 0}, {"k", {1, 0}}, {"value", 0.05}},
                               {{"species", 0}, {"k", {0, 1}}, {"value", -0.05}}})}}},
      {"positivity_stop", false}};
  const double c = c1 ? 0.1 : 0.3;
  const double a0 = c1 ? 0.0 : 0.1;
  doc["noise"] = Json::array({Json::array({edge(c, 2, a0), edge(c, 2, a0), edge(c, 2, a0),
                                           edge(c, 2, a0)})});
  doc["numerics"] = {{"K", 16},
                     {"grid_n", 0},
                     {"K_b", -1},
                     {"h", 0.0},
                     {"h_per_eps2", 1e-4},
                     {"T0", 1.0},
                     {"kappa", c1 ? 0.1 : 0.15},
                     {"p", 2.0},
                     {"save_interval", 0.01},
                     {"self_convergence", true},
                     {"self_convergence_paths", 8},
                     {"tail_tol", 1e-6},
                     {"limit_constants", "band"}};
  doc["experiment"] = {{"epsilons", {0.2, 0.1, 0.05}},
                       {"paths", 32},
                       {"seed", 20240601},
                       {"workers", 1},
                       {"threshold_kappa", 0.02}};
  doc["output"] = {{"directory", c1 ? "heat-case1-out" : "heat-case2-out"},
                   {"formats", {"csv"}},
                   {"probes", Json::array({{{"species", 0}, {"k", {1, 0}}}})}};
  return doc;
}

Json autocat_document(Regime regime) {
  const bool c1 = regime == Regime::case1;
  const double rho = 1.0;
  Json doc;
  doc["system"] = {
      {"n", 2},
      {"d", {1.0, 1.0}},
      {"regime", c1 ? "case1" : "case2"},
      {"reactions",
       Json::array({Json::array({{{"powers", {1, 2}}, {"coeff", -rho}}}),
                    Json::array({{{"powers", {1, 2}}, {"coeff", rho}}})})},
      {"u0",
       {{"mean", {0.6, 0.4}},
        {"modes", Json::array({{{"species", 0}, {"k", {1, 0}}, {"value", 0.05}},
                               {{"species", 1}, {"k", {0, 1}}, {"value", 0.05}}})}}},
      {"positivity_stop", true}};
  if (c1) {
    doc["noise"] = Json::array(
        {silent_edges(), Json::array({edge(0.1, 2), edge(0.1, 2), edge(0.1, 2), edge(0.1, 2)})});
  } else {
    doc["noise"] = Json::array({Json::array({edge(0.1, 2, 0.05), edge(0.1, 2, 0.05),
                                             edge(0.1, 2, 0.05), edge(0.1, 2, 0.05)}),
                                Json::array({edge(0.1, 2, 0.05), edge(0.1, 2, 0.05),
                                             edge(0.1, 2, 0.05), edge(0.1, 2, 0.05)})});
  }
  doc["numerics"] = {{"K", 16},
                     {"grid_n", 0},
                     {"K_b", -1},
                     {"h", 0.0},
                     {"h_per_eps2", 1e-4},
                     {"T0", 1.0},
                     {"kappa", c1 ? 0.1 : 0.15},
                     {"p", 2.0},
                     {"save_interval", 0.01},
                     {"self_convergence", true},
                     {"self_convergence_paths", 8},
                     {"tail_tol", 1e-6},
                     {"limit_constants", "band"}};
  doc["experiment"] = {{"epsilons", {0.2, 0.1, 0.05}},
                       {"paths", 32},
                       {"seed", 20240602},
                       {"workers", 1},
                       {"threshold_kappa", 0.02}};
  doc["output"] = {{"directory", c1 ? "autocat-case1-out" : "autocat-case2-out"},
                   {"formats", {"csv"}},
                   {"probes", Json::array()}};
  return doc;
}

std::vector<MultiIndex> default_constant_orders(int n, int m) {
  std::vector<MultiIndex> out;
  for (int order = 2; order <= m; order += 2) {
    for (auto& l : multi_indices_of_order(n, order)) {
      bool even = true;
      for (int li : l) even = even && li % 2 == 0;
      if (even) out.push_back(std::move(l));
    }
  }
  return out;
}

}  // namespace

std::vector<std::string> preset_names() {
  return {"heat-case1", "heat-case2", "autocat-case1", "autocat-case2"};
}

Json preset_document(const std::string& name) {
  if (name == "heat-case1") return heat_document(Regime::case1);
  if (name == "heat-case2") return heat_document(Regime::case2);
  if (name == "autocat-case1") return autocat_document(Regime::case1);
  if (name == "autocat-case2") return autocat_document(Regime::case2);
  std::string known;
  for (const auto& p : preset_names()) known += (known.empty() ? "" : ", ") + p;
  throw ConfigError("unknown preset \"" + name + "\" (known: " + known + ")");
}

Config parse_config(const Json& doc) {
  const Node root(doc, "");
  root.allow_only({"system", "noise", "numerics", "experiment", "output"});
  root.require("system");
  root.require("noise");
  root.require("experiment");

  Config cfg;
  ExperimentPlan& plan = cfg.plan;

  // system
  const Node sys = root.child("system");
  sys.allow_only({"n", "d", "regime", "reactions", "u0", "positivity_stop"});
  const long long n = sys.integer("n");
  if (n < 1 || n > 16) throw ConfigError("n must be between 1 and 16", sys.at("n"));
  plan.system.n = static_cast<int>(n);
  plan.system.diffusion = number_list(sys.array("d"), sys.at("d"));
  if (plan.system.diffusion.size() != static_cast<std::size_t>(n)) {
    throw ConfigError("expected n diffusion coefficients", sys.at("d"));
  }
  for (std::size_t i = 0; i < plan.system.diffusion.size(); ++i) {
    if (!(plan.system.diffusion[i] > 0)) {
      throw ConfigError("diffusion coefficients must be positive", join_pointer(sys.at("d"), i));
    }
  }
  plan.system.regime = parse_regime(sys.string("regime", "case1"), sys.at("regime"));

  const Json& reactions = sys.array("reactions");
  if (reactions.size() != static_cast<std::size_t>(n)) {
    throw ConfigError("expected one reaction list per species", sys.at("reactions"));
  }
  for (std::size_t i = 0; i < reactions.size(); ++i) {
    const std::string rp = join_pointer(sys.at("reactions"), i);
    if (!reactions[i].is_array()) throw ConfigError("expected an array of terms", rp);
    ReactionPolynomial f(static_cast<int>(n));
    for (std::size_t t = 0; t < reactions[i].size(); ++t) {
      const Node term(reactions[i][t], join_pointer(rp, t));
      term.allow_only({"powers", "coeff"});
      const MultiIndex powers = int_list(term.array("powers"), term.at("powers"));
      if (powers.size() != static_cast<std::size_t>(n)) {
        throw ConfigError("expected n exponents", term.at("powers"));
      }
      for (std::size_t j = 0; j < powers.size(); ++j) {
        if (powers[j] < 0) {
          throw ConfigError("exponents must be non-negative", join_pointer(term.at("powers"), j));
        }
      }
      f.add_term(powers, term.number("coeff"));
    }
    plan.system.reactions.push_back(std::move(f));
  }
  plan.positivity_stop = sys.boolean("positivity_stop", false);

  // numerics (needed before u0 to size the coefficient arrays)
  const Node num = root.child("numerics");
  num.allow_only({"K", "grid_n", "K_b", "h", "h_per_eps2", "T0", "kappa", "p", "save_interval",
                  "self_convergence", "self_convergence_paths", "tail_tol",
                  "limit_constants"});
  const long long K = num.integer("K", 16);
  if (K < 1 || K > 512) throw ConfigError("K must be between 1 and 512", num.at("K"));
  plan.K = static_cast<int>(K);
  const long long grid_n = num.integer("grid_n", 0);
  if (grid_n != 0 && grid_n < 2 * K + 1) {
    throw ConfigError("grid_n must be at least 2K + 1 (or 0 for automatic)", num.at("grid_n"));
  }
  plan.grid_n = static_cast<int>(grid_n);
  const long long K_b = num.integer("K_b", -1);
  if (K_b < -1) throw ConfigError("K_b must be -1 (same as K) or non-negative", num.at("K_b"));
  plan.h = num.number("h", 0.0);
  if (plan.h < 0) throw ConfigError("h must be non-negative", num.at("h"));
  plan.h_per_eps2 = num.number("h_per_eps2", 1e-4);
  if (!(plan.h_per_eps2 > 0)) throw ConfigError("h_per_eps2 must be positive", num.at("h_per_eps2"));
  plan.T0 = num.number("T0", 1.0);
  if (!(plan.T0 > 0)) throw ConfigError("T0 must be positive", num.at("T0"));
  plan.kappa = num.number("kappa", 0.1);
  plan.p = num.number("p", 2.0);
  if (!(plan.p >= 1)) throw ConfigError("p must be at least 1", num.at("p"));
  plan.save_interval = num.number("save_interval", 0.01);
  if (!(plan.save_interval > 0)) {
    throw ConfigError("save_interval must be positive", num.at("save_interval"));
  }
  plan.self_convergence = num.boolean("self_convergence", true);
  const long long scp = num.integer("self_convergence_paths", 8);
  if (scp < 1) throw ConfigError("must be positive", num.at("self_convergence_paths"));
  plan.self_convergence_paths = static_cast<int>(scp);
  plan.tail_tol = num.number("tail_tol", 1e-6);
  if (!(plan.tail_tol > 0)) throw ConfigError("tail_tol must be positive", num.at("tail_tol"));
  const std::string scope = num.string("limit_constants", "band");
  if (scope == "band") {
    plan.limit_constants = ConstantScope::band;
  } else if (scope == "series") {
    plan.limit_constants = ConstantScope::series;
  } else {
    throw ConfigError("limit_constants must be \"band\" or \"series\"", num.at("limit_constants"));
  }

  // initial condition
  const Node u0 = sys.child("u0");
  u0.allow_only({"mean", "modes"});
  plan.u0.assign(static_cast<std::size_t>(n), CoefficientArray::Zero(K + 1, K + 1));
  if (u0.has("mean")) {
    const auto mean = number_list(u0.raw("mean"), u0.at("mean"));
    if (mean.size() != static_cast<std::size_t>(n)) {
      throw ConfigError("expected one mean per species", u0.at("mean"));
    }
    for (std::size_t i = 0; i < mean.size(); ++i) plan.u0[i](0, 0) = mean[i];
  }
  if (u0.has("modes")) {
    const Json& modes = u0.array("modes");
    for (std::size_t j = 0; j < modes.size(); ++j) {
      const Node m(modes[j], join_pointer(u0.at("modes"), j));
      m.allow_only({"species", "k", "value"});
      const long long s = m.integer("species");
      if (s < 0 || s >= n) throw ConfigError("species out of range", m.at("species"));
      m.require("k");
      const ModeIndex k = mode_index(m.raw("k"), m.at("k"));
      if (k.is_kernel()) throw ConfigError("use \"mean\" for the (0,0) mode", m.at("k"));
      if (k.k1 > K || k.k2 > K) throw ConfigError("mode outside the retained band", m.at("k"));
      plan.u0[s](k.k1, k.k2) = m.number("value");
    }
  }

  // noise
  const Json& noise = doc.at("noise");
  if (!noise.is_array() || noise.size() != static_cast<std::size_t>(n)) {
    throw ConfigError("expected one array of four edge records per species", "/noise");
  }
  plan.noise.regime = plan.system.regime;
  plan.noise.boundary_cutoff = static_cast<int>(K_b);
  for (std::size_t i = 0; i < noise.size(); ++i) {
    const std::string sp = join_pointer("/noise", i);
    if (!noise[i].is_array() || noise[i].size() != 4) {
      throw ConfigError("expected four edge records (bottom, top, left, right)", sp);
    }
    std::array<EdgeAmplitudes, 4> edges;
    for (std::size_t e = 0; e < 4; ++e) edges[e] = parse_edge(noise[i][e], join_pointer(sp, e));
    plan.noise.species.push_back(std::move(edges));
  }

  // experiment
  const Node exp = root.child("experiment");
  exp.allow_only({"epsilons", "paths", "seed", "workers", "threshold_kappa", "averaging",
                  "constants"});
  plan.epsilons = number_list(exp.array("epsilons"), exp.at("epsilons"));
  if (plan.epsilons.empty()) {
    throw ConfigError("epsilons must list at least one value", exp.at("epsilons"));
  }
  for (std::size_t i = 0; i < plan.epsilons.size(); ++i) {
    if (!(plan.epsilons[i] > 0 && plan.epsilons[i] < 1)) {
      throw ConfigError("epsilon must lie in (0, 1)", join_pointer(exp.at("epsilons"), i));
    }
  }
  const long long paths = exp.integer("paths", 32);
  if (paths < 1) throw ConfigError("paths must be positive", exp.at("paths"));
  plan.paths = static_cast<int>(paths);
  const long long seed = exp.integer("seed", 0);
  if (seed < 0) throw ConfigError("seed must be non-negative", exp.at("seed"));
  plan.seed = static_cast<std::uint64_t>(seed);
  const long long workers = exp.integer("workers", 1);
  if (workers < 1 || workers > 1024) throw ConfigError("workers must be in [1, 1024]", exp.at("workers"));
  plan.workers = static_cast<int>(workers);
  plan.threshold_kappa = exp.number("threshold_kappa", 0.02);
  plan.system.epsilon = plan.epsilons.front();

  const Node avg = exp.child("averaging");
  avg.allow_only({"epsilons", "q", "d", "lambda", "T", "paths", "step_ratio"});
  AveragingPlan& a = cfg.averaging;
  if (avg.has("epsilons")) a.epsilons = number_list(avg.raw("epsilons"), avg.at("epsilons"));
  for (std::size_t i = 0; i < a.epsilons.size(); ++i) {
    if (!(a.epsilons[i] > 0)) {
      throw ConfigError("epsilon must be positive", join_pointer(avg.at("epsilons"), i));
    }
  }
  a.q = avg.number("q", a.q);
  a.d = avg.number("d", a.d);
  a.lambda = avg.number("lambda", a.lambda);
  a.T = avg.number("T", a.T);
  a.paths = static_cast<int>(avg.integer("paths", a.paths));
  a.step_ratio = avg.number("step_ratio", a.step_ratio);
  if (!(a.q >= 0)) throw ConfigError("q must be non-negative", avg.at("q"));
  if (!(a.d > 0)) throw ConfigError("d must be positive", avg.at("d"));
  if (!(a.lambda > 0)) throw ConfigError("lambda must be positive", avg.at("lambda"));
  if (!(a.T > 0)) throw ConfigError("T must be positive", avg.at("T"));
  if (a.paths < 1) throw ConfigError("paths must be positive", avg.at("paths"));
  if (!(a.step_ratio > 0)) throw ConfigError("step_ratio must be positive", avg.at("step_ratio"));
  a.seed = plan.seed;
  a.workers = plan.workers;

  const Node consts = exp.child("constants");
  consts.allow_only({"orders", "oracle"});
  if (consts.has("orders")) {
    const Json& orders = consts.array("orders");
    for (std::size_t j = 0; j < orders.size(); ++j) {
      const std::string op = join_pointer(consts.at("orders"), j);
      MultiIndex l = int_list(orders[j], op);
      if (l.size() != static_cast<std::size_t>(n)) throw ConfigError("expected n entries", op);
      for (int li : l) {
        if (li < 0) throw ConfigError("entries must be non-negative", op);
      }
      cfg.constant_orders.push_back(std::move(l));
    }
  } else {
    cfg.constant_orders = default_constant_orders(plan.system.n, plan.system.max_degree());
  }
  cfg.constants_oracle = consts.boolean("oracle", false);

  // output
  const Node out = root.child("output");
  out.allow_only({"directory", "formats", "probes"});
  cfg.output_directory = out.string("directory", cfg.output_directory);
  if (cfg.output_directory.empty()) throw ConfigError("must not be empty", out.at("directory"));
  if (out.has("formats")) {
    cfg.formats.clear();
    const Json& formats = out.array("formats");
    for (std::size_t j = 0; j < formats.size(); ++j) {
      const std::string fp = join_pointer(out.at("formats"), j);
      if (!formats[j].is_string() || formats[j].get<std::string>() != "csv") {
        throw ConfigError("the only supported format is \"csv\"", fp);
      }
      cfg.formats.push_back("csv");
    }
  }
  if (out.has("probes")) {
    const Json& probes = out.array("probes");
    for (std::size_t j = 0; j < probes.size(); ++j) {
      const Node pr(probes[j], join_pointer(out.at("probes"), j));
      pr.allow_only({"species", "k"});
      const long long s = pr.integer("species");
      if (s < 0 || s >= n) throw ConfigError("species out of range", pr.at("species"));
      pr.require("k");
      const ModeIndex k = mode_index(pr.raw("k"), pr.at("k"));
      if (k.k1 > K || k.k2 > K) throw ConfigError("mode outside the retained band", pr.at("k"));
      cfg.probes.emplace_back(static_cast<int>(s), k);
    }
  }

  // semantic checks that need the assembled objects
  try {
    plan.system.validate();
    plan.noise.validate(plan.system.max_degree());
    plan.validate();
  } catch (const ConfigError& e) {
    if (!e.pointer().empty()) throw;
    throw ConfigError(e.what(), "/");
  }

  // resolved document: every default made explicit
  Json resolved;
  Json reactions_doc = Json::array();
  for (const auto& f : plan.system.reactions) {
    Json terms = Json::array();
    for (const auto& [powers, coeff] : f.terms()) {
      terms.push_back({{"powers", powers}, {"coeff", coeff}});
    }
    reactions_doc.push_back(std::move(terms));
  }
  Json means = Json::array();
  Json modes = Json::array();
  for (int i = 0; i < plan.system.n; ++i) {
    means.push_back(plan.u0[i](0, 0));
    for (int k1 = 0; k1 <= K; ++k1) {
      for (int k2 = 0; k2 <= K; ++k2) {
        if ((k1 || k2) && plan.u0[i](k1, k2) != 0.0) {
          modes.push_back({{"species", i}, {"k", {k1, k2}}, {"value", plan.u0[i](k1, k2)}});
        }
      }
    }
  }
  resolved["system"] = {{"n", plan.system.n},
                        {"d", plan.system.diffusion},
                        {"regime", plan.system.regime == Regime::case1 ? "case1" : "case2"},
                        {"reactions", reactions_doc},
                        {"u0", {{"mean", means}, {"modes", modes}}},
                        {"positivity_stop", plan.positivity_stop}};
  Json noise_doc = Json::array();
  for (const auto& edges : plan.noise.species) {
    Json row = Json::array();
    for (const auto& e : edges) row.push_back(edge_document(e));
    noise_doc.push_back(std::move(row));
  }
  resolved["noise"] = noise_doc;
  resolved["numerics"] = {{"K", plan.K},
                          {"grid_n", plan.grid_n},
                          {"K_b", plan.noise.boundary_cutoff},
                          {"h", plan.h},
                          {"h_per_eps2", plan.h_per_eps2},
                          {"T0", plan.T0},
                          {"kappa", plan.kappa},
                          {"p", plan.p},
                          {"save_interval", plan.save_interval},
                          {"self_convergence", plan.self_convergence},
                          {"self_convergence_paths", plan.self_convergence_paths},
                          {"tail_tol", plan.tail_tol},
                          {"limit_constants",
                           plan.limit_constants == ConstantScope::band ? "band" : "series"}};
  Json orders = Json::array();
  for (const auto& l : cfg.constant_orders) orders.push_back(l);
  resolved["experiment"] = {
      {"epsilons", plan.epsilons},
      {"paths", plan.paths},
      {"seed", plan.seed},
      {"workers", plan.workers},
      {"threshold_kappa", plan.threshold_kappa},
      {"averaging",
       {{"epsilons", a.epsilons},
        {"q", a.q},
        {"d", a.d},
        {"lambda", a.lambda},
        {"T", a.T},
        {"paths", a.paths},
        {"step_ratio", a.step_ratio}}},
      {"constants", {{"orders", orders}, {"oracle", cfg.constants_oracle}}}};
  Json probes_doc = Json::array();
  for (const auto& [s, k] : cfg.probes) probes_doc.push_back({{"species", s}, {"k", {k.k1, k.k2}}});
  resolved["output"] = {{"directory", cfg.output_directory},
                        {"formats", cfg.formats},
                        {"probes", probes_doc}};
  cfg.document = std::move(resolved);
  return cfg;
}

Json load_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file \"" + path + "\"");
  std::stringstream buf;
  buf << in.rdbuf();
  try {
    return Json::parse(buf.str());
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(std::string("invalid JSON in \"") + path + "\": " + e.what());
  }
}

void override_field(Json& doc, const std::string& pointer, const Json& value) {
  try {
    doc[nlohmann::json_pointer<std::string>(pointer)] = value;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("cannot set field: ") + e.what(), pointer);
  }
}

}  // namespace fastdiff
