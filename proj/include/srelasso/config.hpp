#pragma once

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <string>
#include <variant>
#include <vector>

#include "srelasso/csv_io.hpp"
#include "srelasso/debias.hpp"
#include "srelasso/dgp.hpp"
#include "srelasso/error.hpp"
#include "srelasso/penalty.hpp"

namespace srelasso {

/// A target named by response/covariate names or by 0-based positions.
struct TargetSpec {
  std::variant<int, std::string> equation;
  std::variant<int, std::string> covariate;
  double null_value = 0.0;
};

enum class PivotBootstrap { Zeta, Residual };

struct InferenceConfig {
  DebiasMethod method = DebiasMethod::LsIv;
  double alpha = 0.05;
  int draws = 1000;
  std::vector<TargetSpec> targets;
  bool post_lasso = true;
  PivotBootstrap bootstrap = PivotBootstrap::Zeta;
  double instrument_alpha = 0.1;
  double instrument_c = 1.1;
};

struct SimulationConfig {
  ScenarioKind scenario = ScenarioKind::Iid;
  int J = 50, K = 50, n = 100;
  double rho = 0.1;
  int reps = 1;
  Alpha0Law alpha0_law = Alpha0Law::Zero;
  std::vector<int> block_grid;
  bool freeze_ginibre = false;
  int truncation = 1000;
  bool resume = false;
  bool post_lasso = true;
};

/// Parsed and validated run configuration (schema_version 1).
struct RunConfig {
  bool has_data = false;
  std::string data_path;
  PanelSchema schema;
  PenaltyOptions penalty;
  bool estimate_post_lasso = true;
  std::string plan_path;  // estimate: reuse a plan written by tune
  InferenceConfig inference;
  std::vector<int> scan_grid{2, 4, 6, 8, 10, 12};
  SimulationConfig simulation;
  std::uint64_t seed = 0;
  int threads = 1;
  std::string output_dir = "out";
};

namespace detail {

using nlohmann::json;

/// Reads fields of one JSON object, remembering which keys were consumed so
/// leftovers can be reported as unknown.
class Fields {
 public:
  Fields(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(where() + ": expected an object");
  }
  ~Fields() = default;

  std::string where(const std::string& key = {}) const {
    if (key.empty()) return path_.empty() ? "config" : path_;
    return path_.empty() ? key : path_ + "." + key;
  }
  bool has(const std::string& key) const { return j_.contains(key); }
  const json& raw(const std::string& key) {
    used_.insert(key);
    return j_.at(key);
  }

  template <class T>
  void get(const std::string& key, T& out) {
    if (!has(key)) return;
    out = as<T>(raw(key), where(key));
  }
  template <class T>
  T require(const std::string& key) {
    if (!has(key)) throw ConfigError(where(key) + ": missing required field");
    return as<T>(raw(key), where(key));
  }
  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it)
      if (!used_.count(it.key())) throw ConfigError(where(it.key()) + ": unknown key");
  }

  template <class T>
  static T as(const json& v, const std::string& where) {
    if constexpr (std::is_same_v<T, bool>) {
      if (!v.is_boolean()) throw ConfigError(where + ": expected true or false");
      return v.get<bool>();
    } else if constexpr (std::is_integral_v<T>) {
      if (!v.is_number_integer()) throw ConfigError(where + ": expected an integer");
      if constexpr (std::is_unsigned_v<T>) {
        if (v.is_number_unsigned()) return v.get<T>();
        if (v.get<long long>() < 0) throw ConfigError(where + ": must be non-negative");
      }
      return v.get<T>();
    } else if constexpr (std::is_floating_point_v<T>) {
      if (!v.is_number()) throw ConfigError(where + ": expected a number");
      return v.get<T>();
    } else if constexpr (std::is_same_v<T, std::string>) {
      if (!v.is_string()) throw ConfigError(where + ": expected a string");
      return v.get<std::string>();
    } else if constexpr (std::is_same_v<T, std::vector<int>>) {
      if (!v.is_array()) throw ConfigError(where + ": expected an array of integers");
      std::vector<int> out;
      for (std::size_t i = 0; i < v.size(); ++i) out.push_back(as<int>(v[i], where + "[" + std::to_string(i) + "]"));
      return out;
    } else if constexpr (std::is_same_v<T, std::vector<std::string>>) {
      if (!v.is_array()) throw ConfigError(where + ": expected an array of strings");
      std::vector<std::string> out;
      for (std::size_t i = 0; i < v.size(); ++i)
        out.push_back(as<std::string>(v[i], where + "[" + std::to_string(i) + "]"));
      return out;
    } else {
      static_assert(sizeof(T) == 0, "unsupported config field type");
    }
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> used_;
};

inline std::variant<int, std::string> name_or_index(const json& v, const std::string& where) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_number_integer() && v.get<long long>() >= 0) return v.get<int>();
  throw ConfigError(where + ": expected a name or a non-negative index");
}

template <class Fn>
void wrap_value_error(const std::string& where, Fn&& fn) {
  try {
    fn();
  } catch (const ConfigError& e) {
    throw ConfigError(where + ": " + e.what());
  }
}

inline void parse_data(Fields& root, RunConfig& cfg) {
  if (!root.has("data")) return;
  Fields f(root.raw("data"), "data");
  cfg.has_data = true;
  cfg.data_path = f.require<std::string>("path");
  if (f.has("lags")) {
    const auto& lags = f.raw("lags");
    if (!lags.is_array()) throw ConfigError("data.lags: expected an array");
    for (std::size_t i = 0; i < lags.size(); ++i) {
      Fields l(lags[i], "data.lags[" + std::to_string(i) + "]");
      LagDirective d;
      d.column = l.require<std::string>("column");
      d.order = l.require<int>("order");
      if (d.order < 1) throw ConfigError(l.where("order") + ": must be >= 1");
      l.finish();
      cfg.schema.lags.push_back(d);
    }
  }
  const auto& eqs = f.raw("equations");
  if (!eqs.is_array() || eqs.empty()) throw ConfigError("data.equations: expected a non-empty array");
  for (std::size_t i = 0; i < eqs.size(); ++i) {
    Fields e(eqs[i], "data.equations[" + std::to_string(i) + "]");
    EquationSchema s;
    s.response = e.require<std::string>("response");
    s.covariates = e.require<std::vector<std::string>>("covariates");
    if (s.covariates.empty()) throw ConfigError(e.where("covariates") + ": must not be empty");
    e.get("intercept", s.intercept);
    e.finish();
    cfg.schema.equations.push_back(std::move(s));
  }
  f.finish();
}

inline void parse_penalty(Fields& root, RunConfig& cfg) {
  if (!root.has("penalty")) return;
  Fields f(root.raw("penalty"), "penalty");
  auto& p = cfg.penalty;
  if (f.has("scope")) {
    const auto s = f.require<std::string>("scope");
    if (s == "joint") p.scope = PenaltyScope::Joint;
    else if (s == "per-equation") p.scope = PenaltyScope::PerEquation;
    else throw ConfigError("penalty.scope: expected joint or per-equation");
  }
  if (f.has("method")) {
    const auto s = f.require<std::string>("method");
    if (s == "bootstrap") p.method = PenaltyMethod::Bootstrap;
    else if (s == "gaussian") p.method = PenaltyMethod::GaussianCanonical;
    else throw ConfigError("penalty.method: expected bootstrap or gaussian");
  }
  f.get("alpha", p.alpha);
  f.get("c", p.c);
  f.get("draws", p.draws);
  f.get("block_size", p.block_size);
  f.get("hac_bandwidth", p.hac.bandwidth);
  f.get("max_refinements", p.max_refinements);
  f.finish();
}

inline void parse_inference(Fields& root, RunConfig& cfg) {
  if (!root.has("inference")) return;
  Fields f(root.raw("inference"), "inference");
  auto& inf = cfg.inference;
  if (f.has("method")) wrap_value_error("inference.method", [&] { inf.method = parse_debias_method(f.require<std::string>("method")); });
  f.get("alpha", inf.alpha);
  f.get("draws", inf.draws);
  f.get("post_lasso", inf.post_lasso);
  f.get("instrument_alpha", inf.instrument_alpha);
  f.get("instrument_c", inf.instrument_c);
  if (f.has("bootstrap")) {
    const auto s = f.require<std::string>("bootstrap");
    if (s == "zeta") inf.bootstrap = PivotBootstrap::Zeta;
    else if (s == "residual") inf.bootstrap = PivotBootstrap::Residual;
    else throw ConfigError("inference.bootstrap: expected zeta or residual");
  }
  if (f.has("targets")) {
    const auto& ts = f.raw("targets");
    if (!ts.is_array()) throw ConfigError("inference.targets: expected an array");
    for (std::size_t i = 0; i < ts.size(); ++i) {
      const std::string at = "inference.targets[" + std::to_string(i) + "]";
      Fields t(ts[i], at);
      TargetSpec spec;
      if (!t.has("equation")) throw ConfigError(at + ".equation: missing required field");
      if (!t.has("covariate")) throw ConfigError(at + ".covariate: missing required field");
      spec.equation = name_or_index(t.raw("equation"), at + ".equation");
      spec.covariate = name_or_index(t.raw("covariate"), at + ".covariate");
      t.get("null", spec.null_value);
      t.finish();
      inf.targets.push_back(std::move(spec));
    }
  }
  f.finish();
}

inline void parse_simulation(Fields& root, RunConfig& cfg) {
  if (!root.has("simulation")) return;
  Fields f(root.raw("simulation"), "simulation");
  auto& s = cfg.simulation;
  if (f.has("scenario")) wrap_value_error("simulation.scenario", [&] { s.scenario = parse_scenario(f.require<std::string>("scenario")); });
  f.get("J", s.J);
  f.get("K", s.K);
  f.get("n", s.n);
  f.get("rho", s.rho);
  f.get("reps", s.reps);
  if (f.has("alpha0_law"))
    wrap_value_error("simulation.alpha0_law", [&] { s.alpha0_law = parse_alpha0_law(f.require<std::string>("alpha0_law")); });
  f.get("block_grid", s.block_grid);
  f.get("freeze_ginibre", s.freeze_ginibre);
  f.get("truncation", s.truncation);
  f.get("resume", s.resume);
  f.get("post_lasso", s.post_lasso);
  f.finish();
}

}  // namespace detail

/// Checks ranges that do not depend on the data.
inline void validate(const RunConfig& cfg) {
  const auto& p = cfg.penalty;
  if (!(p.alpha > 0.0 && p.alpha < 1.0)) throw ConfigError("penalty.alpha: must lie in (0, 1)");
  if (p.method == PenaltyMethod::Bootstrap && !(p.c > 1.0)) throw ConfigError("penalty.c: must exceed 1");
  if (!(p.c > 0.0)) throw ConfigError("penalty.c: must be positive");
  if (p.method == PenaltyMethod::Bootstrap && p.draws < 100) throw ConfigError("penalty.draws: at least 100 required");
  if (p.block_size < 1) throw ConfigError("penalty.block_size: must be >= 1");
  if (p.max_refinements < 1) throw ConfigError("penalty.max_refinements: must be >= 1");
  const auto& inf = cfg.inference;
  if (!(inf.alpha > 0.0 && inf.alpha < 1.0)) throw ConfigError("inference.alpha: must lie in (0, 1)");
  if (inf.draws < 100) throw ConfigError("inference.draws: at least 100 required");
  if (!(inf.instrument_alpha > 0.0 && inf.instrument_alpha < 1.0))
    throw ConfigError("inference.instrument_alpha: must lie in (0, 1)");
  if (!(inf.instrument_c > 0.0)) throw ConfigError("inference.instrument_c: must be positive");
  for (int b : cfg.scan_grid)
    if (b < 1) throw ConfigError("scan.grid: block sizes must be >= 1");
  const auto& s = cfg.simulation;
  if (s.J < 1 || s.K < 1) throw ConfigError("simulation.J/K: must be positive");
  if (s.n < 10) throw ConfigError("simulation.n: must be at least 10");
  if (!(s.rho > 0.0)) throw ConfigError("simulation.rho: must be positive");
  if (s.reps < 1) throw ConfigError("simulation.reps: must be >= 1");
  if (s.truncation < 1) throw ConfigError("simulation.truncation: must be >= 1");
  for (int b : s.block_grid)
    if (b < 1) throw ConfigError("simulation.block_grid: block sizes must be >= 1");
  if (cfg.threads < 1) throw ConfigError("threads: must be >= 1");
}

inline RunConfig parse_config(const nlohmann::json& j) {
  detail::Fields root(j, "");
  const int version = root.require<int>("schema_version");
  if (version != 1) throw ConfigError("schema_version: unsupported version " + std::to_string(version));
  RunConfig cfg;
  detail::parse_data(root, cfg);
  detail::parse_penalty(root, cfg);
  if (root.has("estimate")) {
    detail::Fields f(root.raw("estimate"), "estimate");
    f.get("post_lasso", cfg.estimate_post_lasso);
    f.get("plan", cfg.plan_path);
    f.finish();
  }
  detail::parse_inference(root, cfg);
  if (root.has("scan")) {
    detail::Fields f(root.raw("scan"), "scan");
    f.get("grid", cfg.scan_grid);
    if (cfg.scan_grid.empty()) throw ConfigError("scan.grid: must not be empty");
    f.finish();
  }
  detail::parse_simulation(root, cfg);
  root.get("seed", cfg.seed);
  root.get("threads", cfg.threads);
  if (root.has("output")) {
    detail::Fields f(root.raw("output"), "output");
    f.get("dir", cfg.output_dir);
    f.finish();
  }
  root.finish();
  validate(cfg);
  return cfg;
}

inline RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("--config: cannot open '" + path + "'");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("--config: invalid JSON in '" + path + "': " + e.what());
  }
  RunConfig cfg = parse_config(j);
  // Input paths are relative to the config file; the output directory is not.
  const auto base = std::filesystem::path(path).parent_path();
  for (std::string* p : {&cfg.data_path, &cfg.plan_path})
    if (!p->empty() && std::filesystem::path(*p).is_relative()) *p = (base / *p).lexically_normal().string();
  return cfg;
}

/// Resolves target specs against a loaded dataset.
inline std::pair<TargetSet, std::vector<double>> resolve_targets(const std::vector<TargetSpec>& specs,
                                                                  const PanelDataset& data) {
  if (specs.empty()) throw ConfigError("inference.targets: at least one target required");
  std::vector<Target> targets;
  std::vector<double> nulls;
  for (std::size_t i = 0; i < specs.size(); ++i) {
    const std::string at = "inference.targets[" + std::to_string(i) + "]";
    const auto& s = specs[i];
    int j = -1;
    if (const int* idx = std::get_if<int>(&s.equation)) {
      j = *idx;
    } else {
      for (int e = 0; e < data.num_equations(); ++e)
        if (data.response_name(e) == std::get<std::string>(s.equation)) j = e;
    }
    if (j < 0 || j >= data.num_equations()) throw ConfigError(at + ".equation: no such equation");
    int k = -1;
    if (const int* idx = std::get_if<int>(&s.covariate)) {
      k = *idx;
    } else {
      for (int c = 0; c < data.num_covariates(j); ++c)
        if (data.covariate_name(j, c) == std::get<std::string>(s.covariate)) k = c;
    }
    if (k < 0 || k >= data.num_covariates(j)) throw ConfigError(at + ".covariate: not a covariate of that equation");
    targets.push_back({j, k});
    nulls.push_back(s.null_value);
  }
  return {TargetSet(std::move(targets), data), std::move(nulls)};
}

}  // namespace srelasso
