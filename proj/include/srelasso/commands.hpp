#pragma once

#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "srelasso/config.hpp"
#include "srelasso/csv_io.hpp"
#include "srelasso/debias.hpp"
#include "srelasso/dgp.hpp"
#include "srelasso/error.hpp"
#include "srelasso/inference.hpp"
#include "srelasso/penalty.hpp"

namespace srelasso {

/// Command-line values that take precedence over the config file.
struct CliOverrides {
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
  std::optional<std::string> out;
  std::optional<double> alpha;
  std::optional<double> c;
  std::optional<int> block_size;
  std::optional<int> draws;
  std::optional<std::string> method;
  std::optional<std::string> penalty;
  std::optional<std::string> scenario;
  std::optional<double> rho;
  std::optional<int> reps;
  std::optional<std::vector<int>> block_grid;
};

/// --alpha and --draws address the inference settings for `infer` and the
/// penalty settings for every other command.
inline void apply_overrides(RunConfig& cfg, const CliOverrides& o, const std::string& command) {
  const bool infer = command == "infer" ||
                     (command == "simulate" && cfg.simulation.scenario == ScenarioKind::Inference && !o.scenario) ||
                     (command == "simulate" && o.scenario && *o.scenario == "infer");
  if (o.seed) cfg.seed = *o.seed;
  if (o.threads) cfg.threads = *o.threads;
  if (o.out) cfg.output_dir = *o.out;
  if (o.alpha) (infer ? cfg.inference.alpha : cfg.penalty.alpha) = *o.alpha;
  if (o.draws) (infer ? cfg.inference.draws : cfg.penalty.draws) = *o.draws;
  if (o.c) cfg.penalty.c = *o.c;
  if (o.block_size) cfg.penalty.block_size = *o.block_size;
  if (o.method) {
    try {
      cfg.inference.method = parse_debias_method(*o.method);
    } catch (const ConfigError& e) {
      throw ConfigError(std::string("--method: ") + e.what());
    }
  }
  if (o.penalty) {
    if (*o.penalty == "joint") {
      cfg.penalty.scope = PenaltyScope::Joint;
      cfg.penalty.method = PenaltyMethod::Bootstrap;
    } else if (*o.penalty == "per-equation") {
      cfg.penalty.scope = PenaltyScope::PerEquation;
      cfg.penalty.method = PenaltyMethod::Bootstrap;
    } else if (*o.penalty == "gaussian") {
      cfg.penalty.method = PenaltyMethod::GaussianCanonical;
    } else {
      throw ConfigError("--penalty: expected joint, per-equation or gaussian");
    }
  }
  if (o.scenario) {
    try {
      cfg.simulation.scenario = parse_scenario(*o.scenario);
    } catch (const ConfigError& e) {
      throw ConfigError(std::string("--scenario: ") + e.what());
    }
  }
  if (o.rho) cfg.simulation.rho = *o.rho;
  if (o.reps) cfg.simulation.reps = *o.reps;
  if (o.block_grid) {
    cfg.simulation.block_grid = *o.block_grid;
    cfg.scan_grid = *o.block_grid;
  }
  validate(cfg);
}

namespace detail {

inline std::filesystem::path output_path(const RunConfig& cfg, const std::string& file) {
  std::filesystem::path dir(cfg.output_dir);
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw DataError("output.dir: cannot create '" + cfg.output_dir + "': " + ec.message());
  return dir / file;
}

inline std::ofstream open_output(const RunConfig& cfg, const std::string& file) {
  const auto path = output_path(cfg, file);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  return out;
}

inline PanelDataset load_data(const RunConfig& cfg) {
  if (!cfg.has_data) throw ConfigError("data.path: missing required field (no data section)");
  return load_panel_csv(cfg.data_path, cfg.schema);
}

inline PenaltyOptions penalty_options(const RunConfig& cfg) {
  PenaltyOptions o = cfg.penalty;
  o.seed = cfg.seed;
  o.threads = cfg.threads;
  return o;
}

inline std::string f4(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}

}  // namespace detail

/// Plan as JSON: penalty levels, loadings with names, and run metadata.
inline nlohmann::ordered_json plan_to_json(const PenaltyPlan& plan, const PanelDataset& data, const PilotStage* pilot) {
  nlohmann::ordered_json j;
  j["schema_version"] = 1;
  j["scope"] = to_string(plan.scope);
  j["method"] = to_string(plan.method);
  j["alpha"] = plan.alpha;
  j["c"] = plan.c;
  j["lambda_joint"] = plan.lambda_joint;
  j["lambda_equation"] = plan.lambda_equation;
  j["block_size"] = plan.scheme.block_size;
  j["block_count"] = plan.scheme.block_count;
  j["draws"] = plan.draws;
  j["seed"] = plan.seed;
  j["hac_bandwidth"] = plan.loadings.bandwidth;
  j["loading_floor"] = plan.loadings.floor;
  if (pilot) {
    j["refinement_passes"] = pilot->refinement_passes;
    j["refinement_converged"] = pilot->refinement_converged;
  }
  j["degenerate"] = plan.degenerate;
  auto eqs = nlohmann::ordered_json::array();
  for (int e = 0; e < data.num_equations(); ++e) {
    nlohmann::ordered_json q;
    q["response"] = data.response_name(e);
    std::vector<std::string> names;
    for (int k = 0; k < data.num_covariates(e); ++k) names.push_back(data.covariate_name(e, k));
    q["covariates"] = names;
    const auto& l = plan.loadings.values[static_cast<std::size_t>(e)];
    q["loadings"] = std::vector<double>(l.data(), l.data() + l.size());
    std::vector<bool> fl;
    for (char f : plan.loadings.floored[static_cast<std::size_t>(e)]) fl.push_back(f != 0);
    q["floored"] = fl;
    eqs.push_back(std::move(q));
  }
  j["equations"] = std::move(eqs);
  j["diagnostics"] = plan.diagnostics;
  return j;
}

/// Reads a plan written by `tune`, checking it against the dataset's equations.
inline PenaltyPlan plan_from_json(const nlohmann::json& j, const PanelDataset& data) {
  try {
    if (j.at("schema_version").get<int>() != 1) throw ConfigError("estimate.plan: unsupported schema_version");
    PenaltyPlan plan;
    const auto scope = j.at("scope").get<std::string>();
    plan.scope = scope == "joint" ? PenaltyScope::Joint : PenaltyScope::PerEquation;
    plan.method = j.at("method").get<std::string>() == "bootstrap" ? PenaltyMethod::Bootstrap
                                                                   : PenaltyMethod::GaussianCanonical;
    plan.alpha = j.at("alpha").get<double>();
    plan.c = j.at("c").get<double>();
    plan.lambda_joint = j.at("lambda_joint").get<double>();
    plan.lambda_equation = j.at("lambda_equation").get<std::vector<double>>();
    plan.scheme = BlockScheme::make(data.n(), j.at("block_size").get<int>());
    plan.draws = j.at("draws").get<int>();
    plan.seed = j.at("seed").get<std::uint64_t>();
    plan.loadings.bandwidth = j.at("hac_bandwidth").get<int>();
    plan.loadings.floor = j.at("loading_floor").get<double>();
    const auto& eqs = j.at("equations");
    if (static_cast<int>(eqs.size()) != data.num_equations() ||
        static_cast<int>(plan.lambda_equation.size()) != data.num_equations())
      throw DataError("estimate.plan: equation count differs from the dataset");
    for (int e = 0; e < data.num_equations(); ++e) {
      const auto& q = eqs[static_cast<std::size_t>(e)];
      if (q.at("response").get<std::string>() != data.response_name(e))
        throw DataError("estimate.plan: equation " + std::to_string(e) + " response differs from the dataset");
      const auto l = q.at("loadings").get<std::vector<double>>();
      if (static_cast<int>(l.size()) != data.num_covariates(e))
        throw DataError("estimate.plan: loading count of equation " + data.response_name(e) + " differs");
      plan.loadings.values.emplace_back(Eigen::Map<const Eigen::VectorXd>(l.data(), static_cast<Eigen::Index>(l.size())));
      std::vector<char> fl;
      for (bool b : q.at("floored").get<std::vector<bool>>()) fl.push_back(b ? 1 : 0);
      plan.loadings.floored.push_back(std::move(fl));
    }
    return plan;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("estimate.plan: malformed plan file: ") + e.what());
  }
}

inline void write_plan_summary(std::ostream& out, const PenaltyPlan& plan, const PanelDataset& data,
                               const PilotStage* pilot) {
  out << "penalty " << to_string(plan.scope) << " (" << to_string(plan.method) << "), alpha " << detail::f4(plan.alpha)
      << ", c " << detail::f4(plan.c) << '\n';
  out << "n " << data.n() << ", equations " << data.num_equations() << ", block size " << plan.scheme.block_size
      << " (" << plan.scheme.block_count << " blocks), draws " << plan.draws << ", seed " << plan.seed << '\n';
  out << "lambda joint " << detail::f4(plan.lambda_joint) << '\n';
  for (int e = 0; e < data.num_equations(); ++e) {
    const auto& l = plan.loadings.values[static_cast<std::size_t>(e)];
    out << "  " << data.response_name(e) << ": lambda " << detail::f4(plan.lambda_equation[static_cast<std::size_t>(e)])
        << ", loadings min " << detail::f4(l.minCoeff()) << " mean " << detail::f4(l.mean()) << " max "
        << detail::f4(l.maxCoeff()) << '\n';
  }
  out << "HAC bandwidth " << plan.loadings.bandwidth << ", floored loadings " << plan.loadings.floored_count() << '\n';
  if (pilot)
    out << "loading refinement passes " << pilot->refinement_passes
        << (pilot->refinement_converged ? " (converged)" : " (not converged)") << '\n';
  for (const auto& d : plan.diagnostics) out << "diagnostic: " << d << '\n';
}

/// tune: plan.json and summary.txt. Returns the plan.
inline PenaltyPlan cmd_tune(const RunConfig& cfg, std::ostream& log = std::cerr,
                        std::ostream& out = std::cout) {
  const PanelDataset data = detail::load_data(cfg);
  log << "tune: n=" << data.n() << ", equations=" << data.num_equations() << '\n';
  const TuneResult r = run_pilot_then_tune(data, detail::penalty_options(cfg));
  {
    auto file = detail::open_output(cfg, "plan.json");
    file << plan_to_json(r.plan, data, &r.pilot).dump(2) << '\n';
  }
  auto summary = detail::open_output(cfg, "summary.txt");
  write_plan_summary(summary, r.plan, data, &r.pilot);
  write_plan_summary(out, r.plan, data, &r.pilot);
  return r.plan;
}

/// estimate: fits.csv (coefficients) and equations.csv (per-equation summary).
inline std::vector<LassoFit> cmd_estimate(const RunConfig& cfg, std::ostream& log = std::cerr,
                        std::ostream& out = std::cout) {
  const PanelDataset data = detail::load_data(cfg);
  PenaltyPlan plan;
  if (!cfg.plan_path.empty()) {
    std::ifstream in(cfg.plan_path);
    if (!in) throw ConfigError("estimate.plan: cannot open '" + cfg.plan_path + "'");
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
      throw ConfigError(std::string("estimate.plan: invalid JSON: ") + e.what());
    }
    plan = plan_from_json(j, data);
    log << "estimate: using plan " << cfg.plan_path << '\n';
  } else {
    plan = run_pilot_then_tune(data, detail::penalty_options(cfg)).plan;
  }
  std::vector<EquationDesign> designs;
  for (int e = 0; e < data.num_equations(); ++e) designs.push_back(make_design(data, e));
  const auto fits = fit_equations(designs, plan, cfg.estimate_post_lasso, cfg.penalty.solver, cfg.threads);

  auto fo = detail::open_output(cfg, "fits.csv");
  fo << "equation,covariate,coefficient,selected\n";
  auto eo = detail::open_output(cfg, "equations.csv");
  eo << "equation,lambda,intercept,support_size,prediction_norm,euclidean_norm,objective,iterations,converged\n";
  for (int e = 0; e < data.num_equations(); ++e) {
    const auto& f = fits[static_cast<std::size_t>(e)];
    const std::string name = data.response_name(e);
    for (int k = 0; k < data.num_covariates(e); ++k)
      fo << name << ',' << data.covariate_name(e, k) << ',' << format_double(f.coef[k]) << ','
         << (f.coef[k] != 0.0 ? 1 : 0) << '\n';
    eo << name << ',' << format_double(plan.lambda(e)) << ',' << format_double(f.intercept) << ','
       << f.coef.support().size() << ',' << format_double(prediction_norm(f.coef, data)) << ','
       << format_double(euclidean_norm(f.coef)) << ',' << format_double(f.objective) << ',' << f.iterations << ','
       << (f.converged ? 1 : 0) << '\n';
    out << name << ": lambda " << detail::f4(plan.lambda(e)) << ", " << f.coef.support().size() << " of "
        << data.num_covariates(e) << " selected\n";
  }
  return fits;
}

/// infer: report.csv and report.md.
inline ConfidenceReport cmd_infer(const RunConfig& cfg, std::ostream& log = std::cerr,
                        std::ostream& out = std::cout) {
  const PanelDataset data = detail::load_data(cfg);
  auto [targets, nulls] = resolve_targets(cfg.inference.targets, data);
  const auto tuned = run_pilot_then_tune(data, detail::penalty_options(cfg));
  DebiasOptions dopt;
  dopt.method = cfg.inference.method;
  dopt.post_lasso = cfg.inference.post_lasso;
  dopt.instrument_alpha = cfg.inference.instrument_alpha;
  dopt.instrument_c = cfg.inference.instrument_c;
  dopt.hac = cfg.penalty.hac;
  dopt.solver = cfg.penalty.solver;
  dopt.threads = cfg.threads;
  log << "infer: " << targets.size() << " targets, method " << to_string(dopt.method) << '\n';
  AlgorithmResult alg;
  try {
    alg = run_algorithm(data, targets, tuned.plan, dopt);
  } catch (const NumericalError& e) {
    throw NumericalError(std::string("inference: ") + e.what());
  }
  const BootCriticalValues crit =
      cfg.inference.bootstrap == PivotBootstrap::Zeta
          ? bootstrap_pivots(alg.estimates, tuned.plan.scheme, cfg.inference.draws, cfg.inference.alpha, cfg.seed,
                             cfg.threads)
          : residual_bootstrap_pivots(data, alg, tuned.plan, dopt, cfg.inference.draws, cfg.inference.alpha, cfg.seed);
  const ConfidenceReport rep = build_report(alg.estimates, crit, cfg.inference.alpha, nulls, &data);
  {
    auto file = detail::open_output(cfg, "report.csv");
    write_report_csv(file, rep);
  }
  auto md = detail::open_output(cfg, "report.md");
  write_report_markdown(md, rep);
  write_report_markdown(out, rep);
  return rep;
}

inline ExperimentConfig experiment_config(const RunConfig& cfg) {
  const auto& s = cfg.simulation;
  ExperimentConfig e;
  e.kind = s.scenario;
  e.iid.J = e.dep.J = s.J;
  e.iid.K = e.dep.K = s.K;
  e.iid.n = e.dep.n = s.n;
  e.dep.rho = s.rho;
  e.dep.truncation = s.truncation;
  e.alpha0_law = s.alpha0_law;
  e.freeze_ginibre = s.freeze_ginibre;
  e.reps = s.reps;
  e.seed = cfg.seed;
  e.penalty = cfg.penalty;
  e.block_grid = s.block_grid;
  e.post_lasso = s.post_lasso;
  e.debias.method = cfg.inference.method;
  e.debias.post_lasso = cfg.inference.post_lasso;
  e.debias.instrument_alpha = cfg.inference.instrument_alpha;
  e.debias.instrument_c = cfg.inference.instrument_c;
  e.debias.hac = cfg.penalty.hac;
  e.test_alpha = cfg.inference.alpha;
  e.pivot_draws = cfg.inference.draws;
  e.threads = cfg.threads;
  return e;
}

/// simulate: results.csv; replications are journaled to journal.csv so an
/// interrupted run resumes when simulation.resume is set.
inline ExperimentResult cmd_simulate(const RunConfig& cfg, std::ostream& log = std::cerr,
                        std::ostream& out = std::cout) {
  ExperimentConfig e = experiment_config(cfg);
  const auto journal = detail::output_path(cfg, "journal.csv");
  if (!cfg.simulation.resume) std::filesystem::remove(journal);
  e.journal = journal.string();
  log << "simulate: scenario " << to_string(e.kind) << ", reps " << e.reps << ", seed " << e.seed << '\n';
  const auto result = run_experiment(e, [&](int done, int total) {
    log << "\rreplication " << done << '/' << total << std::flush;
    if (done == total) log << '\n';
  });
  auto file = detail::open_output(cfg, "results.csv");
  write_results_csv(file, result.rows);
  write_results_csv(out, result.rows);
  return result;
}

/// scan-block-size: scan.csv with the hold-out criterion per block size.
inline BlockScanResult cmd_scan_block_size(const RunConfig& cfg, std::ostream& log = std::cerr,
                        std::ostream& out = std::cout) {
  const PanelDataset data = detail::load_data(cfg);
  const auto r = scan_block_size(data, detail::penalty_options(cfg), cfg.scan_grid, std::nullopt, cfg.estimate_post_lasso);
  for (const auto& w : r.warnings) log << "scan: " << w << '\n';
  auto file = detail::open_output(cfg, "scan.csv");
  file << "b_n,criterion,selected\n";
  for (std::size_t i = 0; i < r.block_sizes.size(); ++i)
    file << r.block_sizes[i] << ',' << format_double(r.criterion[i]) << ','
        << (r.block_sizes[i] == r.best_block_size ? 1 : 0) << '\n';
  out << "b_n | holdout RMSE\n";
  for (std::size_t i = 0; i < r.block_sizes.size(); ++i)
    out << r.block_sizes[i] << " | " << detail::f4(r.criterion[i]) << '\n';
  out << "selected b_n " << r.best_block_size << '\n';
  return r;
}

/// Dispatches a command name; unknown names are configuration errors.
inline void run_command(const std::string& command, const RunConfig& cfg, std::ostream& log = std::cerr,
                        std::ostream& out = std::cout) {
  if (command == "tune") cmd_tune(cfg, log, out);
  else if (command == "estimate") cmd_estimate(cfg, log, out);
  else if (command == "infer") cmd_infer(cfg, log, out);
  else if (command == "simulate") cmd_simulate(cfg, log, out);
  else if (command == "scan-block-size") cmd_scan_block_size(cfg, log, out);
  else throw ConfigError("unknown command '" + command + "'");
}

}  // namespace srelasso
