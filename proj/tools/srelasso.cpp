#include <CLI11.hpp>

#include <iostream>

#include "srelasso/commands.hpp"

namespace {

template <class T>
void add_override(CLI::App& app, const std::string& flag, std::optional<T>& slot, const std::string& help) {
  app.add_option_function<T>(flag, [&slot](const T& v) { slot = v; }, help);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Joint LASSO estimation and bootstrap inference for systems of regression equations"};
  app.require_subcommand(1);

  std::string config_path;
  srelasso::CliOverrides ov;
  app.add_option("--config", config_path, "JSON run configuration (schema_version 1)")->required();
  add_override(app, "--seed", ov.seed, "master seed");
  add_override(app, "--threads", ov.threads, "worker threads (results do not depend on it)");
  add_override(app, "--out", ov.out, "output directory");
  add_override(app, "--alpha", ov.alpha, "level: inference alpha for infer, penalty alpha otherwise");
  add_override(app, "--c", ov.c, "penalty slack constant c");
  add_override(app, "--b-n", ov.block_size, "bootstrap block size");
  add_override(app, "--draws", ov.draws, "bootstrap draws: pivot draws for infer, penalty draws otherwise");
  app.add_option_function<std::string>("--method", [&](const std::string& v) { ov.method = v; },
                                       "de-biasing method")
      ->check(CLI::IsMember({"ls-iv", "lad-iv", "double-ls", "double-lad"}));
  app.add_option_function<std::string>("--penalty", [&](const std::string& v) { ov.penalty = v; },
                                       "penalty rule")
      ->check(CLI::IsMember({"joint", "per-equation", "gaussian"}));

  const std::vector<std::pair<std::string, std::string>> commands = {
      {"tune", "select the penalty level and loadings (plan.json, summary.txt)"},
      {"estimate", "fit every equation (fits.csv, equations.csv)"},
      {"infer", "de-biased estimates, intervals and tests (report.csv, report.md)"},
      {"simulate", "Monte Carlo experiment (results.csv)"},
      {"scan-block-size", "hold-out scan over block sizes (scan.csv)"},
  };
  for (const auto& [name, help] : commands) app.add_subcommand(name, help)->fallthrough();

  auto* sim = app.get_subcommand("simulate");
  sim->add_option_function<std::string>("--scenario", [&](const std::string& v) { ov.scenario = v; }, "iid, dep or infer")
      ->check(CLI::IsMember({"iid", "dep", "infer"}));
  add_override(*sim, "--rho", ov.rho, "spectral radius of the dependence filters");
  add_override(*sim, "--reps", ov.reps, "replications");
  add_override(*sim, "--block-grid", ov.block_grid, "block sizes, e.g. 2,4,8");
  app.get_subcommand("scan-block-size")->add_option_function<std::vector<int>>(
      "--block-grid", [&](const std::vector<int>& v) { ov.block_grid = v; }, "block sizes to scan")->delimiter(',');
  sim->get_option("--block-grid")->delimiter(',');

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  const std::string command = app.get_subcommands().front()->get_name();
  try {
    srelasso::RunConfig cfg = srelasso::load_config(config_path);
    srelasso::apply_overrides(cfg, ov, command);
    srelasso::run_command(command, cfg);
  } catch (const srelasso::Error& e) {
    std::cerr << "srelasso " << command << ": " << e.what() << '\n';
    return e.exit_code();
  } catch (const std::exception& e) {
    std::cerr << "srelasso " << command << ": " << e.what() << '\n';
    return 1;
  }
  return 0;
}
