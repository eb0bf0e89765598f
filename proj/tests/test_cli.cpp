#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <sys/wait.h>

#include "srelasso/srelasso.hpp"
#include "support/properties.hpp"

using namespace srelasso;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("srelasso_cli_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

int run_cli(const std::string& args, const fs::path& log) {
  const std::string cmd = std::string(SRELASSO_CLI) + " " + args + " >" + log.string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

void write_file(const fs::path& p, const std::string& text) {
  std::ofstream out(p);
  out << text;
}

std::vector<std::vector<std::string>> read_rows(const fs::path& p) {
  std::ifstream in(p);
  std::vector<std::vector<std::string>> rows;
  std::string line;
  std::getline(in, line);
  while (std::getline(in, line)) {
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string c;
    while (std::getline(ss, c, ',')) cells.push_back(c);
    rows.push_back(std::move(cells));
  }
  return rows;
}

RunConfig toy_config(const fs::path& dir, const std::string& out) {
  auto cfg = load_config(props::write_toy_project(dir).string());
  cfg.output_dir = (dir / out).string();
  return cfg;
}

}  // namespace

TEST(Config, RejectsUnknownKeysWithPath) {
  try {
    parse_config(nlohmann::json::parse(R"({"schema_version": 1, "penalty": {"alpah": 0.1}})"));
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("penalty.alpah"), std::string::npos) << e.what();
    EXPECT_EQ(e.exit_code(), 2);
  }
}

TEST(Config, TypeAndRangeErrorsNameTheField) {
  auto message = [](const char* text) {
    try {
      parse_config(nlohmann::json::parse(text));
    } catch (const ConfigError& e) {
      return std::string(e.what());
    }
    return std::string();
  };
  EXPECT_NE(message(R"({"penalty": {}})").find("schema_version"), std::string::npos);
  EXPECT_NE(message(R"({"schema_version": 2})").find("schema_version"), std::string::npos);
  EXPECT_NE(message(R"({"schema_version": 1, "penalty": {"alpha": "x"}})").find("penalty.alpha"), std::string::npos);
  EXPECT_NE(message(R"({"schema_version": 1, "penalty": {"alpha": 1.5}})").find("alpha"), std::string::npos);
  EXPECT_NE(message(R"({"schema_version": 1, "inference": {"method": "ols"}})").find("method"), std::string::npos);
}

TEST(Config, OverridesRouteAlphaByCommand) {
  RunConfig base = parse_config(nlohmann::json::parse(R"({"schema_version": 1})"));
  CliOverrides o;
  o.alpha = 0.2;
  o.draws = 700;
  RunConfig t = base;
  apply_overrides(t, o, "tune");
  EXPECT_EQ(t.penalty.alpha, 0.2);
  EXPECT_EQ(t.penalty.draws, 700);
  EXPECT_EQ(t.inference.alpha, base.inference.alpha);
  RunConfig i = base;
  apply_overrides(i, o, "infer");
  EXPECT_EQ(i.inference.alpha, 0.2);
  EXPECT_EQ(i.penalty.alpha, base.penalty.alpha);
  o.penalty = "bogus";
  EXPECT_THROW(apply_overrides(t, o, "tune"), ConfigError);
}

TEST(Config, RelativeDataPathFollowsConfigFile) {
  const auto dir = scratch("relpath");
  const auto cfg = load_config(props::write_toy_project(dir).string());
  EXPECT_EQ(fs::path(cfg.data_path), dir / "toy.csv");
  fs::remove_all(dir);
}

TEST(Cli, ExitCodes) {
  const auto dir = scratch("exit");
  const auto config = props::write_toy_project(dir);
  const auto log = dir / "log.txt";
  const std::string out = " --out " + (dir / "out").string();

  EXPECT_EQ(run_cli("--help", log), 0);
  EXPECT_EQ(run_cli("", log), 2);
  EXPECT_EQ(run_cli("tune", log), 2);
  EXPECT_EQ(run_cli("tune --config " + (dir / "missing.json").string(), log), 2);

  write_file(dir / "unknown.json", R"({"schema_version": 1, "dataa": {}})");
  EXPECT_EQ(run_cli("tune --config " + (dir / "unknown.json").string() + out, log), 2);
  EXPECT_NE(props::slurp(log).find("dataa"), std::string::npos);

  write_file(dir / "nodata.json", R"({"schema_version": 1})");
  EXPECT_EQ(run_cli("tune --config " + (dir / "nodata.json").string() + out, log), 2);
  EXPECT_NE(props::slurp(log).find("data.path"), std::string::npos);

  write_file(dir / "badfile.json",
             R"({"schema_version": 1, "data": {"path": "nope.csv", "equations": [{"response": "y1", "covariates": ["x1"]}]}})");
  EXPECT_EQ(run_cli("tune --config " + (dir / "badfile.json").string() + out, log), 3);

  EXPECT_EQ(run_cli("tune --config " + config.string() + " --penalty sideways" + out, log), 2);
  EXPECT_EQ(run_cli("tune --config " + config.string() + " --draws 300" + out, log), 0);
  EXPECT_TRUE(fs::exists(dir / "out" / "plan.json"));
  fs::remove_all(dir);
}

TEST(Cli, EstimateNormsMatchLibrary) {
  const auto dir = scratch("norms");
  const auto cfg = toy_config(dir, "out");
  std::ostringstream sink;
  const auto fits = cmd_estimate(cfg, sink, sink);
  const auto data = load_panel_csv(cfg.data_path, cfg.schema);
  const auto rows = read_rows(dir / "out" / "equations.csv");
  ASSERT_EQ(rows.size(), fits.size());
  for (std::size_t e = 0; e < rows.size(); ++e) {
    EXPECT_EQ(rows[e][0], data.response_name(static_cast<int>(e)));
    EXPECT_NEAR(std::stod(rows[e][4]), prediction_norm(fits[e].coef, data), 1e-12);
    EXPECT_NEAR(std::stod(rows[e][5]), euclidean_norm(fits[e].coef), 1e-12);
    EXPECT_EQ(std::stoul(rows[e][3]), fits[e].coef.support().size());
  }
  int coefs = 0;
  for (int e = 0; e < data.num_equations(); ++e) coefs += data.num_covariates(e);
  EXPECT_EQ(static_cast<int>(read_rows(dir / "out" / "fits.csv").size()), coefs);
  fs::remove_all(dir);
}

TEST(Cli, RerunIsIdempotent) {
  const auto dir = scratch("rerun");
  const auto cfg = toy_config(dir, "out");
  std::ostringstream sink;
  cmd_estimate(cfg, sink, sink);
  const auto first = props::slurp(dir / "out" / "fits.csv") + props::slurp(dir / "out" / "equations.csv");
  cmd_estimate(cfg, sink, sink);
  EXPECT_EQ(first, props::slurp(dir / "out" / "fits.csv") + props::slurp(dir / "out" / "equations.csv"));
  fs::remove_all(dir);
}

TEST(Cli, JointPenaltyDominatesPerEquationMean) {
  const auto dir = scratch("scope");
  auto cfg = toy_config(dir, "joint");
  std::ostringstream sink;
  const auto joint = cmd_tune(cfg, sink, sink);
  CliOverrides o;
  o.penalty = "per-equation";
  o.out = (dir / "per").string();
  apply_overrides(cfg, o, "tune");
  const auto per = cmd_tune(cfg, sink, sink);
  EXPECT_EQ(per.scope, PenaltyScope::PerEquation);
  double mean = 0.0;
  for (double l : per.lambda_equation) mean += l;
  mean /= static_cast<double>(per.lambda_equation.size());
  EXPECT_GE(joint.lambda_joint, mean);
  EXPECT_EQ(joint.lambda_joint, per.lambda_joint);
  EXPECT_EQ(joint.lambda_equation, per.lambda_equation);
  fs::remove_all(dir);
}

TEST(Cli, PlanFileRoundTrip) {
  const auto dir = scratch("plan");
  auto cfg = toy_config(dir, "tuned");
  std::ostringstream sink;
  const auto plan = cmd_tune(cfg, sink, sink);
  cfg.output_dir = (dir / "direct").string();
  cmd_estimate(cfg, sink, sink);
  cfg.output_dir = (dir / "from_plan").string();
  cfg.plan_path = (dir / "tuned" / "plan.json").string();
  cmd_estimate(cfg, sink, sink);
  EXPECT_EQ(props::slurp(dir / "direct" / "fits.csv"), props::slurp(dir / "from_plan" / "fits.csv"));
  EXPECT_EQ(props::slurp(dir / "direct" / "equations.csv"), props::slurp(dir / "from_plan" / "equations.csv"));

  const auto data = load_panel_csv(cfg.data_path, cfg.schema);
  const auto back = plan_from_json(nlohmann::json::parse(props::slurp(cfg.plan_path)), data);
  EXPECT_EQ(back.lambda_joint, plan.lambda_joint);
  EXPECT_EQ(back.lambda_equation, plan.lambda_equation);
  for (std::size_t e = 0; e < back.loadings.values.size(); ++e)
    EXPECT_TRUE((back.loadings.values[e].array() == plan.loadings.values[e].array()).all());

  write_file(dir / "broken.json", R"({"schema_version": 1, "scope": "joint"})");
  cfg.plan_path = (dir / "broken.json").string();
  EXPECT_THROW(cmd_estimate(cfg, sink, sink), ConfigError);
  fs::remove_all(dir);
}

TEST(Cli, InferReportListsTargets) {
  const auto dir = scratch("infer");
  const auto cfg = toy_config(dir, "out");
  std::ostringstream sink;
  const auto rep = cmd_infer(cfg, sink, sink);
  ASSERT_EQ(rep.rows.size(), 3u);
  EXPECT_EQ(rep.rows[0].covariate_name, "d1");
  EXPECT_EQ(rep.rows[1].equation_name, "y2");
  EXPECT_EQ(rep.rows[2].covariate_name, "x2");
  EXPECT_EQ(read_rows(dir / "out" / "report.csv").size(), 3u);
  fs::remove_all(dir);
}

TEST(Cli, SimulateResumesFromJournal) {
  const auto dir = scratch("resume");
  auto cfg = toy_config(dir, "out");
  std::ostringstream sink;
  cmd_simulate(cfg, sink, sink);
  const auto first = props::slurp(dir / "out" / "results.csv");
  cfg.simulation.resume = true;
  std::ostringstream log;
  cmd_simulate(cfg, log, sink);
  EXPECT_EQ(log.str().find("replication"), std::string::npos);
  EXPECT_EQ(first, props::slurp(dir / "out" / "results.csv"));
  fs::remove_all(dir);
}

TEST(Cli, RunsAreDeterministic) {
  const auto dir = scratch("determinism");
  const auto check = props::determinism(dir);
  EXPECT_TRUE(check.pass) << check.detail;
  fs::remove_all(dir);
}
