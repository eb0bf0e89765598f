// Acceptance runner: one PASS/FAIL line per criterion, non-zero exit if any fails.
//   acceptance [--only N] [--threads T]
#include <algorithm>
#include <cctype>
#include <chrono>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <functional>
#include <thread>

#include "srelasso/srelasso.hpp"
#include "support/properties.hpp"

using namespace srelasso;

namespace {

int g_threads = 1;

struct Outcome {
  bool pass = false;
  std::string detail;
};

ExperimentConfig estimation_config(ScenarioKind kind, double rho, int block, std::uint64_t seed) {
  ExperimentConfig cfg;
  cfg.kind = kind;
  cfg.iid = {50, 50, 100, 0.5, 5, 10.0};
  cfg.dep.J = cfg.dep.K = 50;
  cfg.dep.n = 100;
  cfg.dep.rho = rho;
  cfg.penalty.draws = 5000;
  cfg.penalty.block_size = block;
  cfg.block_grid = {block};
  cfg.reps = 200;
  cfg.seed = seed;
  cfg.threads = g_threads;
  return cfg;
}

ExperimentConfig inference_config(double rho, int block, Alpha0Law law, std::uint64_t seed) {
  ExperimentConfig cfg = estimation_config(ScenarioKind::Inference, rho, block, seed);
  cfg.alpha0_law = law;
  cfg.block_grid.clear();
  cfg.reps = 300;
  cfg.pivot_draws = 1000;
  cfg.test_alpha = 0.05;
  return cfg;
}

double metric_mean(const ExperimentResult& r, int block, const std::string& metric) {
  for (const auto& row : r.rows)
    if (row.block_size == block && row.metric == metric) return row.mean;
  throw Error("metric " + metric + " missing");
}

std::string fmt(const char* f, double a, double b = 0.0, double c = 0.0, double d = 0.0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c, d);
  return buf;
}

Outcome criterion_iid() {
  const auto r = run_experiment(estimation_config(ScenarioKind::Iid, 0.0, 1, 20240101));
  const double ratio = metric_mean(r, 1, "pred_ratio");
  return {ratio >= 0.93 && ratio <= 0.99,
          fmt("mean prediction-norm ratio %.4f (bracket [0.93, 0.99]; ratio of means %.4f)", ratio,
              metric_mean(r, 1, "pred_ratio_of_means"))};
}

Outcome criterion_dependent() {
  const auto r = run_experiment(estimation_config(ScenarioKind::Dependent, 0.1, 8, 20240202));
  const double ratio = metric_mean(r, 8, "pred_ratio");
  return {ratio >= 0.87 && ratio <= 0.95,
          fmt("mean prediction-norm ratio %.4f (bracket [0.87, 0.95]; ratio of means %.4f)", ratio,
              metric_mean(r, 8, "pred_ratio_of_means"))};
}

// Selected block size per batch of 20 replications: argmin of the batch mean
// of the joint-penalty prediction norm.
std::vector<int> batch_optima(double rho, std::uint64_t seed, int batches, int per_batch, std::vector<double>& mean_norm) {
  const std::vector<int> grid{2, 4, 6, 8, 10, 12};
  ExperimentConfig cfg = estimation_config(ScenarioKind::Dependent, rho, 2, seed);
  cfg.block_grid = grid;
  cfg.reps = batches * per_batch;
  const auto r = run_experiment(cfg);
  mean_norm.assign(grid.size(), 0.0);
  std::vector<int> optima;
  for (int b = 0; b < batches; ++b) {
    std::vector<double> crit(grid.size(), 0.0);
    for (int rep = b * per_batch; rep < (b + 1) * per_batch; ++rep)
      for (std::size_t g = 0; g < grid.size(); ++g) {
        const double v = r.replications[static_cast<std::size_t>(rep)].at({grid[g], "pred_norm_joint"});
        crit[g] += v;
        mean_norm[g] += v / cfg.reps;
      }
    optima.push_back(grid[static_cast<std::size_t>(std::min_element(crit.begin(), crit.end()) - crit.begin())]);
  }
  return optima;
}

Outcome criterion_block_scan() {
  const int batches = 10, per_batch = 20;
  std::vector<double> norm_strong, norm_weak;
  const auto strong = batch_optima(0.1, 20240303, batches, per_batch, norm_strong);
  const auto weak = batch_optima(1.0, 20240303, batches, per_batch, norm_weak);
  int wins = 0;
  std::string picks;
  for (int b = 0; b < batches; ++b) {
    wins += strong[static_cast<std::size_t>(b)] > weak[static_cast<std::size_t>(b)];
    picks += " " + std::to_string(strong[static_cast<std::size_t>(b)]) + "/" + std::to_string(weak[static_cast<std::size_t>(b)]);
  }
  std::string norms = "; mean joint norm by b (rho=0.1 | rho=1.0):";
  for (std::size_t g = 0; g < norm_strong.size(); ++g)
    norms += fmt(" %.4f|%.4f", norm_strong[g], norm_weak[g]);
  const double share = static_cast<double>(wins) / batches;
  return {share >= 0.70, fmt("b(rho=0.1) > b(rho=1.0) in %.0f%% of batches (need >= 70%%); picks", 100.0 * share) +
                             picks + norms};
}

Outcome criterion_size() {
  struct Setting {
    double rho;
    int block;
  };
  Outcome out{true, ""};
  for (const Setting s : {Setting{0.1, 8}, Setting{1.0, 2}}) {
    const auto r = run_experiment(inference_config(s.rho, s.block, Alpha0Law::Zero, 20240404));
    const double simult = metric_mean(r, s.block, "simult_boot");
    const double ind = metric_mean(r, s.block, "ind_boot");
    const double asym = metric_mean(r, s.block, "ind_asym");
    const bool ok = simult >= 0.015 && simult <= 0.10 && ind >= 0.005 && ind <= 0.06;
    out.pass = out.pass && ok;
    out.detail += fmt("rho=%.1f b=%.0f: simultaneous %.4f [0.015, 0.10], individual boot %.4f [0.005, 0.06]", s.rho,
                      s.block, simult, ind) +
                  fmt(", individual asym %.4f; ", asym);
  }
  return out;
}

Outcome criterion_power() {
  const auto r5 = run_experiment(inference_config(0.1, 8, Alpha0Law::Uniform5, 20240505));
  const auto r25 = run_experiment(inference_config(0.1, 8, Alpha0Law::Uniform2_5, 20240505));
  const double step5 = metric_mean(r5, 8, "stepdown");
  const double step25 = metric_mean(r25, 8, "stepdown");
  const double boot5 = metric_mean(r5, 8, "ind_boot"), boot25 = metric_mean(r25, 8, "ind_boot");
  const bool ok = step5 > 0.85 && step5 > step25 && boot5 > boot25;
  return {ok, fmt("step-down U[0,5] %.4f (need > 0.85), U[0,2.5] %.4f; individual boot U[0,5] %.4f, U[0,2.5] %.4f",
                  step5, step25, boot5, boot25)};
}

Outcome criterion_properties() {
  const auto scratch = std::filesystem::temp_directory_path() / "srelasso_acceptance_props";
  std::filesystem::remove_all(scratch);
  const std::vector<std::pair<std::string, std::function<props::Check()>>> checks = {
      {"lasso KKT", [] { return props::lasso_kkt(1000); }},
      {"two-form identity", [] { return props::two_form_identity(50); }},
      {"Newey-West MA(1)", [] { return props::newey_west_ma1(); }},
      {"block-sum PSD and calibration", [] { return props::block_sum_psd_and_calibration(); }},
      {"penalty half-normal", [] { return props::penalty_half_normal(); }},
      {"penalty Gaussian MC", [] { return props::penalty_gaussian_mc(); }},
      {"pivot quantile", [] { return props::pivot_quantile(); }},
      {"single-target collapse", [] { return props::single_target_collapse(); }},
      {"seed/thread determinism", [&] { return props::determinism(scratch); }},
  };
  Outcome out{true, ""};
  for (const auto& [name, fn] : checks) {
    props::Check c;
    try {
      c = fn();
    } catch (const std::exception& e) {
      c.pass = false;
      c.detail = std::string("threw: ") + e.what();
    }
    std::printf("    %s %s: %s\n", c.pass ? "ok  " : "FAIL", name.c_str(), c.detail.c_str());
    std::fflush(stdout);
    out.pass = out.pass && c.pass;
  }
  std::filesystem::remove_all(scratch);
  out.detail = out.pass ? "all property checks hold" : "see failing checks above";
  return out;
}

Outcome criterion_readme() {
  const std::string text = props::slurp(std::filesystem::path(SRELASSO_SOURCE_DIR) / "README.md");
  // lower case, runs of whitespace collapsed so line wrapping does not matter
  std::string lower;
  for (unsigned char ch : text) {
    if (std::isspace(ch)) {
      if (!lower.empty() && lower.back() != ' ') lower += ' ';
    } else {
      lower += static_cast<char>(std::tolower(ch));
    }
  }
  const bool scale = lower.find("r=1000") != std::string::npos && lower.find("150") != std::string::npos;
  const bool not_required = lower.find("not required for acceptance") != std::string::npos;
  return {scale && not_required, scale && not_required ? "README states that full-scale results are not required"
                                                       : "README lacks the full-scale statement"};
}

}  // namespace

int main(int argc, char** argv) {
  int only = 0;
  g_threads = std::max(1u, std::thread::hardware_concurrency());
  for (int i = 1; i < argc; ++i) {
    if (!std::strcmp(argv[i], "--only") && i + 1 < argc) {
      only = std::atoi(argv[++i]);
    } else if (!std::strcmp(argv[i], "--threads") && i + 1 < argc) {
      g_threads = std::max(1, std::atoi(argv[++i]));
    } else {
      std::fprintf(stderr, "usage: acceptance [--only N] [--threads T]\n");
      return 2;
    }
  }
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"iid joint vs per-equation prediction-norm ratio (J=K=50, n=100, B=5000, R=200)", criterion_iid},
      {"dependent rho=0.1, b_n=8 prediction-norm ratio (J=K=50, n=100, B=5000, R=200)", criterion_dependent},
      {"block-size scan: larger b_n for rho=0.1 than rho=1.0 (10 batches of 20)", criterion_block_scan},
      {"size under alpha0=0 (J=K=50, n=100, R=300, pivot B=1000)", criterion_size},
      {"power: step-down under U[0,5] and ordering U[0,5] > U[0,2.5]", criterion_power},
      {"property suite", criterion_properties},
      {"README documents reduced-scale acceptance", criterion_readme},
  };
  std::printf("acceptance: %d replication threads\n", g_threads);
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    if (only && only != id) continue;
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::printf("%s criterion %d: %s: %s [%.0f s]\n", o.pass ? "PASS" : "FAIL", id, criteria[i].first.c_str(),
                o.detail.c_str(), secs);
    std::fflush(stdout);
    failed += !o.pass;
  }
  std::printf("acceptance: %d failed\n", failed);
  return failed ? 1 : 0;
}
