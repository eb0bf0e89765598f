#pragma once

#include <Eigen/Dense>
#include <boost/math/distributions/students_t.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <functional>
#include <map>
#include <mutex>
#include <numbers>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "srelasso/csv_io.hpp"
#include "srelasso/data_model.hpp"
#include "srelasso/debias.hpp"
#include "srelasso/error.hpp"
#include "srelasso/inference.hpp"
#include "srelasso/parallel.hpp"
#include "srelasso/penalty.hpp"
#include "srelasso/rng.hpp"

namespace srelasso {

struct IidScenario {
  int J = 50;
  int K = 50;
  int n = 100;
  double toeplitz_gamma = 0.5;
  int block_size = 5;
  double signal = 10.0;
};

struct DepScenario {
  int J = 50;
  int K = 50;
  int n = 100;
  double rho = 0.1;
  int truncation = 1000;
  int innovation_df = 8;
  double arch_a = 0.8;
  double arch_b = 0.2;
  int burn_in = 1000;
  int block_size = 5;
  double signal = 10.0;
  // When set, the Ginibre matrices come from this seed instead of the data seed.
  std::optional<std::uint64_t> ginibre_seed;
};

enum class Alpha0Law { Zero, Uniform2_5, Uniform5 };

inline const char* to_string(Alpha0Law law) {
  switch (law) {
    case Alpha0Law::Zero: return "zero";
    case Alpha0Law::Uniform2_5: return "uniform-2.5";
    case Alpha0Law::Uniform5: return "uniform-5";
  }
  return "?";
}

inline Alpha0Law parse_alpha0_law(const std::string& s) {
  if (s == "zero") return Alpha0Law::Zero;
  if (s == "uniform-2.5") return Alpha0Law::Uniform2_5;
  if (s == "uniform-5") return Alpha0Law::Uniform5;
  throw ConfigError("unknown alpha0_law '" + s + "' (expected zero, uniform-2.5 or uniform-5)");
}

struct InferenceScenario {
  DepScenario dep;
  Alpha0Law alpha0_law = Alpha0Law::Zero;
  double theta_max = 0.25;
  double beta_max = 5.0;
};

/// True coefficients of a generated system.
struct TruthRecord {
  std::vector<Eigen::VectorXd> beta;  // per equation, in equation covariate order
  std::vector<Target> targets;        // inference scenario: (j, 0) for every j
  std::vector<double> target_values;
  Eigen::MatrixXd theta;              // inference scenario: J x K
  bool short_last_block = false;
};

struct GeneratedData {
  PanelDataset data;
  TruthRecord truth;
};

namespace detail {

inline bool same_block(int j, int k, int block_size) { return j / block_size == k / block_size; }

/// CDF of Student's t with even degrees of freedom (finite series).
inline double student_t_cdf_even(double t, int df) {
  const double nu = static_cast<double>(df);
  const double c = nu / (nu + t * t);
  const double s = t / std::sqrt(nu + t * t);
  double term = 1.0, sum = 1.0;
  for (int i = 1; i < df / 2; ++i) {
    term *= c * (2.0 * i - 1.0) / (2.0 * i);
    sum += term;
  }
  return 0.5 + 0.5 * s * sum;
}

inline double student_t_pdf(double t, int df) {
  const double nu = static_cast<double>(df);
  const double log_norm = std::lgamma(0.5 * (nu + 1.0)) - std::lgamma(0.5 * nu) - 0.5 * std::log(nu * std::numbers::pi);
  return std::exp(log_norm - 0.5 * (nu + 1.0) * std::log1p(t * t / nu));
}

}  // namespace detail

/// Inverse CDF of Student's t. Even df: Cornish-Fisher start refined by
/// Newton steps on the closed-form CDF; odd df and tails below 1e-4 (where the
/// closed form loses relative precision) use boost.
inline double student_t_quantile(double u, int df) {
  if (!(u > 0.0 && u < 1.0)) throw ConfigError("student_t_quantile: probability must lie in (0, 1)");
  if (df < 1) throw ConfigError("student_t_quantile: df must be positive");
  if (df % 2 != 0 || std::min(u, 1.0 - u) < 1e-4)
    return boost::math::quantile(boost::math::students_t_distribution<double>(df), u);
  const double nu = static_cast<double>(df);
  const double z = normal_quantile(u);
  const double z2 = z * z;
  double t = z + z * (z2 + 1.0) / (4.0 * nu) + z * ((5.0 * z2 + 16.0) * z2 + 3.0) / (96.0 * nu * nu) +
             z * (((3.0 * z2 + 19.0) * z2 + 17.0) * z2 - 15.0) / (384.0 * nu * nu * nu);
  for (int it = 0; it < 100; ++it) {
    const double step = (detail::student_t_cdf_even(t, df) - u) / detail::student_t_pdf(t, df);
    t -= step;
    if (std::abs(step) <= 1e-14 * (1.0 + std::abs(t))) break;
  }
  return t;
}

/// t(df) / sqrt(df / (df - 2)): unit variance.
inline double scaled_t_draw(rng::Stream& s, int df) {
  return student_t_quantile(s.uniform(), df) * std::sqrt((df - 2.0) / df);
}

namespace detail {

/// m x (n) observations of the linear process sum_{l=0}^{L} (l+1)^{-rho-1} M_l xi_{t-l}
/// with ARCH-scaled t innovations, returned as n x m.
inline Eigen::MatrixXd linear_process(const DepScenario& sc, int m, std::uint64_t seed, std::uint64_t process) {
  if (sc.innovation_df <= 2) throw ConfigError("innovation df must exceed 2");
  if (!(sc.rho > 0.0)) throw ConfigError("rho must be positive");
  if (sc.truncation < 1) throw ConfigError("truncation must be >= 1");
  const int len = sc.n + sc.truncation;
  Eigen::MatrixXd xi(m, len);
  for (int k = 0; k < m; ++k) {
    rng::Stream s(seed, rng::Tag::Generator, process, static_cast<std::uint64_t>(k));
    double prev = scaled_t_draw(s, sc.innovation_df);
    for (int b = 0; b < sc.burn_in; ++b) prev = scaled_t_draw(s, sc.innovation_df);
    for (int t = 0; t < len; ++t) {
      const double e = scaled_t_draw(s, sc.innovation_df);
      xi(k, t) = e * std::sqrt(sc.arch_a * prev * prev + sc.arch_b);
      prev = e;
    }
  }
  const std::uint64_t gseed = sc.ginibre_seed.value_or(seed);
  Eigen::MatrixXd x = Eigen::MatrixXd::Zero(m, sc.n);
  Eigen::MatrixXd a(m, m);
  for (int lag = 0; lag <= sc.truncation; ++lag) {
    rng::Stream g(gseed, rng::Tag::Generator, 100 + process, static_cast<std::uint64_t>(lag));
    const double weight = std::pow(lag + 1.0, -sc.rho - 1.0);
    for (int c = 0; c < m; ++c)
      for (int r = 0; r < m; ++r) a(r, c) = weight * g.normal();
    x.noalias() += a * xi.middleCols(sc.truncation - lag, sc.n);
  }
  return x.transpose();
}

inline std::vector<std::string> numbered(const std::string& prefix, int count) {
  std::vector<std::string> names;
  for (int i = 1; i <= count; ++i) names.push_back(prefix + std::to_string(i));
  return names;
}

inline void check_dims(int J, int K, int n) {
  if (J < 1 || K < 1) throw ConfigError("J and K must be positive");
  if (n < 4) throw ConfigError("n must be at least 4");
}

inline GeneratedData assemble_regression(const Eigen::MatrixXd& x, const Eigen::MatrixXd& eps, int J, int block_size,
                                         double signal) {
  const int K = static_cast<int>(x.cols());
  GeneratedData out;
  out.truth.short_last_block = K % block_size != 0;
  Eigen::MatrixXd y(x.rows(), J);
  std::vector<EquationSpec> specs;
  std::vector<int> all(static_cast<std::size_t>(K));
  for (int k = 0; k < K; ++k) all[static_cast<std::size_t>(k)] = k;
  for (int j = 0; j < J; ++j) {
    Eigen::VectorXd b = Eigen::VectorXd::Zero(K);
    for (int k = 0; k < K; ++k)
      if (same_block(j, k, block_size)) b[k] = signal;
    y.col(j) = x * b + eps.col(j);
    out.truth.beta.push_back(std::move(b));
    specs.push_back({j, all, false});
  }
  out.data = PanelDataset(std::move(y), x, std::move(specs), numbered("y", J), numbered("x", K));
  return out;
}

}  // namespace detail

/// X_t ~ N(0, Toeplitz(gamma)), eps ~ N(0, 1), beta_jk = signal within the same block.
inline GeneratedData gen_iid(const IidScenario& sc, std::uint64_t seed) {
  detail::check_dims(sc.J, sc.K, sc.n);
  if (sc.block_size < 1) throw ConfigError("block size must be positive");
  Eigen::MatrixXd sigma(sc.K, sc.K);
  for (int a = 0; a < sc.K; ++a)
    for (int b = 0; b < sc.K; ++b) sigma(a, b) = std::pow(sc.toeplitz_gamma, std::abs(a - b));
  Eigen::LLT<Eigen::MatrixXd> llt(sigma);
  if (llt.info() != Eigen::Success) throw ConfigError("Toeplitz covariance is not positive definite");
  const Eigen::MatrixXd l = llt.matrixL();

  Eigen::MatrixXd z(sc.n, sc.K);
  rng::Stream sx(seed, rng::Tag::Generator, 1);
  for (int t = 0; t < sc.n; ++t)
    for (int k = 0; k < sc.K; ++k) z(t, k) = sx.normal();
  const Eigen::MatrixXd x = z * l.transpose();

  Eigen::MatrixXd eps(sc.n, sc.J);
  rng::Stream se(seed, rng::Tag::Generator, 2);
  for (int t = 0; t < sc.n; ++t)
    for (int j = 0; j < sc.J; ++j) eps(t, j) = se.normal();
  return detail::assemble_regression(x, eps, sc.J, sc.block_size, sc.signal);
}

/// Linear-process covariates and errors (independent processes), block-sparse beta.
inline GeneratedData gen_dependent(const DepScenario& sc, std::uint64_t seed) {
  detail::check_dims(sc.J, sc.K, sc.n);
  const Eigen::MatrixXd x = detail::linear_process(sc, sc.K, seed, 1);
  const Eigen::MatrixXd eps = detail::linear_process(sc, sc.J, seed, 2);
  return detail::assemble_regression(x, eps, sc.J, sc.block_size, sc.signal);
}

/// Y_j = d_j alpha0 + X beta_j + eps_j, d_j = X theta_j + v_j. The pool is
/// [x1..xK, d1..dJ]; equation j has covariates [d_j, x1..xK] and target (j, 0).
inline GeneratedData gen_inference(const InferenceScenario& sc, std::uint64_t seed) {
  const DepScenario& dep = sc.dep;
  detail::check_dims(dep.J, dep.K, dep.n);
  if (!(sc.theta_max >= 0.0) || !(sc.beta_max >= 0.0)) throw ConfigError("coefficient ranges must be non-negative");
  const int J = dep.J, K = dep.K, n = dep.n;
  const Eigen::MatrixXd x = detail::linear_process(dep, K, seed, 1);
  const Eigen::MatrixXd eps = detail::linear_process(dep, J, seed, 2);
  const Eigen::MatrixXd v = detail::linear_process(dep, J, seed, 3);

  GeneratedData out;
  out.truth.short_last_block = K % dep.block_size != 0;
  out.truth.theta = Eigen::MatrixXd::Zero(J, K);
  Eigen::MatrixXd beta = Eigen::MatrixXd::Zero(J, K);
  rng::Stream sc_coef(seed, rng::Tag::Generator, 10);
  for (int j = 0; j < J; ++j)
    for (int k = 0; k < K; ++k)
      if (detail::same_block(j, k, dep.block_size)) {
        beta(j, k) = sc.beta_max * sc_coef.uniform();
        out.truth.theta(j, k) = sc.theta_max * sc_coef.uniform();
      }
  rng::Stream sa(seed, rng::Tag::Generator, 11);
  const double u = sa.uniform();
  const double alpha0 = sc.alpha0_law == Alpha0Law::Zero ? 0.0 : (sc.alpha0_law == Alpha0Law::Uniform2_5 ? 2.5 : 5.0) * u;

  Eigen::MatrixXd pool(n, K + J);
  pool.leftCols(K) = x;
  Eigen::MatrixXd y(n, J);
  std::vector<EquationSpec> specs;
  for (int j = 0; j < J; ++j) {
    const Eigen::VectorXd d = x * out.truth.theta.row(j).transpose() + v.col(j);
    pool.col(K + j) = d;
    y.col(j) = d * alpha0 + x * beta.row(j).transpose() + eps.col(j);
    EquationSpec spec{j, {K + j}, false};
    for (int k = 0; k < K; ++k) spec.covariate_indices.push_back(k);
    specs.push_back(std::move(spec));
    Eigen::VectorXd b(K + 1);
    b[0] = alpha0;
    b.tail(K) = beta.row(j).transpose();
    out.truth.beta.push_back(std::move(b));
    out.truth.targets.push_back({j, 0});
    out.truth.target_values.push_back(alpha0);
  }
  auto names = detail::numbered("x", K);
  for (const auto& d : detail::numbered("d", J)) names.push_back(d);
  out.data = PanelDataset(std::move(y), std::move(pool), std::move(specs), detail::numbered("y", J), std::move(names));
  return out;
}

enum class ScenarioKind { Iid, Dependent, Inference };

inline const char* to_string(ScenarioKind k) {
  switch (k) {
    case ScenarioKind::Iid: return "iid";
    case ScenarioKind::Dependent: return "dep";
    case ScenarioKind::Inference: return "infer";
  }
  return "?";
}

inline ScenarioKind parse_scenario(const std::string& s) {
  if (s == "iid") return ScenarioKind::Iid;
  if (s == "dep") return ScenarioKind::Dependent;
  if (s == "infer") return ScenarioKind::Inference;
  throw ConfigError("unknown scenario '" + s + "' (expected iid, dep or infer)");
}

struct ExperimentConfig {
  ScenarioKind kind = ScenarioKind::Iid;
  IidScenario iid;
  DepScenario dep;                 // also the process settings of the inference scenario
  Alpha0Law alpha0_law = Alpha0Law::Zero;
  bool freeze_ginibre = false;
  int reps = 1;
  std::uint64_t seed = 0;
  PenaltyOptions penalty;          // alpha, c, draws, block_size; seed is derived per replication
  std::vector<int> block_grid;     // estimation scenarios: one result set per block size
  bool post_lasso = true;          // OLS refit on the support for the norm metrics
  DebiasOptions debias;
  double test_alpha = 0.05;
  int pivot_draws = 1000;
  int threads = 1;                 // replications in parallel
  std::string journal;             // per-replication results for resume; empty disables
};

/// One aggregated result line.
struct ResultRow {
  std::string scenario;
  int J = 0, K = 0, n = 0;
  double rho = 0.0;
  int block_size = 1;
  std::string metric;
  double mean = 0.0, median = 0.0, sd = 0.0;
  int reps = 0;
  std::uint64_t seed = 0;
};

/// Metric values of one replication keyed by (block size, metric name).
using ReplicationMetrics = std::map<std::pair<int, std::string>, double>;

struct ExperimentResult {
  std::vector<ResultRow> rows;
  std::vector<ReplicationMetrics> replications;
};

inline GeneratedData generate(const ExperimentConfig& cfg, std::uint64_t rep_seed) {
  DepScenario dep = cfg.dep;
  if (cfg.freeze_ginibre) dep.ginibre_seed = cfg.seed;
  switch (cfg.kind) {
    case ScenarioKind::Iid: return gen_iid(cfg.iid, rep_seed);
    case ScenarioKind::Dependent: return gen_dependent(dep, rep_seed);
    case ScenarioKind::Inference: return gen_inference({dep, cfg.alpha0_law, 0.25, 5.0}, rep_seed);
  }
  throw ConfigError("unknown scenario");
}

namespace detail {

inline void add_norm_metrics(ReplicationMetrics& m, int b, const PanelDataset& data, const TruthRecord& truth,
                             const std::vector<LassoFit>& joint, const std::vector<LassoFit>& per_eq) {
  const int J = data.num_equations();
  double pj = 0, pe = 0, ej = 0, ee = 0, ratio_avg = 0, eratio_avg = 0;
  for (int j = 0; j < J; ++j) {
    const auto& b0 = truth.beta[static_cast<std::size_t>(j)];
    const CoefVector dj(j, joint[static_cast<std::size_t>(j)].coef.values() - b0);
    const CoefVector de(j, per_eq[static_cast<std::size_t>(j)].coef.values() - b0);
    const double a = prediction_norm(dj, data), c = prediction_norm(de, data);
    const double ea = euclidean_norm(dj), ec = euclidean_norm(de);
    pj += a;
    pe += c;
    ej += ea;
    ee += ec;
    ratio_avg += c > 0 ? a / c : 1.0;
    eratio_avg += ec > 0 ? ea / ec : 1.0;
  }
  m[{b, "pred_norm_joint"}] = pj / J;
  m[{b, "pred_norm_per_equation"}] = pe / J;
  m[{b, "euclid_norm_joint"}] = ej / J;
  m[{b, "euclid_norm_per_equation"}] = ee / J;
  // Primary ratios: per-equation ratio, averaged over equations.
  m[{b, "pred_ratio"}] = ratio_avg / J;
  m[{b, "euclid_ratio"}] = eratio_avg / J;
  m[{b, "pred_ratio_of_means"}] = pe > 0 ? pj / pe : 1.0;
  m[{b, "euclid_ratio_of_means"}] = ee > 0 ? ej / ee : 1.0;
}

}  // namespace detail

/// Metrics of one replication. Estimation scenarios: norms of the joint and
/// per-equation fits (and their ratios) for each block size, with both penalty
/// levels taken from the same bootstrap draws. Inference scenario: rejection
/// rates of the de-biased tests at level test_alpha.
inline ReplicationMetrics run_replication(const ExperimentConfig& cfg, int rep) {
  const std::uint64_t rep_seed = rng::replication_seed(cfg.seed, static_cast<std::uint64_t>(rep));
  const GeneratedData gd = generate(cfg, rep_seed);
  PenaltyOptions po = cfg.penalty;
  po.seed = rep_seed;
  po.threads = 1;
  ReplicationMetrics m;

  if (cfg.kind != ScenarioKind::Inference) {
    const PilotStage pilot = run_pilot(gd.data, po);
    const std::vector<int> grid = cfg.block_grid.empty() ? std::vector<int>{po.block_size} : cfg.block_grid;
    for (int b : grid) {
      PenaltyOptions o = po;
      o.block_size = b;
      auto [plan, draws] = tune_from_pilot(pilot, o);
      plan.scope = PenaltyScope::Joint;
      const auto joint = fit_equations(pilot.designs, plan, cfg.post_lasso, po.solver);
      plan.scope = PenaltyScope::PerEquation;
      const auto per_eq = fit_equations(pilot.designs, plan, cfg.post_lasso, po.solver);
      detail::add_norm_metrics(m, b, gd.data, gd.truth, joint, per_eq);
      double mean_eq = 0.0;
      for (double l : plan.lambda_equation) mean_eq += l;
      m[{b, "lambda_joint"}] = plan.lambda_joint;
      m[{b, "lambda_per_equation_mean"}] = mean_eq / static_cast<double>(plan.lambda_equation.size());
    }
    return m;
  }

  po.scope = PenaltyScope::Joint;
  const auto tuned = run_pilot_then_tune(gd.data, po);
  const TargetSet targets(gd.truth.targets, gd.data);
  DebiasOptions dopt = cfg.debias;
  dopt.threads = 1;
  const auto alg = run_algorithm(gd.data, targets, tuned.plan, dopt);
  const auto crit = bootstrap_pivots(alg.estimates, tuned.plan.scheme, cfg.pivot_draws, cfg.test_alpha, rep_seed);
  const auto rep_report = build_report(alg.estimates, crit, cfg.test_alpha);
  const int b = po.block_size;
  double asym = 0, boot = 0, step = 0, cover_ind = 0;
  bool cover_sim = true;
  for (std::size_t i = 0; i < rep_report.rows.size(); ++i) {
    const auto& r = rep_report.rows[i];
    asym += r.reject_asymptotic;
    boot += r.reject_bootstrap;
    step += r.reject_stepdown;
    const double truth = gd.truth.target_values[i];
    cover_ind += r.ci_bootstrap.contains(truth);
    cover_sim = cover_sim && r.ci_simultaneous.contains(truth);
  }
  const double g = static_cast<double>(rep_report.rows.size());
  m[{b, "ind_asym"}] = asym / g;
  m[{b, "ind_boot"}] = boot / g;
  m[{b, "simult_boot"}] = rep_report.reject_joint ? 1.0 : 0.0;
  m[{b, "stepdown"}] = step / g;
  m[{b, "coverage_ind_boot"}] = cover_ind / g;
  m[{b, "coverage_simult"}] = cover_sim ? 1.0 : 0.0;
  return m;
}

namespace detail {

inline std::map<int, ReplicationMetrics> read_journal(const std::string& path) {
  std::map<int, ReplicationMetrics> done;
  std::ifstream in(path);
  if (!in) return done;
  std::string line;
  std::map<int, ReplicationMetrics> partial;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ss(line);
    std::string rep, b, metric, value;
    if (!std::getline(ss, rep, ',') || !std::getline(ss, b, ',') || !std::getline(ss, metric, ',') ||
        !std::getline(ss, value))
      continue;  // a torn final line from an interrupted run
    try {
      if (metric == "#done") {
        done[std::stoi(rep)] = partial[std::stoi(rep)];
      } else {
        partial[std::stoi(rep)][{std::stoi(b), metric}] = std::stod(value);
      }
    } catch (const std::exception&) {
      continue;
    }
  }
  return done;
}

inline void summarize(const std::vector<double>& values, double& mean, double& median, double& sd) {
  const double n = static_cast<double>(values.size());
  mean = 0.0;
  for (double v : values) mean += v;
  mean /= n;
  std::vector<double> s = values;
  std::sort(s.begin(), s.end());
  const std::size_t h = s.size() / 2;
  median = s.size() % 2 ? s[h] : 0.5 * (s[h - 1] + s[h]);
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  sd = values.size() > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0;
}

}  // namespace detail

/// Runs cfg.reps replications (in parallel over replications), aggregating each
/// metric into mean / median / sd. With a journal path, finished replications
/// are appended as they complete and skipped on a rerun.
inline ExperimentResult run_experiment(const ExperimentConfig& cfg,
                                       const std::function<void(int, int)>& progress = nullptr) {
  if (cfg.reps < 1) throw ConfigError("reps must be >= 1");
  ExperimentResult out;
  out.replications.resize(static_cast<std::size_t>(cfg.reps));
  std::vector<char> have(static_cast<std::size_t>(cfg.reps), 0);
  if (!cfg.journal.empty()) {
    for (auto& [rep, metrics] : detail::read_journal(cfg.journal)) {
      if (rep < 0 || rep >= cfg.reps) continue;
      out.replications[static_cast<std::size_t>(rep)] = std::move(metrics);
      have[static_cast<std::size_t>(rep)] = 1;
    }
  }
  std::mutex io;
  std::ofstream journal;
  if (!cfg.journal.empty()) {
    journal.open(cfg.journal, std::ios::app);
    if (!journal) throw DataError("cannot open journal '" + cfg.journal + "'");
  }
  int finished = static_cast<int>(std::count(have.begin(), have.end(), char{1}));
  parallel_for(static_cast<std::size_t>(cfg.reps), cfg.threads, [&](std::size_t r) {
    if (have[r]) return;
    ReplicationMetrics m = run_replication(cfg, static_cast<int>(r));
    std::lock_guard<std::mutex> lock(io);
    if (journal.is_open()) {
      for (const auto& [key, v] : m) journal << r << ',' << key.first << ',' << key.second << ',' << format_double(v) << '\n';
      journal << r << ",0,#done,1\n";
      journal.flush();
    }
    out.replications[r] = std::move(m);
    ++finished;
    if (progress) progress(finished, cfg.reps);
  });

  std::map<std::pair<int, std::string>, std::vector<double>> columns;
  for (const auto& rep : out.replications)
    for (const auto& [key, v] : rep) columns[key].push_back(v);
  for (const auto& [key, values] : columns) {
    ResultRow row;
    row.scenario = to_string(cfg.kind);
    if (cfg.kind == ScenarioKind::Iid) {
      row.J = cfg.iid.J;
      row.K = cfg.iid.K;
      row.n = cfg.iid.n;
    } else {
      row.J = cfg.dep.J;
      row.K = cfg.dep.K;
      row.n = cfg.dep.n;
      row.rho = cfg.dep.rho;
    }
    row.block_size = key.first;
    row.metric = key.second;
    detail::summarize(values, row.mean, row.median, row.sd);
    row.reps = static_cast<int>(values.size());
    row.seed = cfg.seed;
    out.rows.push_back(std::move(row));
  }
  return out;
}

inline void write_results_csv(std::ostream& out, const std::vector<ResultRow>& rows) {
  out << "scenario,J,K,n,rho,b_n,metric,mean,median,sd,R,seed\n";
  for (const auto& r : rows)
    out << r.scenario << ',' << r.J << ',' << r.K << ',' << r.n << ',' << format_double(r.rho) << ',' << r.block_size
        << ',' << r.metric << ',' << format_double(r.mean) << ',' << format_double(r.median) << ','
        << format_double(r.sd) << ',' << r.reps << ',' << r.seed << '\n';
}

}  // namespace srelasso
