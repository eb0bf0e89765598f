#pragma once

#include <Eigen/Dense>
#include <boost/math/distributions/normal.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "srelasso/data_model.hpp"
#include "srelasso/error.hpp"
#include "srelasso/lasso.hpp"
#include "srelasso/lrv.hpp"
#include "srelasso/parallel.hpp"
#include "srelasso/rng.hpp"

namespace srelasso {

enum class PenaltyScope { PerEquation, Joint };
enum class PenaltyMethod { GaussianCanonical, Bootstrap };

inline const char* to_string(PenaltyScope s) { return s == PenaltyScope::Joint ? "joint" : "per-equation"; }
inline const char* to_string(PenaltyMethod m) {
  return m == PenaltyMethod::Bootstrap ? "bootstrap" : "gaussian-canonical";
}

struct PenaltyOptions {
  PenaltyScope scope = PenaltyScope::Joint;
  PenaltyMethod method = PenaltyMethod::Bootstrap;
  double alpha = 0.1;
  double c = 1.1;
  int draws = 5000;
  int block_size = 1;
  HacOptions hac;
  std::uint64_t seed = 0;
  int threads = 1;
  // X-independent pilot rule for the initial fits.
  double pilot_alpha = 0.1;
  double pilot_c = 0.5;
  // Pilot fit -> residuals -> loadings is repeated until the loadings move by
  // less than refine_tol (relative) or max_refinements passes have run.
  int max_refinements = 15;
  double refine_tol = 1e-4;
  SolverOptions solver;
};

/// Per-draw maxima of |Z_jk / Psi_jk|: per equation (B x J) and over all (j, k).
struct BootstrapDraws {
  Eigen::VectorXd max_stats;
  Eigen::MatrixXd equation_max;
  int draws = 0;
  std::uint64_t seed = 0;
};

/// Selected penalty levels. Both the joint level and the per-equation levels
/// are always filled (from the same draws); `scope` says which one is used.
struct PenaltyPlan {
  PenaltyScope scope = PenaltyScope::Joint;
  PenaltyMethod method = PenaltyMethod::Bootstrap;
  double alpha = 0.1;
  double c = 1.1;
  double lambda_joint = 0.0;
  std::vector<double> lambda_equation;
  LoadingMatrix loadings;
  BlockScheme scheme;
  int draws = 0;
  std::uint64_t seed = 0;
  bool degenerate = false;
  std::vector<std::string> diagnostics;

  double lambda(int j) const {
    return scope == PenaltyScope::Joint ? lambda_joint : lambda_equation.at(static_cast<std::size_t>(j));
  }
};

inline double normal_quantile(double p) {
  return boost::math::quantile(boost::math::normal_distribution<double>(0.0, 1.0), p);
}

/// 2 c sqrt(n) Phi^{-1}(1 - alpha / (2 K J_eff)).
inline double lambda_gaussian_canonical(double alpha, double c, int n, int k, int j_eff) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw ConfigError("alpha must lie in (0, 1)");
  if (!(c > 0.0)) throw ConfigError("c must be positive");
  if (n < 1 || k < 1 || j_eff < 1) throw ConfigError("n, K and J must be positive");
  const double tail = alpha / (2.0 * static_cast<double>(k) * static_cast<double>(j_eff));
  if (tail >= 1.0) throw ConfigError("alpha / (2 K J) must be below 1");
  return 2.0 * c * std::sqrt(static_cast<double>(n)) * normal_quantile(1.0 - tail);
}

/// Empirical (1 - alpha) quantile as the order statistic ceil((1 - alpha) B).
inline double upper_quantile(Eigen::VectorXd values, double alpha) {
  if (values.size() == 0) throw ConfigError("quantile of an empty sample");
  if (!(alpha > 0.0 && alpha < 1.0)) throw ConfigError("alpha must lie in (0, 1)");
  std::sort(values.data(), values.data() + values.size());
  const double pos = std::ceil((1.0 - alpha) * static_cast<double>(values.size()) - 1e-9);
  const auto idx = std::clamp<Eigen::Index>(static_cast<Eigen::Index>(pos), 1, values.size());
  return values[idx - 1];
}

/// B x l_n standard normal multipliers for one equation; row b comes from the
/// stream keyed by (seed, tag, b, equation).
inline Eigen::MatrixXd block_multipliers(std::uint64_t seed, rng::Tag tag, int equation, int draws, int blocks) {
  Eigen::MatrixXd e(draws, blocks);
  for (int b = 0; b < draws; ++b) {
    rng::Stream s(seed, tag, static_cast<std::uint64_t>(b), static_cast<std::uint64_t>(equation));
    for (int i = 0; i < blocks; ++i) e(b, i) = s.normal();
  }
  return e;
}

/// Multiplier block bootstrap of max_{j,k} |Z_jk / Psi_jk| with
/// Z_jk = n^{-1/2} sum_i e_{j,i} sum_{l in block i} eps_{j,l} X_{jk,l}.
inline std::pair<PenaltyPlan, BootstrapDraws> bootstrap_penalty(const std::vector<EquationDesign>& designs,
                                                                const std::vector<Eigen::VectorXd>& residuals,
                                                                const LoadingMatrix& loadings,
                                                                const BlockScheme& scheme, int draws, double alpha,
                                                                double c, std::uint64_t seed,
                                                                PenaltyScope scope = PenaltyScope::Joint,
                                                                int threads = 1) {
  if (designs.empty()) throw ConfigError("bootstrap_penalty: no equations");
  if (designs.size() != residuals.size() || loadings.num_equations() != static_cast<int>(designs.size()))
    throw ConfigError("bootstrap_penalty: equations, residuals and loadings disagree");
  if (draws < 100) throw ConfigError("bootstrap_penalty: at least 100 draws required");
  if (!(alpha > 0.0 && alpha < 1.0)) throw ConfigError("alpha must lie in (0, 1)");
  if (!(c > 1.0)) throw ConfigError("c must exceed 1");
  if (scheme.block_count < 2) throw ConfigError("block scheme leaves fewer than 2 blocks");

  const int n = static_cast<int>(designs.front().x.rows());
  const int equations = static_cast<int>(designs.size());
  const double root_n = std::sqrt(static_cast<double>(n));

  BootstrapDraws out;
  out.draws = draws;
  out.seed = seed;
  out.equation_max.resize(draws, equations);

  parallel_for(static_cast<std::size_t>(equations), threads, [&](std::size_t jj) {
    const int j = static_cast<int>(jj);
    const auto& d = designs[jj];
    if (d.x.rows() != n || residuals[jj].size() != n) throw ConfigError("bootstrap_penalty: ragged observation counts");
    const Eigen::MatrixXd sums = block_sums(score_matrix(d.x, residuals[jj]), scheme, false);
    const Eigen::MatrixXd e = block_multipliers(seed, rng::Tag::PenaltyBootstrap, j, draws, scheme.block_count);
    Eigen::MatrixXd z = e * sums;
    z /= root_n;
    const Eigen::RowVectorXd inv_psi = loadings.values[jj].cwiseInverse().transpose();
    out.equation_max.col(j) = (z.array().rowwise() * inv_psi.array()).abs().rowwise().maxCoeff();
  });
  out.max_stats = out.equation_max.rowwise().maxCoeff();

  PenaltyPlan plan;
  plan.scope = scope;
  plan.method = PenaltyMethod::Bootstrap;
  plan.alpha = alpha;
  plan.c = c;
  plan.loadings = loadings;
  plan.scheme = scheme;
  plan.draws = draws;
  plan.seed = seed;
  plan.lambda_joint = 2.0 * c * root_n * upper_quantile(out.max_stats, alpha);
  for (int j = 0; j < equations; ++j)
    plan.lambda_equation.push_back(2.0 * c * root_n * upper_quantile(out.equation_max.col(j), alpha));
  if (plan.lambda_joint <= 0.0) {
    plan.degenerate = true;
    plan.diagnostics.push_back("all bootstrap maxima are zero; lambda = 0");
  }
  if (loadings.any_floored())
    plan.diagnostics.push_back("floored loadings: " + std::to_string(loadings.floored_count()));
  return {std::move(plan), std::move(out)};
}

/// Fits every equation with the plan's penalty, optionally refitting by OLS on the support.
inline std::vector<LassoFit> fit_equations(const std::vector<EquationDesign>& designs, const PenaltyPlan& plan,
                                           bool post_lasso, const SolverOptions& solver = {}, int threads = 1) {
  std::vector<LassoFit> fits(designs.size());
  parallel_for(designs.size(), threads, [&](std::size_t j) {
    const int jj = static_cast<int>(j);
    const LassoProblem p = make_problem(designs[j], jj, plan.lambda(jj), plan.loadings.values[j]);
    LassoFit fit = solve_lasso(p, solver);
    fits[j] = post_lasso ? post_lasso_ols(fit, p) : std::move(fit);
  });
  return fits;
}

/// Output of the pilot stage: initial fits and refined loadings.
struct PilotStage {
  std::vector<EquationDesign> designs;
  LoadingMatrix preliminary_loadings;
  std::vector<double> pilot_lambdas;
  std::vector<LassoFit> pilots;
  std::vector<Eigen::VectorXd> residuals;
  LoadingMatrix loadings;
  int refinement_passes = 0;
  bool refinement_converged = false;
};

/// Pilot fits with the X-independent rule, starting from loadings of the
/// centered responses and refining the loadings from the pilot residuals.
inline PilotStage run_pilot(const PanelDataset& data, const PenaltyOptions& opt) {
  PilotStage st;
  const int equations = data.num_equations();
  for (int j = 0; j < equations; ++j) st.designs.push_back(make_design(data, j));

  std::vector<Eigen::VectorXd> centered;
  for (int j = 0; j < equations; ++j) {
    Eigen::VectorXd y = data.response(j);
    y.array() -= y.mean();
    centered.push_back(std::move(y));
  }
  st.preliminary_loadings = compute_loadings(st.designs, centered, opt.hac);

  if (opt.max_refinements < 1) throw ConfigError("max_refinements must be >= 1");
  st.pilots.resize(static_cast<std::size_t>(equations));
  st.pilot_lambdas.resize(static_cast<std::size_t>(equations));
  for (int j = 0; j < equations; ++j)
    st.pilot_lambdas[static_cast<std::size_t>(j)] =
        lambda_gaussian_canonical(opt.pilot_alpha, opt.pilot_c, data.n(), data.num_covariates(j), 1);
  st.loadings = st.preliminary_loadings;
  for (int pass = 0; pass < opt.max_refinements; ++pass) {
    parallel_for(static_cast<std::size_t>(equations), opt.threads, [&](std::size_t j) {
      const Eigen::VectorXd* warm = pass ? &st.pilots[j].coef.values() : nullptr;
      st.pilots[j] = solve_lasso(
          make_problem(st.designs[j], static_cast<int>(j), st.pilot_lambdas[j], st.loadings.values[j]), opt.solver, warm);
    });
    st.residuals.clear();
    for (const auto& f : st.pilots) st.residuals.push_back(f.residuals);
    LoadingMatrix next = compute_loadings(st.designs, st.residuals, opt.hac);
    double change = 0.0;
    for (std::size_t j = 0; j < next.values.size(); ++j)
      change = std::max(change, ((next.values[j] - st.loadings.values[j]).array().abs() / st.loadings.values[j].array())
                                    .maxCoeff());
    st.loadings = std::move(next);
    st.refinement_passes = pass + 1;
    if (change < opt.refine_tol) {
      st.refinement_converged = true;
      break;
    }
  }
  return st;
}

/// Final penalty selection from a completed pilot stage.
inline std::pair<PenaltyPlan, BootstrapDraws> tune_from_pilot(const PilotStage& st, const PenaltyOptions& opt) {
  const int n = static_cast<int>(st.designs.front().x.rows());
  const BlockScheme scheme = BlockScheme::make(n, opt.block_size);
  if (opt.method == PenaltyMethod::Bootstrap) {
    auto result = bootstrap_penalty(st.designs, st.residuals, st.loadings, scheme, opt.draws, opt.alpha, opt.c, opt.seed,
                                    opt.scope, opt.threads);
    return result;
  }
  PenaltyPlan plan;
  plan.scope = opt.scope;
  plan.method = PenaltyMethod::GaussianCanonical;
  plan.alpha = opt.alpha;
  plan.c = opt.c;
  plan.loadings = st.loadings;
  plan.scheme = scheme;
  plan.seed = opt.seed;
  int total = 0;
  for (const auto& d : st.designs) {
    const int k = static_cast<int>(d.x.cols());
    total += k;
    plan.lambda_equation.push_back(lambda_gaussian_canonical(opt.alpha, opt.c, n, k, 1));
  }
  plan.lambda_joint = lambda_gaussian_canonical(opt.alpha, opt.c, n, total, 1);
  return {std::move(plan), BootstrapDraws{}};
}

struct TuneResult {
  PenaltyPlan plan;
  BootstrapDraws draws;
  PilotStage pilot;
};

/// Pilot fit, loading refinement and final penalty selection.
inline TuneResult run_pilot_then_tune(const PanelDataset& data, const PenaltyOptions& opt) {
  TuneResult r;
  r.pilot = run_pilot(data, opt);
  auto [plan, draws] = tune_from_pilot(r.pilot, opt);
  r.plan = std::move(plan);
  r.draws = std::move(draws);
  return r;
}

struct BlockScanResult {
  std::vector<int> block_sizes;
  std::vector<double> criterion;
  int best_block_size = 0;
  bool oracle = false;  // true: prediction norm against known coefficients
  std::vector<std::string> warnings;
};

/// Mean over equations of the prediction norm of (fit - truth).
inline double mean_prediction_error(const PanelDataset& data, const std::vector<LassoFit>& fits,
                                    const std::vector<Eigen::VectorXd>& truth) {
  double total = 0.0;
  for (std::size_t j = 0; j < fits.size(); ++j)
    total += prediction_norm(CoefVector(static_cast<int>(j), fits[j].coef.values() - truth[j]), data);
  return total / static_cast<double>(fits.size());
}

/// Out-of-sample RMSE averaged over equations.
inline double mean_holdout_rmse(const PanelDataset& test, const std::vector<LassoFit>& fits) {
  double total = 0.0;
  for (int j = 0; j < test.num_equations(); ++j) {
    const auto& f = fits[static_cast<std::size_t>(j)];
    const Eigen::VectorXd pred = (test.design(j) * f.coef.values()).array() + f.intercept;
    total += std::sqrt((test.response(j) - pred).squaredNorm() / test.n());
  }
  return total / test.num_equations();
}

/// Scans block sizes. With `truth`, the criterion is the mean prediction norm
/// against the true coefficients; otherwise the last 20% of observations are
/// held out and the criterion is the mean out-of-sample RMSE.
inline BlockScanResult scan_block_size(const PanelDataset& data, const PenaltyOptions& opt, const std::vector<int>& grid,
                                       const std::optional<std::vector<Eigen::VectorXd>>& truth = std::nullopt,
                                       bool post_lasso = false) {
  if (grid.empty()) throw ConfigError("block-size grid is empty");
  BlockScanResult out;
  out.oracle = truth.has_value();
  const int holdout = std::max(1, static_cast<int>(std::lround(0.2 * data.n())));
  const PanelDataset train = out.oracle ? data : data.slice_rows(0, data.n() - holdout);
  const PilotStage pilot = run_pilot(train, opt);
  const int limit = train.n() / 2;
  for (int b : grid) {
    if (b < 1 || b > limit) {
      out.warnings.push_back("block size " + std::to_string(b) + " skipped (must lie in [1, " + std::to_string(limit) + "])");
      continue;
    }
    PenaltyOptions o = opt;
    o.block_size = b;
    const auto tuned = tune_from_pilot(pilot, o);
    const auto fits = fit_equations(pilot.designs, tuned.first, post_lasso, opt.solver, opt.threads);
    double crit = 0.0;
    if (out.oracle) {
      crit = mean_prediction_error(data, fits, *truth);
    } else {
      crit = mean_holdout_rmse(data.slice_rows(data.n() - holdout, data.n()), fits);
    }
    out.block_sizes.push_back(b);
    out.criterion.push_back(crit);
  }
  if (out.block_sizes.empty()) throw ConfigError("no admissible block size in the grid");
  const auto best = std::min_element(out.criterion.begin(), out.criterion.end()) - out.criterion.begin();
  out.best_block_size = out.block_sizes[static_cast<std::size_t>(best)];
  return out;
}

}  // namespace srelasso
