#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "srelasso/data_model.hpp"
#include "srelasso/error.hpp"

namespace srelasso {

struct SolverOptions {
  double tol = 1e-7;      // max coefficient change per sweep, relative to 1 v max|beta|
  int max_iter = 10000;   // sweeps
  bool track_objective = false;
};

/// Weighted-l1 least squares for one equation:
///   min_b (1/n)|y - X b|^2 + (lambda/n) sum_k loadings_k |b_k|
/// y and X are expected to be centered already when the equation has an intercept.
struct LassoProblem {
  int equation = 0;
  Eigen::VectorXd y;
  Eigen::MatrixXd x;
  double lambda = 0.0;
  Eigen::VectorXd loadings;
  double y_mean = 0.0;
  Eigen::RowVectorXd x_mean;  // empty means no intercept
};

inline LassoProblem make_problem(const EquationDesign& d, int equation, double lambda, Eigen::VectorXd loadings) {
  LassoProblem p;
  p.equation = equation;
  p.y = d.y;
  p.x = d.x;
  p.lambda = lambda;
  p.loadings = std::move(loadings);
  if (d.intercept) {
    p.y_mean = d.y_mean;
    p.x_mean = d.x_mean;
  }
  return p;
}

struct LassoFit {
  CoefVector coef;
  Eigen::VectorXd residuals;
  double objective = 0.0;
  int iterations = 0;
  bool converged = false;
  double lambda_used = 0.0;
  Eigen::VectorXd loadings_used;
  double intercept = 0.0;
  bool rank_deficient = false;
  std::vector<int> zero_variance_columns;
  std::vector<double> objective_trace;
  std::vector<std::string> diagnostics;
};

inline double lasso_objective(const LassoProblem& p, const Eigen::VectorXd& beta) {
  const double n = static_cast<double>(p.y.size());
  const double rss = (p.y - p.x * beta).squaredNorm();
  return rss / n + p.lambda / n * (beta.cwiseAbs().cwiseProduct(p.loadings)).sum();
}

/// Largest violation of the subgradient optimality conditions, on the scale of (2/n) X'r.
inline double kkt_violation(const LassoProblem& p, const Eigen::VectorXd& beta) {
  const double n = static_cast<double>(p.y.size());
  const Eigen::VectorXd grad = 2.0 / n * (p.x.transpose() * (p.y - p.x * beta));
  double worst = 0.0;
  for (Eigen::Index k = 0; k < beta.size(); ++k) {
    const double pen = p.lambda / n * p.loadings[k];
    if (p.x.col(k).squaredNorm() == 0.0) continue;
    const double v = beta[k] != 0.0 ? std::abs(grad[k] - (beta[k] > 0 ? 1.0 : -1.0) * pen)
                                     : std::max(0.0, std::abs(grad[k]) - pen);
    worst = std::max(worst, v);
  }
  return worst;
}

namespace detail {

inline void validate_problem(const LassoProblem& p) {
  const auto n = p.y.size();
  const auto k = p.x.cols();
  if (n < 2) throw ConfigError("lasso: need at least 2 observations");
  if (k < 1) throw ConfigError("lasso: need at least 1 covariate");
  if (p.x.rows() != n) throw ConfigError("lasso: design rows do not match response length");
  if (p.loadings.size() != k) throw ConfigError("lasso: loadings length does not match covariates");
  if (!p.y.allFinite() || !p.x.allFinite()) throw DataError("lasso: non-finite input");
  if (!std::isfinite(p.lambda) || p.lambda < 0.0) throw ConfigError("lasso: lambda must be finite and >= 0");
  if (!p.loadings.allFinite() || (p.loadings.array() <= 0.0).any())
    throw ConfigError("lasso: loadings must be strictly positive");
}

inline double soft_threshold(double z, double t) {
  if (std::abs(z) <= t) return 0.0;  // ties at the kink resolve to exactly zero
  return z > 0 ? z - t : z + t;
}

inline void finish_fit(const LassoProblem& p, Eigen::VectorXd beta, LassoFit& fit) {
  fit.residuals = p.y - p.x * beta;
  fit.objective = lasso_objective(p, beta);
  fit.lambda_used = p.lambda;
  fit.loadings_used = p.loadings;
  fit.intercept = p.x_mean.size() ? p.y_mean - p.x_mean.dot(beta) : 0.0;
  fit.coef = CoefVector(p.equation, std::move(beta));
}

}  // namespace detail

/// Cyclic coordinate descent with covariance (Gram) updates.
inline LassoFit solve_lasso(const LassoProblem& p, const SolverOptions& opt = {},
                            const Eigen::VectorXd* warm_start = nullptr) {
  detail::validate_problem(p);
  const Eigen::Index k_count = p.x.cols();
  const double n = static_cast<double>(p.y.size());

  Eigen::MatrixXd gram = Eigen::MatrixXd::Zero(k_count, k_count);
  gram.selfadjointView<Eigen::Lower>().rankUpdate(p.x.transpose());
  gram.triangularView<Eigen::StrictlyUpper>() = gram.transpose();
  const Eigen::VectorXd xty = p.x.transpose() * p.y;

  LassoFit fit;
  const double max_diag = gram.diagonal().maxCoeff();
  std::vector<char> degenerate(static_cast<std::size_t>(k_count), 0);
  for (Eigen::Index k = 0; k < k_count; ++k) {
    if (gram(k, k) <= 1e-14 * std::max(max_diag, 1e-300) || gram(k, k) == 0.0) {
      degenerate[static_cast<std::size_t>(k)] = 1;
      fit.zero_variance_columns.push_back(static_cast<int>(k));
    }
  }
  if (!fit.zero_variance_columns.empty())
    fit.diagnostics.push_back("zero-variance columns forced to 0: " + std::to_string(fit.zero_variance_columns.size()));

  Eigen::VectorXd beta = Eigen::VectorXd::Zero(k_count);
  if (warm_start && warm_start->size() == k_count) beta = *warm_start;
  for (Eigen::Index k = 0; k < k_count; ++k)
    if (degenerate[static_cast<std::size_t>(k)]) beta[k] = 0.0;
  Eigen::VectorXd corr = xty - gram * beta;  // X'r

  const Eigen::VectorXd thresh = 0.5 * p.lambda * p.loadings;
  auto objective_from_gram = [&] {
    return (p.y.squaredNorm() - 2.0 * beta.dot(xty) + beta.dot(gram * beta)) / n +
           p.lambda / n * beta.cwiseAbs().cwiseProduct(p.loadings).sum();
  };
  if (opt.track_objective) fit.objective_trace.push_back(objective_from_gram());

  for (int sweep = 1; sweep <= opt.max_iter; ++sweep) {
    double max_delta = 0.0;
    for (Eigen::Index k = 0; k < k_count; ++k) {
      if (degenerate[static_cast<std::size_t>(k)]) continue;
      const double z = corr[k] + gram(k, k) * beta[k];
      const double updated = detail::soft_threshold(z, thresh[k]) / gram(k, k);
      const double delta = updated - beta[k];
      if (delta != 0.0) {
        corr.noalias() -= gram.col(k) * delta;
        beta[k] = updated;
        max_delta = std::max(max_delta, std::abs(delta));
      }
    }
    fit.iterations = sweep;
    if (opt.track_objective) fit.objective_trace.push_back(objective_from_gram());
    const double scale = std::max(1.0, beta.cwiseAbs().maxCoeff());
    if (max_delta < opt.tol * scale) {
      fit.converged = true;
      break;
    }
  }
  if (!fit.converged)
    fit.diagnostics.push_back("coordinate descent did not converge in " + std::to_string(opt.max_iter) + " sweeps");
  detail::finish_fit(p, std::move(beta), fit);
  return fit;
}

/// Warm-started fits over a descending penalty grid.
inline std::vector<LassoFit> solve_lasso_path(const LassoProblem& p, const std::vector<double>& lambda_grid,
                                              const SolverOptions& opt = {}) {
  for (std::size_t i = 1; i < lambda_grid.size(); ++i)
    if (lambda_grid[i] > lambda_grid[i - 1]) throw ConfigError("lambda grid must be sorted descending");
  std::vector<LassoFit> fits;
  fits.reserve(lambda_grid.size());
  LassoProblem q = p;
  for (double lambda : lambda_grid) {
    q.lambda = lambda;
    const Eigen::VectorXd* warm = fits.empty() ? nullptr : &fits.back().coef.values();
    fits.push_back(solve_lasso(q, opt, warm));
  }
  return fits;
}

/// OLS restricted to the LASSO support. Rank-deficient supports get the
/// minimum-norm least-squares solution and are flagged.
inline LassoFit post_lasso_ols(const LassoFit& fit, const LassoProblem& p) {
  const auto& support = fit.coef.support();
  LassoFit out = fit;
  out.diagnostics.push_back("post-lasso OLS refit");
  Eigen::VectorXd beta = Eigen::VectorXd::Zero(p.x.cols());
  if (!support.empty()) {
    Eigen::MatrixXd xs(p.x.rows(), static_cast<Eigen::Index>(support.size()));
    for (std::size_t s = 0; s < support.size(); ++s) xs.col(static_cast<Eigen::Index>(s)) = p.x.col(support[s]);
    Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(xs);
    const Eigen::VectorXd b = cod.solve(p.y);
    if (cod.rank() < xs.cols()) {
      out.rank_deficient = true;
      out.diagnostics.push_back("rank-deficient active set; minimum-norm solution");
    }
    for (std::size_t s = 0; s < support.size(); ++s) beta[support[s]] = b[static_cast<Eigen::Index>(s)];
  }
  out.residuals = p.y - p.x * beta;
  out.objective = lasso_objective(p, beta);
  out.intercept = p.x_mean.size() ? p.y_mean - p.x_mean.dot(beta) : 0.0;
  out.coef = CoefVector(p.equation, std::move(beta));
  return out;
}

}  // namespace srelasso
