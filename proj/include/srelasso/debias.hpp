#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <set>
#include <string>
#include <vector>

#include "srelasso/data_model.hpp"
#include "srelasso/error.hpp"
#include "srelasso/lasso.hpp"
#include "srelasso/lrv.hpp"
#include "srelasso/parallel.hpp"
#include "srelasso/penalty.hpp"

namespace srelasso {

enum class DebiasMethod { LsIv, LadIv, DoubleLs, DoubleLad };

inline const char* to_string(DebiasMethod m) {
  switch (m) {
    case DebiasMethod::LsIv: return "ls-iv";
    case DebiasMethod::LadIv: return "lad-iv";
    case DebiasMethod::DoubleLs: return "double-ls";
    case DebiasMethod::DoubleLad: return "double-lad";
  }
  return "?";
}

inline DebiasMethod parse_debias_method(const std::string& s) {
  if (s == "ls-iv") return DebiasMethod::LsIv;
  if (s == "lad-iv") return DebiasMethod::LadIv;
  if (s == "double-ls") return DebiasMethod::DoubleLs;
  if (s == "double-lad") return DebiasMethod::DoubleLad;
  throw ConfigError("unknown method '" + s + "' (expected ls-iv, lad-iv, double-ls or double-lad)");
}

struct DebiasOptions {
  DebiasMethod method = DebiasMethod::LsIv;
  bool post_lasso = true;
  // Penalty rule for the instrument regressions: 2c sqrt(n) Phi^{-1}(1 - alpha / (2 (K_j - 1))).
  double instrument_alpha = 0.1;
  double instrument_c = 1.1;
  HacOptions hac;
  SolverOptions solver;
  int threads = 1;
};

/// Residual of the target covariate regressed (LASSO) on the remaining covariates.
struct InstrumentFit {
  Target target;
  CoefVector gamma;           // over the K_j - 1 other covariates
  std::vector<int> columns;   // equation positions of gamma's entries
  Eigen::VectorXd v_hat;
  Eigen::VectorXd loadings;
  double lambda = 0.0;
  bool degenerate = false;
  std::vector<std::string> diagnostics;

  /// Support of gamma in equation covariate positions.
  std::vector<int> support() const {
    std::vector<int> s;
    for (int i : gamma.support()) s.push_back(columns[static_cast<std::size_t>(i)]);
    return s;
  }
};

struct DebiasedEstimate {
  Target target;
  DebiasMethod method = DebiasMethod::LsIv;
  double beta2 = 0.0;
  double phi = 0.0;
  double omega = 0.0;
  double sigma = 0.0;
  bool omega_floored = false;
  Eigen::VectorXd score_series;
  Eigen::VectorXd zeta_series;
  double identity_gap = 0.0;  // LS-IV: relative gap between the two closed forms
  std::vector<std::string> diagnostics;

  int n() const { return static_cast<int>(score_series.size()); }
};

namespace detail {

inline double population_sd(const Eigen::VectorXd& v) {
  return std::sqrt((v.array() - v.mean()).square().mean());
}

inline Eigen::MatrixXd drop_column(const Eigen::MatrixXd& x, int k) {
  Eigen::MatrixXd out(x.rows(), x.cols() - 1);
  for (Eigen::Index c = 0, o = 0; c < x.cols(); ++c)
    if (c != k) out.col(o++) = x.col(c);
  return out;
}

inline Eigen::MatrixXd select_columns(const Eigen::MatrixXd& x, const std::vector<int>& cols) {
  Eigen::MatrixXd out(x.rows(), static_cast<Eigen::Index>(cols.size()));
  for (std::size_t i = 0; i < cols.size(); ++i) out.col(static_cast<Eigen::Index>(i)) = x.col(cols[i]);
  return out;
}

/// Fills sigma and zeta from phi, omega and the score series.
inline void finish_estimate(DebiasedEstimate& est, const BlockScheme& scheme) {
  const auto om = omega_jk(est.score_series, scheme);
  est.omega = om.value;
  est.omega_floored = om.floored;
  if (om.floored) est.diagnostics.push_back("score long-run variance floored");
  est.sigma = std::sqrt(est.omega) / std::abs(est.phi);
  if (!(est.sigma > 0.0) || !std::isfinite(est.sigma))
    throw NumericalError("non-finite or zero standard error for target (" + std::to_string(est.target.equation) + ", " +
                         std::to_string(est.target.covariate) + ")");
  est.zeta_series = -est.score_series / (est.phi * est.sigma);
}

/// Gaussian-kernel density of `r` at 0 with Silverman's bandwidth.
inline double density_at_zero(const Eigen::VectorXd& r, bool* degenerate = nullptr) {
  const double n = static_cast<double>(r.size());
  double sd = population_sd(r);
  if (!(sd > 0.0)) {
    if (degenerate) *degenerate = true;
    sd = 1e-8 * (1.0 + r.cwiseAbs().mean());
  }
  const double h = 1.06 * sd * std::pow(n, -0.2);
  const double norm = 1.0 / std::sqrt(2.0 * std::numbers::pi);
  return (norm * (-0.5 * (r / h).array().square()).exp()).sum() / (n * h);
}

/// Least absolute deviations by iteratively reweighted least squares.
inline Eigen::VectorXd lad_regression(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, bool* rank_deficient = nullptr) {
  Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(x);
  if (rank_deficient) *rank_deficient = cod.rank() < x.cols();
  Eigen::VectorXd b = cod.solve(y);
  const double scale = 1.0 + y.cwiseAbs().mean();
  for (int it = 0; it < 500; ++it) {
    const Eigen::VectorXd r = y - x * b;
    const Eigen::VectorXd w = r.cwiseAbs().cwiseMax(1e-10 * scale).cwiseInverse().cwiseSqrt();
    const Eigen::MatrixXd xw = x.array().colwise() * w.array();
    const Eigen::VectorXd yw = y.cwiseProduct(w);
    const Eigen::VectorXd next = Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd>(xw).solve(yw);
    const double change = (next - b).cwiseAbs().maxCoeff();
    b = next;
    if (change < 1e-10 * (1.0 + b.cwiseAbs().maxCoeff())) break;
  }
  return b;
}

}  // namespace detail

/// Instrument regression for target (j, k) on the equation's estimation design.
inline InstrumentFit fit_instrument(const EquationDesign& d, const Target& target, const DebiasOptions& opt) {
  const int k = target.covariate;
  const Eigen::Index kj = d.x.cols();
  if (kj < 2) throw ConfigError("instrument regression needs at least 2 covariates");
  if (k < 0 || k >= kj) throw ConfigError("target covariate out of range");
  const int n = static_cast<int>(d.x.rows());

  InstrumentFit out;
  out.target = target;
  for (int c = 0; c < kj; ++c)
    if (c != k) out.columns.push_back(c);
  const Eigen::VectorXd xk = d.x.col(k);
  const Eigen::MatrixXd others = detail::drop_column(d.x, k);
  const double sd_xk = detail::population_sd(xk);
  out.lambda = lambda_gaussian_canonical(opt.instrument_alpha, opt.instrument_c, n, static_cast<int>(kj - 1), 1);

  if (!(sd_xk > 1e-14 * (1.0 + std::abs(xk.mean())))) {
    out.degenerate = true;
    out.diagnostics.push_back("target covariate is constant");
    out.gamma = CoefVector(target.equation, Eigen::VectorXd::Zero(kj - 1));
    out.v_hat = xk.array() - xk.mean();
    out.loadings = Eigen::VectorXd::Ones(kj - 1);
    return out;
  }

  const int bandwidth = resolve_bandwidth(opt.hac, n);
  const Eigen::VectorXd xk_centered = xk.array() - xk.mean();
  LoadingMatrix init = loadings_from_scores({score_matrix(others, xk_centered)}, bandwidth);

  LassoProblem p;
  p.equation = target.equation;
  p.y = xk;
  p.x = others;
  p.lambda = out.lambda;
  p.loadings = init.values.front();
  LassoFit fit = solve_lasso(p, opt.solver);

  LoadingMatrix refined = loadings_from_scores({score_matrix(others, fit.residuals)}, bandwidth);
  p.loadings = refined.values.front();
  fit = solve_lasso(p, opt.solver, &fit.coef.values());
  if (opt.post_lasso) fit = post_lasso_ols(fit, p);
  if (!fit.converged) out.diagnostics.push_back("instrument lasso did not converge");

  out.loadings = p.loadings;
  out.v_hat = xk - others * fit.coef.values();
  out.gamma = fit.coef;
  if (out.v_hat.norm() / std::sqrt(static_cast<double>(n)) <= 1e-8 * sd_xk) {
    out.degenerate = true;
    out.diagnostics.push_back("instrument residual vanishes (target is collinear with other covariates)");
  }
  return out;
}

inline InstrumentFit fit_instrument(const PanelDataset& data, const Target& target, const DebiasOptions& opt) {
  return fit_instrument(make_design(data, target.equation), target, opt);
}

/// IV regression of y_tilde on x_k with instrument v_hat.
inline DebiasedEstimate ls_iv_core(const Eigen::VectorXd& y_tilde, const Eigen::VectorXd& xk, const Eigen::VectorXd& v_hat,
                                   const BlockScheme& scheme, const Target& target = {}) {
  const double n = static_cast<double>(xk.size());
  const double vx = v_hat.dot(xk);
  const double sd_v = detail::population_sd(v_hat);
  const double sd_x = detail::population_sd(xk);
  if (!(std::abs(vx) / n >= 1e-8 * sd_v * sd_x) || !(sd_v > 0.0))
    throw NumericalError("weak instrument for target (" + std::to_string(target.equation) + ", " +
                         std::to_string(target.covariate) + "); try double selection (double-ls)");
  DebiasedEstimate est;
  est.target = target;
  est.method = DebiasMethod::LsIv;
  est.beta2 = v_hat.dot(y_tilde) / vx;
  est.score_series = (y_tilde - xk * est.beta2).cwiseProduct(v_hat);
  est.phi = -vx / n;
  detail::finish_estimate(est, scheme);
  return est;
}

/// LS-IV de-biased estimate. beta1 holds the S1 coefficients of all K_j covariates.
inline DebiasedEstimate ls_iv_estimate(const EquationDesign& d, const Target& target, const CoefVector& beta1,
                                       const InstrumentFit& inst, const BlockScheme& scheme) {
  const int k = target.covariate;
  if (beta1.size() != d.x.cols()) throw ConfigError("ls_iv_estimate: beta1 length mismatch");
  if (inst.degenerate)
    throw NumericalError("weak instrument for target (" + std::to_string(target.equation) + ", " + std::to_string(k) +
                         "); try double selection (double-ls)");
  Eigen::VectorXd b_minus = beta1.values();
  b_minus[k] = 0.0;
  const Eigen::VectorXd xk = d.x.col(k);
  const Eigen::VectorXd y_tilde = d.y - d.x * b_minus;
  DebiasedEstimate est = ls_iv_core(y_tilde, xk, inst.v_hat, scheme, target);

  // De-sparsified form: (v'y)/(v'x_k) - sum_{m != k} (v'x_m)/(v'x_k) beta1_m.
  const double vx = inst.v_hat.dot(xk);
  const Eigen::VectorXd vxm = d.x.transpose() * inst.v_hat;
  double second = inst.v_hat.dot(d.y) / vx;
  for (Eigen::Index m = 0; m < d.x.cols(); ++m)
    if (m != k) second -= vxm[m] / vx * beta1[m];
  const double scale = std::max({std::abs(est.beta2), std::abs(inst.v_hat.dot(d.y) / vx), 1e-300});
  est.identity_gap = std::abs(est.beta2 - second) / scale;
  return est;
}

/// Zero crossing of m(b) = (1/n) sum {1/2 - 1(y_tilde <= x_k b)} v_hat by bracketed bisection.
inline DebiasedEstimate lad_iv_core(const Eigen::VectorXd& y_tilde, const Eigen::VectorXd& xk, const Eigen::VectorXd& v_hat,
                                    const BlockScheme& scheme, const Target& target = {}) {
  const double n = static_cast<double>(xk.size());
  const DebiasedEstimate ls = ls_iv_core(y_tilde, xk, v_hat, scheme, target);
  auto moment = [&](double b) {
    double m = 0.0;
    for (Eigen::Index t = 0; t < xk.size(); ++t) m += ((y_tilde[t] <= xk[t] * b) ? -0.5 : 0.5) * v_hat[t];
    return m / n;
  };
  auto sign = [](double v) { return (v > 0.0) - (v < 0.0); };

  const double se = ls.sigma / std::sqrt(n);
  double half = std::max(10.0 * se, 1e-6 * (1.0 + std::abs(ls.beta2)));
  double lo = ls.beta2 - half, hi = ls.beta2 + half;
  double m_lo = moment(lo), m_hi = moment(hi);
  for (int widen = 0; sign(m_lo) * sign(m_hi) > 0; ++widen) {
    if (widen == 6) throw NumericalError("LAD moment has no root in range");
    half *= 10.0;
    lo = ls.beta2 - half;
    hi = ls.beta2 + half;
    m_lo = moment(lo);
    m_hi = moment(hi);
  }
  const double tol = std::max(1e-3 * se, 1e-12 * (1.0 + std::abs(ls.beta2)));
  double root = m_lo == 0.0 ? lo : (m_hi == 0.0 ? hi : 0.5 * (lo + hi));
  if (m_lo != 0.0 && m_hi != 0.0) {
    for (int it = 0; it < 200 && hi - lo > tol; ++it) {
      const double mid = 0.5 * (lo + hi);
      const double m_mid = moment(mid);
      if (m_mid == 0.0) {
        lo = hi = mid;
        break;
      }
      if (sign(m_mid) == sign(m_lo)) {
        lo = mid;
        m_lo = m_mid;
      } else {
        hi = mid;
      }
    }
    root = 0.5 * (lo + hi);
  }

  DebiasedEstimate est;
  est.target = target;
  est.method = DebiasMethod::LadIv;
  est.beta2 = root;
  const Eigen::VectorXd resid = y_tilde - xk * root;
  bool degenerate = false;
  const double f0 = detail::density_at_zero(resid, &degenerate);
  if (degenerate) est.diagnostics.push_back("degenerate residual distribution; density bandwidth floored");
  est.phi = -f0 * v_hat.dot(xk) / n;
  est.score_series.resize(xk.size());
  for (Eigen::Index t = 0; t < xk.size(); ++t)
    est.score_series[t] = ((y_tilde[t] <= xk[t] * root) ? -0.5 : 0.5) * v_hat[t];
  detail::finish_estimate(est, scheme);
  return est;
}

inline DebiasedEstimate lad_iv_estimate(const EquationDesign& d, const Target& target, const CoefVector& beta1,
                                        const InstrumentFit& inst, const BlockScheme& scheme) {
  const int k = target.covariate;
  if (beta1.size() != d.x.cols()) throw ConfigError("lad_iv_estimate: beta1 length mismatch");
  if (inst.degenerate)
    throw NumericalError("weak instrument for target (" + std::to_string(target.equation) + ", " + std::to_string(k) +
                         "); try double selection (double-ls)");
  Eigen::VectorXd b_minus = beta1.values();
  b_minus[k] = 0.0;
  return lad_iv_core(d.y - d.x * b_minus, d.x.col(k), inst.v_hat, scheme, target);
}

/// Unpenalized LS or LAD of y on x_k plus the selected covariates. Inference
/// uses v_hat = x_k projected off the selected columns.
inline DebiasedEstimate double_selection_estimate(const EquationDesign& d, const Target& target,
                                                  const std::vector<int>& union_support, bool lad,
                                                  const BlockScheme& scheme) {
  const int k = target.covariate;
  std::vector<int> selected;
  for (int c : std::set<int>(union_support.begin(), union_support.end()))
    if (c != k) {
      if (c < 0 || c >= d.x.cols()) throw ConfigError("double selection: support index out of range");
      selected.push_back(c);
    }
  const Eigen::Index n = d.x.rows();
  if (static_cast<Eigen::Index>(selected.size()) + 1 >= n)
    throw ConfigError("double selection: selected set too large for the sample size");

  DebiasedEstimate est;
  est.target = target;
  est.method = lad ? DebiasMethod::DoubleLad : DebiasMethod::DoubleLs;
  const Eigen::VectorXd xk = d.x.col(k);
  Eigen::VectorXd v_hat = xk;
  if (!selected.empty()) {
    const Eigen::MatrixXd xs = detail::select_columns(d.x, selected);
    Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(xs);
    if (cod.rank() < xs.cols()) est.diagnostics.push_back("rank-deficient selected set; minimum-norm solve");
    v_hat = xk - xs * cod.solve(xk);
  }

  std::vector<int> cols{k};
  cols.insert(cols.end(), selected.begin(), selected.end());
  Eigen::MatrixXd xr = detail::select_columns(d.x, cols);
  Eigen::VectorXd resid;
  if (!lad) {
    Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(xr);
    if (cod.rank() < xr.cols()) est.diagnostics.push_back("rank-deficient regression; minimum-norm solve");
    const Eigen::VectorXd b = cod.solve(d.y);
    est.beta2 = b[0];
    resid = d.y - xr * b;
    est.score_series = resid.cwiseProduct(v_hat);
    est.phi = -v_hat.dot(xk) / static_cast<double>(n);
  } else {
    if (d.intercept) {
      xr.conservativeResize(Eigen::NoChange, xr.cols() + 1);
      xr.col(xr.cols() - 1).setOnes();
    }
    bool rank_def = false;
    const Eigen::VectorXd b = detail::lad_regression(xr, d.y, &rank_def);
    if (rank_def) est.diagnostics.push_back("rank-deficient regression; minimum-norm start");
    est.beta2 = b[0];
    resid = d.y - xr * b;
    bool degenerate = false;
    const double f0 = detail::density_at_zero(resid, &degenerate);
    if (degenerate) est.diagnostics.push_back("degenerate residual distribution; density bandwidth floored");
    est.phi = -f0 * v_hat.dot(xk) / static_cast<double>(n);
    est.score_series.resize(n);
    for (Eigen::Index t = 0; t < n; ++t) est.score_series[t] = (resid[t] <= 0.0 ? -0.5 : 0.5) * v_hat[t];
  }
  if (std::abs(est.phi) == 0.0)
    throw NumericalError("double selection: target covariate is explained by the selected set");
  detail::finish_estimate(est, scheme);
  return est;
}

/// Everything produced by one run of the de-biasing pipeline.
struct AlgorithmResult {
  std::vector<DebiasedEstimate> estimates;
  std::map<int, LassoFit> first_stage;  // S1 fits by equation
  std::vector<InstrumentFit> instruments;
};

/// S3 step for one target given its S1 coefficients and instrument.
inline DebiasedEstimate debias_target(const EquationDesign& d, const Target& t, const CoefVector& beta1,
                                      const InstrumentFit& inst, DebiasMethod method, const BlockScheme& scheme) {
  switch (method) {
    case DebiasMethod::LsIv: return ls_iv_estimate(d, t, beta1, inst, scheme);
    case DebiasMethod::LadIv: return lad_iv_estimate(d, t, beta1, inst, scheme);
    case DebiasMethod::DoubleLs:
    case DebiasMethod::DoubleLad: {
      std::vector<int> u;
      for (int c : beta1.support())
        if (c != t.covariate) u.push_back(c);
      for (int c : inst.support()) u.push_back(c);
      return double_selection_estimate(d, t, u, method == DebiasMethod::DoubleLad, scheme);
    }
  }
  throw ConfigError("unknown de-biasing method");
}

/// S1 equation fits (shared by all targets of an equation), S2 instrument
/// fits per target, then the method's S3 step.
inline AlgorithmResult run_algorithm(const PanelDataset& data, const TargetSet& targets, const PenaltyPlan& plan,
                                     const DebiasOptions& opt) {
  if (targets.empty()) throw ConfigError("no inference targets");
  AlgorithmResult out;
  std::map<int, EquationDesign> designs;
  for (const auto& t : targets.targets())
    if (!designs.count(t.equation)) designs.emplace(t.equation, make_design(data, t.equation));

  std::vector<int> eqs;
  for (const auto& [j, d] : designs) eqs.push_back(j);
  std::vector<LassoFit> s1(eqs.size());
  parallel_for(eqs.size(), opt.threads, [&](std::size_t i) {
    const int j = eqs[i];
    const LassoProblem p = make_problem(designs.at(j), j, plan.lambda(j), plan.loadings.values.at(static_cast<std::size_t>(j)));
    LassoFit f = solve_lasso(p, opt.solver);
    s1[i] = opt.post_lasso ? post_lasso_ols(f, p) : std::move(f);
  });
  for (std::size_t i = 0; i < eqs.size(); ++i) out.first_stage.emplace(eqs[i], std::move(s1[i]));

  const auto& ts = targets.targets();
  out.instruments.resize(ts.size());
  out.estimates.resize(ts.size());
  parallel_for(ts.size(), opt.threads, [&](std::size_t i) {
    const auto& t = ts[i];
    const auto& d = designs.at(t.equation);
    out.instruments[i] = fit_instrument(d, t, opt);
    out.estimates[i] = debias_target(d, t, out.first_stage.at(t.equation).coef, out.instruments[i], opt.method, plan.scheme);
  });
  return out;
}

}  // namespace srelasso
