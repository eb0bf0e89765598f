#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <map>
#include <ostream>
#include <string>
#include <vector>

#include "srelasso/csv_io.hpp"
#include "srelasso/data_model.hpp"
#include "srelasso/debias.hpp"
#include "srelasso/error.hpp"
#include "srelasso/lrv.hpp"
#include "srelasso/parallel.hpp"
#include "srelasso/penalty.hpp"
#include "srelasso/rng.hpp"

namespace srelasso {

/// Bootstrap draws of the pivots (B x |G|) and the derived critical values.
struct BootCriticalValues {
  std::vector<Target> targets;
  Eigen::MatrixXd draws;       // T*_jk, one column per target
  Eigen::VectorXd q_individual;
  double q_joint = 0.0;
  double alpha = 0.05;
  int draws_count = 0;
  int block_size = 1;
  std::uint64_t seed = 0;
};

namespace detail {

inline void fill_quantiles(BootCriticalValues& crit) {
  const Eigen::MatrixXd abs_draws = crit.draws.cwiseAbs();
  crit.q_individual.resize(abs_draws.cols());
  for (Eigen::Index c = 0; c < abs_draws.cols(); ++c) crit.q_individual[c] = upper_quantile(abs_draws.col(c), crit.alpha);
  crit.q_joint = upper_quantile(abs_draws.rowwise().maxCoeff(), crit.alpha);
}

/// Targets grouped by equation, keeping each target's column position.
inline std::map<int, std::vector<std::size_t>> columns_by_equation(const std::vector<Target>& targets) {
  std::map<int, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < targets.size(); ++i) groups[targets[i].equation].push_back(i);
  return groups;
}

}  // namespace detail

/// Block multiplier bootstrap of the pivots:
///   T*_jk = m^{-1/2} sum_i e_{j,i} sum_{l in block i} zeta_{jk,l},
/// m = b_n l_n (equal to n when b_n divides n), matching the divisor of the
/// block-sum variance behind sigma. One multiplier per (draw, equation, block),
/// shared by the targets of an equation.
inline BootCriticalValues bootstrap_pivots(const std::vector<DebiasedEstimate>& estimates, const BlockScheme& scheme,
                                           int draws, double alpha, std::uint64_t seed, int threads = 1) {
  if (estimates.empty()) throw ConfigError("bootstrap_pivots: no estimates");
  if (scheme.block_count < 2) throw ConfigError("block scheme leaves fewer than 2 blocks");
  if (draws < 1) throw ConfigError("bootstrap_pivots: draws must be positive");
  if (!(alpha > 0.0 && alpha < 1.0)) throw ConfigError("alpha must lie in (0, 1)");
  const Eigen::Index n = estimates.front().zeta_series.size();
  for (const auto& e : estimates)
    if (e.zeta_series.size() != n) throw ConfigError("bootstrap_pivots: zeta series lengths differ");
  if (scheme.used() > n) throw ConfigError("bootstrap_pivots: block scheme does not fit the sample");

  BootCriticalValues crit;
  crit.alpha = alpha;
  crit.draws_count = draws;
  crit.block_size = scheme.block_size;
  crit.seed = seed;
  for (const auto& e : estimates) crit.targets.push_back(e.target);
  crit.draws.resize(draws, static_cast<Eigen::Index>(estimates.size()));

  const auto groups = detail::columns_by_equation(crit.targets);
  std::vector<std::pair<int, std::vector<std::size_t>>> work(groups.begin(), groups.end());
  const double root_n = std::sqrt(static_cast<double>(scheme.used()));
  parallel_for(work.size(), threads, [&](std::size_t g) {
    const auto& [equation, cols] = work[g];
    Eigen::MatrixXd zeta(n, static_cast<Eigen::Index>(cols.size()));
    for (std::size_t c = 0; c < cols.size(); ++c) zeta.col(static_cast<Eigen::Index>(c)) = estimates[cols[c]].zeta_series;
    const Eigen::MatrixXd sums = block_sums(zeta, scheme, false);
    const Eigen::MatrixXd e = block_multipliers(seed, rng::Tag::PivotBootstrap, equation, draws, scheme.block_count);
    const Eigen::MatrixXd t = (e * sums) / root_n;
    for (std::size_t c = 0; c < cols.size(); ++c)
      crit.draws.col(static_cast<Eigen::Index>(cols[c])) = t.col(static_cast<Eigen::Index>(c));
  });
  detail::fill_quantiles(crit);
  return crit;
}

/// Residual multiplier bootstrap: Y* = X beta1 + e_{j,i} eps_hat with
/// block-shared multipliers; S1 and S3 are recomputed on each draw while the
/// instruments stay fixed. T* = sqrt(n) (beta2* - beta1_jk) / sigma*.
/// Observations after the last full block reuse the last block's multiplier.
inline BootCriticalValues residual_bootstrap_pivots(const PanelDataset& data, const AlgorithmResult& fit,
                                                    const PenaltyPlan& plan, const DebiasOptions& opt, int draws,
                                                    double alpha, std::uint64_t seed) {
  if (fit.estimates.empty()) throw ConfigError("residual bootstrap: no estimates");
  const BlockScheme& scheme = plan.scheme;
  if (scheme.block_count < 2) throw ConfigError("block scheme leaves fewer than 2 blocks");
  const int n = data.n();
  const double root_n = std::sqrt(static_cast<double>(n));

  BootCriticalValues crit;
  crit.alpha = alpha;
  crit.draws_count = draws;
  crit.block_size = scheme.block_size;
  crit.seed = seed;
  for (const auto& e : fit.estimates) crit.targets.push_back(e.target);
  crit.draws.resize(draws, static_cast<Eigen::Index>(fit.estimates.size()));

  std::map<int, EquationDesign> designs;
  for (const auto& [j, f] : fit.first_stage) designs.emplace(j, make_design(data, j));
  const auto groups = detail::columns_by_equation(crit.targets);

  parallel_for(static_cast<std::size_t>(draws), opt.threads, [&](std::size_t b) {
    for (const auto& [j, cols] : groups) {
      const LassoFit& s1 = fit.first_stage.at(j);
      rng::Stream s(seed, rng::Tag::ResidualBootstrap, b, static_cast<std::uint64_t>(j));
      Eigen::VectorXd mult(n);
      double e = 0.0;
      for (int t = 0; t < n; ++t) {
        if (t % scheme.block_size == 0 && t / scheme.block_size < scheme.block_count) e = s.normal();
        mult[t] = e;
      }
      EquationDesign d = designs.at(j);
      d.y = d.x * s1.coef.values() + s1.residuals.cwiseProduct(mult);
      d.y.array() -= d.y.mean() * (d.intercept ? 1.0 : 0.0);
      LassoProblem p = make_problem(d, j, plan.lambda(j), plan.loadings.values.at(static_cast<std::size_t>(j)));
      LassoFit f = solve_lasso(p, opt.solver, &s1.coef.values());
      if (opt.post_lasso) f = post_lasso_ols(f, p);
      for (std::size_t c : cols) {
        const auto& inst = fit.instruments[c];
        const auto est = debias_target(d, inst.target, f.coef, inst, opt.method, scheme);
        crit.draws(static_cast<Eigen::Index>(b), static_cast<Eigen::Index>(c)) =
            root_n * (est.beta2 - s1.coef[inst.target.covariate]) / est.sigma;
      }
    }
  });
  detail::fill_quantiles(crit);
  return crit;
}

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
  bool contains(double v) const { return lo <= v && v <= hi; }
};

struct TargetReport {
  Target target;
  std::string equation_name;
  std::string covariate_name;
  double estimate = 0.0;
  double null_value = 0.0;
  double se = 0.0;  // sigma / sqrt(n)
  double t_stat = 0.0;
  double q_individual = 0.0;
  double q_joint = 0.0;
  Interval ci_asymptotic;
  Interval ci_bootstrap;
  Interval ci_simultaneous;
  bool reject_asymptotic = false;
  bool reject_bootstrap = false;
  bool reject_simultaneous = false;
  bool reject_stepdown = false;
};

struct ConfidenceReport {
  std::vector<TargetReport> rows;
  bool reject_joint = false;
  std::string method;
  double alpha = 0.05;
  int draws = 0;
  int block_size = 1;
  std::uint64_t seed = 0;
  int stepdown_iterations = 0;
  std::vector<std::string> diagnostics;
};

struct StepdownResult {
  std::vector<bool> rejected;
  int iterations = 0;
};

/// Romano-Wolf step-down on |T| against max-|T*| quantiles over the
/// still-unrejected targets.
inline StepdownResult stepdown_multiple_test(const Eigen::VectorXd& t_stats, const Eigen::MatrixXd& draws, double alpha) {
  if (t_stats.size() != draws.cols()) throw ConfigError("stepdown: statistic and draw counts differ");
  StepdownResult out;
  out.rejected.assign(static_cast<std::size_t>(t_stats.size()), false);
  const Eigen::MatrixXd abs_draws = draws.cwiseAbs();
  std::vector<Eigen::Index> active;
  for (Eigen::Index c = 0; c < t_stats.size(); ++c) active.push_back(c);
  while (!active.empty()) {
    ++out.iterations;
    Eigen::VectorXd row_max = Eigen::VectorXd::Zero(draws.rows());
    for (Eigen::Index c : active) row_max = row_max.cwiseMax(abs_draws.col(c));
    const double q = upper_quantile(row_max, alpha);
    std::vector<Eigen::Index> remaining;
    for (Eigen::Index c : active) {
      if (std::abs(t_stats[c]) > q)
        out.rejected[static_cast<std::size_t>(c)] = true;
      else
        remaining.push_back(c);
    }
    if (remaining.size() == active.size()) break;
    active = std::move(remaining);
  }
  return out;
}

/// Asymptotic, individual bootstrap and simultaneous intervals plus tests of
/// beta_jk = null. `nulls` may be empty (all zero).
inline ConfidenceReport build_report(const std::vector<DebiasedEstimate>& estimates, const BootCriticalValues& crit,
                                     double alpha, const std::vector<double>& nulls = {},
                                     const PanelDataset* data = nullptr) {
  if (estimates.size() != crit.targets.size()) throw ConfigError("build_report: target sets differ");
  if (!nulls.empty() && nulls.size() != estimates.size()) throw ConfigError("build_report: one null value per target");
  ConfidenceReport rep;
  rep.alpha = alpha;
  rep.draws = crit.draws_count;
  rep.block_size = crit.block_size;
  rep.seed = crit.seed;
  if (!estimates.empty()) rep.method = to_string(estimates.front().method);
  const double z = normal_quantile(1.0 - alpha / 2.0);

  Eigen::VectorXd t_stats(static_cast<Eigen::Index>(estimates.size()));
  double max_t = 0.0;
  for (std::size_t i = 0; i < estimates.size(); ++i) {
    const auto& e = estimates[i];
    if (!(e.target == crit.targets[i])) throw ConfigError("build_report: target sets differ");
    TargetReport r;
    r.target = e.target;
    r.equation_name = data ? data->response_name(e.target.equation) : std::to_string(e.target.equation);
    r.covariate_name = data ? data->covariate_name(e.target.equation, e.target.covariate) : std::to_string(e.target.covariate);
    r.estimate = e.beta2;
    r.null_value = nulls.empty() ? 0.0 : nulls[i];
    const double root_n = std::sqrt(static_cast<double>(e.n()));
    r.se = e.sigma / root_n;
    r.t_stat = root_n * (e.beta2 - r.null_value) / e.sigma;
    r.q_individual = crit.q_individual[static_cast<Eigen::Index>(i)];
    r.q_joint = crit.q_joint;
    r.ci_asymptotic = {e.beta2 - r.se * z, e.beta2 + r.se * z};
    r.ci_bootstrap = {e.beta2 - r.se * r.q_individual, e.beta2 + r.se * r.q_individual};
    r.ci_simultaneous = {e.beta2 - r.se * r.q_joint, e.beta2 + r.se * r.q_joint};
    r.reject_asymptotic = std::abs(r.t_stat) > z;
    r.reject_bootstrap = std::abs(r.t_stat) > r.q_individual;
    r.reject_simultaneous = std::abs(r.t_stat) > r.q_joint;
    t_stats[static_cast<Eigen::Index>(i)] = r.t_stat;
    max_t = std::max(max_t, std::abs(r.t_stat));
    for (const auto& d : e.diagnostics) rep.diagnostics.push_back("(" + r.equation_name + ", " + r.covariate_name + "): " + d);
    rep.rows.push_back(std::move(r));
  }
  rep.reject_joint = max_t > crit.q_joint;
  const auto sd = stepdown_multiple_test(t_stats, crit.draws, alpha);
  rep.stepdown_iterations = sd.iterations;
  for (std::size_t i = 0; i < rep.rows.size(); ++i) rep.rows[i].reject_stepdown = sd.rejected[i];
  return rep;
}

inline void write_report_csv(std::ostream& out, const ConfidenceReport& rep) {
  out << "equation,covariate,method,estimate,se,T,q_ind,q_sim,ci_asy_lo,ci_asy_hi,ci_boot_lo,ci_boot_hi,ci_sim_lo,"
         "ci_sim_hi,reject_asy,reject_boot,reject_sim,reject_stepdown\n";
  for (const auto& r : rep.rows) {
    out << r.equation_name << ',' << r.covariate_name << ',' << rep.method;
    for (double v : {r.estimate, r.se, r.t_stat, r.q_individual, r.q_joint, r.ci_asymptotic.lo, r.ci_asymptotic.hi,
                     r.ci_bootstrap.lo, r.ci_bootstrap.hi, r.ci_simultaneous.lo, r.ci_simultaneous.hi})
      out << ',' << format_double(v);
    out << ',' << r.reject_asymptotic << ',' << r.reject_bootstrap << ',' << r.reject_simultaneous << ','
        << r.reject_stepdown << '\n';
  }
}

inline void write_report_markdown(std::ostream& out, const ConfidenceReport& rep) {
  auto f4 = [](double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4f", v);
    return std::string(buf);
  };
  auto ci = [&](const Interval& i) { return "[" + f4(i.lo) + ", " + f4(i.hi) + "]"; };
  out << "# Inference report\n\n";
  out << "method " << rep.method << ", alpha " << f4(rep.alpha) << ", draws " << rep.draws << ", block size "
      << rep.block_size << ", seed " << rep.seed << "\n\n";
  out << "| equation | covariate | estimate | se | T | asymptotic CI | bootstrap CI | simultaneous CI | reject (asy/boot/sim/step) |\n";
  out << "|---|---|---|---|---|---|---|---|---|\n";
  for (const auto& r : rep.rows) {
    out << "| " << r.equation_name << " | " << r.covariate_name << " | " << f4(r.estimate) << " | " << f4(r.se) << " | "
        << f4(r.t_stat) << " | " << ci(r.ci_asymptotic) << " | " << ci(r.ci_bootstrap) << " | " << ci(r.ci_simultaneous)
        << " | " << r.reject_asymptotic << '/' << r.reject_bootstrap << '/' << r.reject_simultaneous << '/'
        << r.reject_stepdown << " |\n";
  }
  out << "\nJoint null rejected: " << (rep.reject_joint ? "yes" : "no") << "\n";
  if (!rep.diagnostics.empty()) {
    out << "\nDiagnostics:\n";
    for (const auto& d : rep.diagnostics) out << "- " << d << '\n';
  }
}

}  // namespace srelasso
