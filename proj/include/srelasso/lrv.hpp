#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "srelasso/data_model.hpp"
#include "srelasso/error.hpp"

namespace srelasso {

/// Bartlett-kernel HAC settings. A negative bandwidth selects the automatic rule.
struct HacOptions {
  int bandwidth = -1;
};

/// floor(4 (n/100)^{2/9}).
inline int default_bandwidth(int n) {
  return static_cast<int>(std::floor(4.0 * std::pow(static_cast<double>(n) / 100.0, 2.0 / 9.0)));
}

inline int resolve_bandwidth(const HacOptions& opts, int n) {
  const int p = opts.bandwidth < 0 ? default_bandwidth(n) : opts.bandwidth;
  if (p >= n) throw ConfigError("HAC bandwidth " + std::to_string(p) + " must be smaller than n = " + std::to_string(n));
  return p;
}

/// Non-overlapping blocks of `block_size` observations; trailing
/// n - block_size * block_count observations are dropped.
struct BlockScheme {
  int block_size = 1;
  int block_count = 0;

  static BlockScheme make(int n, int block_size) {
    if (block_size < 1 || block_size > n)
      throw ConfigError("block size " + std::to_string(block_size) + " must lie in [1, " + std::to_string(n) + "]");
    return {block_size, n / block_size};
  }
  int used() const { return block_size * block_count; }
};

/// Bartlett-weighted long-run variance sum_{|l| <= p} k(l/p) gamma_l with
/// k(z) = 1 - |z|, autocovariances about the sample mean with divisor n.
/// Not clipped: callers clip negatives to zero.
inline double newey_west_lvar(const Eigen::Ref<const Eigen::VectorXd>& series, int bandwidth) {
  const Eigen::Index n = series.size();
  if (bandwidth < 0) throw ConfigError("HAC bandwidth must be >= 0");
  if (bandwidth >= n)
    throw ConfigError("HAC bandwidth " + std::to_string(bandwidth) + " must be smaller than n = " + std::to_string(n));
  const Eigen::VectorXd u = series.array() - series.mean();
  const double dn = static_cast<double>(n);
  double total = u.squaredNorm() / dn;
  for (int lag = 1; lag < bandwidth; ++lag) {
    const double weight = 1.0 - static_cast<double>(lag) / bandwidth;
    const double gamma = u.tail(n - lag).dot(u.head(n - lag)) / dn;
    total += 2.0 * weight * gamma;
  }
  return total;
}

/// Penalty loadings Psi_jk, ragged over equations.
struct LoadingMatrix {
  std::vector<Eigen::VectorXd> values;
  std::vector<std::vector<char>> floored;
  double floor = 0.0;
  int bandwidth = 0;

  int num_equations() const { return static_cast<int>(values.size()); }
  bool any_floored() const {
    for (const auto& f : floored)
      if (std::find(f.begin(), f.end(), char{1}) != f.end()) return true;
    return false;
  }
  int floored_count() const {
    int c = 0;
    for (const auto& f : floored) c += static_cast<int>(std::count(f.begin(), f.end(), char{1}));
    return c;
  }
};

/// sqrt(max(lvar(score column), floor)) for each equation's n x K_j score
/// matrix; floor = 1e-12 * (largest unfloored estimate, or 1 if all are zero).
inline LoadingMatrix loadings_from_scores(const std::vector<Eigen::MatrixXd>& scores, int bandwidth) {
  LoadingMatrix out;
  out.bandwidth = bandwidth;
  std::vector<Eigen::VectorXd> raw;
  double largest = 0.0;
  for (const auto& s : scores) {
    Eigen::VectorXd v(s.cols());
    for (Eigen::Index k = 0; k < s.cols(); ++k) v[k] = std::max(0.0, newey_west_lvar(s.col(k), bandwidth));
    if (v.size()) largest = std::max(largest, v.maxCoeff());
    raw.push_back(std::move(v));
  }
  out.floor = 1e-12 * (largest > 0.0 ? largest : 1.0);
  for (auto& v : raw) {
    std::vector<char> flags(static_cast<std::size_t>(v.size()), 0);
    for (Eigen::Index k = 0; k < v.size(); ++k) {
      if (v[k] < out.floor) {
        v[k] = out.floor;
        flags[static_cast<std::size_t>(k)] = 1;
      }
    }
    out.values.push_back(v.cwiseSqrt());
    out.floored.push_back(std::move(flags));
  }
  return out;
}

/// Elementwise X_{jk,t} * e_{j,t}.
inline Eigen::MatrixXd score_matrix(const Eigen::MatrixXd& x, const Eigen::VectorXd& e) {
  return x.array().colwise() * e.array();
}

/// Loadings Psi_jk = sqrt(lvar(X_{jk,t} e_{j,t})) from per-equation residuals,
/// using each equation's (centered) estimation design.
inline LoadingMatrix compute_loadings(const std::vector<EquationDesign>& designs,
                                      const std::vector<Eigen::VectorXd>& residuals, const HacOptions& opts) {
  if (designs.size() != residuals.size()) throw ConfigError("compute_loadings: one residual series per equation");
  std::vector<Eigen::MatrixXd> scores;
  scores.reserve(designs.size());
  int n = 0;
  for (std::size_t j = 0; j < designs.size(); ++j) {
    if (residuals[j].size() != designs[j].x.rows())
      throw ConfigError("compute_loadings: residual length mismatch in equation " + std::to_string(j));
    n = static_cast<int>(designs[j].x.rows());
    scores.push_back(score_matrix(designs[j].x, residuals[j]));
  }
  return loadings_from_scores(scores, resolve_bandwidth(opts, n));
}

inline LoadingMatrix compute_loadings(const PanelDataset& data, const std::vector<Eigen::VectorXd>& residuals,
                                      const HacOptions& opts) {
  std::vector<EquationDesign> designs;
  for (int j = 0; j < data.num_equations(); ++j) designs.push_back(make_design(data, j));
  return compute_loadings(designs, residuals, opts);
}

/// l_n x m matrix of within-block sums over the first b_n * l_n rows.
/// With `center`, columns are first centered by their full-sample mean.
inline Eigen::MatrixXd block_sums(const Eigen::MatrixXd& v, const BlockScheme& scheme, bool center) {
  if (scheme.block_size < 1 || scheme.used() > v.rows() || scheme.block_count < 1)
    throw ConfigError("block scheme (b_n = " + std::to_string(scheme.block_size) + ") does not fit " +
                      std::to_string(v.rows()) + " observations");
  Eigen::RowVectorXd mean = Eigen::RowVectorXd::Zero(v.cols());
  if (center) mean = v.colwise().mean();
  Eigen::MatrixXd sums(scheme.block_count, v.cols());
  for (int i = 0; i < scheme.block_count; ++i) {
    sums.row(i) = v.middleRows(static_cast<Eigen::Index>(i) * scheme.block_size, scheme.block_size).colwise().sum() -
                  static_cast<double>(scheme.block_size) * mean;
  }
  return sums;
}

/// (1/(b_n l_n)) sum_i s_i s_i' with s_i the centered within-block sums.
inline Eigen::MatrixXd block_sum_lrcov(const Eigen::MatrixXd& v, const BlockScheme& scheme) {
  if (v.cols() < 1) throw ConfigError("block_sum_lrcov: need at least one column");
  if (scheme.block_size > v.rows()) throw ConfigError("block size exceeds the number of observations");
  const Eigen::MatrixXd s = block_sums(v, scheme, true);
  Eigen::MatrixXd cov = (s.transpose() * s) / static_cast<double>(scheme.used());
  return 0.5 * (cov + cov.transpose());
}

struct OmegaEstimate {
  double value = 0.0;
  bool floored = false;
};

/// Block-sum long-run variance of a score series, floored away from zero.
inline OmegaEstimate omega_jk(const Eigen::VectorXd& scores, const BlockScheme& scheme) {
  const double v = block_sum_lrcov(scores, scheme)(0, 0);
  const double floor = 1e-12 * (v > 0.0 ? v : 1.0);
  if (!(v >= floor)) return {floor, true};
  return {v, false};
}

}  // namespace srelasso
