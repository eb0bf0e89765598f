#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "srelasso/error.hpp"

namespace srelasso {

/// Maps one regression equation onto the dataset: which response it explains
/// and which pool columns act as its covariates.
struct EquationSpec {
  int response_index = 0;
  std::vector<int> covariate_indices;
  bool intercept = true;
};

/// Time-indexed observations of J responses and a pool of P covariates.
/// Immutable after construction.
class PanelDataset {
 public:
  PanelDataset() = default;

  PanelDataset(Eigen::MatrixXd responses, Eigen::MatrixXd pool, std::vector<EquationSpec> specs,
               std::vector<std::string> response_names = {},
               std::vector<std::string> pool_names = {})
      : responses_(std::move(responses)),
        pool_(std::move(pool)),
        specs_(std::move(specs)),
        response_names_(std::move(response_names)),
        pool_names_(std::move(pool_names)) {
    validate();
  }

  int n() const { return static_cast<int>(responses_.rows()); }
  int num_responses() const { return static_cast<int>(responses_.cols()); }
  int num_equations() const { return static_cast<int>(specs_.size()); }
  int pool_size() const { return static_cast<int>(pool_.cols()); }

  const Eigen::MatrixXd& responses() const { return responses_; }
  const Eigen::MatrixXd& covariate_pool() const { return pool_; }
  const std::vector<EquationSpec>& equations() const { return specs_; }
  const EquationSpec& equation(int j) const { return specs_.at(static_cast<std::size_t>(j)); }
  int num_covariates(int j) const { return static_cast<int>(equation(j).covariate_indices.size()); }

  const std::vector<std::string>& response_names() const { return response_names_; }
  const std::vector<std::string>& pool_names() const { return pool_names_; }

  std::string response_name(int j) const {
    const int r = equation(j).response_index;
    return response_names_.empty() ? "y" + std::to_string(r + 1) : response_names_[static_cast<std::size_t>(r)];
  }
  std::string covariate_name(int j, int k) const {
    const int p = equation(j).covariate_indices.at(static_cast<std::size_t>(k));
    return pool_names_.empty() ? "x" + std::to_string(p + 1) : pool_names_[static_cast<std::size_t>(p)];
  }

  Eigen::VectorXd response(int j) const { return responses_.col(equation(j).response_index); }

  /// Raw (uncentered) n x K_j design of equation j.
  Eigen::MatrixXd design(int j) const {
    const auto& idx = equation(j).covariate_indices;
    Eigen::MatrixXd x(n(), static_cast<Eigen::Index>(idx.size()));
    for (std::size_t k = 0; k < idx.size(); ++k) x.col(static_cast<Eigen::Index>(k)) = pool_.col(idx[k]);
    return x;
  }

  /// Rows [begin, end) as a new dataset with the same equations.
  PanelDataset slice_rows(int begin, int end) const {
    if (begin < 0 || end > n() || end - begin < 4)
      throw ConfigError("row slice [" + std::to_string(begin) + ", " + std::to_string(end) + ") is invalid");
    return PanelDataset(responses_.middleRows(begin, end - begin), pool_.middleRows(begin, end - begin), specs_,
                        response_names_, pool_names_);
  }

 private:
  void validate() const {
    if (responses_.rows() < 2) throw DataError("dataset needs at least 2 observations");
    if (pool_.rows() != responses_.rows())
      throw DataError("responses and covariate pool differ in observation count");
    if (!responses_.allFinite() || !pool_.allFinite()) throw DataError("dataset contains non-finite values");
    if (!response_names_.empty() && static_cast<Eigen::Index>(response_names_.size()) != responses_.cols())
      throw ConfigError("response name count does not match response columns");
    if (!pool_names_.empty() && static_cast<Eigen::Index>(pool_names_.size()) != pool_.cols())
      throw ConfigError("pool name count does not match pool columns");
    for (std::size_t j = 0; j < specs_.size(); ++j) {
      const auto& spec = specs_[j];
      const std::string where = "equation " + std::to_string(j);
      if (spec.response_index < 0 || spec.response_index >= responses_.cols())
        throw ConfigError(where + ": response index out of range");
      if (spec.covariate_indices.empty()) throw ConfigError(where + ": no covariates");
      std::set<int> seen;
      for (int p : spec.covariate_indices) {
        if (p < 0 || p >= pool_.cols()) throw ConfigError(where + ": covariate index " + std::to_string(p) + " out of range");
        if (!seen.insert(p).second) throw ConfigError(where + ": duplicate covariate index " + std::to_string(p));
        if (!pool_names_.empty() && !response_names_.empty() &&
            pool_names_[static_cast<std::size_t>(p)] == response_names_[static_cast<std::size_t>(spec.response_index)])
          throw ConfigError(where + ": response '" + pool_names_[static_cast<std::size_t>(p)] +
                            "' cannot be its own contemporaneous covariate");
      }
    }
  }

  Eigen::MatrixXd responses_;
  Eigen::MatrixXd pool_;
  std::vector<EquationSpec> specs_;
  std::vector<std::string> response_names_;
  std::vector<std::string> pool_names_;
};

/// A coefficient (j, k): equation j, position k within that equation's covariates.
struct Target {
  int equation = 0;
  int covariate = 0;
  friend bool operator==(const Target&, const Target&) = default;
  friend auto operator<=>(const Target&, const Target&) = default;
};

/// Group G of coefficients under simultaneous inference.
class TargetSet {
 public:
  TargetSet() = default;
  TargetSet(std::vector<Target> targets, const PanelDataset& data) : targets_(std::move(targets)) {
    std::set<Target> seen;
    for (const auto& t : targets_) {
      if (t.equation < 0 || t.equation >= data.num_equations())
        throw ConfigError("target equation " + std::to_string(t.equation) + " out of range");
      if (t.covariate < 0 || t.covariate >= data.num_covariates(t.equation))
        throw ConfigError("target covariate " + std::to_string(t.covariate) + " out of range for equation " +
                          std::to_string(t.equation));
      if (!seen.insert(t).second) throw ConfigError("duplicate target");
    }
  }
  const std::vector<Target>& targets() const { return targets_; }
  std::size_t size() const { return targets_.size(); }
  bool empty() const { return targets_.empty(); }

 private:
  std::vector<Target> targets_;
};

/// Coefficients of one equation together with their exact support.
class CoefVector {
 public:
  CoefVector() = default;
  CoefVector(int equation, Eigen::VectorXd values) : equation_(equation), values_(std::move(values)) {
    for (Eigen::Index k = 0; k < values_.size(); ++k)
      if (values_[k] != 0.0) support_.push_back(static_cast<int>(k));
  }

  int equation() const { return equation_; }
  const Eigen::VectorXd& values() const { return values_; }
  double operator[](Eigen::Index k) const { return values_[k]; }
  const std::vector<int>& support() const { return support_; }
  Eigen::Index size() const { return values_.size(); }

 private:
  int equation_ = 0;
  Eigen::VectorXd values_;
  std::vector<int> support_;
};

/// The estimation view of one equation: centered when the equation carries an intercept.
struct EquationDesign {
  Eigen::MatrixXd x;
  Eigen::VectorXd y;
  Eigen::RowVectorXd x_mean;
  double y_mean = 0.0;
  bool intercept = true;
};

inline EquationDesign make_design(const PanelDataset& data, int j) {
  EquationDesign d;
  d.x = data.design(j);
  d.y = data.response(j);
  d.intercept = data.equation(j).intercept;
  if (d.intercept) {
    d.x_mean = d.x.colwise().mean();
    d.y_mean = d.y.mean();
    d.x.rowwise() -= d.x_mean;
    d.y.array() -= d.y_mean;
  } else {
    d.x_mean = Eigen::RowVectorXd::Zero(d.x.cols());
  }
  return d;
}

/// [ (1/n) sum_t (X_{j,t}' delta)^2 ]^{1/2} on the raw covariates of equation delta.equation().
inline double prediction_norm(const CoefVector& delta, const PanelDataset& data) {
  const int j = delta.equation();
  if (j < 0 || j >= data.num_equations()) throw ConfigError("prediction_norm: equation out of range");
  if (delta.size() != data.num_covariates(j))
    throw ConfigError("prediction_norm: coefficient length " + std::to_string(delta.size()) +
                      " does not match equation " + std::to_string(j) + " with " +
                      std::to_string(data.num_covariates(j)) + " covariates");
  const Eigen::VectorXd fitted = data.design(j) * delta.values();
  return std::sqrt(fitted.squaredNorm() / data.n());
}

inline double euclidean_norm(const CoefVector& delta) { return delta.values().norm(); }

}  // namespace srelasso
