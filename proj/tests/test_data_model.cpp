#include <gtest/gtest.h>

#include <random>
#include <sstream>

#include "srelasso/srelasso.hpp"

using namespace srelasso;

namespace {

PanelDataset single_equation(const Eigen::MatrixXd& x) {
  Eigen::MatrixXd y = Eigen::MatrixXd::Zero(x.rows(), 1);
  std::vector<int> cols;
  for (int k = 0; k < x.cols(); ++k) cols.push_back(k);
  return PanelDataset(y, x, {{0, cols, false}});
}

PanelDataset from_csv(const std::string& text, const PanelSchema& schema) {
  std::istringstream in(text);
  return panel_from_table(read_csv_table(in), schema);
}

}  // namespace

TEST(PredictionNorm, ZeroDeltaIsZero) {
  Eigen::MatrixXd x(4, 2);
  x << 1, 2, 3, 4, 5, 6, 7, 8;
  EXPECT_EQ(prediction_norm(CoefVector(0, Eigen::VectorXd::Zero(2)), single_equation(x)), 0.0);
}

TEST(PredictionNorm, ConstantDesignGivesAbsoluteValue) {
  const Eigen::MatrixXd x = Eigen::MatrixXd::Ones(6, 1);
  EXPECT_DOUBLE_EQ(prediction_norm(CoefVector(0, Eigen::VectorXd::Constant(1, -2.5)), single_equation(x)), 2.5);
}

TEST(PredictionNorm, HandComputedThreeRows) {
  Eigen::MatrixXd x(3, 1);
  x << 1, 2, 3;
  EXPECT_DOUBLE_EQ(prediction_norm(CoefVector(0, Eigen::VectorXd::Ones(1)), single_equation(x)), std::sqrt(14.0 / 3.0));
}

TEST(PredictionNorm, MatchesBruteForceLoop) {
  std::mt19937_64 g(1);
  std::normal_distribution<double> z;
  std::uniform_int_distribution<int> nd(4, 20), kd(1, 5);
  for (int rep = 0; rep < 200; ++rep) {
    const int n = nd(g), k = kd(g);
    Eigen::MatrixXd x(n, k);
    Eigen::VectorXd delta(k);
    for (int t = 0; t < n; ++t)
      for (int c = 0; c < k; ++c) x(t, c) = z(g);
    for (int c = 0; c < k; ++c) delta[c] = z(g);
    double ss = 0.0;
    for (int t = 0; t < n; ++t) {
      double f = 0.0;
      for (int c = 0; c < k; ++c) f += x(t, c) * delta[c];
      ss += f * f;
    }
    EXPECT_DOUBLE_EQ(prediction_norm(CoefVector(0, delta), single_equation(x)), std::sqrt(ss / n));
  }
}

TEST(PredictionNorm, RejectsLengthMismatch) {
  const Eigen::MatrixXd x = Eigen::MatrixXd::Ones(5, 2);
  EXPECT_THROW(prediction_norm(CoefVector(0, Eigen::VectorXd::Ones(3)), single_equation(x)), ConfigError);
}

TEST(EuclideanNorm, SmallCases) {
  EXPECT_EQ(euclidean_norm(CoefVector(0, Eigen::VectorXd::Zero(3))), 0.0);
  Eigen::VectorXd v(2);
  v << 3, 4;
  EXPECT_DOUBLE_EQ(euclidean_norm(CoefVector(0, v)), 5.0);
  EXPECT_DOUBLE_EQ(euclidean_norm(CoefVector(0, Eigen::VectorXd::Ones(4))), 2.0);
}

TEST(CoefVector, SupportListsNonzeros) {
  Eigen::VectorXd v(5);
  v << 0, 1.5, 0, -2, 0;
  EXPECT_EQ(CoefVector(0, v).support(), (std::vector<int>{1, 3}));
}

TEST(PanelDataset, RejectsDuplicateCovariateIndex) {
  const Eigen::MatrixXd x = Eigen::MatrixXd::Ones(5, 3);
  const Eigen::MatrixXd y = Eigen::MatrixXd::Zero(5, 1);
  EXPECT_THROW(PanelDataset(y, x, {{0, {0, 2, 0}, true}}), ConfigError);
}

TEST(PanelDataset, RejectsNonFiniteValues) {
  Eigen::MatrixXd x = Eigen::MatrixXd::Ones(5, 2);
  x(2, 1) = std::nan("");
  EXPECT_THROW(PanelDataset(Eigen::MatrixXd::Zero(5, 1), x, {{0, {0, 1}, true}}), DataError);
}

TEST(PanelDataset, ResponseCannotBeOwnContemporaneousCovariate) {
  EXPECT_THROW(from_csv("a,b\n1,2\n2,3\n3,5\n4,1\n5,0\n", {{}, {{"a", {"a", "b"}, true}}}), ConfigError);
}

TEST(TargetSet, RejectsOutOfRangeAndDuplicates) {
  const Eigen::MatrixXd x = Eigen::MatrixXd::Ones(5, 3);
  const PanelDataset d(Eigen::MatrixXd::Zero(5, 1), x, {{0, {0, 1, 2}, true}});
  EXPECT_THROW(TargetSet({{0, 3}}, d), ConfigError);
  EXPECT_THROW(TargetSet({{1, 0}}, d), ConfigError);
  EXPECT_THROW(TargetSet({{0, 1}, {0, 1}}, d), ConfigError);
  EXPECT_EQ(TargetSet({{0, 1}, {0, 2}}, d).size(), 2u);
}

TEST(Csv, FiveRowsTwoColumnsNoLags) {
  const auto d = from_csv("y,x\n1,2\n2,3\n3,5\n4,1\n5,0\n", {{}, {{"y", {"x"}, true}}});
  EXPECT_EQ(d.n(), 5);
  EXPECT_EQ(d.pool_size(), 2);
  EXPECT_EQ(d.covariate_name(0, 0), "x");
}

TEST(Csv, LagOrderOneDropsOneRow) {
  const auto d = from_csv("y,x\n1,2\n2,3\n3,5\n4,1\n5,0\n", {{{"y", 1}}, {{"y", {"x", "y_lag1"}, true}}});
  EXPECT_EQ(d.n(), 4);
  EXPECT_EQ(d.pool_size(), 3);
  EXPECT_EQ(d.response(0)[0], 2.0);
  EXPECT_EQ(d.design(0)(0, 1), 1.0);  // y_{t-1}
  EXPECT_EQ(d.design(0)(3, 1), 4.0);
}

TEST(Csv, ErrorsNameTheProblem) {
  const PanelSchema schema{{}, {{"y", {"x"}, true}}};
  try {
    from_csv("y,x\n1,2\n2,abc\n3,5\n4,1\n5,0\n", schema);
    FAIL();
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("abc"), std::string::npos);
  }
  EXPECT_THROW(from_csv("y,x\n1,2\n2\n", schema), DataError);
  EXPECT_THROW(from_csv("y,y\n1,2\n", schema), DataError);
  EXPECT_THROW(from_csv("y,x\n1,2\n2,3\n3,5\n4,1\n5,0\n", {{}, {{"y", {"z"}, true}}}), DataError);
  EXPECT_THROW(from_csv("y,x\n1,2\n2,3\n3,5\n", {{{"x", 2}}, {{"y", {"x"}, true}}}), DataError);
  EXPECT_THROW(from_csv("", schema), DataError);
}

TEST(Csv, ToleratesBomQuotesAndBlankLines) {
  const auto d = from_csv("\xEF\xBB\xBF\"y\",x\n1,2\n\n2,3\n3,+5\n4,1e0\n5,0\n", {{}, {{"y", {"x"}, true}}});
  EXPECT_EQ(d.n(), 5);
  EXPECT_EQ(d.design(0)(2, 0), 5.0);
}

TEST(Csv, RoundTripIsBitExact) {
  std::mt19937_64 g(3);
  std::normal_distribution<double> z;
  Eigen::MatrixXd pool(30, 4);
  for (int t = 0; t < 30; ++t)
    for (int c = 0; c < 4; ++c) pool(t, c) = z(g) * std::pow(10.0, c * 3 - 4);
  const PanelDataset d(pool.col(0), pool, {{0, {1, 2, 3}, true}}, {"a"}, {"a", "b", "c", "d"});
  std::stringstream ss;
  write_panel_csv(ss, d);
  const auto back = panel_from_table(read_csv_table(ss), {{}, {{"a", {"b", "c", "d"}, true}}});
  EXPECT_TRUE((back.covariate_pool().array() == pool.array()).all());
  EXPECT_TRUE((back.response(0).array() == pool.col(0).array()).all());
}

TEST(Design, InterceptCentersColumns) {
  const auto d = from_csv("y,x\n1,2\n2,3\n3,5\n4,1\n5,0\n", {{}, {{"y", {"x"}, true}}});
  const auto des = make_design(d, 0);
  EXPECT_NEAR(des.x.col(0).mean(), 0.0, 1e-15);
  EXPECT_NEAR(des.y.mean(), 0.0, 1e-15);
  EXPECT_DOUBLE_EQ(des.y_mean, 3.0);
  const auto raw = make_design(from_csv("y,x\n1,2\n2,3\n3,5\n4,1\n5,0\n", {{}, {{"y", {"x"}, false}}}), 0);
  EXPECT_EQ(raw.y[0], 1.0);
}

TEST(Dataset, SliceRowsKeepsStructure) {
  const auto d = from_csv("y,x\n1,2\n2,3\n3,5\n4,1\n5,0\n6,1\n7,7\n8,8\n", {{}, {{"y", {"x"}, true}}});
  const auto s = d.slice_rows(2, 7);
  EXPECT_EQ(s.n(), 5);
  EXPECT_EQ(s.response(0)[0], 3.0);
  EXPECT_EQ(s.response_name(0), "y");
}
