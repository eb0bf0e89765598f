#include <gtest/gtest.h>

#include <random>

#include "srelasso/srelasso.hpp"
#include "support/properties.hpp"

using namespace srelasso;

namespace {

struct Instance {
  std::vector<EquationDesign> designs;
  std::vector<Eigen::VectorXd> residuals;
  LoadingMatrix loadings;
};

Instance random_instance(std::uint64_t seed, int equations, int n, int k) {
  std::mt19937_64 g(seed);
  Instance in;
  for (int j = 0; j < equations; ++j) {
    EquationDesign d;
    d.x = props::gaussian_matrix(g, n, k);
    d.y = props::gaussian_matrix(g, n, 1);
    d.x_mean = Eigen::VectorXd::Zero(k);
    in.residuals.push_back(d.y);
    in.designs.push_back(std::move(d));
  }
  in.loadings = compute_loadings(in.designs, in.residuals, HacOptions{0});
  return in;
}

PanelDataset noise_panel(std::uint64_t seed, int equations, int n, int k, double signal = 0.0) {
  std::mt19937_64 g(seed);
  const Eigen::MatrixXd pool = props::gaussian_matrix(g, n, k);
  Eigen::MatrixXd y = props::gaussian_matrix(g, n, equations);
  y.col(0) += signal * pool.col(0);
  std::vector<int> cols(static_cast<std::size_t>(k));
  for (int c = 0; c < k; ++c) cols[static_cast<std::size_t>(c)] = c;
  std::vector<EquationSpec> specs;
  for (int j = 0; j < equations; ++j) specs.push_back({j, cols, true});
  return PanelDataset(y, pool, specs);
}

}  // namespace

TEST(CanonicalLambda, KnownValues) {
  EXPECT_NEAR(lambda_gaussian_canonical(0.05, 1.1, 100, 1, 1), 22.0 * 1.959963984540054, 1e-9);
  EXPECT_NEAR(lambda_gaussian_canonical(0.05, 1.1, 100, 1, 1), 43.119, 1e-3);
  EXPECT_NEAR(lambda_gaussian_canonical(0.9999, 1.1, 100, 1, 1), 22.0 * props::phi_inv(0.50005), 1e-12);
  EXPECT_NEAR(lambda_gaussian_canonical(0.9999, 1.1, 100, 1, 1), 0.0028, 1e-4);
}

TEST(CanonicalLambda, IncreasesWithDimension) {
  double prev = 0.0;
  for (int k = 1; k <= 1024; k *= 2) {
    const double l = lambda_gaussian_canonical(0.1, 1.1, 100, k, 3);
    EXPECT_GT(l, prev);
    prev = l;
  }
}

TEST(CanonicalLambda, RejectsBadArguments) {
  EXPECT_THROW(lambda_gaussian_canonical(0.0, 1.1, 100, 1, 1), ConfigError);
  EXPECT_THROW(lambda_gaussian_canonical(0.5, 0.0, 100, 1, 1), ConfigError);
  EXPECT_THROW(lambda_gaussian_canonical(0.5, 1.1, 0, 1, 1), ConfigError);
}

TEST(UpperQuantile, OrderStatistic) {
  Eigen::VectorXd v(10);
  v << 10, 9, 8, 7, 6, 5, 4, 3, 2, 1;
  EXPECT_EQ(upper_quantile(v, 0.1), 9.0);
  EXPECT_EQ(upper_quantile(v, 0.05), 10.0);
  EXPECT_EQ(upper_quantile(v, 0.5), 5.0);
  EXPECT_EQ(upper_quantile(v, 0.99), 1.0);
}

TEST(BootstrapPenalty, ZeroResidualsAreDegenerate) {
  auto in = random_instance(1, 2, 40, 5);
  for (auto& r : in.residuals) r.setZero();
  const auto [plan, draws] = bootstrap_penalty(in.designs, in.residuals, in.loadings, BlockScheme::make(40, 2), 200,
                                               0.1, 1.1, 7);
  EXPECT_EQ(plan.lambda_joint, 0.0);
  EXPECT_TRUE(plan.degenerate);
  EXPECT_FALSE(plan.diagnostics.empty());
}

TEST(BootstrapPenalty, HalfNormalSingleCoordinate) {
  const auto check = props::penalty_half_normal();
  EXPECT_TRUE(check.pass) << check.detail;
}

TEST(BootstrapPenalty, GaussianMaxMonteCarlo) {
  const auto check = props::penalty_gaussian_mc();
  EXPECT_TRUE(check.pass) << check.detail;
}

TEST(BootstrapPenalty, SingleEquationJointEqualsPerEquation) {
  const auto in = random_instance(2, 1, 60, 8);
  const auto [plan, draws] =
      bootstrap_penalty(in.designs, in.residuals, in.loadings, BlockScheme::make(60, 3), 500, 0.1, 1.1, 11);
  EXPECT_EQ(plan.lambda_joint, plan.lambda_equation[0]);
}

TEST(BootstrapPenalty, JointDominatesEachEquationOnSharedDraws) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto in = random_instance(100 + seed, 4, 50, 6);
    const auto [plan, draws] =
        bootstrap_penalty(in.designs, in.residuals, in.loadings, BlockScheme::make(50, 5), 300, 0.1, 1.1, seed);
    for (int j = 0; j < 4; ++j) {
      EXPECT_GE(plan.lambda_joint, plan.lambda_equation[static_cast<std::size_t>(j)]);
      for (int b = 0; b < 300; ++b) EXPECT_GE(draws.max_stats[b], draws.equation_max(b, j));
    }
  }
}

TEST(BootstrapPenalty, UnitBlocksMatchPlainMultiplierBootstrap) {
  const int n = 30, k = 4, equations = 2, draws_count = 200;
  const std::uint64_t seed = 99;
  const auto in = random_instance(3, equations, n, k);
  const auto [plan, draws] = bootstrap_penalty(in.designs, in.residuals, in.loadings, BlockScheme::make(n, 1),
                                               draws_count, 0.1, 1.1, seed);
  for (int b = 0; b < draws_count; ++b) {
    double overall = 0.0;
    for (int j = 0; j < equations; ++j) {
      rng::Stream s(seed, rng::Tag::PenaltyBootstrap, static_cast<std::uint64_t>(b), static_cast<std::uint64_t>(j));
      std::vector<double> e(n);
      for (int t = 0; t < n; ++t) e[static_cast<std::size_t>(t)] = s.normal();
      double eq_max = 0.0;
      for (int c = 0; c < k; ++c) {
        double z = 0.0;
        for (int t = 0; t < n; ++t)
          z += e[static_cast<std::size_t>(t)] * in.residuals[j][t] * in.designs[j].x(t, c);
        z /= std::sqrt(static_cast<double>(n));
        eq_max = std::max(eq_max, std::abs(z / in.loadings.values[j][c]));
      }
      EXPECT_NEAR(draws.equation_max(b, j), eq_max, 1e-12);
      overall = std::max(overall, eq_max);
    }
    EXPECT_NEAR(draws.max_stats[b], overall, 1e-12);
  }
}

TEST(BootstrapPenalty, MonotoneInCAndAlpha) {
  const auto in = random_instance(4, 3, 80, 10);
  const auto scheme = BlockScheme::make(80, 4);
  auto lam = [&](double alpha, double c) {
    return bootstrap_penalty(in.designs, in.residuals, in.loadings, scheme, 1000, alpha, c, 5).first.lambda_joint;
  };
  EXPECT_LT(lam(0.1, 1.1), lam(0.1, 1.5));
  EXPECT_LE(lam(0.2, 1.1), lam(0.1, 1.1));
  EXPECT_LE(lam(0.1, 1.1), lam(0.01, 1.1));
  EXPECT_NEAR(lam(0.1, 2.2) / lam(0.1, 1.1), 2.0, 1e-12);
}

TEST(BootstrapPenalty, RejectsSingleBlockAndBadOptions) {
  const auto in = random_instance(5, 1, 40, 3);
  EXPECT_THROW(bootstrap_penalty(in.designs, in.residuals, in.loadings, BlockScheme::make(40, 40), 500, 0.1, 1.1, 1),
               ConfigError);
  EXPECT_THROW(bootstrap_penalty(in.designs, in.residuals, in.loadings, BlockScheme::make(40, 2), 50, 0.1, 1.1, 1),
               ConfigError);
  EXPECT_THROW(bootstrap_penalty(in.designs, in.residuals, in.loadings, BlockScheme::make(40, 2), 500, 0.1, 1.0, 1),
               ConfigError);
}

TEST(Tuning, PureNoiseStillGivesPositiveLambda) {
  PenaltyOptions opt;
  opt.draws = 500;
  opt.block_size = 2;
  const auto r = run_pilot_then_tune(noise_panel(6, 3, 80, 10), opt);
  EXPECT_GT(r.plan.lambda_joint, 0.0);
  EXPECT_FALSE(r.plan.degenerate);
  for (double l : r.plan.lambda_equation) EXPECT_GT(l, 0.0);
}

TEST(Tuning, SameSeedSameThreadsAgnostic) {
  const auto data = noise_panel(7, 4, 60, 12, 3.0);
  PenaltyOptions opt;
  opt.draws = 400;
  opt.block_size = 3;
  opt.seed = 42;
  const auto a = run_pilot_then_tune(data, opt);
  opt.threads = 3;
  const auto b = run_pilot_then_tune(data, opt);
  EXPECT_EQ(a.plan.lambda_joint, b.plan.lambda_joint);
  EXPECT_EQ(a.plan.lambda_equation, b.plan.lambda_equation);
  opt.seed = 43;
  EXPECT_NE(run_pilot_then_tune(data, opt).plan.lambda_joint, a.plan.lambda_joint);
}

TEST(Tuning, GaussianMethodUsesCanonicalRule) {
  PenaltyOptions opt;
  opt.method = PenaltyMethod::GaussianCanonical;
  const auto data = noise_panel(8, 2, 50, 6);
  const auto r = run_pilot_then_tune(data, opt);
  EXPECT_EQ(r.plan.lambda_equation[0], lambda_gaussian_canonical(0.1, 1.1, 50, 6, 1));
  EXPECT_EQ(r.plan.lambda_joint, lambda_gaussian_canonical(0.1, 1.1, 50, 12, 1));
}

TEST(Tuning, PilotRefinementConverges) {
  PenaltyOptions opt;
  const auto st = run_pilot(noise_panel(9, 2, 100, 8, 4.0), opt);
  EXPECT_TRUE(st.refinement_converged);
  EXPECT_GE(st.refinement_passes, 1);
  EXPECT_EQ(st.residuals.size(), 2u);
}

TEST(BlockScan, SingletonGridSelectsIt) {
  PenaltyOptions opt;
  opt.draws = 200;
  const auto r = scan_block_size(noise_panel(10, 2, 60, 5, 2.0), opt, {1});
  EXPECT_EQ(r.best_block_size, 1);
  EXPECT_EQ(r.criterion.size(), 1u);
  EXPECT_FALSE(r.oracle);
}

TEST(BlockScan, OversizedEntriesAreSkippedWithWarning) {
  PenaltyOptions opt;
  opt.draws = 200;
  const auto r = scan_block_size(noise_panel(11, 2, 60, 5, 2.0), opt, {2, 4, 500});
  EXPECT_EQ(r.block_sizes, (std::vector<int>{2, 4}));
  ASSERT_EQ(r.warnings.size(), 1u);
  EXPECT_NE(r.warnings[0].find("500"), std::string::npos);
  EXPECT_THROW(scan_block_size(noise_panel(11, 2, 60, 5), opt, {500}), ConfigError);
}

TEST(BlockScan, OracleCriterionUsesTruth) {
  PenaltyOptions opt;
  opt.draws = 200;
  const auto data = noise_panel(12, 2, 60, 5, 2.0);
  std::vector<Eigen::VectorXd> truth(2, Eigen::VectorXd::Zero(5));
  truth[0][0] = 2.0;
  const auto r = scan_block_size(data, opt, {2, 3}, truth);
  EXPECT_TRUE(r.oracle);
  for (double c : r.criterion) EXPECT_GE(c, 0.0);
}
