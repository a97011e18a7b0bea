#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "postbias/estimator.hpp"
#include "postbias/oracle.hpp"
#include "support.hpp"

using namespace postbias;
using testing_support::quick_sampler;

namespace {

/// Synthetic draws θ and a log-likelihood table built from them.
struct Synthetic {
  PosteriorSamples samples;
  LogLikMatrix llm;
};

template <typename Column>
Synthetic synthetic(std::size_t m, std::size_t n, std::uint64_t seed, Column column) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> z;
  DrawMatrix d(static_cast<Eigen::Index>(m), 1);
  for (std::size_t j = 0; j < m; ++j) d(static_cast<Eigen::Index>(j), 0) = z(rng);
  PosteriorSamples samples(d, {"theta"});
  LogLikMatrix llm;
  llm.values.resize(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(n));
  for (std::size_t j = 0; j < m; ++j)
    for (std::size_t i = 0; i < n; ++i)
      llm.values(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) = column(d(static_cast<Eigen::Index>(j), 0), i, rng);
  llm.samples_fingerprint = samples.fingerprint();
  return {std::move(samples), std::move(llm)};
}

Synthetic quadratic_loglik(std::uint64_t seed) {
  std::normal_distribution<double> noise(0.0, 0.3);
  return synthetic(4000, 6, seed, [&](double t, std::size_t i, std::mt19937_64& rng) {
    return -0.5 * (t - 0.2 * double(i)) * (t - 0.2 * double(i)) + 0.1 * t * t * t + noise(rng);
  });
}

const StatisticSpec kTheta = coordinate_statistic(0, "theta");

}  // namespace

TEST(Estimator, TotalIsSumOfParts) {
  const auto s = quadratic_loglik(1);
  const auto e = estimate_bias(s.samples, s.llm, kTheta);
  EXPECT_EQ(e.b_hat, e.b0_hat + e.b2_hat);
  EXPECT_EQ(e.b0_hat, bias_b0(s.samples, s.llm, kTheta));
  EXPECT_EQ(e.b2_hat, bias_b2(s.samples, s.llm, kTheta));
  EXPECT_GT(e.mcse, 0.0);
}

TEST(Estimator, AffineInStatistic) {
  const auto s = quadratic_loglik(2);
  const StatisticSpec scaled{"scaled", [](std::span<const double> t) { return 3.0 * t[0] - 7.0; }};
  const auto base = estimate_bias(s.samples, s.llm, kTheta);
  const auto affine = estimate_bias(s.samples, s.llm, scaled);
  EXPECT_NEAR(affine.b0_hat, 3.0 * base.b0_hat, 1e-12 * std::max(1.0, std::abs(base.b0_hat)));
  EXPECT_NEAR(affine.b2_hat, 3.0 * base.b2_hat, 1e-12 * std::max(1.0, std::abs(base.b2_hat)));
}

TEST(Estimator, InvariantToObservationOrder) {
  const auto s = quadratic_loglik(3);
  std::vector<Eigen::Index> order{4, 1, 5, 0, 3, 2};
  LogLikMatrix shuffled = s.llm;
  for (std::size_t c = 0; c < order.size(); ++c) shuffled.values.col(static_cast<Eigen::Index>(c)) = s.llm.values.col(order[c]);
  const auto a = estimate_bias(s.samples, s.llm, kTheta);
  const auto b = estimate_bias(s.samples, shuffled, kTheta);
  EXPECT_EQ(a.b0_hat, b.b0_hat);
  EXPECT_EQ(a.b2_hat, b.b2_hat);
  EXPECT_EQ(a.k13_diag, b.k13_diag);
}

TEST(Estimator, NearlyInvariantToDrawOrder) {
  const auto s = quadratic_loglik(4);
  const auto m = static_cast<Eigen::Index>(s.samples.size());
  std::vector<Eigen::Index> perm(static_cast<std::size_t>(m));
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), std::mt19937_64(5));
  DrawMatrix d(m, 1);
  LogLikMatrix llm;
  llm.values.resize(m, s.llm.values.cols());
  for (Eigen::Index j = 0; j < m; ++j) {
    d(j, 0) = s.samples.draws()(perm[static_cast<std::size_t>(j)], 0);
    llm.values.row(j) = s.llm.values.row(perm[static_cast<std::size_t>(j)]);
  }
  const PosteriorSamples permuted(d, {"theta"});
  llm.samples_fingerprint = permuted.fingerprint();
  const auto a = estimate_bias(s.samples, s.llm, kTheta);
  const auto b = estimate_bias(permuted, llm, kTheta);
  EXPECT_NEAR(a.b0_hat, b.b0_hat, 1e-12);
  EXPECT_NEAR(a.b2_hat, b.b2_hat, 1e-12);
}

TEST(Estimator, ConstantStatisticHasNoBias) {
  const auto s = quadratic_loglik(6);
  const StatisticSpec constant{"c", [](std::span<const double>) { return 2.5; }};
  const auto e = estimate_bias(s.samples, s.llm, constant);
  EXPECT_EQ(e.b0_hat, 0.0);
  EXPECT_EQ(e.b2_hat, 0.0);
  EXPECT_EQ(e.k13_diag, 0.0);
}

TEST(Estimator, DuplicatingTheDataDoublesTheTerms) {
  const auto s = quadratic_loglik(7);
  LogLikMatrix twice = s.llm;
  twice.values.resize(s.llm.values.rows(), 2 * s.llm.values.cols());
  twice.values << s.llm.values, s.llm.values;
  const auto once = estimate_bias(s.samples, s.llm, kTheta);
  const auto doubled = estimate_bias(s.samples, twice, kTheta);
  EXPECT_NEAR(doubled.b0_hat, 2.0 * once.b0_hat, 1e-12);
  EXPECT_NEAR(doubled.b2_hat, 2.0 * once.b2_hat, 1e-12);
}

TEST(Estimator, IndependentLogLikGivesZeroBias) {
  std::normal_distribution<double> z;
  const auto s = synthetic(20000, 5, 8, [&](double, std::size_t, std::mt19937_64& rng) { return z(rng); });
  const auto e = estimate_bias(s.samples, s.llm, kTheta);
  EXPECT_NEAR(e.b0_hat, 0.0, 4.0 * e.mcse_b0);
  EXPECT_NEAR(e.b2_hat, 0.0, 4.0 * e.mcse_b2);
}

// For jointly Gaussian (A, ℓ_i) every cumulant above order two vanishes.
TEST(Estimator, GaussianPairHasNoHigherCumulants) {
  std::normal_distribution<double> z;
  const auto s = synthetic(200000, 1, 9, [&](double t, std::size_t, std::mt19937_64& rng) { return 0.6 * t + 0.8 * z(rng); });
  EXPECT_NEAR(fourth_cumulant_k13(s.samples, s.llm, 0, kTheta), 0.0, 0.05);
  EXPECT_NEAR(bias_b2(s.samples, s.llm, kTheta), 0.0, 0.02);
  EXPECT_NEAR(bias_b0(s.samples, s.llm, kTheta), -0.6, 0.02);
}

TEST(Estimator, RefusesTablesFromOtherDraws) {
  const auto a = quadratic_loglik(10);
  const auto b = quadratic_loglik(11);
  EXPECT_THROW(estimate_bias(a.samples, b.llm, kTheta), ContractError);
  EXPECT_THROW(fourth_cumulant_k13(a.samples, a.llm, 99, kTheta), DimensionError);
}

TEST(Estimator, MeanAndCovarianceUseDivisorM) {
  const auto s = testing_support::samples_from({{0.0, 2.0, 4.0, 6.0}, {1.0, 1.0, -1.0, -1.0}});
  EXPECT_DOUBLE_EQ(posterior_mean(s, coordinate_statistic(0, "a")), 3.0);
  const Eigen::MatrixXd c = posterior_cov_matrix(s);
  EXPECT_DOUBLE_EQ(c(0, 0), 5.0);
  EXPECT_DOUBLE_EQ(c(1, 1), 1.0);
  EXPECT_DOUBLE_EQ(c(0, 1), -2.0);
  EXPECT_EQ(c(0, 1), c(1, 0));
}

TEST(Estimator, OrderIndependentSum) {
  std::vector<double> v{1e16, 1.0, -1e16, 1.0};
  EXPECT_EQ(order_independent_sum(v), 2.0);
  std::vector<double> r(v.rbegin(), v.rend());
  EXPECT_EQ(order_independent_sum(r), order_independent_sum(v));
}

// Beta(6,7): the exact jackknife is -5/156.
TEST(Estimator, BetaBernoulliMatchesExactJackknife) {
  const BetaBernoulliModel model(1, 2);
  const auto data = testing_support::bernoulli_5_of_10();
  const auto samples = sample_posterior(TiltedPosterior(model, data), quick_sampler(21, 40000));
  const auto llm = log_lik_matrix(model, data, samples);
  const auto e = estimate_bias(samples, llm, coordinate_statistic(0, "q"));
  const double jack = oracle::jackknife_bias_beta_bernoulli(data, 1, 2);
  EXPECT_NEAR(jack, -5.0 / 156.0, 1e-15);
  EXPECT_NEAR(e.b_hat, jack, std::max(0.005, 4.0 * e.mcse));
  EXPECT_NEAR(e.b0_hat, -5.0 / 169.0, std::max(0.003, 4.0 * e.mcse_b0));
}

TEST(Estimator, WeibullThirtyIsModest) {
  const WeibullModel model;
  const auto data = testing_support::weibull_fixture_30();
  const auto samples = sample_posterior(TiltedPosterior(model, data), quick_sampler(22, 10000));
  const auto llm = log_lik_matrix(model, data, samples);
  for (const auto& e : estimate_bias(samples, llm, coordinate_statistics(model.param_names()))) {
    EXPECT_TRUE(std::isfinite(e.b_hat)) << e.statistic;
    EXPECT_LT(std::abs(e.b_hat), 1.0) << e.statistic;
    EXPECT_GT(e.mcse, 0.0);
  }
}

TEST(Estimator, WeibullTwentyAgreesWithJackknife) {
  const WeibullModel model;
  const auto all = testing_support::weibull_fixture_30();
  Dataset data;
  data.observations.assign(all.observations.begin(), all.observations.begin() + 20);
  const auto samples = sample_posterior(TiltedPosterior(model, data), quick_sampler(23, 40000));
  const auto llm = log_lik_matrix(model, data, samples);
  oracle::JackknifeConfig jc;
  jc.method = oracle::JackknifeMethod::Quadrature;
  jc.grid.nodes = 256;
  const auto lambda = coordinate_statistic(0, "lambda");
  const auto e = estimate_bias(samples, llm, lambda);
  const auto jack = oracle::jackknife_bias(model, data, lambda, jc);
  EXPECT_NEAR(e.b_hat, jack.value, std::max(0.15 * std::abs(jack.value), 4.0 * e.mcse));
}
