#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "postbias/models.hpp"
#include "support.hpp"

using namespace postbias;

TEST(WeibullDensity, ClosedFormValues) {
  EXPECT_NEAR(weibull_log_density(1.0, 1.0, 1.0), -1.0, 1e-15);
  EXPECT_NEAR(weibull_log_density(2.0, 1.0, 2.0), std::log(4.0) - 4.0, 1e-14);
  EXPECT_NEAR(weibull_log_density(1.0, 1.0, 0.8), std::log(0.8) - 1.0, 1e-14);
  EXPECT_NEAR(weibull_log_density(1.0, 1.0, 0.8), -1.223144, 1e-6);
}

TEST(WeibullDensity, DomainErrors) {
  EXPECT_THROW(weibull_log_density(-1.0, 1.0, 1.0), DomainError);
  EXPECT_THROW(weibull_log_density(1.0, 0.0, 1.0), DomainError);
  EXPECT_THROW(weibull_log_density(1.0, 1.0, -2.0), DomainError);
  EXPECT_THROW(weibull_log_density(0.0, 1.0, 0.8), SingularPointError);
  EXPECT_THROW(weibull_log_density(0.0, 1.0, 2.0), SingularPointError);
  EXPECT_DOUBLE_EQ(weibull_log_density(0.0, 2.0, 1.0), -std::log(2.0));
}

// Integrate in t = log x so the x -> 0 singularity at shape < 1 is harmless.
TEST(WeibullDensity, IntegratesToOne) {
  for (auto [scale, shape] : {std::pair{1.0, 0.8}, std::pair{1.0, 2.0}, std::pair{2.0, 1.0}}) {
    const double lo = -60.0, hi = 6.0;
    const int nodes = 400000;
    const double dt = (hi - lo) / nodes;
    double sum = 0.0;
    for (int k = 0; k < nodes; ++k) {
      const double t = lo + (k + 0.5) * dt;
      sum += std::exp(weibull_log_density(std::exp(t), scale, shape) + t);
    }
    EXPECT_NEAR(sum * dt, 1.0, 1e-6) << scale << "," << shape;
  }
}

TEST(LogisticLogLik, ClosedFormValues) {
  const std::vector<double> x{0.3, -2.0}, zero{0.0, 0.0};
  EXPECT_NEAR(logistic_log_lik(1.0, x, zero), std::log(0.5), 1e-15);
  const std::vector<double> one{1.0}, two{2.0};
  EXPECT_NEAR(logistic_log_lik(1.0, one, two), 2.0 - std::log1p(std::exp(2.0)), 1e-15);
  EXPECT_NEAR(logistic_log_lik(1.0, one, two), -0.126928, 1e-6);
  const std::vector<double> big{1000.0};
  const double v = logistic_log_lik(0.0, one, big);
  EXPECT_TRUE(std::isfinite(v));
  EXPECT_NEAR(v, -1000.0, 1e-9);
  EXPECT_NEAR(logistic_log_lik(1.0, one, big), 0.0, 1e-300);
}

TEST(LogisticLogLik, ComplementSumsToOne) {
  const std::vector<double> x{1.0};
  for (double eta = -30.0; eta <= 30.0; eta += 0.25) {
    const std::vector<double> a{eta};
    EXPECT_NEAR(std::exp(logistic_log_lik(1.0, x, a)) + std::exp(logistic_log_lik(0.0, x, a)), 1.0, 1e-12) << eta;
  }
}

TEST(LogisticLogLik, Errors) {
  const std::vector<double> x{1.0, 2.0}, a{1.0};
  EXPECT_THROW(logistic_log_lik(1.0, x, a), DimensionError);
  EXPECT_THROW(logistic_log_lik(0.5, a, a), DomainError);
}

TEST(BetaBernoulliMean, ClosedForm) {
  EXPECT_DOUBLE_EQ(beta_bernoulli_posterior_mean(10, 5, 1, 1), 0.5);
  EXPECT_DOUBLE_EQ(beta_bernoulli_posterior_mean(10, 5, 1, 2), 6.0 / 13.0);
  EXPECT_DOUBLE_EQ(beta_bernoulli_posterior_mean(0, 0, 2, 3), 0.4);
  EXPECT_THROW(beta_bernoulli_posterior_mean(3, 4, 1, 1), DomainError);
}

namespace {

std::vector<double> random_point(const Model& m, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.01, 0.99), wide(-20.0, 20.0), pos(1e-3, 50.0);
  std::vector<double> theta(m.dim());
  for (auto& t : theta) {
    if (m.id() == "weibull") t = pos(rng);
    else if (m.id() == "beta-bernoulli") t = u(rng);
    else t = wide(rng);
  }
  return theta;
}

}  // namespace

TEST(Transforms, RoundTripToMachinePrecision) {
  std::mt19937_64 rng(11);
  const WeibullModel w;
  const LogisticModel l(4);
  const BetaBernoulliModel b(1, 2);
  for (const Model* m : std::initializer_list<const Model*>{&w, &l, &b}) {
    for (int rep = 0; rep < 1000; ++rep) {
      const auto theta = random_point(*m, rng);
      std::vector<double> u(m->dim()), back(m->dim());
      m->to_unconstrained(theta, u);
      m->from_unconstrained(u, back);
      for (std::size_t k = 0; k < theta.size(); ++k)
        EXPECT_NEAR(back[k], theta[k], 1e-12 * std::max(1.0, std::abs(theta[k]))) << m->id();
    }
  }
}

// log|dθ/du| against a central difference of the inverse transform.
TEST(Transforms, JacobianMatchesFiniteDifference) {
  const BetaBernoulliModel b(1, 1);
  for (double u0 : {-3.0, 0.0, 1.5}) {
    const double h = 1e-6;
    std::vector<double> up{u0 + h}, dn{u0 - h}, tu(1), td(1);
    b.from_unconstrained(up, tu);
    b.from_unconstrained(dn, td);
    const std::vector<double> u{u0};
    EXPECT_NEAR(b.log_jacobian(u), std::log((tu[0] - td[0]) / (2 * h)), 1e-8);
  }
  const WeibullModel w;
  const std::vector<double> u{0.3, -0.7};
  EXPECT_DOUBLE_EQ(w.log_jacobian(u), 0.3 - 0.7);
}

TEST(Models, DataValidation) {
  const WeibullModel w;
  EXPECT_THROW(w.validate(make_scalar_dataset({1.0, 0.0, 2.0})), DomainError);
  EXPECT_THROW(w.validate(make_scalar_dataset({1.0, -1.0})), DomainError);
  EXPECT_NO_THROW(w.validate(make_scalar_dataset({1.0, 2.0})));
  const BetaBernoulliModel b(1, 1);
  EXPECT_THROW(b.validate(make_scalar_dataset({1.0, 0.5})), DomainError);
  const LogisticModel l(2);
  Dataset d;
  d.observations = {{1.0, {1.0, 2.0}}, {0.0, {1.0}}};
  EXPECT_THROW(l.validate(d), DimensionError);
  EXPECT_THROW(BetaBernoulliModel(0.0, 1.0), DomainError);
}

TEST(Models, BetaBernoulliLogPriorIsNormalized) {
  const BetaBernoulliModel b(2.0, 3.0);
  const int nodes = 200000;
  double sum = 0.0;
  for (int k = 0; k < nodes; ++k) {
    const std::vector<double> q{(k + 0.5) / nodes};
    sum += std::exp(b.log_prior(q));
  }
  EXPECT_NEAR(sum / nodes, 1.0, 1e-8);
}

TEST(LogLikMatrix, SingleDrawUnitExponential) {
  const WeibullModel w;
  const auto samples = testing_support::samples_from({{1.0, 1.0}, {1.0, 1.0}});
  const auto llm = log_lik_matrix(w, make_scalar_dataset({1.0}), samples);
  EXPECT_EQ(llm.observations(), 1u);
  EXPECT_DOUBLE_EQ(llm.values(0, 0), -1.0);
  EXPECT_EQ(llm.samples_fingerprint, samples.fingerprint());
}

TEST(LogLikMatrix, ConstantDataGivesIdenticalColumns) {
  const WeibullModel w;
  const auto samples = testing_support::samples_from({{0.5, 1.0, 2.0}, {0.7, 1.3, 0.9}});
  const auto llm = log_lik_matrix(w, make_scalar_dataset({1.7, 1.7, 1.7}), samples);
  EXPECT_EQ(llm.values.col(0), llm.values.col(1));
  EXPECT_EQ(llm.values.col(0), llm.values.col(2));
}

TEST(LogLikMatrix, BetaBernoulliEntries) {
  const BetaBernoulliModel b(1, 2);
  const auto samples = testing_support::samples_from({{0.2, 0.7}});
  const auto llm = log_lik_matrix(b, make_scalar_dataset({1.0, 0.0}), samples);
  EXPECT_NEAR(llm.values(0, 0), std::log(0.2), 1e-15);
  EXPECT_NEAR(llm.values(1, 0), std::log(0.7), 1e-15);
  EXPECT_NEAR(llm.values(0, 1), std::log(0.8), 1e-15);
  EXPECT_NEAR(llm.values(1, 1), std::log(0.3), 1e-15);
}

TEST(LogLikMatrix, ColumnDependsOnlyOnItsObservation) {
  const WeibullModel w;
  const auto samples = testing_support::samples_from({{0.5, 1.0, 2.0, 1.1}, {0.7, 1.3, 0.9, 2.2}});
  auto data = make_scalar_dataset({0.3, 1.2, 2.5, 0.8});
  const auto before = log_lik_matrix(w, data, samples);
  data.observations[2].response = 7.5;
  const auto after = log_lik_matrix(w, data, samples);
  for (Eigen::Index i : {0, 1, 3}) EXPECT_EQ(before.values.col(i), after.values.col(i));
  EXPECT_NE(before.values.col(2), after.values.col(2));
}

TEST(LogLikMatrix, ReportsNonFiniteEntry) {
  const BetaBernoulliModel b(1, 1);
  // q = 1 is outside the support, so the first bad entry is (1, 0).
  DrawMatrix d(3, 1);
  d << 0.5, 1.0, 0.3;
  const PosteriorSamples samples(d, {"q"});
  try {
    log_lik_matrix(b, make_scalar_dataset({1.0, 0.0}), samples);
    FAIL() << "expected NonFiniteError";
  } catch (const NonFiniteError& e) {
    EXPECT_EQ(e.draw(), 1u);
    EXPECT_EQ(e.observation(), 0u);
  }
}

TEST(LogLikMatrix, DimensionMismatch) {
  const WeibullModel w;
  EXPECT_THROW(log_lik_matrix(w, make_scalar_dataset({1.0}), testing_support::samples_from({{0.5, 0.6}})),
               DimensionError);
}

// The fast kernels must agree with summing log_lik.
TEST(Kernels, MatchGenericSums) {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> z(0.0, 1.0);
  Dataset logistic;
  for (int i = 0; i < 25; ++i) logistic.observations.push_back({double(i % 2), {z(rng), z(rng), z(rng)}});
  const LogisticModel l(3);
  const WeibullModel w;
  const BetaBernoulliModel b(1, 2);
  const auto weibull_data = testing_support::weibull_fixture_10();
  const auto bern = testing_support::bernoulli_5_of_10();
  struct Case {
    const Model* m;
    const Dataset* d;
    std::vector<double> theta;
  };
  for (const auto& c : {Case{&l, &logistic, {0.4, -1.0, 2.0}}, Case{&w, &weibull_data, {1.3, 0.7}},
                        Case{&b, &bern, {0.35}}}) {
    std::vector<double> weights(c.d->size(), 1.0);
    weights[1] = 0.0;
    weights[2] = 0.25;
    const auto kernel = c.m->make_kernel(*c.d, weights);
    auto expected = [&](const std::vector<double>& theta) {
      double s = 0.0;
      for (std::size_t i = 0; i < c.d->size(); ++i)
        if (weights[i] != 0.0) s += weights[i] * c.m->log_lik((*c.d)[i], theta);
      return s;
    };
    EXPECT_NEAR(kernel->reset(c.theta), expected(c.theta), 1e-10) << c.m->id();
    auto moved = c.theta;
    moved.back() *= 0.9;
    EXPECT_NEAR(kernel->propose(c.theta.size() - 1, moved.back()), expected(moved), 1e-10) << c.m->id();
    kernel->accept();
    auto moved2 = moved;
    moved2.front() *= 1.1;
    EXPECT_NEAR(kernel->propose(0, moved2.front()), expected(moved2), 1e-10) << c.m->id();
  }
}
