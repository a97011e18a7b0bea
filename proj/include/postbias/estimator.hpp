#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "postbias/error.hpp"
#include "postbias/models.hpp"
#include "postbias/samples.hpp"

namespace postbias {

/// A scalar statistic A(θ) whose posterior mean is the estimator of interest.
struct StatisticSpec {
  std::string label;
  std::function<double(std::span<const double>)> evaluate;
};

inline StatisticSpec coordinate_statistic(std::size_t k, std::string label) {
  return {std::move(label), [k](std::span<const double> theta) { return theta[k]; }};
}

inline std::vector<StatisticSpec> coordinate_statistics(const std::vector<std::string>& names) {
  std::vector<StatisticSpec> out;
  for (std::size_t k = 0; k < names.size(); ++k) out.push_back(coordinate_statistic(k, names[k]));
  return out;
}

struct BiasEstimate {
  std::string statistic;
  double b0_hat = 0.0;
  double b2_hat = 0.0;
  double b_hat = 0.0;
  /// Σ_i |K^(1,3)[A, ℓ_i]|, the size of the neglected third-order term.
  double k13_diag = 0.0;
  /// Batch-means Monte Carlo standard errors.
  double mcse = 0.0;
  double mcse_b0 = 0.0;
  double mcse_b2 = 0.0;
};

/// Sort-then-compensated sum: the result does not depend on term order.
inline double order_independent_sum(std::vector<double> terms) {
  std::sort(terms.begin(), terms.end());
  double sum = 0.0, carry = 0.0;
  for (double t : terms) {
    const double next = sum + t;
    carry += std::abs(sum) >= std::abs(t) ? (sum - next) + t : (t - next) + sum;
    sum = next;
  }
  return sum + carry;
}

/// A(θ^(j)) for every draw.
inline Eigen::VectorXd statistic_values(const PosteriorSamples& samples, const StatisticSpec& a) {
  Eigen::VectorXd values(static_cast<Eigen::Index>(samples.size()));
  for (std::size_t j = 0; j < samples.size(); ++j) {
    const double v = a.evaluate(samples.draw(j));
    if (!std::isfinite(v))
      throw NonFiniteError("statistic '" + a.label + "' is not finite at draw " + std::to_string(j), j, 0);
    values(static_cast<Eigen::Index>(j)) = v;
  }
  return values;
}

inline double posterior_mean(const PosteriorSamples& samples, const StatisticSpec& a) {
  const Eigen::VectorXd values = statistic_values(samples, a);
  double sum = 0.0;
  for (Eigen::Index j = 0; j < values.size(); ++j) sum += values(j);
  return sum / static_cast<double>(values.size());
}

/// Sample covariance of the draws with divisor M.
inline Eigen::MatrixXd posterior_cov_matrix(const PosteriorSamples& samples) {
  const DrawMatrix& d = samples.draws();
  const Eigen::RowVectorXd mean = d.colwise().mean();
  const Eigen::MatrixXd centered = d.rowwise() - mean;
  Eigen::MatrixXd cov = (centered.transpose() * centered) / static_cast<double>(d.rows());
  return (cov + cov.transpose()) * 0.5;
}

namespace detail {

/// Per-observation sample cumulants for several statistics over draws [begin, end).
/// stat_values is M×S; every moment uses divisor (end - begin).
struct CumulantTerms {
  // [s][i]
  std::vector<std::vector<double>> cov;   // D_{1,i}
  std::vector<std::vector<double>> k3;    // D_{2,ii}
  std::vector<std::vector<double>> k13;   // K^(1,3)[A, ℓ_i]
};

inline CumulantTerms cumulant_terms(const Eigen::MatrixXd& stat_values, const Eigen::MatrixXd& loglik,
                                    Eigen::Index begin, Eigen::Index end) {
  const Eigen::Index rows = end - begin;
  const Eigen::Index stats = stat_values.cols();
  const Eigen::Index obs = loglik.cols();
  const double inv = 1.0 / static_cast<double>(rows);

  Eigen::MatrixXd centered = stat_values.middleRows(begin, rows);
  for (Eigen::Index s = 0; s < stats; ++s) centered.col(s).array() -= centered.col(s).mean();

  CumulantTerms out;
  out.cov.assign(static_cast<std::size_t>(stats), std::vector<double>(static_cast<std::size_t>(obs)));
  out.k3 = out.cov;
  out.k13 = out.cov;
  std::vector<double> m1(static_cast<std::size_t>(stats)), m2(m1.size()), m3(m1.size());
  for (Eigen::Index i = 0; i < obs; ++i) {
    const auto column = loglik.col(i).segment(begin, rows);
    const double mean = column.mean();
    std::fill(m1.begin(), m1.end(), 0.0);
    std::fill(m2.begin(), m2.end(), 0.0);
    std::fill(m3.begin(), m3.end(), 0.0);
    double var = 0.0;
    for (Eigen::Index j = 0; j < rows; ++j) {
      const double d = column(j) - mean;
      const double d2 = d * d;
      var += d2;
      for (Eigen::Index s = 0; s < stats; ++s) {
        const double c = centered(j, s);
        m1[static_cast<std::size_t>(s)] += d * c;
        m2[static_cast<std::size_t>(s)] += d2 * c;
        m3[static_cast<std::size_t>(s)] += d2 * d * c;
      }
    }
    var *= inv;
    for (Eigen::Index s = 0; s < stats; ++s) {
      const auto ss = static_cast<std::size_t>(s);
      const auto ii = static_cast<std::size_t>(i);
      out.cov[ss][ii] = m1[ss] * inv;
      out.k3[ss][ii] = m2[ss] * inv;
      out.k13[ss][ii] = m3[ss] * inv - 3.0 * out.cov[ss][ii] * var;
    }
  }
  return out;
}

struct BiasParts {
  double b0, b2, k13_diag;
};

inline BiasParts combine(const CumulantTerms& terms, std::size_t s) {
  std::vector<double> abs_k13(terms.k13[s].size());
  std::transform(terms.k13[s].begin(), terms.k13[s].end(), abs_k13.begin(), [](double v) { return std::abs(v); });
  return {-order_independent_sum(terms.cov[s]), 0.5 * order_independent_sum(terms.k3[s]),
          order_independent_sum(std::move(abs_k13))};
}

inline void check_pairing(const PosteriorSamples& samples, const LogLikMatrix& llm) {
  if (llm.draws() != samples.size())
    throw ContractError("log-likelihood matrix has " + std::to_string(llm.draws()) + " rows, samples have " +
                        std::to_string(samples.size()));
  if (llm.samples_fingerprint != samples.fingerprint())
    throw ContractError("log-likelihood matrix was computed from different draws");
}

inline Eigen::MatrixXd statistic_matrix(const PosteriorSamples& samples, std::span<const StatisticSpec> stats) {
  Eigen::MatrixXd values(static_cast<Eigen::Index>(samples.size()), static_cast<Eigen::Index>(stats.size()));
  for (std::size_t s = 0; s < stats.size(); ++s) values.col(static_cast<Eigen::Index>(s)) = statistic_values(samples, stats[s]);
  return values;
}

inline double sample_sd(const std::vector<double>& v) {
  double mean = 0.0;
  for (double x : v) mean += x;
  mean /= static_cast<double>(v.size());
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

}  // namespace detail

/// b̂0 = -Σ_i Cov[A, ℓ_i].
inline double bias_b0(const PosteriorSamples& samples, const LogLikMatrix& llm, const StatisticSpec& a) {
  detail::check_pairing(samples, llm);
  const auto terms = detail::cumulant_terms(detail::statistic_matrix(samples, {&a, 1}), llm.values, 0,
                                            static_cast<Eigen::Index>(samples.size()));
  return detail::combine(terms, 0).b0;
}

/// b̂2 = ½ Σ_i K[A, ℓ_i, ℓ_i].
inline double bias_b2(const PosteriorSamples& samples, const LogLikMatrix& llm, const StatisticSpec& a) {
  detail::check_pairing(samples, llm);
  const auto terms = detail::cumulant_terms(detail::statistic_matrix(samples, {&a, 1}), llm.values, 0,
                                            static_cast<Eigen::Index>(samples.size()));
  return detail::combine(terms, 0).b2;
}

/// E[(A-Ā)(ℓ_i-ℓ̄_i)³] - 3 E[(A-Ā)(ℓ_i-ℓ̄_i)] E[(ℓ_i-ℓ̄_i)²].
inline double fourth_cumulant_k13(const PosteriorSamples& samples, const LogLikMatrix& llm, std::size_t i,
                                  const StatisticSpec& a) {
  detail::check_pairing(samples, llm);
  if (i >= llm.observations()) throw DimensionError("fourth_cumulant_k13: observation index out of range");
  Eigen::MatrixXd column = llm.values.col(static_cast<Eigen::Index>(i));
  const auto terms = detail::cumulant_terms(detail::statistic_matrix(samples, {&a, 1}), column, 0,
                                            static_cast<Eigen::Index>(samples.size()));
  return terms.k13[0][0];
}

/// Algorithm-1 bias estimates for several statistics from one set of draws.
/// MCSEs come from `batches` contiguous non-overlapping batches, each
/// re-running the full estimator on its own draws.
inline std::vector<BiasEstimate> estimate_bias(const PosteriorSamples& samples, const LogLikMatrix& llm,
                                               std::span<const StatisticSpec> stats, std::size_t batches = 20) {
  detail::check_pairing(samples, llm);
  const Eigen::MatrixXd values = detail::statistic_matrix(samples, stats);
  const auto m = static_cast<Eigen::Index>(samples.size());
  const auto full = detail::cumulant_terms(values, llm.values, 0, m);

  std::vector<BiasEstimate> out(stats.size());
  for (std::size_t s = 0; s < stats.size(); ++s) {
    const auto parts = detail::combine(full, s);
    out[s].statistic = stats[s].label;
    out[s].b0_hat = parts.b0;
    out[s].b2_hat = parts.b2;
    out[s].b_hat = parts.b0 + parts.b2;
    out[s].k13_diag = parts.k13_diag;
  }

  if (batches >= 2 && static_cast<Eigen::Index>(batches) * 2 <= m) {
    const Eigen::Index size = m / static_cast<Eigen::Index>(batches);
    std::vector<std::vector<double>> b0(stats.size()), b2(stats.size()), bh(stats.size());
    for (std::size_t b = 0; b < batches; ++b) {
      const Eigen::Index begin = static_cast<Eigen::Index>(b) * size;
      const auto terms = detail::cumulant_terms(values, llm.values, begin, begin + size);
      for (std::size_t s = 0; s < stats.size(); ++s) {
        const auto parts = detail::combine(terms, s);
        b0[s].push_back(parts.b0);
        b2[s].push_back(parts.b2);
        bh[s].push_back(parts.b0 + parts.b2);
      }
    }
    const double root = std::sqrt(static_cast<double>(batches));
    for (std::size_t s = 0; s < stats.size(); ++s) {
      out[s].mcse = detail::sample_sd(bh[s]) / root;
      out[s].mcse_b0 = detail::sample_sd(b0[s]) / root;
      out[s].mcse_b2 = detail::sample_sd(b2[s]) / root;
    }
  }
  return out;
}

inline BiasEstimate estimate_bias(const PosteriorSamples& samples, const LogLikMatrix& llm, const StatisticSpec& a,
                                  std::size_t batches = 20) {
  return estimate_bias(samples, llm, std::span<const StatisticSpec>(&a, 1), batches).front();
}

}  // namespace postbias
