#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "postbias/error.hpp"
#include "postbias/estimator.hpp"
#include "postbias/models.hpp"
#include "postbias/parallel.hpp"
#include "postbias/quasiprior.hpp"
#include "postbias/rng.hpp"
#include "postbias/sampler.hpp"

namespace postbias::experiments {

inline constexpr double kMissing = std::numeric_limits<double>::quiet_NaN();

// ---------------------------------------------------------------------------
// Summaries

struct Distribution {
  double mean = 0.0;
  double sd = 0.0;
  /// Standard error of the mean, sd / sqrt(count).
  double se = 0.0;
  double q1 = 0.0;
  double median = 0.0;
  double q3 = 0.0;
  std::size_t count = 0;
};

/// Linear-interpolation quantile of sorted data (Hyndman-Fan type 7).
inline double quantile_sorted(const std::vector<double>& sorted, double p) {
  if (sorted.empty()) return kMissing;
  const double h = (static_cast<double>(sorted.size()) - 1.0) * p;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

inline double median(std::vector<double> values) {
  std::sort(values.begin(), values.end());
  return quantile_sorted(values, 0.5);
}

inline Distribution summarize(std::vector<double> values) {
  Distribution d;
  d.count = values.size();
  if (values.empty()) return d;
  for (double v : values) d.mean += v;
  d.mean /= static_cast<double>(values.size());
  if (values.size() > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - d.mean) * (v - d.mean);
    d.sd = std::sqrt(ss / static_cast<double>(values.size() - 1));
    d.se = d.sd / std::sqrt(static_cast<double>(values.size()));
  }
  std::sort(values.begin(), values.end());
  d.q1 = quantile_sorted(values, 0.25);
  d.median = quantile_sorted(values, 0.5);
  d.q3 = quantile_sorted(values, 0.75);
  return d;
}

inline void enforce_exclusion_cap(std::size_t excluded, std::size_t total, const std::string& what) {
  if (static_cast<double>(excluded) > 0.02 * static_cast<double>(total))
    throw StudyError(what + ": " + std::to_string(excluded) + " of " + std::to_string(total) +
                     " replicates failed (cap 2%)");
}

// ---------------------------------------------------------------------------
// Weibull study

struct WeibullStudyConfig {
  std::size_t n = 30;
  double scale = 1.0;  // λ0
  double shape = 0.8;  // γ0
  std::size_t replicates = 500;
  SamplerConfig sampler;
  std::uint64_t seed = 1;
  std::size_t workers = 1;

  void validate() const {
    if (replicates < 2) throw ConfigError("weibull study: replicates must be >= 2");
    if (n < 2) throw ConfigError("weibull study: n must be >= 2");
    if (!(scale > 0.0) || !(shape > 0.0)) throw ConfigError("weibull study: true parameters must be positive");
    sampler.validate();
  }
};

/// n Weibull(λ, γ) draws by inversion, x = λ(-log U)^{1/γ}, U in (0, 1).
inline std::vector<double> weibull_draws(std::size_t n, double scale, double shape, Rng& rng) {
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  std::vector<double> out;
  out.reserve(n);
  while (out.size() < n) {
    const double u = uniform(rng);
    if (u <= 0.0) continue;
    const double x = scale * std::pow(-std::log(u), 1.0 / shape);
    if (x > 0.0) out.push_back(x);
  }
  return out;
}

inline Dataset generate_weibull_data(const WeibullStudyConfig& cfg, std::size_t replicate) {
  Rng rng = make_rng(derive_seed(cfg.seed, "weibull-data", {replicate}));
  return make_scalar_dataset(weibull_draws(cfg.n, cfg.scale, cfg.shape, rng));
}

struct ReplicateRow {
  std::size_t replicate = 0;
  std::string statistic;
  double truth = 0.0;
  double posterior_mean = 0.0;
  double b0_hat = 0.0;
  double b2_hat = 0.0;
  double b_hat = 0.0;
  double k13_diag = 0.0;
  double mcse = 0.0;
};

struct StatisticAggregate {
  std::string statistic;
  double truth = 0.0;
  Distribution posterior_mean;
  Distribution b0_hat;
  Distribution b2_hat;
  Distribution b_hat;
  /// Mean over replicates of (posterior mean - truth) and its standard error.
  double truth_bias = 0.0;
  double truth_bias_se = 0.0;
};

struct StudySummary {
  std::vector<ReplicateRow> rows;
  std::vector<StatisticAggregate> aggregates;
  std::size_t excluded = 0;
  std::vector<std::string> failures;
};

/// Recomputes the per-statistic aggregates from rows (statistics in first-seen order).
inline std::vector<StatisticAggregate> aggregate_rows(const std::vector<ReplicateRow>& rows) {
  std::vector<StatisticAggregate> out;
  std::vector<std::string> order;
  for (const auto& r : rows)
    if (std::find(order.begin(), order.end(), r.statistic) == order.end()) order.push_back(r.statistic);
  for (const auto& label : order) {
    std::vector<double> pm, b0, b2, bh, err;
    double truth = 0.0;
    for (const auto& r : rows) {
      if (r.statistic != label) continue;
      truth = r.truth;
      pm.push_back(r.posterior_mean);
      b0.push_back(r.b0_hat);
      b2.push_back(r.b2_hat);
      bh.push_back(r.b_hat);
      err.push_back(r.posterior_mean - r.truth);
    }
    StatisticAggregate agg;
    agg.statistic = label;
    agg.truth = truth;
    agg.posterior_mean = summarize(pm);
    agg.b0_hat = summarize(b0);
    agg.b2_hat = summarize(b2);
    agg.b_hat = summarize(bh);
    const Distribution e = summarize(err);
    agg.truth_bias = e.mean;
    agg.truth_bias_se = e.se;
    out.push_back(agg);
  }
  return out;
}

struct ReplicateStudyConfig {
  std::size_t replicates = 500;
  SamplerConfig sampler;
  std::uint64_t seed = 1;
  std::size_t workers = 1;
  /// Names the sampler sub-stream: seed of replicate r is derive_seed(seed, name + "-sampler", {r}).
  std::string name = "study";
};

/// Per replicate r: data = generate(r), sample the posterior, estimate
/// (b̂0, b̂2, b̂) for every coordinate. The truth bias is the replicate
/// average of posterior mean minus truth[k].
template <typename Generator>
StudySummary run_replicate_study(const Model& model, Generator&& generate, const std::vector<double>& truth,
                                 const ReplicateStudyConfig& cfg) {
  if (truth.size() != model.dim()) throw DimensionError("replicate study: truth has wrong length");
  if (cfg.replicates < 2) throw ConfigError("replicate study: replicates must be >= 2");
  cfg.sampler.validate();
  const auto stats = coordinate_statistics(model.param_names());

  std::vector<std::vector<ReplicateRow>> per(cfg.replicates);
  std::vector<std::string> errors(cfg.replicates);
  parallel_for(cfg.replicates, cfg.workers, [&](std::size_t r) {
    try {
      const Dataset data = generate(r);
      SamplerConfig sampler = cfg.sampler;
      sampler.seed = derive_seed(cfg.seed, cfg.name + "-sampler", {r});
      const PosteriorSamples samples = sample_posterior(TiltedPosterior(model, data), sampler);
      const LogLikMatrix llm = log_lik_matrix(model, data, samples);
      const auto est = estimate_bias(samples, llm, stats);
      for (std::size_t k = 0; k < stats.size(); ++k) {
        per[r].push_back({r, stats[k].label, truth[k], samples.draws().col(static_cast<Eigen::Index>(k)).mean(),
                          est[k].b0_hat, est[k].b2_hat, est[k].b_hat, est[k].k13_diag, est[k].mcse});
      }
    } catch (const Error& e) {
      errors[r] = e.what();
    }
  });

  StudySummary summary;
  for (std::size_t r = 0; r < cfg.replicates; ++r) {
    if (!errors[r].empty()) {
      ++summary.excluded;
      summary.failures.push_back("replicate " + std::to_string(r) + ": " + errors[r]);
      continue;
    }
    summary.rows.insert(summary.rows.end(), per[r].begin(), per[r].end());
  }
  enforce_exclusion_cap(summary.excluded, cfg.replicates, cfg.name + " study");
  summary.aggregates = aggregate_rows(summary.rows);
  return summary;
}

inline StudySummary run_weibull_study(const WeibullStudyConfig& cfg) {
  cfg.validate();
  const WeibullModel model;
  ReplicateStudyConfig study;
  study.replicates = cfg.replicates;
  study.sampler = cfg.sampler;
  study.seed = cfg.seed;
  study.workers = cfg.workers;
  study.name = "weibull";
  return run_replicate_study(
      model, [&cfg](std::size_t r) { return generate_weibull_data(cfg, r); }, {cfg.scale, cfg.shape}, study);
}

// ---------------------------------------------------------------------------
// Beta-Bernoulli frequentist check

struct SimulatedBias {
  double mean = 0.0;
  double se = 0.0;
  std::size_t datasets = 0;
};

/// Frequentist bias of (X + α)/(n + α + β) for X ~ Binomial(n, q0), by simulation.
inline SimulatedBias simulate_beta_bernoulli_bias(std::size_t n, double q0, double alpha, double beta,
                                                  std::size_t datasets, std::uint64_t seed) {
  if (datasets < 2) throw ConfigError("simulation: need at least 2 datasets");
  if (!(q0 > 0.0 && q0 < 1.0)) throw ConfigError("simulation: q0 must lie in (0,1)");
  std::vector<double> err;
  err.reserve(datasets);
  for (std::size_t d = 0; d < datasets; ++d) {
    Rng rng = make_rng(derive_seed(seed, "beta-bernoulli-data", {d}));
    std::bernoulli_distribution coin(q0);
    std::size_t x = 0;
    for (std::size_t i = 0; i < n; ++i) x += coin(rng) ? 1 : 0;
    err.push_back(beta_bernoulli_posterior_mean(n, x, alpha, beta) - q0);
  }
  const Distribution s = summarize(err);
  return {s.mean, s.se, datasets};
}

// ---------------------------------------------------------------------------
// Logistic study

enum class LogisticMode { Raw, Alg1, Alg2 };

inline LogisticMode parse_mode(const std::string& text) {
  if (text == "raw") return LogisticMode::Raw;
  if (text == "alg1") return LogisticMode::Alg1;
  if (text == "alg2") return LogisticMode::Alg2;
  throw ConfigError("unknown mode '" + text + "' (expected raw, alg1 or alg2)");
}

inline std::string to_string(LogisticMode mode) {
  switch (mode) {
    case LogisticMode::Raw: return "raw";
    case LogisticMode::Alg1: return "alg1";
    case LogisticMode::Alg2: return "alg2";
  }
  return "?";
}

struct LogisticStudyConfig {
  /// Group size; N_p = 3m coefficients valued 10, -5, 0 by group.
  std::size_t m = 7;
  std::size_t n = 210;
  /// Off-diagonal covariate covariance; the diagonal is 1/n.
  double rho_value = 0.0;
  std::size_t trials = 30;
  double delta = 0.2;
  std::size_t iterations = 4;
  SamplerConfig sampler;
  std::uint64_t seed = 1;
  std::size_t workers = 1;

  std::size_t covariates() const { return 3 * m; }

  void validate() const {
    if (m < 1) throw ConfigError("logistic study: m must be >= 1");
    if (n < covariates()) throw ConfigError("logistic study: n must be >= N_p");
    if (trials < 1) throw ConfigError("logistic study: trials must be >= 1");
    if (!(delta > 0.0 && delta <= 1.0)) throw ConfigError("logistic study: delta must lie in (0,1]");
    if (iterations < 1) throw ConfigError("logistic study: L must be >= 1");
    if (!std::isfinite(rho_value)) throw ConfigError("logistic study: rho_value must be finite");
    sampler.validate();
  }
};

struct LogisticData {
  Dataset data;
  std::vector<double> truth;
};

inline std::vector<double> logistic_truth(std::size_t m) {
  std::vector<double> a;
  for (double v : {10.0, -5.0, 0.0}) a.insert(a.end(), m, v);
  return a;
}

/// Lower Cholesky factor of the covariate covariance (1/n on the diagonal,
/// rho_value elsewhere).
inline Eigen::MatrixXd covariate_factor(std::size_t p, std::size_t n, double rho_value) {
  const auto dim = static_cast<Eigen::Index>(p);
  Eigen::MatrixXd cov = Eigen::MatrixXd::Constant(dim, dim, rho_value);
  cov.diagonal().setConstant(1.0 / static_cast<double>(n));
  Eigen::LLT<Eigen::MatrixXd> llt(cov);
  if (llt.info() != Eigen::Success)
    throw ConfigError("covariate covariance is not positive definite (diagonal 1/n = " +
                      std::to_string(1.0 / static_cast<double>(n)) + ", off-diagonal " + std::to_string(rho_value) + ")");
  return llt.matrixL();
}

inline LogisticData generate_logistic_data(const LogisticStudyConfig& cfg, std::size_t trial) {
  const std::size_t p = cfg.covariates();
  const Eigen::MatrixXd factor = covariate_factor(p, cfg.n, cfg.rho_value);
  LogisticData out{{}, logistic_truth(cfg.m)};
  Rng rng = make_rng(derive_seed(cfg.seed, "logistic-data", {trial}));
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  Eigen::VectorXd z(static_cast<Eigen::Index>(p));
  out.data.observations.reserve(cfg.n);
  for (std::size_t i = 0; i < cfg.n; ++i) {
    for (Eigen::Index s = 0; s < z.size(); ++s) z(s) = normal(rng);
    const Eigen::VectorXd x = factor * z;
    Observation obs;
    obs.covariates.assign(x.data(), x.data() + x.size());
    const double eta = linear_predictor(obs.covariates, out.truth);
    const double q = 1.0 / (1.0 + std::exp(-eta));
    obs.response = uniform(rng) < q ? 1.0 : 0.0;
    out.data.observations.push_back(std::move(obs));
  }
  return out;
}

/// Estimates of one coefficient in one trial. Columns a mode does not
/// compute are NaN.
struct TrialRow {
  std::size_t trial = 0;
  std::size_t coefficient = 0;
  double truth = 0.0;
  double raw = kMissing;         // E_pos[a_s]
  double b0_hat = kMissing;
  double b2_hat = kMissing;
  double alg1 = kMissing;        // raw - b̂0 - b̂2
  double alg2_tilted = kMissing; // E^λ_pos[a_s] after the updates
  double alg2 = kMissing;        // returned by Algorithm 2
};

struct CoefficientMedians {
  std::size_t coefficient = 0;
  double truth = 0.0;
  double raw = kMissing;
  double minus_b2 = kMissing;
  double minus_b0 = kMissing;
  double alg1 = kMissing;
  double alg2_tilted = kMissing;
  double alg2 = kMissing;
};

struct LogisticSummary {
  LogisticMode mode = LogisticMode::Raw;
  std::vector<TrialRow> rows;
  std::vector<CoefficientMedians> medians;
  std::size_t excluded = 0;
  std::vector<std::string> failures;
};

inline double median_of(const std::vector<TrialRow>& rows, std::size_t coefficient, double TrialRow::*field) {
  std::vector<double> v;
  for (const auto& r : rows)
    if (r.coefficient == coefficient && !std::isnan(r.*field)) v.push_back(r.*field);
  return v.empty() ? kMissing : median(std::move(v));
}

inline std::vector<CoefficientMedians> medians_from_rows(const std::vector<TrialRow>& rows, std::size_t covariates) {
  std::vector<CoefficientMedians> out;
  for (std::size_t s = 0; s < covariates; ++s) {
    CoefficientMedians m;
    m.coefficient = s;
    for (const auto& r : rows)
      if (r.coefficient == s) m.truth = r.truth;
    m.raw = median_of(rows, s, &TrialRow::raw);
    std::vector<double> with_b2, with_b0;
    for (const auto& r : rows) {
      if (r.coefficient != s || std::isnan(r.b0_hat)) continue;
      with_b2.push_back(r.raw - r.b2_hat);
      with_b0.push_back(r.raw - r.b0_hat);
    }
    m.minus_b2 = with_b2.empty() ? kMissing : median(with_b2);
    m.minus_b0 = with_b0.empty() ? kMissing : median(with_b0);
    m.alg1 = median_of(rows, s, &TrialRow::alg1);
    m.alg2_tilted = median_of(rows, s, &TrialRow::alg2_tilted);
    m.alg2 = median_of(rows, s, &TrialRow::alg2);
    out.push_back(m);
  }
  return out;
}

/// Per trial: raw posterior means (raw), plus the Algorithm-1 correction at
/// λ = 0 (alg1), plus Algorithm 2 (alg2). Algorithm 2's first round runs at
/// λ = 0 with the trial's master seed, so alg2 mode reports all three from
/// the same chains.
inline LogisticSummary run_logistic_study(const LogisticStudyConfig& cfg, LogisticMode mode) {
  cfg.validate();
  covariate_factor(cfg.covariates(), cfg.n, cfg.rho_value);
  const LogisticModel model(cfg.covariates());
  const std::size_t p = cfg.covariates();

  std::vector<std::vector<TrialRow>> per(cfg.trials);
  std::vector<std::string> errors(cfg.trials);
  parallel_for(cfg.trials, cfg.workers, [&](std::size_t t) {
    try {
      const LogisticData generated = generate_logistic_data(cfg, t);
      SamplerConfig sampler = cfg.sampler;
      sampler.seed = derive_seed(cfg.seed, "logistic-sampler", {t});
      std::vector<TrialRow> rows(p);
      for (std::size_t s = 0; s < p; ++s) {
        rows[s].trial = t;
        rows[s].coefficient = s;
        rows[s].truth = generated.truth[s];
      }
      auto fill_round0 = [&](const RoundEvaluation& e) {
        for (std::size_t s = 0; s < p; ++s) {
          const auto k = static_cast<Eigen::Index>(s);
          rows[s].raw = e.mean(k);
          rows[s].b0_hat = e.b0(k);
          rows[s].b2_hat = e.b2(k);
          rows[s].alg1 = e.mean(k) - e.b_hat(k);
        }
      };
      if (mode == LogisticMode::Raw) {
        const auto samples = sample_posterior(TiltedPosterior(model, generated.data), sampler);
        const Eigen::VectorXd mean = samples.draws().colwise().mean().transpose();
        for (std::size_t s = 0; s < p; ++s) rows[s].raw = mean(static_cast<Eigen::Index>(s));
      } else if (mode == LogisticMode::Alg1) {
        fill_round0(evaluate_round_mcmc(model, generated.data, Eigen::VectorXd::Zero(static_cast<Eigen::Index>(p)), sampler));
      } else {
        IterationConfig it;
        it.delta = cfg.delta;
        it.iterations = cfg.iterations;
        it.sampler = sampler;
        const CorrectedEstimate result = run_algorithm2(model, generated.data, it);
        fill_round0(result.history.front().evaluation);
        for (std::size_t s = 0; s < p; ++s) {
          rows[s].alg2_tilted = result.theta_hat(static_cast<Eigen::Index>(s));
          rows[s].alg2 = result.corrected(static_cast<Eigen::Index>(s));
        }
      }
      per[t] = std::move(rows);
    } catch (const Error& e) {
      errors[t] = e.what();
    }
  });

  LogisticSummary summary;
  summary.mode = mode;
  for (std::size_t t = 0; t < cfg.trials; ++t) {
    if (!errors[t].empty()) {
      ++summary.excluded;
      summary.failures.push_back("trial " + std::to_string(t) + ": " + errors[t]);
      continue;
    }
    summary.rows.insert(summary.rows.end(), per[t].begin(), per[t].end());
  }
  enforce_exclusion_cap(summary.excluded, cfg.trials, "logistic study");
  summary.medians = medians_from_rows(summary.rows, p);
  return summary;
}

/// Mean over nonzero-truth coefficients of |median - truth| for one column.
inline double mean_abs_median_error(const std::vector<CoefficientMedians>& medians, double CoefficientMedians::*field) {
  double sum = 0.0;
  std::size_t count = 0;
  for (const auto& m : medians) {
    if (m.truth == 0.0) continue;
    sum += std::abs(m.*field - m.truth);
    ++count;
  }
  return count == 0 ? kMissing : sum / static_cast<double>(count);
}

}  // namespace postbias::experiments
