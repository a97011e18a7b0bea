#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "postbias/error.hpp"
#include "postbias/estimator.hpp"
#include "postbias/models.hpp"
#include "postbias/rng.hpp"
#include "postbias/sampler.hpp"

namespace postbias {

struct IterationConfig {
  /// Step fraction δ in λ ← λ + δ·Δλ.
  double delta = 0.2;
  /// L: L-1 update rounds followed by one estimation round.
  std::size_t iterations = 4;
  SamplerConfig sampler;
  double ridge = 0.0;
  /// Stop updating once ‖Δλ‖ falls below this; 0 disables the check.
  double min_update_norm = 0.0;
  std::size_t batches = 20;

  void validate() const {
    if (!(delta > 0.0 && delta <= 1.0)) throw ConfigError("iteration: delta must lie in (0,1]");
    if (iterations < 1) throw ConfigError("iteration: L must be >= 1");
    if (!(ridge >= 0.0)) throw ConfigError("iteration: ridge must be >= 0");
    if (!(min_update_norm >= 0.0)) throw ConfigError("iteration: min_update_norm must be >= 0");
    sampler.validate();
  }
};

/// What one round of Algorithm 1 under the current tilt reports.
struct RoundEvaluation {
  Eigen::VectorXd mean;
  Eigen::VectorXd b0;
  Eigen::VectorXd b2;
  Eigen::VectorXd b_hat;
  Eigen::VectorXd k13_diag;
  Eigen::VectorXd mcse;
  Eigen::MatrixXd cov;
};

struct StepRecord {
  std::size_t step = 0;
  Eigen::VectorXd lambda;
  RoundEvaluation evaluation;
  /// Zero on the final round.
  Eigen::VectorXd delta_lambda;
  double condition = std::numeric_limits<double>::quiet_NaN();
  double ridge = 0.0;
};

struct QuasiPriorState {
  Eigen::VectorXd lambda;
  std::size_t step = 0;
  std::vector<StepRecord> history;

  static QuasiPriorState initial(std::size_t dim) { return {Eigen::VectorXd::Zero(static_cast<Eigen::Index>(dim)), 0, {}}; }
};

struct CorrectedEstimate {
  std::vector<std::string> names;
  Eigen::VectorXd theta_hat;
  Eigen::VectorXd bias_hat;
  /// theta_hat - bias_hat.
  Eigen::VectorXd corrected;
  std::vector<StepRecord> history;
  /// ‖b̂‖ grew between consecutive rounds.
  bool oscillation_warning = false;
};

struct UpdateSolution {
  Eigen::VectorXd delta_lambda;
  double condition = 0.0;
};

inline double condition_number(const Eigen::MatrixXd& symmetric) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(symmetric, Eigen::EigenvaluesOnly);
  const double lo = eig.eigenvalues().minCoeff(), hi = eig.eigenvalues().maxCoeff();
  if (!(lo > 0.0)) return std::numeric_limits<double>::infinity();
  return hi / lo;
}

/// Solves (C + ridge·I) Δλ = b̂ by Cholesky.
inline UpdateSolution solve_update(const Eigen::MatrixXd& cov, const Eigen::VectorXd& b_hat, double ridge) {
  if (cov.rows() != cov.cols() || cov.rows() != b_hat.size())
    throw DimensionError("solve_update: C must be K×K and b̂ of length K");
  if (!(ridge >= 0.0)) throw DomainError("solve_update: ridge must be >= 0");
  if (!cov.isApprox(cov.transpose(), 1e-12)) throw DomainError("solve_update: C must be symmetric");
  Eigen::MatrixXd system = cov;
  system.diagonal().array() += ridge;
  const double cond = condition_number(system);
  Eigen::LLT<Eigen::MatrixXd> llt(system);
  if (llt.info() != Eigen::Success || !(cond < 1e15))
    throw SingularCovarianceError(
        "posterior covariance is not positive definite (condition " + std::to_string(cond) +
        "); parameters are not identifiable or extremely correlated");
  return {llt.solve(b_hat), cond};
}

/// λ ← λ + δ·Δλ, recording the round that produced Δλ.
inline QuasiPriorState update_lambda(QuasiPriorState state, const Eigen::VectorXd& delta_lambda, double delta,
                                     RoundEvaluation evaluation = {},
                                     double condition = std::numeric_limits<double>::quiet_NaN(),
                                     double ridge = 0.0) {
  if (delta_lambda.size() != state.lambda.size()) throw DimensionError("update_lambda: length mismatch");
  state.history.push_back({state.step, state.lambda, std::move(evaluation), delta_lambda, condition, ridge});
  state.lambda += delta * delta_lambda;
  ++state.step;
  return state;
}

/// Seed of round `step`: round 0 reuses the master seed so that L = 1
/// reproduces a plain Algorithm-1 run draw for draw.
inline std::uint64_t round_seed(std::uint64_t master, std::size_t step) {
  return step == 0 ? master : derive_seed(master, "quasi-prior-step", {step});
}

/// Algorithm-1 quantities for coordinate statistics from fresh MCMC at tilt λ.
inline RoundEvaluation evaluate_round_mcmc(const Model& model, const Dataset& data, const Eigen::VectorXd& lambda,
                                           const SamplerConfig& sampler, std::size_t batches = 20) {
  TiltedPosterior tp(model, data, {}, std::vector<double>(lambda.data(), lambda.data() + lambda.size()));
  const PosteriorSamples samples = sample_posterior(tp, sampler);
  const LogLikMatrix llm = log_lik_matrix(model, data, samples);
  const auto stats = coordinate_statistics(model.param_names());
  const auto estimates = estimate_bias(samples, llm, stats, batches);
  const auto k = static_cast<Eigen::Index>(model.dim());
  RoundEvaluation out;
  out.mean = samples.draws().colwise().mean().transpose();
  out.b0.resize(k);
  out.b2.resize(k);
  out.b_hat.resize(k);
  out.k13_diag.resize(k);
  out.mcse.resize(k);
  for (Eigen::Index i = 0; i < k; ++i) {
    const auto& e = estimates[static_cast<std::size_t>(i)];
    out.b0(i) = e.b0_hat;
    out.b2(i) = e.b2_hat;
    out.b_hat(i) = e.b_hat;
    out.k13_diag(i) = e.k13_diag;
    out.mcse(i) = e.mcse;
  }
  out.cov = posterior_cov_matrix(samples);
  return out;
}

/// The quasi-prior iteration over any round evaluator
/// `RoundEvaluation(const Eigen::VectorXd& lambda, std::size_t step)`.
///
/// Runs L-1 rounds of: evaluate at λ, solve C·Δλ = b̂, λ += δ·Δλ; then a
/// final evaluation whose posterior mean minus b̂ is returned. A singular C is
/// retried once with ridge 1e-8·tr(C)/K.
template <typename Evaluator>
CorrectedEstimate run_quasi_prior_iteration(Evaluator&& evaluate, std::vector<std::string> names,
                                            const IterationConfig& cfg) {
  if (!(cfg.delta > 0.0 && cfg.delta <= 1.0)) throw ConfigError("iteration: delta must lie in (0,1]");
  if (cfg.iterations < 1) throw ConfigError("iteration: L must be >= 1");
  const std::size_t dim = names.size();
  QuasiPriorState state = QuasiPriorState::initial(dim);
  CorrectedEstimate result;
  result.names = std::move(names);

  auto guarded = [&](std::size_t step) {
    try {
      return evaluate(state.lambda, step);
    } catch (const StepError&) {
      throw;
    } catch (const Error& e) {
      throw StepError(step, e.what());
    }
  };

  double previous_norm = std::numeric_limits<double>::infinity();
  for (std::size_t round = 0; round + 1 < cfg.iterations; ++round) {
    RoundEvaluation eval = guarded(state.step);
    const double norm = eval.b_hat.norm();
    if (norm > previous_norm) result.oscillation_warning = true;
    previous_norm = norm;

    UpdateSolution solution;
    double ridge = cfg.ridge;
    try {
      solution = solve_update(eval.cov, eval.b_hat, ridge);
    } catch (const SingularCovarianceError&) {
      ridge = 1e-8 * eval.cov.trace() / static_cast<double>(dim);
      try {
        solution = solve_update(eval.cov, eval.b_hat, ridge);
      } catch (const SingularCovarianceError& e) {
        throw StepError(state.step, e.what());
      }
    }
    const bool small = cfg.min_update_norm > 0.0 && solution.delta_lambda.norm() < cfg.min_update_norm;
    state = update_lambda(std::move(state), solution.delta_lambda, cfg.delta, std::move(eval), solution.condition, ridge);
    if (small) break;
  }

  RoundEvaluation last = guarded(state.step);
  if (last.b_hat.norm() > previous_norm) result.oscillation_warning = true;
  const double cond = condition_number(last.cov);
  result.theta_hat = last.mean;
  result.bias_hat = last.b_hat;
  result.corrected = last.mean - last.b_hat;
  state.history.push_back({state.step, state.lambda, std::move(last),
                           Eigen::VectorXd::Zero(static_cast<Eigen::Index>(dim)), cond, 0.0});
  result.history = std::move(state.history);
  return result;
}

/// Algorithm 2 with a fresh MCMC run per round.
inline CorrectedEstimate run_algorithm2(const Model& model, const Dataset& data, const IterationConfig& cfg) {
  cfg.validate();
  model.validate(data);
  auto evaluator = [&](const Eigen::VectorXd& lambda, std::size_t step) {
    SamplerConfig sampler = cfg.sampler;
    sampler.seed = round_seed(cfg.sampler.seed, step);
    return evaluate_round_mcmc(model, data, lambda, sampler, cfg.batches);
  };
  return run_quasi_prior_iteration(evaluator, model.param_names(), cfg);
}

}  // namespace postbias
