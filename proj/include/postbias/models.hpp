#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "postbias/dataset.hpp"
#include "postbias/error.hpp"
#include "postbias/samples.hpp"

namespace postbias {

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// ---------------------------------------------------------------------------
// Densities

/// log f(x | λ, γ) for the Weibull density (γ/λ)(x/λ)^(γ-1) exp(-(x/λ)^γ).
inline double weibull_log_density(double x, double scale, double shape) {
  if (!(scale > 0.0) || !(shape > 0.0) || !std::isfinite(scale) || !std::isfinite(shape))
    throw DomainError("weibull: scale and shape must be positive and finite");
  if (!(x >= 0.0) || !std::isfinite(x)) throw DomainError("weibull: x must be finite and >= 0");
  if (x == 0.0) {
    if (shape != 1.0) throw SingularPointError("weibull: density at x = 0 is 0 or unbounded unless shape = 1");
    return -std::log(scale);
  }
  return std::log(shape) - shape * std::log(scale) + (shape - 1.0) * std::log(x) - std::pow(x / scale, shape);
}

/// log(1 + e^η) without overflow.
inline double softplus(double eta) {
  return eta > 0.0 ? eta + std::log1p(std::exp(-eta)) : std::log1p(std::exp(eta));
}

inline double linear_predictor(std::span<const double> x, std::span<const double> a) {
  if (x.size() != a.size())
    throw DimensionError("logistic: covariate length " + std::to_string(x.size()) +
                         " differs from coefficient length " + std::to_string(a.size()));
  double eta = 0.0;
  for (std::size_t s = 0; s < x.size(); ++s) eta += a[s] * x[s];
  return eta;
}

/// y·η - log(1 + e^η) with η = Σ a_s x_s.
inline double logistic_log_lik(double y, std::span<const double> x, std::span<const double> a) {
  if (y != 0.0 && y != 1.0) throw DomainError("logistic: response must be 0 or 1");
  const double eta = linear_predictor(x, a);
  return y * eta - softplus(eta);
}

/// (X + α) / (n + α + β).
inline double beta_bernoulli_posterior_mean(std::size_t n, std::size_t successes, double alpha, double beta) {
  if (successes > n) throw DomainError("beta-bernoulli: successes exceed trials");
  if (!(alpha > 0.0) || !(beta > 0.0)) throw DomainError("beta-bernoulli: alpha and beta must be positive");
  return (static_cast<double>(successes) + alpha) / (static_cast<double>(n) + alpha + beta);
}

// ---------------------------------------------------------------------------
// Model interface

/// Weighted total log-likelihood Σ w_i ℓ(X_i; θ) with cheap single-coordinate
/// moves, used by the componentwise sampler.
class LikelihoodKernel {
 public:
  virtual ~LikelihoodKernel() = default;
  /// Makes θ the current point; returns the weighted log-likelihood there.
  virtual double reset(std::span<const double> theta) = 0;
  /// Weighted log-likelihood at the current point with θ_k replaced by `value`.
  virtual double propose(std::size_t k, double value) = 0;
  /// Commits the last proposal.
  virtual void accept() = 0;
};

/// A parametric model: per-observation log-likelihood ℓ(x; θ), a possibly
/// improper log-prior, and a bijection u ↦ θ from R^K onto the support.
class Model {
 public:
  virtual ~Model() = default;

  virtual std::string id() const = 0;
  virtual std::size_t dim() const = 0;
  virtual std::vector<std::string> param_names() const = 0;
  /// Throws DomainError/DimensionError for data the model cannot take.
  virtual void validate(const Dataset& data) const = 0;
  virtual bool in_support(std::span<const double> theta) const = 0;
  /// ℓ(x; θ); -inf outside the support.
  virtual double log_lik(const Observation& obs, std::span<const double> theta) const = 0;
  /// log p(θ) up to a constant; -inf outside the support.
  virtual double log_prior(std::span<const double> theta) const = 0;
  virtual void to_unconstrained(std::span<const double> theta, std::span<double> u) const = 0;
  virtual void from_unconstrained(std::span<const double> u, std::span<double> theta) const = 0;
  /// log |det dθ/du|.
  virtual double log_jacobian(std::span<const double> u) const = 0;
  /// Deterministic chain start, in parameter space.
  virtual std::vector<double> initial_point() const = 0;
  /// Smallest n for which the posterior is proper.
  virtual std::size_t min_observations() const { return 1; }

  virtual std::unique_ptr<LikelihoodKernel> make_kernel(const Dataset& data,
                                                        std::span<const double> weights) const;
};

/// Recomputes every term on each proposal.
class GenericKernel final : public LikelihoodKernel {
 public:
  GenericKernel(const Model& model, const Dataset& data, std::span<const double> weights)
      : model_(&model), data_(&data), weights_(weights.begin(), weights.end()) {}

  double reset(std::span<const double> theta) override {
    current_.assign(theta.begin(), theta.end());
    return total(current_);
  }
  double propose(std::size_t k, double value) override {
    proposal_ = current_;
    proposal_[k] = value;
    return total(proposal_);
  }
  void accept() override { current_.swap(proposal_); }

 private:
  double total(std::span<const double> theta) const {
    double sum = 0.0;
    for (std::size_t i = 0; i < data_->size(); ++i) {
      if (weights_[i] == 0.0) continue;
      sum += weights_[i] * model_->log_lik((*data_)[i], theta);
    }
    return sum;
  }

  const Model* model_;
  const Dataset* data_;
  std::vector<double> weights_;
  std::vector<double> current_;
  std::vector<double> proposal_;
};

inline std::unique_ptr<LikelihoodKernel> Model::make_kernel(const Dataset& data,
                                                            std::span<const double> weights) const {
  return std::make_unique<GenericKernel>(*this, data, weights);
}

// ---------------------------------------------------------------------------
// Weibull(λ, γ), flat improper prior on λ > 0 and γ > 0, sampled on (log λ, log γ).

class WeibullModel final : public Model {
 public:
  std::string id() const override { return "weibull"; }
  std::size_t dim() const override { return 2; }
  std::vector<std::string> param_names() const override { return {"lambda", "gamma"}; }

  void validate(const Dataset& data) const override {
    if (data.size() < 1) throw DomainError("weibull: empty dataset");
    for (std::size_t i = 0; i < data.size(); ++i) {
      const auto& obs = data[i];
      if (!obs.covariates.empty()) throw DimensionError("weibull: observations carry no covariates");
      if (!std::isfinite(obs.response) || obs.response < 0.0)
        throw DomainError("weibull: observation " + std::to_string(i) + " is not a finite value >= 0");
      if (obs.response == 0.0)
        throw SingularPointError("weibull: observation " + std::to_string(i) + " is exactly 0");
    }
  }

  bool in_support(std::span<const double> theta) const override {
    return theta[0] > 0.0 && theta[1] > 0.0 && std::isfinite(theta[0]) && std::isfinite(theta[1]);
  }

  double log_lik(const Observation& obs, std::span<const double> theta) const override {
    if (!in_support(theta)) return kNegInf;
    const double scale = theta[0], shape = theta[1];
    return std::log(shape) - shape * std::log(scale) + (shape - 1.0) * std::log(obs.response) -
           std::pow(obs.response / scale, shape);
  }

  double log_prior(std::span<const double> theta) const override { return in_support(theta) ? 0.0 : kNegInf; }

  void to_unconstrained(std::span<const double> theta, std::span<double> u) const override {
    u[0] = std::log(theta[0]);
    u[1] = std::log(theta[1]);
  }
  void from_unconstrained(std::span<const double> u, std::span<double> theta) const override {
    theta[0] = std::exp(u[0]);
    theta[1] = std::exp(u[1]);
  }
  double log_jacobian(std::span<const double> u) const override { return u[0] + u[1]; }
  std::vector<double> initial_point() const override { return {1.0, 1.0}; }
  std::size_t min_observations() const override { return 2; }

  std::unique_ptr<LikelihoodKernel> make_kernel(const Dataset& data,
                                                std::span<const double> weights) const override;
};

class WeibullKernel final : public LikelihoodKernel {
 public:
  WeibullKernel(const Dataset& data, std::span<const double> weights) {
    for (std::size_t i = 0; i < data.size(); ++i) {
      if (weights[i] == 0.0) continue;
      log_x_.push_back(std::log(data[i].response));
      weights_.push_back(weights[i]);
    }
  }
  double reset(std::span<const double> theta) override {
    current_[0] = theta[0];
    current_[1] = theta[1];
    return total(current_[0], current_[1]);
  }
  double propose(std::size_t k, double value) override {
    proposal_[0] = current_[0];
    proposal_[1] = current_[1];
    proposal_[k] = value;
    return total(proposal_[0], proposal_[1]);
  }
  void accept() override {
    current_[0] = proposal_[0];
    current_[1] = proposal_[1];
  }

 private:
  double total(double scale, double shape) const {
    if (!(scale > 0.0) || !(shape > 0.0)) return kNegInf;
    const double log_shape = std::log(shape), log_scale = std::log(scale);
    double sum = 0.0;
    for (std::size_t i = 0; i < log_x_.size(); ++i)
      sum += weights_[i] * (log_shape - shape * log_scale + (shape - 1.0) * log_x_[i] -
                            std::exp(shape * (log_x_[i] - log_scale)));
    return sum;
  }

  std::vector<double> log_x_;
  std::vector<double> weights_;
  double current_[2] = {1.0, 1.0};
  double proposal_[2] = {1.0, 1.0};
};

inline std::unique_ptr<LikelihoodKernel> WeibullModel::make_kernel(const Dataset& data,
                                                                   std::span<const double> weights) const {
  return std::make_unique<WeibullKernel>(data, weights);
}

// ---------------------------------------------------------------------------
// Logistic regression logit q_i = Σ_s a_s x_is, flat improper prior on a.

class LogisticModel final : public Model {
 public:
  explicit LogisticModel(std::size_t covariates) : covariates_(covariates) {
    if (covariates_ < 1) throw ConfigError("logistic: need at least one covariate");
  }

  std::string id() const override { return "logistic"; }
  std::size_t dim() const override { return covariates_; }
  std::vector<std::string> param_names() const override {
    std::vector<std::string> names;
    for (std::size_t s = 1; s <= covariates_; ++s) names.push_back("a" + std::to_string(s));
    return names;
  }

  void validate(const Dataset& data) const override {
    if (data.size() < 1) throw DomainError("logistic: empty dataset");
    for (std::size_t i = 0; i < data.size(); ++i) {
      const auto& obs = data[i];
      if (obs.response != 0.0 && obs.response != 1.0)
        throw DomainError("logistic: response " + std::to_string(i) + " is not 0 or 1");
      if (obs.covariates.size() != covariates_)
        throw DimensionError("logistic: observation " + std::to_string(i) + " has " +
                             std::to_string(obs.covariates.size()) + " covariates, expected " +
                             std::to_string(covariates_));
      for (double x : obs.covariates)
        if (!std::isfinite(x)) throw DomainError("logistic: non-finite covariate");
    }
  }

  bool in_support(std::span<const double> theta) const override {
    for (double a : theta)
      if (!std::isfinite(a)) return false;
    return true;
  }

  double log_lik(const Observation& obs, std::span<const double> theta) const override {
    return logistic_log_lik(obs.response, obs.covariates, theta);
  }
  double log_prior(std::span<const double> theta) const override { return in_support(theta) ? 0.0 : kNegInf; }

  void to_unconstrained(std::span<const double> theta, std::span<double> u) const override {
    std::copy(theta.begin(), theta.end(), u.begin());
  }
  void from_unconstrained(std::span<const double> u, std::span<double> theta) const override {
    std::copy(u.begin(), u.end(), theta.begin());
  }
  double log_jacobian(std::span<const double>) const override { return 0.0; }
  std::vector<double> initial_point() const override { return std::vector<double>(covariates_, 0.0); }
  std::size_t min_observations() const override { return covariates_; }

  std::unique_ptr<LikelihoodKernel> make_kernel(const Dataset& data,
                                                std::span<const double> weights) const override;

 private:
  std::size_t covariates_;
};

/// Caches the linear predictors η_i so a coordinate move costs O(n).
class LogisticKernel final : public LikelihoodKernel {
 public:
  LogisticKernel(const Dataset& data, std::span<const double> weights, std::size_t covariates)
      : p_(covariates) {
    for (std::size_t i = 0; i < data.size(); ++i) {
      if (weights[i] == 0.0) continue;
      y_.push_back(data[i].response);
      weights_.push_back(weights[i]);
    }
    const std::size_t n = y_.size();
    design_.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(p_));
    std::size_t row = 0;
    for (std::size_t i = 0; i < data.size(); ++i) {
      if (weights[i] == 0.0) continue;
      for (std::size_t s = 0; s < p_; ++s)
        design_(static_cast<Eigen::Index>(row), static_cast<Eigen::Index>(s)) = data[i].covariates[s];
      ++row;
    }
    eta_.assign(n, 0.0);
    trial_.assign(n, 0.0);
    coef_.assign(p_, 0.0);
  }

  double reset(std::span<const double> theta) override {
    coef_.assign(theta.begin(), theta.end());
    for (std::size_t i = 0; i < y_.size(); ++i) {
      double eta = 0.0;
      for (std::size_t s = 0; s < p_; ++s)
        eta += design_(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(s)) * coef_[s];
      eta_[i] = eta;
    }
    return total(eta_);
  }

  double propose(std::size_t k, double value) override {
    pending_k_ = k;
    pending_value_ = value;
    const double step = value - coef_[k];
    const double* column = design_.col(static_cast<Eigen::Index>(k)).data();
    for (std::size_t i = 0; i < y_.size(); ++i) trial_[i] = eta_[i] + step * column[i];
    return total(trial_);
  }

  void accept() override {
    coef_[pending_k_] = pending_value_;
    eta_.swap(trial_);
  }

 private:
  double total(const std::vector<double>& eta) const {
    double sum = 0.0;
    for (std::size_t i = 0; i < y_.size(); ++i) sum += weights_[i] * (y_[i] * eta[i] - softplus(eta[i]));
    return sum;
  }

  std::size_t p_;
  std::vector<double> y_;
  std::vector<double> weights_;
  Eigen::MatrixXd design_;
  std::vector<double> eta_;
  std::vector<double> trial_;
  std::vector<double> coef_;
  std::size_t pending_k_ = 0;
  double pending_value_ = 0.0;
};

inline std::unique_ptr<LikelihoodKernel> LogisticModel::make_kernel(const Dataset& data,
                                                                    std::span<const double> weights) const {
  return std::make_unique<LogisticKernel>(data, weights, covariates_);
}

// ---------------------------------------------------------------------------
// Bernoulli(q) with Beta(α, β) prior, sampled on logit q.

class BetaBernoulliModel final : public Model {
 public:
  BetaBernoulliModel(double alpha, double beta) : alpha_(alpha), beta_(beta) {
    if (!(alpha > 0.0) || !(beta > 0.0)) throw DomainError("beta-bernoulli: alpha and beta must be positive");
    log_beta_fn_ = std::lgamma(alpha) + std::lgamma(beta) - std::lgamma(alpha + beta);
  }

  double alpha() const { return alpha_; }
  double beta() const { return beta_; }

  std::string id() const override { return "beta-bernoulli"; }
  std::size_t dim() const override { return 1; }
  std::vector<std::string> param_names() const override { return {"q"}; }

  void validate(const Dataset& data) const override {
    for (std::size_t i = 0; i < data.size(); ++i) {
      if (!data[i].covariates.empty()) throw DimensionError("beta-bernoulli: observations carry no covariates");
      if (data[i].response != 0.0 && data[i].response != 1.0)
        throw DomainError("beta-bernoulli: response " + std::to_string(i) + " is not 0 or 1");
    }
  }

  bool in_support(std::span<const double> theta) const override { return theta[0] > 0.0 && theta[0] < 1.0; }

  double log_lik(const Observation& obs, std::span<const double> theta) const override {
    if (!in_support(theta)) return kNegInf;
    const double q = theta[0];
    return obs.response == 1.0 ? std::log(q) : std::log1p(-q);
  }

  double log_prior(std::span<const double> theta) const override {
    if (!in_support(theta)) return kNegInf;
    const double q = theta[0];
    return (alpha_ - 1.0) * std::log(q) + (beta_ - 1.0) * std::log1p(-q) - log_beta_fn_;
  }

  void to_unconstrained(std::span<const double> theta, std::span<double> u) const override {
    u[0] = std::log(theta[0]) - std::log1p(-theta[0]);
  }
  void from_unconstrained(std::span<const double> u, std::span<double> theta) const override {
    theta[0] = 1.0 / (1.0 + std::exp(-u[0]));
  }
  double log_jacobian(std::span<const double> u) const override { return -softplus(u[0]) - softplus(-u[0]); }
  std::vector<double> initial_point() const override { return {0.5}; }

  std::unique_ptr<LikelihoodKernel> make_kernel(const Dataset& data,
                                                std::span<const double> weights) const override;

 private:
  double alpha_;
  double beta_;
  double log_beta_fn_;
};

/// Sufficient statistics Σ w_i y_i and Σ w_i (1 - y_i).
class BetaBernoulliKernel final : public LikelihoodKernel {
 public:
  BetaBernoulliKernel(const Dataset& data, std::span<const double> weights) {
    for (std::size_t i = 0; i < data.size(); ++i) {
      if (weights[i] == 0.0) continue;
      if (data[i].response == 1.0)
        successes_ += weights[i];
      else
        failures_ += weights[i];
    }
  }
  double reset(std::span<const double> theta) override {
    current_ = theta[0];
    return total(current_);
  }
  double propose(std::size_t, double value) override {
    proposal_ = value;
    return total(value);
  }
  void accept() override { current_ = proposal_; }

 private:
  double total(double q) const {
    if (!(q > 0.0 && q < 1.0)) return kNegInf;
    double sum = 0.0;
    if (successes_ != 0.0) sum += successes_ * std::log(q);
    if (failures_ != 0.0) sum += failures_ * std::log1p(-q);
    return sum;
  }

  double successes_ = 0.0;
  double failures_ = 0.0;
  double current_ = 0.5;
  double proposal_ = 0.5;
};

inline std::unique_ptr<LikelihoodKernel> BetaBernoulliModel::make_kernel(const Dataset& data,
                                                                         std::span<const double> weights) const {
  return std::make_unique<BetaBernoulliKernel>(data, weights);
}

// ---------------------------------------------------------------------------
// Log-likelihood table

/// Entry (j, i) = ℓ(X_i; θ^(j)), tagged with the fingerprint of the draws.
struct LogLikMatrix {
  Eigen::MatrixXd values;
  std::uint64_t samples_fingerprint = 0;

  std::size_t draws() const { return static_cast<std::size_t>(values.rows()); }
  std::size_t observations() const { return static_cast<std::size_t>(values.cols()); }
};

inline LogLikMatrix log_lik_matrix(const Model& model, const Dataset& data, const PosteriorSamples& samples) {
  if (samples.dim() != model.dim())
    throw DimensionError("log_lik_matrix: samples have K=" + std::to_string(samples.dim()) + ", model has K=" +
                         std::to_string(model.dim()));
  const std::size_t m = samples.size(), n = data.size();
  LogLikMatrix out;
  out.values.resize(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(n));
  out.samples_fingerprint = samples.fingerprint();
  for (std::size_t j = 0; j < m; ++j) {
    const auto theta = samples.draw(j);
    for (std::size_t i = 0; i < n; ++i) {
      const double v = model.log_lik(data[i], theta);
      if (!std::isfinite(v))
        throw NonFiniteError("log_lik_matrix: non-finite log-likelihood at draw " + std::to_string(j) +
                                 ", observation " + std::to_string(i),
                             j, i);
      out.values(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) = v;
    }
  }
  return out;
}

}  // namespace postbias
