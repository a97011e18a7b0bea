#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "postbias/dataset.hpp"
#include "postbias/error.hpp"
#include "postbias/models.hpp"
#include "postbias/rng.hpp"
#include "postbias/samples.hpp"

namespace postbias {

/// p_{w,λ}(θ | X) ∝ exp{Σ_i w_i ℓ(X_i; θ) - Σ_k λ_k θ_k} p(θ).
///
/// Holds references to the model and data; both must outlive it.
class TiltedPosterior {
 public:
  TiltedPosterior(const Model& model, const Dataset& data, std::vector<double> weights = {},
                  std::vector<double> tilt = {})
      : model_(&model), data_(&data), weights_(std::move(weights)), tilt_(std::move(tilt)) {
    if (weights_.empty()) weights_.assign(data.size(), 1.0);
    if (tilt_.empty()) tilt_.assign(model.dim(), 0.0);
    if (weights_.size() != data.size())
      throw DimensionError("posterior: " + std::to_string(weights_.size()) + " weights for " +
                           std::to_string(data.size()) + " observations");
    if (tilt_.size() != model.dim())
      throw DimensionError("posterior: tilt has length " + std::to_string(tilt_.size()) + ", K=" +
                           std::to_string(model.dim()));
    for (double w : weights_)
      if (!(w >= 0.0 && w <= 1.0)) throw DomainError("posterior: weights must lie in [0,1]");
    for (double l : tilt_)
      if (!std::isfinite(l)) throw DomainError("posterior: tilt must be finite");
    model.validate(data);
  }

  const Model& model() const { return *model_; }
  const Dataset& data() const { return *data_; }
  const std::vector<double>& weights() const { return weights_; }
  const std::vector<double>& tilt() const { return tilt_; }

 private:
  const Model* model_;
  const Dataset* data_;
  std::vector<double> weights_;
  std::vector<double> tilt_;
};

inline double tilt_term(std::span<const double> tilt, std::span<const double> theta) {
  double sum = 0.0;
  for (std::size_t k = 0; k < tilt.size(); ++k) sum += tilt[k] * theta[k];
  return sum;
}

/// Σ w_i ℓ(X_i; θ) - λ·θ + log p(θ) in parameter space; -inf outside the support.
inline double log_unnormalized_posterior(const TiltedPosterior& tp, std::span<const double> theta) {
  const Model& model = tp.model();
  if (theta.size() != model.dim()) throw DimensionError("posterior: theta has wrong length");
  if (!model.in_support(theta)) return kNegInf;
  double sum = 0.0;
  for (std::size_t i = 0; i < tp.data().size(); ++i) {
    const double w = tp.weights()[i];
    if (w == 0.0) continue;
    sum += w * model.log_lik(tp.data()[i], theta);
  }
  const double value = sum - tilt_term(tp.tilt(), theta) + model.log_prior(theta);
  return std::isnan(value) ? kNegInf : value;
}

/// The same density expressed on the unconstrained coordinates u (adds log|dθ/du|).
inline double log_unnormalized_posterior_unconstrained(const TiltedPosterior& tp, std::span<const double> u) {
  std::vector<double> theta(u.size());
  tp.model().from_unconstrained(u, theta);
  const double base = log_unnormalized_posterior(tp, theta);
  return base == kNegInf ? kNegInf : base + tp.model().log_jacobian(u);
}

// ---------------------------------------------------------------------------
// Effective sample size

struct EssResult {
  std::vector<double> ess;
  std::vector<bool> degenerate;
};

/// ESS of one series by Geyer's initial positive sequence: autocorrelations
/// are summed in adjacent pairs until a pair sum turns non-positive.
/// A zero-variance series reports M and sets `degenerate`.
inline double effective_sample_size(std::span<const double> series, bool* degenerate = nullptr) {
  const std::size_t m = series.size();
  if (m < 10) throw ConfigError("effective_sample_size: need at least 10 draws");
  double mean = 0.0;
  for (double x : series) mean += x;
  mean /= static_cast<double>(m);
  std::vector<double> centered(m);
  for (std::size_t j = 0; j < m; ++j) centered[j] = series[j] - mean;
  auto autocov = [&](std::size_t lag) {
    double s = 0.0;
    for (std::size_t j = 0; j + lag < m; ++j) s += centered[j] * centered[j + lag];
    return s / static_cast<double>(m);
  };
  const double var0 = autocov(0);
  const double scale = std::max(std::abs(mean), 1.0);
  if (degenerate) *degenerate = false;
  if (!(var0 > 1e-28 * scale * scale)) {
    if (degenerate) *degenerate = true;
    return static_cast<double>(m);
  }
  double tau = -1.0;
  for (std::size_t lag = 0; lag + 1 < m; lag += 2) {
    const double pair = (autocov(lag) + autocov(lag + 1)) / var0;
    if (pair <= 0.0) break;
    tau += 2.0 * pair;
  }
  const double ess = static_cast<double>(m) / std::max(tau, 1e-12);
  return std::clamp(ess, 1.0, static_cast<double>(m));
}

inline EssResult effective_sample_size(const PosteriorSamples& samples) {
  EssResult out;
  std::vector<double> column(samples.size());
  for (std::size_t k = 0; k < samples.dim(); ++k) {
    for (std::size_t j = 0; j < samples.size(); ++j) column[j] = samples.draws()(j, k);
    bool flag = false;
    out.ess.push_back(effective_sample_size(column, &flag));
    out.degenerate.push_back(flag);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Sampler

/// Componentwise adaptive random-walk Metropolis on the unconstrained scale.
///
/// One stored iteration is a full sweep over the K coordinates. Per-coordinate
/// Gaussian step sizes are tuned towards `target_accept` in batches of 50
/// sweeps during the adaptation window and frozen afterwards, so the retained
/// chain is a plain Metropolis chain. Requires a coordinatewise transform
/// (θ_k depends on u_k only), which holds for the built-in models.
inline PosteriorSamples sample_posterior(const TiltedPosterior& tp, const SamplerConfig& cfg) {
  cfg.validate();
  const Model& model = tp.model();
  const std::size_t dim = model.dim();
  const auto& tilt = tp.tilt();

  auto kernel = model.make_kernel(tp.data(), tp.weights());
  std::vector<double> theta = model.initial_point();
  std::vector<double> u(dim);
  model.to_unconstrained(theta, u);

  auto rest = [&](std::span<const double> th, std::span<const double> uu) {
    return model.log_prior(th) - tilt_term(tilt, th) + model.log_jacobian(uu);
  };
  double log_lik = kernel->reset(theta);
  double log_post = log_lik + rest(theta, u);
  if (!std::isfinite(log_post)) throw InitializationError("sampler: non-finite log-posterior at the initial point");

  Rng rng = make_rng(cfg.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> uniform(0.0, 1.0);

  constexpr std::size_t kBatch = 50;
  const std::size_t adapt = cfg.adapt_steps == 0 ? cfg.burn_in : cfg.adapt_steps;
  std::vector<double> log_step(dim, std::log(cfg.initial_step));
  std::vector<std::size_t> batch_accepts(dim, 0);
  std::vector<std::size_t> kept_accepts(dim, 0);
  std::size_t kept_sweeps = 0;
  std::size_t batch_index = 0;

  DrawMatrix draws(static_cast<Eigen::Index>(cfg.samples), static_cast<Eigen::Index>(dim));
  std::vector<double> u_prop(dim), theta_prop(dim);
  const std::size_t total = cfg.burn_in + cfg.samples * cfg.thin;
  std::size_t stored = 0;

  for (std::size_t it = 0; it < total; ++it) {
    for (std::size_t k = 0; k < dim; ++k) {
      u_prop = u;
      u_prop[k] = u[k] + std::exp(log_step[k]) * normal(rng);
      model.from_unconstrained(u_prop, theta_prop);
      if (!model.in_support(theta_prop)) continue;
      const double proposal = kernel->propose(k, theta_prop[k]) + rest(theta_prop, u_prop);
      if (std::isfinite(proposal) && std::log(uniform(rng)) < proposal - log_post) {
        kernel->accept();
        u.swap(u_prop);
        theta.swap(theta_prop);
        log_post = proposal;
        ++batch_accepts[k];
        if (it >= cfg.burn_in) ++kept_accepts[k];
      }
    }
    if (it < adapt && (it + 1) % kBatch == 0) {
      ++batch_index;
      const double gain = std::min(0.5, 1.0 / std::sqrt(static_cast<double>(batch_index)));
      for (std::size_t k = 0; k < dim; ++k) {
        const double rate = static_cast<double>(batch_accepts[k]) / kBatch;
        log_step[k] += rate > cfg.target_accept ? gain : -gain;
      }
    }
    if ((it + 1) % kBatch == 0) std::fill(batch_accepts.begin(), batch_accepts.end(), 0);
    if (it >= cfg.burn_in) {
      ++kept_sweeps;
      if ((it - cfg.burn_in + 1) % cfg.thin == 0) {
        for (std::size_t k = 0; k < dim; ++k) draws(static_cast<Eigen::Index>(stored), static_cast<Eigen::Index>(k)) = theta[k];
        ++stored;
      }
    }
  }

  Provenance provenance{model.id(), tp.weights(), tilt, cfg.seed, cfg};
  ChainDiagnostics diagnostics;
  for (std::size_t k = 0; k < dim; ++k) {
    const double rate = static_cast<double>(kept_accepts[k]) / static_cast<double>(std::max<std::size_t>(kept_sweeps, 1));
    diagnostics.acceptance_rate.push_back(rate);
    diagnostics.step_size.push_back(std::exp(log_step[k]));
    if (rate < 0.1 || rate > 0.6) diagnostics.acceptance_warning = true;
  }
  if (cfg.samples >= 10) {
    std::vector<double> column(cfg.samples);
    for (std::size_t k = 0; k < dim; ++k) {
      for (std::size_t j = 0; j < cfg.samples; ++j)
        column[j] = draws(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(k));
      bool flag = false;
      diagnostics.ess.push_back(effective_sample_size(column, &flag));
      diagnostics.degenerate.push_back(flag);
    }
  }
  return PosteriorSamples(std::move(draws), model.param_names(), std::move(provenance), std::move(diagnostics));
}

}  // namespace postbias
