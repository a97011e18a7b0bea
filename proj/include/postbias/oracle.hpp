#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "postbias/error.hpp"
#include "postbias/estimator.hpp"
#include "postbias/models.hpp"
#include "postbias/parallel.hpp"
#include "postbias/quasiprior.hpp"
#include "postbias/sampler.hpp"

// Ground-truth engines used to check the MCMC estimators. Nothing in here
// calls into estimator.hpp's cumulant code; moments are recomputed from
// scratch on deterministic grids or closed forms.

namespace postbias::oracle {

// ---------------------------------------------------------------------------
// Closed forms

/// Frequentist bias of the Beta-Bernoulli posterior mean: (n q0 + α)/(n + α + β) - q0.
inline double definitional_bias_beta_bernoulli(double n, double q0, double alpha, double beta) {
  if (!(q0 > 0.0 && q0 < 1.0)) throw DomainError("definitional bias: q0 must lie in (0,1)");
  if (!(alpha > 0.0) || !(beta > 0.0)) throw DomainError("definitional bias: alpha and beta must be positive");
  if (!(n >= 0.0)) throw DomainError("definitional bias: n must be >= 0");
  return (n * q0 + alpha) / (n + alpha + beta) - q0;
}

/// Σ_i (E^{-i}[q] - E[q]) with the exact Beta posterior means.
inline double jackknife_bias_beta_bernoulli(const Dataset& data, double alpha, double beta) {
  const std::size_t n = data.size();
  if (n < 2) throw OracleUnavailableError("jackknife: need n >= 2");
  std::size_t successes = 0;
  for (const auto& obs : data.observations) successes += obs.response == 1.0 ? 1 : 0;
  const double full = beta_bernoulli_posterior_mean(n, successes, alpha, beta);
  double sum = 0.0;
  for (const auto& obs : data.observations) {
    const std::size_t x = successes - (obs.response == 1.0 ? 1 : 0);
    sum += beta_bernoulli_posterior_mean(n - 1, x, alpha, beta) - full;
  }
  return sum;
}

// ---------------------------------------------------------------------------
// Quadrature

struct QuadratureGrid {
  /// Nodes per dimension; 0 selects 2048 in 1-D and 512 in 2-D.
  std::size_t nodes = 0;
  /// The box grows until the log-density on its boundary sits this far below the mode...
  double tail_log_drop = 46.0;
  /// ...or until a face is this many marginal sd from the mode. Bounds the
  /// box for flat-prior Weibull, whose posterior has a slowly decaying ridge
  /// towards shape -> 1/n.
  double max_reach_sd = 40.0;

  std::size_t nodes_for(std::size_t dim) const { return nodes != 0 ? nodes : (dim == 1 ? 2048 : 512); }
};

struct Box {
  std::vector<double> lower;
  std::vector<double> upper;
};

struct QuadratureMoments {
  double mean_A = 0.0;
  double cov_A_li = 0.0;
  double k3_A_li_li = 0.0;
  double k13_A_li = 0.0;
  double var_li = 0.0;
};

namespace detail {

inline void require_low_dim(std::size_t dim) {
  if (dim < 1 || dim > 2) throw OracleUnavailableError("quadrature supports K <= 2 only (K=" + std::to_string(dim) + ")");
}

/// Damped Newton ascent on the unconstrained log-density with
/// finite-difference derivatives. Returns the mode and the marginal scales
/// sqrt(diag(-H^{-1})).
inline std::pair<std::vector<double>, std::vector<double>> locate_mode(const TiltedPosterior& tp) {
  const Model& model = tp.model();
  const std::size_t dim = model.dim();
  std::vector<double> u(dim);
  model.to_unconstrained(model.initial_point(), u);
  auto f = [&](const std::vector<double>& x) { return log_unnormalized_posterior_unconstrained(tp, x); };
  if (!std::isfinite(f(u))) throw OracleUnavailableError("quadrature: non-finite density at the start point");

  const double h = 1e-4;
  Eigen::VectorXd grad(static_cast<Eigen::Index>(dim));
  Eigen::MatrixXd hess(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(dim));
  auto derivatives = [&](const std::vector<double>& x) {
    const double f0 = f(x);
    for (std::size_t a = 0; a < dim; ++a) {
      auto xp = x, xm = x;
      xp[a] += h;
      xm[a] -= h;
      const double fp = f(xp), fm = f(xm);
      grad(static_cast<Eigen::Index>(a)) = (fp - fm) / (2 * h);
      hess(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(a)) = (fp - 2 * f0 + fm) / (h * h);
      for (std::size_t b = 0; b < a; ++b) {
        auto pp = x, pm = x, mp = x, mm = x;
        pp[a] += h, pp[b] += h;
        pm[a] += h, pm[b] -= h;
        mp[a] -= h, mp[b] += h;
        mm[a] -= h, mm[b] -= h;
        const double v = (f(pp) - f(pm) - f(mp) + f(mm)) / (4 * h * h);
        hess(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) = v;
        hess(static_cast<Eigen::Index>(b), static_cast<Eigen::Index>(a)) = v;
      }
    }
  };

  for (int iter = 0; iter < 500; ++iter) {
    derivatives(u);
    Eigen::VectorXd step;
    Eigen::LLT<Eigen::MatrixXd> llt(-hess);
    if (llt.info() == Eigen::Success)
      step = llt.solve(grad);
    else
      step = grad / std::max(1.0, grad.norm());
    double scale = 1.0;
    const double f0 = f(u);
    bool moved = false;
    for (int ls = 0; ls < 60; ++ls, scale *= 0.5) {
      std::vector<double> trial = u;
      for (std::size_t a = 0; a < dim; ++a) trial[a] += scale * step(static_cast<Eigen::Index>(a));
      const double ft = f(trial);
      if (std::isfinite(ft) && ft >= f0) {
        moved = (ft - f0) > 1e-14 * std::max(1.0, std::abs(f0)) || step.norm() * scale > 1e-10;
        u = trial;
        break;
      }
    }
    if (!moved || step.norm() < 1e-10) break;
  }
  derivatives(u);
  Eigen::LLT<Eigen::MatrixXd> llt(-hess);
  if (llt.info() != Eigen::Success) throw OracleUnavailableError("quadrature: posterior mode not found (improper posterior?)");
  const Eigen::MatrixXd cov = llt.solve(Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(dim)));
  std::vector<double> sd(dim);
  for (std::size_t a = 0; a < dim; ++a) sd[a] = std::sqrt(cov(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(a)));
  return {u, sd};
}

/// Maximum log-density over points spread along the faces of the box.
inline double boundary_max(const TiltedPosterior& tp, const Box& box, std::size_t face, bool upper) {
  const std::size_t dim = box.lower.size();
  std::vector<double> u(dim);
  u[face] = upper ? box.upper[face] : box.lower[face];
  if (dim == 1) return log_unnormalized_posterior_unconstrained(tp, u);
  const std::size_t other = 1 - face;
  double best = kNegInf;
  constexpr int kPoints = 129;
  for (int t = 0; t < kPoints; ++t) {
    u[other] = box.lower[other] + (box.upper[other] - box.lower[other]) * t / (kPoints - 1);
    const double v = log_unnormalized_posterior_unconstrained(tp, u);
    if (!std::isnan(v)) best = std::max(best, v);
  }
  return best;
}

}  // namespace detail

/// Integration box in unconstrained space: mode ± 8 marginal sd, each face
/// pushed out until the density there is exp(-tail_log_drop) below the mode
/// or the face reaches max_reach_sd.
inline Box find_box(const TiltedPosterior& tp, const QuadratureGrid& grid) {
  detail::require_low_dim(tp.model().dim());
  const auto [mode, sd] = detail::locate_mode(tp);
  const double peak = log_unnormalized_posterior_unconstrained(tp, mode);
  const std::size_t dim = mode.size();
  Box box{mode, mode};
  for (std::size_t a = 0; a < dim; ++a) {
    box.lower[a] -= 8 * sd[a];
    box.upper[a] += 8 * sd[a];
  }
  for (int round = 0; round < 200; ++round) {
    bool grown = false;
    for (std::size_t a = 0; a < dim; ++a) {
      const double limit = grid.max_reach_sd * sd[a];
      for (bool upper : {false, true}) {
        double& face = upper ? box.upper[a] : box.lower[a];
        const double reach = std::abs(face - mode[a]);
        if (reach >= limit) continue;
        if (detail::boundary_max(tp, box, a, upper) > peak - grid.tail_log_drop) {
          face = mode[a] + (upper ? 1.0 : -1.0) * std::min(1.5 * reach, limit);
          grown = true;
        }
      }
    }
    if (!grown) return box;
  }
  throw OracleUnavailableError("quadrature: integration box did not settle");
}

/// Composite midpoint rule over a box in unconstrained space. Stores, per
/// node, θ, the K-free base term log p(θ) + log|dθ/du|, and every ℓ(X_i; θ),
/// so expectations under any weights w and tilt λ reuse the same grid.
class PosteriorQuadrature {
 public:
  PosteriorQuadrature(const TiltedPosterior& tp, const QuadratureGrid& grid)
      : PosteriorQuadrature(tp, grid, find_box(tp, grid)) {}

  PosteriorQuadrature(const TiltedPosterior& tp, const QuadratureGrid& grid, Box box)
      : weights_(tp.weights()), tilt_(tp.tilt()), box_(std::move(box)) {
    const Model& model = tp.model();
    const std::size_t dim = model.dim();
    detail::require_low_dim(dim);
    per_dim_ = grid.nodes_for(dim);
    if (per_dim_ < 2) throw ConfigError("quadrature: need at least 2 nodes per dimension");
    const std::size_t total = dim == 1 ? per_dim_ : per_dim_ * per_dim_;
    const std::size_t n = tp.data().size();
    theta_.resize(static_cast<Eigen::Index>(total), static_cast<Eigen::Index>(dim));
    base_.resize(static_cast<Eigen::Index>(total));
    loglik_.resize(static_cast<Eigen::Index>(total), static_cast<Eigen::Index>(n));
    log_cell_ = 0.0;
    std::vector<double> spacing(dim);
    for (std::size_t a = 0; a < dim; ++a) {
      spacing[a] = (box_.upper[a] - box_.lower[a]) / static_cast<double>(per_dim_);
      log_cell_ += std::log(spacing[a]);
    }
    std::vector<double> u(dim), theta(dim);
    for (std::size_t node = 0; node < total; ++node) {
      std::size_t rem = node;
      for (std::size_t a = 0; a < dim; ++a) {
        u[a] = box_.lower[a] + (static_cast<double>(rem % per_dim_) + 0.5) * spacing[a];
        rem /= per_dim_;
      }
      model.from_unconstrained(u, theta);
      const auto row = static_cast<Eigen::Index>(node);
      for (std::size_t a = 0; a < dim; ++a) theta_(row, static_cast<Eigen::Index>(a)) = theta[a];
      if (!model.in_support(theta)) {
        base_(row) = kNegInf;
        loglik_.row(row).setZero();
        continue;
      }
      base_(row) = model.log_prior(theta) + model.log_jacobian(u);
      for (std::size_t i = 0; i < n; ++i) {
        const double l = model.log_lik(tp.data()[i], theta);
        loglik_(row, static_cast<Eigen::Index>(i)) = l;
        if (!std::isfinite(l)) base_(row) = kNegInf;
      }
    }
  }

  std::size_t node_count() const { return static_cast<std::size_t>(theta_.rows()); }
  const Box& box() const { return box_; }
  const Eigen::MatrixXd& theta() const { return theta_; }
  const Eigen::MatrixXd& loglik() const { return loglik_; }
  const std::vector<double>& weights() const { return weights_; }
  const std::vector<double>& tilt() const { return tilt_; }

  Eigen::VectorXd log_density(const std::vector<double>& weights, const std::vector<double>& tilt) const {
    if (weights.size() != static_cast<std::size_t>(loglik_.cols())) throw DimensionError("quadrature: weights length");
    if (tilt.size() != static_cast<std::size_t>(theta_.cols())) throw DimensionError("quadrature: tilt length");
    Eigen::VectorXd out(base_.size());
    for (Eigen::Index r = 0; r < base_.size(); ++r) {
      if (base_(r) == kNegInf) {
        out(r) = kNegInf;
        continue;
      }
      double s = base_(r);
      for (Eigen::Index i = 0; i < loglik_.cols(); ++i)
        if (weights[static_cast<std::size_t>(i)] != 0.0) s += weights[static_cast<std::size_t>(i)] * loglik_(r, i);
      for (Eigen::Index k = 0; k < theta_.cols(); ++k) s -= tilt[static_cast<std::size_t>(k)] * theta_(r, k);
      out(r) = s;
    }
    return out;
  }

  /// Normalized node probabilities under (weights, tilt).
  Eigen::VectorXd probabilities(const std::vector<double>& weights, const std::vector<double>& tilt) const {
    Eigen::VectorXd lp = log_density(weights, tilt);
    const double peak = lp.maxCoeff();
    if (!std::isfinite(peak)) throw OracleUnavailableError("quadrature: density vanishes on the grid");
    Eigen::VectorXd p = (lp.array() - peak).exp();
    return p / p.sum();
  }
  Eigen::VectorXd probabilities() const { return probabilities(weights_, tilt_); }

  /// log ∫ exp(log-density) du by the midpoint rule.
  double log_normalizer(const std::vector<double>& weights, const std::vector<double>& tilt) const {
    Eigen::VectorXd lp = log_density(weights, tilt);
    const double peak = lp.maxCoeff();
    return peak + std::log((lp.array() - peak).exp().sum()) + log_cell_;
  }
  double log_normalizer() const { return log_normalizer(weights_, tilt_); }

  Eigen::VectorXd statistic(const StatisticSpec& a) const {
    Eigen::VectorXd v(theta_.rows());
    std::vector<double> theta(static_cast<std::size_t>(theta_.cols()));
    for (Eigen::Index r = 0; r < theta_.rows(); ++r) {
      for (Eigen::Index k = 0; k < theta_.cols(); ++k) theta[static_cast<std::size_t>(k)] = theta_(r, k);
      v(r) = base_(r) == kNegInf ? 0.0 : a.evaluate(theta);
    }
    return v;
  }

 private:
  std::vector<double> weights_;
  std::vector<double> tilt_;
  Box box_;
  std::size_t per_dim_ = 0;
  double log_cell_ = 0.0;
  Eigen::MatrixXd theta_;
  Eigen::VectorXd base_;
  Eigen::MatrixXd loglik_;
};

inline double weighted_mean(const Eigen::VectorXd& p, const Eigen::VectorXd& values) { return p.dot(values); }

inline QuadratureMoments moments_from(const Eigen::VectorXd& p, const Eigen::VectorXd& a, const Eigen::VectorXd& l) {
  QuadratureMoments m;
  m.mean_A = p.dot(a);
  const Eigen::ArrayXd da = a.array() - m.mean_A;
  const Eigen::ArrayXd dl = l.array() - p.dot(l);
  const Eigen::ArrayXd pa = p.array();
  m.cov_A_li = (pa * da * dl).sum();
  m.var_li = (pa * dl * dl).sum();
  m.k3_A_li_li = (pa * da * dl * dl).sum();
  m.k13_A_li = (pa * da * dl * dl * dl).sum() - 3.0 * m.cov_A_li * m.var_li;
  return m;
}

/// Mean of A and its joint cumulants with ℓ_i under the posterior of `tp`.
inline QuadratureMoments quadrature_moments(const TiltedPosterior& tp, const QuadratureGrid& grid,
                                            const StatisticSpec& a, std::size_t i) {
  if (i >= tp.data().size()) throw DimensionError("quadrature_moments: observation index out of range");
  const PosteriorQuadrature quad(tp, grid);
  return moments_from(quad.probabilities(), quad.statistic(a), quad.loglik().col(static_cast<Eigen::Index>(i)));
}

/// Exact-grid version of the Algorithm-1 terms: -Σ Cov[A, ℓ_i] and ½ Σ K[A, ℓ_i, ℓ_i].
struct QuadratureBias {
  double mean = 0.0;
  double b0 = 0.0;
  double b2 = 0.0;
  double k13_diag = 0.0;
};

inline QuadratureBias quadrature_bias(const PosteriorQuadrature& quad, const StatisticSpec& a) {
  const Eigen::VectorXd p = quad.probabilities();
  const Eigen::VectorXd values = quad.statistic(a);
  QuadratureBias out;
  out.mean = p.dot(values);
  for (Eigen::Index i = 0; i < quad.loglik().cols(); ++i) {
    const auto m = moments_from(p, values, quad.loglik().col(i));
    out.b0 -= m.cov_A_li;
    out.b2 += 0.5 * m.k3_A_li_li;
    out.k13_diag += std::abs(m.k13_A_li);
  }
  return out;
}

struct QuadratureSelfCheck {
  /// Relative change of the normalizer when nodes per dimension double.
  double node_doubling = 0.0;
  /// Relative change of the normalizer when the box doubles in width (nodes double too).
  double bound_doubling = 0.0;
  /// Largest change of E[A] under either refinement.
  double mean_change = 0.0;
};

/// Streaming normalizer and mean of A; no per-node storage.
inline std::pair<double, double> stream_normalizer(const TiltedPosterior& tp, const Box& box, std::size_t per_dim,
                                                   const StatisticSpec& a) {
  const Model& model = tp.model();
  const std::size_t dim = model.dim();
  const std::size_t total = dim == 1 ? per_dim : per_dim * per_dim;
  std::vector<double> spacing(dim);
  double log_cell = 0.0;
  for (std::size_t d = 0; d < dim; ++d) {
    spacing[d] = (box.upper[d] - box.lower[d]) / static_cast<double>(per_dim);
    log_cell += std::log(spacing[d]);
  }
  std::vector<double> lp(total), av(total);
  std::vector<double> u(dim), theta(dim);
  double peak = kNegInf;
  for (std::size_t node = 0; node < total; ++node) {
    std::size_t rem = node;
    for (std::size_t d = 0; d < dim; ++d) {
      u[d] = box.lower[d] + (static_cast<double>(rem % per_dim) + 0.5) * spacing[d];
      rem /= per_dim;
    }
    lp[node] = log_unnormalized_posterior_unconstrained(tp, u);
    model.from_unconstrained(u, theta);
    av[node] = lp[node] == kNegInf ? 0.0 : a.evaluate(theta);
    peak = std::max(peak, lp[node]);
  }
  double z = 0.0, za = 0.0;
  for (std::size_t node = 0; node < total; ++node) {
    const double w = std::exp(lp[node] - peak);
    z += w;
    za += w * av[node];
  }
  return {peak + std::log(z) + log_cell, za / z};
}

/// Refinement study backing the "< 1e-8 discretization error" claim.
inline QuadratureSelfCheck quadrature_self_check(const TiltedPosterior& tp, const QuadratureGrid& grid,
                                                 const StatisticSpec& a) {
  const Box box = find_box(tp, grid);
  const std::size_t per_dim = grid.nodes_for(tp.model().dim());
  const auto [z0, m0] = stream_normalizer(tp, box, per_dim, a);
  const auto [z1, m1] = stream_normalizer(tp, box, 2 * per_dim, a);
  Box wide = box;
  for (std::size_t d = 0; d < box.lower.size(); ++d) {
    const double half = 0.5 * (box.upper[d] - box.lower[d]);
    wide.lower[d] -= half;
    wide.upper[d] += half;
  }
  const auto [z2, m2] = stream_normalizer(tp, wide, 2 * per_dim, a);
  QuadratureSelfCheck out;
  out.node_doubling = std::abs(std::expm1(z1 - z0));
  out.bound_doubling = std::abs(std::expm1(z2 - z0));
  const double scale = std::max(std::abs(m0), 1e-300);
  out.mean_change = std::max(std::abs(m1 - m0), std::abs(m2 - m0)) / scale;
  return out;
}

// ---------------------------------------------------------------------------
// Local case sensitivity

struct SensitivityCheck {
  double fd1 = 0.0;  // central difference of E^w[A] in w_i at w = 1
  double cov = 0.0;  // Cov[A, ℓ_i]
  double fd2 = 0.0;  // second central difference
  double k3 = 0.0;   // K[A, ℓ_i, ℓ_i]
};

inline SensitivityCheck fd_sensitivity_check(const PosteriorQuadrature& quad, const StatisticSpec& a, std::size_t i,
                                             double h) {
  if (!(h >= 1e-5 && h <= 1e-2)) throw DomainError("fd_sensitivity_check: h must lie in [1e-5, 1e-2]");
  if (i >= quad.weights().size()) throw DimensionError("fd_sensitivity_check: observation index out of range");
  const Eigen::VectorXd values = quad.statistic(a);
  auto expectation = [&](double wi) {
    std::vector<double> w = quad.weights();
    w[i] = wi;
    return quad.probabilities(w, quad.tilt()).dot(values);
  };
  const double w0 = quad.weights()[i];
  const double plus = expectation(w0 + h), centre = expectation(w0), minus = expectation(w0 - h);
  const auto m = moments_from(quad.probabilities(), values, quad.loglik().col(static_cast<Eigen::Index>(i)));
  return {(plus - minus) / (2 * h), m.cov_A_li, (plus - 2 * centre + minus) / (h * h), m.k3_A_li_li};
}

inline SensitivityCheck fd_sensitivity_check(const TiltedPosterior& tp, const QuadratureGrid& grid,
                                             const StatisticSpec& a, std::size_t i, double h) {
  return fd_sensitivity_check(PosteriorQuadrature(tp, grid), a, i, h);
}

// ---------------------------------------------------------------------------
// Jackknife

enum class JackknifeMethod { Quadrature, Mcmc };

struct JackknifeConfig {
  JackknifeMethod method = JackknifeMethod::Mcmc;
  SamplerConfig sampler;
  QuadratureGrid grid;
  std::size_t batches = 20;
  std::size_t workers = 1;
};

struct JackknifeResult {
  double value = 0.0;
  /// Batch-means MCSE of the MCMC route; 0 for quadrature.
  double mcse = 0.0;
};

/// Σ_i (E^{-i}[A] - E[A]) with E^{-i} the posterior under w_i = 0.
///
/// The MCMC route runs n + 1 chains sharing one seed, so the per-draw
/// differences are aligned and their batch means give the MCSE of the sum.
inline JackknifeResult jackknife_bias(const Model& model, const Dataset& data, const StatisticSpec& a,
                                      const JackknifeConfig& cfg) {
  const std::size_t n = data.size();
  if (n < 2 || n - 1 < model.min_observations())
    throw OracleUnavailableError("jackknife: deletion posterior improper for n=" + std::to_string(n));
  model.validate(data);
  auto weights_without = [n](std::size_t i) {
    std::vector<double> w(n, 1.0);
    w[i] = 0.0;
    return w;
  };

  if (cfg.method == JackknifeMethod::Quadrature) {
    const TiltedPosterior full(model, data);
    const double e_full = [&] {
      const PosteriorQuadrature quad(full, cfg.grid);
      return weighted_mean(quad.probabilities(), quad.statistic(a));
    }();
    std::vector<double> diffs(n);
    for (std::size_t i = 0; i < n; ++i) {
      const TiltedPosterior deleted(model, data, weights_without(i));
      const PosteriorQuadrature quad(deleted, cfg.grid);
      diffs[i] = weighted_mean(quad.probabilities(), quad.statistic(a)) - e_full;
    }
    return {order_independent_sum(diffs), 0.0};
  }

  const TiltedPosterior full(model, data);
  const Eigen::VectorXd base = statistic_values(sample_posterior(full, cfg.sampler), a);
  std::vector<Eigen::VectorXd> deleted(n);
  parallel_for(n, cfg.workers, [&](std::size_t i) {
    const TiltedPosterior tp(model, data, weights_without(i));
    deleted[i] = statistic_values(sample_posterior(tp, cfg.sampler), a);
  });
  const auto m = static_cast<Eigen::Index>(base.size());
  Eigen::VectorXd series = Eigen::VectorXd::Zero(m);
  for (std::size_t i = 0; i < n; ++i) series += deleted[i] - base;
  JackknifeResult out;
  out.value = series.mean();
  const std::size_t batches = std::max<std::size_t>(2, cfg.batches);
  const Eigen::Index size = m / static_cast<Eigen::Index>(batches);
  if (size >= 1) {
    std::vector<double> means;
    for (std::size_t b = 0; b < batches; ++b) means.push_back(series.segment(static_cast<Eigen::Index>(b) * size, size).mean());
    out.mcse = postbias::detail::sample_sd(means) / std::sqrt(static_cast<double>(batches));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Quasi-prior rounds on the grid

/// Deterministic replacement for evaluate_round_mcmc when K <= 2.
inline RoundEvaluation evaluate_round_quadrature(const Model& model, const Dataset& data, const Eigen::VectorXd& lambda,
                                                 const QuadratureGrid& grid) {
  const TiltedPosterior tp(model, data, {}, std::vector<double>(lambda.data(), lambda.data() + lambda.size()));
  const PosteriorQuadrature quad(tp, grid);
  const auto dim = static_cast<Eigen::Index>(model.dim());
  RoundEvaluation out;
  out.mean.resize(dim);
  out.b0.resize(dim);
  out.b2.resize(dim);
  out.b_hat.resize(dim);
  out.k13_diag.resize(dim);
  out.mcse = Eigen::VectorXd::Zero(dim);
  out.cov.resize(dim, dim);
  const Eigen::VectorXd p = quad.probabilities();
  const auto names = model.param_names();
  for (Eigen::Index k = 0; k < dim; ++k) {
    const auto bias = quadrature_bias(quad, coordinate_statistic(static_cast<std::size_t>(k), names[static_cast<std::size_t>(k)]));
    out.mean(k) = bias.mean;
    out.b0(k) = bias.b0;
    out.b2(k) = bias.b2;
    out.b_hat(k) = bias.b0 + bias.b2;
    out.k13_diag(k) = bias.k13_diag;
  }
  for (Eigen::Index a = 0; a < dim; ++a)
    for (Eigen::Index b = 0; b < dim; ++b) {
      const Eigen::ArrayXd da = quad.theta().col(a).array() - out.mean(a);
      const Eigen::ArrayXd db = quad.theta().col(b).array() - out.mean(b);
      out.cov(a, b) = (p.array() * da * db).sum();
    }
  return out;
}

}  // namespace postbias::oracle
