// Estimate and correct the bias of Weibull posterior means for one
// simulated dataset, then compare with the grid-based answer.
#include <iomanip>
#include <iostream>

#include "postbias/experiments.hpp"
#include "postbias/oracle.hpp"

int main() {
  using namespace postbias;

  Rng rng = make_rng(derive_seed(42, "demo-data"));
  const Dataset data = make_scalar_dataset(experiments::weibull_draws(30, 1.0, 0.8, rng));
  const WeibullModel model;
  const TiltedPosterior posterior(model, data);

  SamplerConfig sampler;
  sampler.seed = 42;
  const PosteriorSamples samples = sample_posterior(posterior, sampler);
  const LogLikMatrix loglik = log_lik_matrix(model, data, samples);
  const auto stats = coordinate_statistics(model.param_names());
  const auto estimates = estimate_bias(samples, loglik, stats);

  const oracle::PosteriorQuadrature grid(posterior, {});
  std::cout << std::fixed << std::setprecision(4);
  std::cout << "param     mean    b0_hat  b2_hat  b_hat   (mcse)   grid b_hat  corrected\n";
  for (std::size_t k = 0; k < stats.size(); ++k) {
    const auto& e = estimates[k];
    const auto exact = oracle::quadrature_bias(grid, stats[k]);
    const double mean = posterior_mean(samples, stats[k]);
    std::cout << std::setw(8) << std::left << e.statistic << std::right << std::setw(8) << mean << std::setw(8)
              << e.b0_hat << std::setw(8) << e.b2_hat << std::setw(8) << e.b_hat << "  (" << e.mcse << ")  "
              << std::setw(8) << exact.b0 + exact.b2 << "  " << std::setw(9) << mean - e.b_hat << "\n";
  }
}
