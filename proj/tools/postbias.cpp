#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "postbias/cli.hpp"

namespace {

using postbias::cli::RunConfig;

void add_sampler_options(CLI::App* sub, RunConfig& cfg) {
  sub->add_option("--seed", cfg.seed, "Master seed")->capture_default_str();
  sub->add_option("--samples", cfg.samples, "Posterior draws M kept after burn-in")->capture_default_str();
  sub->add_option("--burn-in", cfg.burn_in, "Sweeps discarded before sampling")->capture_default_str();
  sub->add_option("--thin", cfg.thin, "Keep every thin-th sweep")->capture_default_str();
}

void add_data_options(CLI::App* sub, RunConfig& cfg) {
  sub->add_option("--model", cfg.model, "beta-bernoulli, weibull or logistic")->required();
  auto* data = sub->add_option("--data", cfg.data, "CSV with column y (or x for weibull) and x1..xNp for logistic");
  auto* gen = sub->add_option("--generate", cfg.generate, "Generated data, e.g. weibull:n=30,scale=1,shape=0.8");
  data->excludes(gen);
  sub->add_option("--alpha", cfg.alpha, "Beta prior alpha (beta-bernoulli)")->capture_default_str();
  sub->add_option("--beta", cfg.beta, "Beta prior beta (beta-bernoulli)")->capture_default_str();
}

// Not part of any manifest: these do not change results.
void add_run_options(CLI::App& app, RunConfig& cfg) {
  app.add_option("--out", cfg.out, "Output directory")->capture_default_str()->configurable(false);
  app.add_option("--workers", cfg.workers, "Worker threads (0 = all cores)")->configurable(false);
  app.add_flag("-v,--verbose", cfg.verbose, "Print a short summary")->configurable(false);
}

void add_iteration_options(CLI::App* sub, RunConfig& cfg) {
  sub->add_option("--delta", cfg.delta, "Step fraction in (0,1]")->capture_default_str();
  sub->add_option("--iters", cfg.iters, "L: rounds including the final estimate")->capture_default_str();
}

}  // namespace

int main(int argc, char** argv) {
  RunConfig cfg;
  CLI::App app{"postbias: bias of posterior means from MCMC output"};
  app.set_version_flag("--version", std::string(POSTBIAS_VERSION));
  app.set_config("--config", "", "Read options from an INI file such as a run's manifest.ini");
  app.require_subcommand(1);
  app.fallthrough();
  add_run_options(app, cfg);

  auto* estimate = app.add_subcommand("bias-estimate", "Estimate b0, b2 and b_hat at lambda = 0")->configurable();
  add_data_options(estimate, cfg);
  add_sampler_options(estimate, cfg);
  estimate->add_flag("--dump-samples", cfg.dump_samples, "Also write samples.csv");

  auto* correct = app.add_subcommand("bias-correct", "Iterative quasi-prior correction")->configurable();
  add_data_options(correct, cfg);
  add_sampler_options(correct, cfg);
  add_iteration_options(correct, cfg);
  correct->add_flag("--dump-samples", cfg.dump_samples, "Unused; accepted for symmetry");

  auto* experiment = app.add_subcommand("experiment", "Replication studies")->configurable();
  experiment->require_subcommand(1);
  auto* weibull = experiment->add_subcommand("weibull", "Weibull bias-estimation study")->configurable();
  weibull->add_option("--replicates", cfg.replicates, "Simulated datasets (default 500)");
  weibull->add_option("--n", cfg.n, "Sample size (default 30)");
  weibull->add_option("--scale", cfg.scale, "True scale")->capture_default_str();
  weibull->add_option("--shape", cfg.shape, "True shape")->capture_default_str();
  add_sampler_options(weibull, cfg);

  auto* logistic = experiment->add_subcommand("logistic", "Logistic regression correction study")->configurable();
  logistic->add_option("--np", cfg.np, "Number of coefficients N_p (multiple of 3)")->capture_default_str();
  logistic->add_option("--n", cfg.n, "Sample size (default 10 N_p)");
  logistic->add_option("--rho-value", cfg.rho_value, "Off-diagonal covariate covariance")->capture_default_str();
  logistic->add_option("--trials", cfg.trials, "Independent datasets")->capture_default_str();
  logistic->add_option("--mode", cfg.mode, "raw, alg1 or alg2")->capture_default_str();
  add_iteration_options(logistic, cfg);
  add_sampler_options(logistic, cfg);

  auto* bernoulli = experiment->add_subcommand("beta-bernoulli", "Definitional bias by simulation")->configurable();
  bernoulli->add_option("--n", cfg.n, "Trials per dataset (default 10)");
  bernoulli->add_option("--replicates", cfg.replicates, "Simulated datasets (default 10000)");
  bernoulli->add_option("--q0", cfg.q0, "True success probability")->capture_default_str();
  bernoulli->add_option("--alpha", cfg.alpha, "Beta prior alpha")->capture_default_str();
  bernoulli->add_option("--beta", cfg.beta, "Beta prior beta")->capture_default_str();
  bernoulli->add_option("--seed", cfg.seed, "Master seed")->capture_default_str();

  auto* check = app.add_subcommand("oracle-check", "Compare estimators with quadrature and jackknife oracles")->configurable();
  add_data_options(check, cfg);
  add_sampler_options(check, cfg);
  check->add_option("--nodes", cfg.nodes, "Quadrature nodes per dimension (0 = automatic)")->capture_default_str();
  check->add_option("--fd-step", cfg.h, "Finite-difference step in the weights")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return postbias::cli::kUsage;
  }

  for (auto* sub : {estimate, correct, check})
    if (sub->parsed()) cfg.command = sub->get_name();
  if (experiment->parsed()) {
    cfg.command = "experiment";
    for (auto* sub : {weibull, logistic, bernoulli})
      if (sub->parsed()) cfg.study = sub->get_name();
  }
  return postbias::cli::run(cfg);
}
