#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "postbias/csv.hpp"
#include "postbias/dataset.hpp"
#include "postbias/error.hpp"
#include "postbias/estimator.hpp"
#include "postbias/experiments.hpp"
#include "postbias/models.hpp"
#include "postbias/oracle.hpp"
#include "postbias/parallel.hpp"
#include "postbias/quasiprior.hpp"
#include "postbias/sampler.hpp"

#ifndef POSTBIAS_VERSION
#define POSTBIAS_VERSION "0.0.0"
#endif

namespace postbias::cli {

enum ExitCode : int { kOk = 0, kFailure = 1, kUsage = 2 };

struct RunConfig {
  std::string command;  // bias-estimate | bias-correct | experiment | oracle-check
  std::string study;    // experiment only: weibull | logistic | beta-bernoulli
  std::string model;    // beta-bernoulli | weibull | logistic
  std::string data;
  std::string generate;
  double alpha = 1.0;
  double beta = 1.0;
  std::uint64_t seed = 1;
  std::size_t samples = 20000;
  std::size_t burn_in = 5000;
  std::size_t thin = 1;
  double delta = 0.2;
  std::size_t iters = 4;
  std::size_t replicates = 0;  // 0: study default
  std::size_t trials = 30;
  std::size_t np = 21;
  std::size_t n = 0;  // 0: study default
  double rho_value = 0.0;
  std::string mode = "alg1";
  double scale = 1.0;
  double shape = 0.8;
  double q0 = 0.5;
  std::size_t nodes = 0;
  double h = 1e-3;
  std::string out = "out";
  std::size_t workers = 0;  // 0: all cores
  bool dump_samples = false;
  bool verbose = false;

  SamplerConfig sampler() const {
    SamplerConfig s;
    s.samples = samples;
    s.burn_in = burn_in;
    s.thin = thin;
    s.seed = seed;
    return s;
  }

  std::size_t worker_count() const { return workers == 0 ? default_workers() : workers; }
};

/// Study defaults applied before validation, so manifests record the values used.
inline RunConfig resolved(RunConfig cfg) {
  if (cfg.command == "experiment") {
    if (cfg.study == "weibull") {
      if (cfg.n == 0) cfg.n = 30;
      if (cfg.replicates == 0) cfg.replicates = 500;
    } else if (cfg.study == "logistic") {
      if (cfg.n == 0) cfg.n = 10 * cfg.np;
    } else if (cfg.study == "beta-bernoulli") {
      if (cfg.n == 0) cfg.n = 10;
      if (cfg.replicates == 0) cfg.replicates = 10000;
    }
  }
  return cfg;
}

inline void validate(const RunConfig& cfg) {
  static const std::vector<std::string> commands{"bias-estimate", "bias-correct", "experiment", "oracle-check"};
  if (std::find(commands.begin(), commands.end(), cfg.command) == commands.end())
    throw ConfigError("unknown command '" + cfg.command + "'");
  cfg.sampler().validate();
  if (cfg.command == "experiment") {
    if (cfg.study != "weibull" && cfg.study != "logistic" && cfg.study != "beta-bernoulli")
      throw ConfigError("unknown study '" + cfg.study + "'");
    if (cfg.study == "logistic") {
      if (cfg.np == 0 || cfg.np % 3 != 0) throw ConfigError("--np must be a positive multiple of 3");
      experiments::parse_mode(cfg.mode);
    }
  } else {
    if (cfg.data.empty() == cfg.generate.empty()) throw ConfigError("give exactly one of --data and --generate");
    if (cfg.model != "beta-bernoulli" && cfg.model != "weibull" && cfg.model != "logistic")
      throw ConfigError("unknown model '" + cfg.model + "'");
  }
  if (cfg.command == "bias-correct" || (cfg.command == "experiment" && cfg.study == "logistic")) {
    if (!(cfg.delta > 0.0 && cfg.delta <= 1.0)) throw ConfigError("--delta must lie in (0,1]");
    if (cfg.iters < 1) throw ConfigError("--iters must be >= 1");
  }
  if (cfg.model == "beta-bernoulli" || cfg.study == "beta-bernoulli")
    if (!(cfg.alpha > 0.0) || !(cfg.beta > 0.0)) throw ConfigError("--alpha and --beta must be positive");
  if (cfg.out.empty()) throw ConfigError("--out must not be empty");
}

// ---------------------------------------------------------------------------
// Manifest

using Manifest = std::vector<std::pair<std::string, std::string>>;

/// Every key that influences the outputs of cfg's command, named after its
/// command-line flag. --out, --workers and --verbose do not change results
/// and are left out.
inline Manifest manifest_of(const RunConfig& cfg) {
  using csv::format_number;
  Manifest m;
  auto add = [&m](std::string key, std::string value) { m.emplace_back(std::move(key), std::move(value)); };
  auto add_sampler = [&] {
    add("seed", std::to_string(cfg.seed));
    add("samples", format_number(cfg.samples));
    add("burn-in", format_number(cfg.burn_in));
    add("thin", format_number(cfg.thin));
  };
  auto add_data = [&] {
    add("model", cfg.model);
    if (!cfg.data.empty()) add("data", cfg.data);
    if (!cfg.generate.empty()) add("generate", cfg.generate);
    if (cfg.model == "beta-bernoulli") {
      add("alpha", format_number(cfg.alpha));
      add("beta", format_number(cfg.beta));
    }
  };
  if (cfg.command == "bias-estimate" || cfg.command == "bias-correct") {
    add_data();
    add_sampler();
    if (cfg.command == "bias-correct") {
      add("delta", format_number(cfg.delta));
      add("iters", format_number(cfg.iters));
    }
    if (cfg.dump_samples) add("dump-samples", "true");
  } else if (cfg.command == "oracle-check") {
    add_data();
    add_sampler();
    add("nodes", format_number(cfg.nodes));
    add("fd-step", format_number(cfg.h));
  } else if (cfg.study == "weibull") {
    add("replicates", format_number(cfg.replicates));
    add("n", format_number(cfg.n));
    add("scale", format_number(cfg.scale));
    add("shape", format_number(cfg.shape));
    add_sampler();
  } else if (cfg.study == "logistic") {
    add("np", format_number(cfg.np));
    add("n", format_number(cfg.n));
    add("rho-value", format_number(cfg.rho_value));
    add("trials", format_number(cfg.trials));
    add("mode", cfg.mode);
    add("delta", format_number(cfg.delta));
    add("iters", format_number(cfg.iters));
    add_sampler();
  } else if (cfg.study == "beta-bernoulli") {
    add("n", format_number(cfg.n));
    add("replicates", format_number(cfg.replicates));
    add("q0", format_number(cfg.q0));
    add("alpha", format_number(cfg.alpha));
    add("beta", format_number(cfg.beta));
    add("seed", std::to_string(cfg.seed));
  }
  return m;
}

inline std::string section_of(const RunConfig& cfg) {
  return cfg.command == "experiment" ? "experiment." + cfg.study : cfg.command;
}

/// One-line form carried as the first line of every CSV.
inline std::string manifest_line(const RunConfig& cfg) {
  std::string line = std::string("postbias ") + POSTBIAS_VERSION + " command=" + section_of(cfg);
  for (const auto& [k, v] : manifest_of(cfg)) line += " " + k + "=" + v;
  return line;
}

/// INI form readable by `postbias --config FILE`.
inline std::string manifest_ini(const RunConfig& cfg) {
  std::string text = std::string("# postbias ") + POSTBIAS_VERSION + "\n[" + section_of(cfg) + "]\n";
  for (const auto& [k, v] : manifest_of(cfg)) text += k + "=\"" + v + "\"\n";
  return text;
}

class OutputDir {
 public:
  explicit OutputDir(const RunConfig& cfg) : dir_(cfg.out), header_(manifest_line(cfg)) {
    std::error_code ec;
    std::filesystem::create_directories(dir_, ec);
    if (ec || !std::filesystem::is_directory(dir_))
      throw ConfigError("cannot create output directory '" + cfg.out + "'");
    std::ofstream ini(dir_ / "manifest.ini", std::ios::binary);
    ini << manifest_ini(cfg);
    if (!ini) throw ConfigError("output directory '" + cfg.out + "' is not writable");
  }

  /// Opens `name` and writes the manifest comment.
  std::ofstream open(const std::string& name) const {
    std::ofstream out(dir_ / name, std::ios::binary);
    if (!out) throw Error("cannot write " + (dir_ / name).string());
    csv::Writer(out).comment(header_);
    return out;
  }

  std::filesystem::path path(const std::string& name) const { return dir_ / name; }

 private:
  std::filesystem::path dir_;
  std::string header_;
};

// ---------------------------------------------------------------------------
// Data

/// "kind:key=value,..." with kind one of
///   bernoulli  n, x (first x responses are 1) or q (random)
///   weibull    n, scale, shape
///   logistic   np, n, rho-value
inline std::map<std::string, std::string> parse_generator(const std::string& spec, std::string& kind) {
  const auto colon = spec.find(':');
  kind = spec.substr(0, colon);
  std::map<std::string, std::string> args;
  if (colon == std::string::npos) return args;
  std::string rest = spec.substr(colon + 1);
  std::size_t pos = 0;
  while (pos <= rest.size()) {
    const auto comma = rest.find(',', pos);
    const std::string item = rest.substr(pos, comma == std::string::npos ? std::string::npos : comma - pos);
    if (!item.empty()) {
      const auto eq = item.find('=');
      if (eq == std::string::npos) throw ConfigError("generator argument '" + item + "' lacks '='");
      args[item.substr(0, eq)] = item.substr(eq + 1);
    }
    if (comma == std::string::npos) break;
    pos = comma + 1;
  }
  return args;
}

inline Dataset generate_dataset(const std::string& spec, std::uint64_t seed) {
  std::string kind;
  const auto args = parse_generator(spec, kind);
  auto number = [&](const std::string& key, double fallback) {
    const auto it = args.find(key);
    return it == args.end() ? fallback : csv::parse_number(it->second);
  };
  auto count = [&](const std::string& key, double fallback) {
    const double v = number(key, fallback);
    if (!(v >= 0.0) || v != std::floor(v)) throw ConfigError("generator: " + key + " must be a non-negative integer");
    return static_cast<std::size_t>(v);
  };
  for (const auto& [key, value] : args) {
    static const std::vector<std::string> known{"n", "x", "q", "scale", "shape", "np", "rho-value"};
    if (std::find(known.begin(), known.end(), key) == known.end())
      throw ConfigError("generator: unknown key '" + key + "'");
  }
  Rng rng = make_rng(derive_seed(seed, "generate"));
  if (kind == "bernoulli") {
    const std::size_t n = count("n", 10);
    std::vector<double> y(n, 0.0);
    if (args.count("x")) {
      const std::size_t x = count("x", 0);
      if (x > n) throw ConfigError("generator: x exceeds n");
      for (std::size_t i = 0; i < x; ++i) y[i] = 1.0;
    } else {
      std::bernoulli_distribution coin(number("q", 0.5));
      for (auto& v : y) v = coin(rng) ? 1.0 : 0.0;
    }
    return make_scalar_dataset(y);
  }
  if (kind == "weibull") {
    const double scale = number("scale", 1.0), shape = number("shape", 0.8);
    if (!(scale > 0.0) || !(shape > 0.0)) throw ConfigError("generator: scale and shape must be positive");
    return make_scalar_dataset(experiments::weibull_draws(count("n", 30), scale, shape, rng));
  }
  if (kind == "logistic") {
    experiments::LogisticStudyConfig c;
    const std::size_t np = count("np", 21);
    if (np == 0 || np % 3 != 0) throw ConfigError("generator: np must be a positive multiple of 3");
    c.m = np / 3;
    c.n = count("n", 10.0 * static_cast<double>(np));
    c.rho_value = number("rho-value", 0.0);
    c.seed = derive_seed(seed, "generate");
    if (c.n < np) throw ConfigError("generator: n must be >= np");
    return experiments::generate_logistic_data(c, 0).data;
  }
  throw ConfigError("generator: unknown kind '" + kind + "'");
}

inline const char* response_column(const std::string& model) { return model == "weibull" ? "x" : "y"; }

inline std::unique_ptr<Model> make_model(const RunConfig& cfg, const Dataset& data) {
  if (cfg.model == "beta-bernoulli") return std::make_unique<BetaBernoulliModel>(cfg.alpha, cfg.beta);
  if (cfg.model == "weibull") return std::make_unique<WeibullModel>();
  if (cfg.model == "logistic") {
    if (data.covariate_count() == 0) throw ConfigError("logistic model needs covariates x1..xNp");
    return std::make_unique<LogisticModel>(data.covariate_count());
  }
  throw ConfigError("unknown model '" + cfg.model + "'");
}

struct Problem {
  Dataset data;
  std::unique_ptr<Model> model;
};

/// Loads or generates the dataset and checks it against the model; a
/// dataset the model rejects is a usage error.
inline Problem load_problem(const RunConfig& cfg) {
  Problem p;
  if (!cfg.data.empty()) {
    if (!std::filesystem::is_regular_file(cfg.data)) throw ConfigError("data file '" + cfg.data + "' not found");
    p.data = read_dataset(cfg.data, response_column(cfg.model), cfg.model == "logistic");
  } else {
    p.data = generate_dataset(cfg.generate, cfg.seed);
  }
  p.model = make_model(cfg, p.data);
  try {
    p.model->validate(p.data);
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    throw ConfigError(std::string("invalid dataset: ") + e.what());
  }
  return p;
}

// ---------------------------------------------------------------------------
// Writers

using csv::format_number;

inline void write_estimates(std::ostream& out, const std::vector<BiasEstimate>& est, const Eigen::VectorXd& mean) {
  csv::Writer w(out);
  w.row({"statistic", "b0_hat", "b2_hat", "b_hat", "k13_diag", "mcse", "posterior_mean", "corrected"});
  for (std::size_t k = 0; k < est.size(); ++k) {
    const double m = mean(static_cast<Eigen::Index>(k));
    w.row({est[k].statistic, format_number(est[k].b0_hat), format_number(est[k].b2_hat), format_number(est[k].b_hat),
           format_number(est[k].k13_diag), format_number(est[k].mcse), format_number(m), format_number(m - est[k].b_hat)});
  }
}

inline void write_diagnostics(std::ostream& out, const PosteriorSamples& s) {
  csv::Writer w(out);
  w.row({"parameter", "acceptance_rate", "step_size", "ess", "acceptance_warning"});
  const auto& d = s.diagnostics();
  for (std::size_t k = 0; k < s.dim(); ++k) {
    const bool flagged = d.acceptance_rate[k] < 0.1 || d.acceptance_rate[k] > 0.6;
    w.row({s.names()[k], format_number(d.acceptance_rate[k]), format_number(d.step_size[k]),
           k < d.ess.size() ? format_number(d.ess[k]) : "nan", flagged ? "true" : "false"});
  }
}

inline void write_samples(std::ostream& out, const PosteriorSamples& s) {
  csv::Writer w(out);
  w.row(s.names());
  std::vector<std::string> fields(s.dim());
  for (std::size_t j = 0; j < s.size(); ++j) {
    const auto row = s.draw(j);
    for (std::size_t k = 0; k < s.dim(); ++k) fields[k] = format_number(row[k]);
    w.row(fields);
  }
}

inline void write_history(std::ostream& out, const CorrectedEstimate& r) {
  csv::Writer w(out);
  w.row({"step", "k", "lambda_k", "b0_hat_k", "b2_hat_k", "b_hat_k", "posterior_mean_k", "cond_C", "corrected_k"});
  for (const auto& rec : r.history) {
    const auto& e = rec.evaluation;
    for (Eigen::Index k = 0; k < rec.lambda.size(); ++k) {
      w.row({format_number(rec.step), format_number(static_cast<std::size_t>(k)), format_number(rec.lambda(k)),
             format_number(e.b0(k)), format_number(e.b2(k)), format_number(e.b_hat(k)), format_number(e.mean(k)),
             format_number(rec.condition), format_number(e.mean(k) - e.b_hat(k))});
    }
  }
}

inline void write_corrected(std::ostream& out, const CorrectedEstimate& r) {
  csv::Writer w(out);
  w.row({"parameter", "theta_hat", "bias_hat", "corrected"});
  for (std::size_t k = 0; k < r.names.size(); ++k) {
    const auto i = static_cast<Eigen::Index>(k);
    w.row({r.names[k], format_number(r.theta_hat(i)), format_number(r.bias_hat(i)), format_number(r.corrected(i))});
  }
}

// ---------------------------------------------------------------------------
// Commands

inline int cmd_bias_estimate(const RunConfig& cfg, std::ostream& log) {
  const Problem p = load_problem(cfg);
  const OutputDir dir(cfg);
  const TiltedPosterior tp(*p.model, p.data);
  const PosteriorSamples samples = sample_posterior(tp, cfg.sampler());
  const LogLikMatrix llm = log_lik_matrix(*p.model, p.data, samples);
  const auto est = estimate_bias(samples, llm, coordinate_statistics(p.model->param_names()));
  if (samples.diagnostics().acceptance_warning) log << "warning: acceptance rate outside [0.1, 0.6]\n";
  {
    auto out = dir.open("estimate.csv");
    write_estimates(out, est, samples.draws().colwise().mean().transpose());
  }
  {
    auto out = dir.open("diagnostics.csv");
    write_diagnostics(out, samples);
  }
  if (cfg.dump_samples) {
    auto out = dir.open("samples.csv");
    write_samples(out, samples);
  }
  if (cfg.verbose)
    for (const auto& e : est) log << e.statistic << ": b_hat=" << e.b_hat << " (mcse " << e.mcse << ")\n";
  return kOk;
}

inline int cmd_bias_correct(const RunConfig& cfg, std::ostream& log) {
  const Problem p = load_problem(cfg);
  const OutputDir dir(cfg);
  IterationConfig it;
  it.delta = cfg.delta;
  it.iterations = cfg.iters;
  it.sampler = cfg.sampler();
  const CorrectedEstimate result = run_algorithm2(*p.model, p.data, it);
  if (result.oscillation_warning) log << "warning: |b_hat| grew between rounds; consider a smaller --delta\n";
  {
    auto out = dir.open("corrected.csv");
    write_corrected(out, result);
  }
  {
    auto out = dir.open("history.csv");
    write_history(out, result);
  }
  return kOk;
}

inline void write_weibull_study(const OutputDir& dir, const experiments::StudySummary& s) {
  {
    auto out = dir.open("weibull_rows.csv");
    csv::Writer w(out);
    w.row({"replicate", "statistic", "truth", "posterior_mean", "b0_hat", "b2_hat", "b_hat", "k13_diag", "mcse"});
    for (const auto& r : s.rows)
      w.row({format_number(r.replicate), r.statistic, format_number(r.truth), format_number(r.posterior_mean),
             format_number(r.b0_hat), format_number(r.b2_hat), format_number(r.b_hat), format_number(r.k13_diag),
             format_number(r.mcse)});
  }
  auto out = dir.open("weibull_summary.csv");
  csv::Writer w(out);
  for (const auto& f : s.failures) w.comment("excluded " + f);
  w.row({"statistic", "truth", "replicates", "excluded", "truth_bias", "truth_bias_se", "mean_b0_hat", "mean_b2_hat",
         "mean_b_hat", "se_b_hat", "combined_se", "median_b0_hat", "median_b2_hat", "median_b_hat", "q1_b_hat",
         "q3_b_hat"});
  for (const auto& a : s.aggregates) {
    const double combined = std::hypot(a.truth_bias_se, a.b_hat.se);
    w.row({a.statistic, format_number(a.truth), format_number(a.b_hat.count), format_number(s.excluded),
           format_number(a.truth_bias), format_number(a.truth_bias_se), format_number(a.b0_hat.mean),
           format_number(a.b2_hat.mean), format_number(a.b_hat.mean), format_number(a.b_hat.se),
           format_number(combined), format_number(a.b0_hat.median), format_number(a.b2_hat.median),
           format_number(a.b_hat.median), format_number(a.b_hat.q1), format_number(a.b_hat.q3)});
  }
}

inline void write_logistic_study(const OutputDir& dir, const experiments::LogisticSummary& s) {
  {
    auto out = dir.open("logistic_trials.csv");
    csv::Writer w(out);
    w.row({"trial", "coefficient", "truth", "raw", "b0_hat", "b2_hat", "alg1", "alg2_tilted", "alg2"});
    for (const auto& r : s.rows)
      w.row({format_number(r.trial), format_number(r.coefficient), format_number(r.truth), format_number(r.raw),
             format_number(r.b0_hat), format_number(r.b2_hat), format_number(r.alg1), format_number(r.alg2_tilted),
             format_number(r.alg2)});
  }
  auto out = dir.open("logistic_medians.csv");
  csv::Writer w(out);
  for (const auto& f : s.failures) w.comment("excluded " + f);
  auto cell = [](double v) { return std::isnan(v) ? std::string() : format_number(v); };
  w.row({"coefficient", "truth", "raw_median", "alg1_median", "alg2_median", "minus_b2_median", "minus_b0_median",
         "alg2_tilted_median"});
  for (const auto& m : s.medians)
    w.row({format_number(m.coefficient), format_number(m.truth), cell(m.raw), cell(m.alg1), cell(m.alg2),
           cell(m.minus_b2), cell(m.minus_b0), cell(m.alg2_tilted)});
}

inline int cmd_experiment(const RunConfig& cfg, std::ostream& log) {
  if (cfg.study == "weibull") {
    experiments::WeibullStudyConfig c;
    c.n = cfg.n;
    c.scale = cfg.scale;
    c.shape = cfg.shape;
    c.replicates = cfg.replicates;
    c.sampler = cfg.sampler();
    c.seed = cfg.seed;
    c.workers = cfg.worker_count();
    c.validate();
    const OutputDir dir(cfg);
    const auto summary = experiments::run_weibull_study(c);
    write_weibull_study(dir, summary);
    if (cfg.verbose)
      for (const auto& a : summary.aggregates)
        log << a.statistic << ": truth bias " << a.truth_bias << ", mean b_hat " << a.b_hat.mean << "\n";
    return kOk;
  }
  if (cfg.study == "logistic") {
    experiments::LogisticStudyConfig c;
    c.m = cfg.np / 3;
    c.n = cfg.n;
    c.rho_value = cfg.rho_value;
    c.trials = cfg.trials;
    c.delta = cfg.delta;
    c.iterations = cfg.iters;
    c.sampler = cfg.sampler();
    c.seed = cfg.seed;
    c.workers = cfg.worker_count();
    c.validate();
    experiments::covariate_factor(c.covariates(), c.n, c.rho_value);
    const OutputDir dir(cfg);
    const auto summary = experiments::run_logistic_study(c, experiments::parse_mode(cfg.mode));
    write_logistic_study(dir, summary);
    if (summary.excluded > 0) log << "excluded " << summary.excluded << " trial(s)\n";
    return kOk;
  }
  const auto sim = experiments::simulate_beta_bernoulli_bias(cfg.n, cfg.q0, cfg.alpha, cfg.beta, cfg.replicates, cfg.seed);
  const OutputDir dir(cfg);
  auto out = dir.open("definitional_bias.csv");
  csv::Writer w(out);
  w.row({"n", "q0", "alpha", "beta", "datasets", "mean_bias", "se", "closed_form"});
  w.row({format_number(cfg.n), format_number(cfg.q0), format_number(cfg.alpha), format_number(cfg.beta),
         format_number(sim.datasets), format_number(sim.mean), format_number(sim.se),
         format_number(oracle::definitional_bias_beta_bernoulli(static_cast<double>(cfg.n), cfg.q0, cfg.alpha, cfg.beta))});
  return kOk;
}

// ---------------------------------------------------------------------------
// Oracle check

struct CheckRow {
  std::string check;
  std::string statistic;
  std::string observation;  // empty when not per-observation
  double value = 0.0;
  double reference = 0.0;
  double tolerance = 0.0;
  bool relative = false;
  bool pass = false;
};

inline CheckRow make_check(std::string check, std::string statistic, std::string observation, double value,
                           double reference, double tolerance, bool relative) {
  CheckRow r{std::move(check), std::move(statistic), std::move(observation), value, reference, tolerance, relative, false};
  const double err = std::abs(value - reference);
  r.pass = std::isfinite(err) && (relative ? err <= tolerance * std::abs(reference) : err <= tolerance);
  return r;
}

/// Oracle-backed checks for models with at most two parameters:
/// quadrature refinement, finite-difference weight sensitivities, MCMC vs
/// quadrature moments, and b̂ vs the leave-one-out jackknife.
inline std::vector<CheckRow> oracle_checks(const RunConfig& cfg, const Problem& p) {
  const Model& model = *p.model;
  if (model.dim() > 2)
    throw ConfigError("oracle-check supports models with at most 2 parameters (" + model.id() + " has " +
                      std::to_string(model.dim()) + ")");
  std::vector<CheckRow> rows;
  oracle::QuadratureGrid grid;
  grid.nodes = cfg.nodes;
  const TiltedPosterior tp(model, p.data);
  const auto stats = coordinate_statistics(model.param_names());
  const bool conjugate = model.id() == "beta-bernoulli";

  constexpr double kRefineTol = 1e-6;
  const auto self = oracle::quadrature_self_check(tp, grid, stats.front());
  rows.push_back(make_check("normalizer_node_doubling", "", "", self.node_doubling, 0.0, kRefineTol, false));
  rows.push_back(make_check("normalizer_bound_doubling", "", "", self.bound_doubling, 0.0, kRefineTol, false));

  const oracle::PosteriorQuadrature quad(tp, grid);
  for (const auto& a : stats) {
    for (std::size_t i = 0; i < p.data.size(); ++i) {
      const auto s = oracle::fd_sensitivity_check(quad, a, i, cfg.h);
      rows.push_back(make_check("fd1_vs_cov", a.label, std::to_string(i), s.fd1, s.cov, 1e-4, true));
      rows.push_back(make_check("fd2_vs_k3", a.label, std::to_string(i), s.fd2, s.k3, 1e-3, true));
    }
  }

  const PosteriorSamples samples = sample_posterior(tp, cfg.sampler());
  const LogLikMatrix llm = log_lik_matrix(model, p.data, samples);
  const auto est = estimate_bias(samples, llm, stats);
  for (std::size_t k = 0; k < stats.size(); ++k) {
    const auto& a = stats[k];
    const auto qb = oracle::quadrature_bias(quad, a);
    const Eigen::VectorXd values = statistic_values(samples, a);
    const double ess = k < samples.diagnostics().ess.size() ? samples.diagnostics().ess[k] : double(samples.size());
    const double mcse_mean = detail::sample_sd(std::vector<double>(values.data(), values.data() + values.size())) /
                             std::sqrt(std::max(ess, 1.0));
    rows.push_back(make_check("mcmc_mean_vs_quadrature", a.label, "", values.mean(), qb.mean, 4 * mcse_mean, false));
    rows.push_back(make_check("mcmc_b0_vs_quadrature", a.label, "", est[k].b0_hat, qb.b0, 4 * est[k].mcse_b0, false));
    rows.push_back(make_check("mcmc_b2_vs_quadrature", a.label, "", est[k].b2_hat, qb.b2, 4 * est[k].mcse_b2, false));
    rows.push_back(make_check("mcmc_b_vs_quadrature", a.label, "", est[k].b_hat, qb.b0 + qb.b2, 4 * est[k].mcse, false));

    if (conjugate) {
      const auto& bb = static_cast<const BetaBernoulliModel&>(model);
      std::size_t x = 0;
      for (const auto& o : p.data.observations) x += o.response > 0.5 ? 1 : 0;
      const double n = static_cast<double>(p.data.size());
      const double mean = beta_bernoulli_posterior_mean(p.data.size(), x, bb.alpha(), bb.beta());
      const double jack = oracle::jackknife_bias_beta_bernoulli(p.data, bb.alpha(), bb.beta());
      rows.push_back(make_check("quadrature_mean_vs_closed_form", a.label, "", qb.mean, mean, 1e-8, false));
      rows.push_back(make_check("quadrature_b0_vs_closed_form", a.label, "", qb.b0,
                                oracle::definitional_bias_beta_bernoulli(n, mean, bb.alpha(), bb.beta()), 1e-8, false));
      rows.push_back(make_check("mcmc_b_vs_jackknife", a.label, "", est[k].b_hat, jack,
                                std::max(0.005, 4 * est[k].mcse), false));
    } else if (p.data.size() >= 2 && p.data.size() - 1 >= model.min_observations()) {
      oracle::JackknifeConfig jc;
      jc.sampler = cfg.sampler();
      jc.workers = cfg.worker_count();
      const auto jack = oracle::jackknife_bias(model, p.data, a, jc);
      rows.push_back(make_check("mcmc_b_vs_jackknife", a.label, "", est[k].b_hat, jack.value,
                                4 * std::hypot(est[k].mcse, jack.mcse), false));
    }
  }
  return rows;
}

inline int cmd_oracle_check(const RunConfig& cfg, std::ostream& log) {
  const Problem p = load_problem(cfg);
  if (p.model->dim() > 2)
    throw ConfigError("oracle-check supports models with at most 2 parameters");
  const OutputDir dir(cfg);
  const auto rows = oracle_checks(cfg, p);
  auto out = dir.open("oracle_report.csv");
  csv::Writer w(out);
  w.row({"check", "statistic", "observation", "value", "reference", "abs_error", "tolerance", "relative", "pass"});
  std::size_t failed = 0;
  for (const auto& r : rows) {
    w.row({r.check, r.statistic, r.observation, format_number(r.value), format_number(r.reference),
           format_number(std::abs(r.value - r.reference)), format_number(r.tolerance), r.relative ? "true" : "false",
           r.pass ? "true" : "false"});
    if (!r.pass) {
      ++failed;
      log << "FAIL " << r.check << (r.statistic.empty() ? "" : " " + r.statistic)
          << (r.observation.empty() ? "" : " i=" + r.observation) << ": " << r.value << " vs " << r.reference << "\n";
    }
  }
  if (cfg.verbose || failed) log << rows.size() - failed << "/" << rows.size() << " checks passed\n";
  return failed == 0 ? kOk : kFailure;
}

/// Validates, dispatches and maps errors onto the exit-code contract.
inline int run(RunConfig cfg, std::ostream& log = std::cerr) {
  try {
    cfg = resolved(std::move(cfg));
    validate(cfg);
    if (cfg.command == "bias-estimate") return cmd_bias_estimate(cfg, log);
    if (cfg.command == "bias-correct") return cmd_bias_correct(cfg, log);
    if (cfg.command == "experiment") return cmd_experiment(cfg, log);
    return cmd_oracle_check(cfg, log);
  } catch (const ConfigError& e) {
    log << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const Error& e) {
    log << "error: " << e.what() << "\n";
    return kFailure;
  }
}

}  // namespace postbias::cli
