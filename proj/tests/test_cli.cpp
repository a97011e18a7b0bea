#include <filesystem>
#include <fstream>
#include <string>

#include <gtest/gtest.h>

#include "postbias/cli.hpp"
#include "support.hpp"

using namespace postbias;
using testing_support::fresh_dir;
using testing_support::run_cli;
using testing_support::slurp;

namespace fs = std::filesystem;

namespace {

const std::string kQuick = " --samples 2000 --burn-in 500";

csv::Table read_table(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return csv::read(in);
}

double cell(const csv::Table& t, std::size_t row, const std::string& column) {
  return csv::parse_number(t.rows.at(row).at(t.column(column)));
}

}  // namespace

TEST(Cli, MissingDataFileIsAUsageError) {
  const auto dir = fresh_dir("cli_missing");
  EXPECT_EQ(run_cli("--out " + (dir / "o").string() + " bias-estimate --model weibull --data " +
                        (dir / "nope.csv").string(),
                    dir / "log"),
            2);
  EXPECT_NE(slurp(dir / "log").find("not found"), std::string::npos);
}

TEST(Cli, OutOfRangeDeltaIsAUsageError) {
  const auto dir = fresh_dir("cli_delta");
  EXPECT_EQ(run_cli("--out " + (dir / "o").string() +
                        " bias-correct --model beta-bernoulli --generate bernoulli:n=10,x=5 --delta 1.5",
                    dir / "log"),
            2);
}

TEST(Cli, UnknownSubcommandIsAUsageError) {
  const auto dir = fresh_dir("cli_unknown");
  EXPECT_EQ(run_cli("experiment poisson", dir / "log"), 2);
  EXPECT_EQ(run_cli("bias-estimate --model weibull --generate weibull:n=30 --bogus 3", dir / "log"), 2);
  EXPECT_EQ(run_cli("bias-estimate --model gamma --generate weibull:n=30", dir / "log"), 2);
}

TEST(Cli, InvalidDatasetIsAUsageError) {
  const auto dir = fresh_dir("cli_invalid");
  {
    std::ofstream f(dir / "bad.csv");
    f << "x\n1.0\n0\n2.0\n";
  }
  EXPECT_EQ(run_cli("--out " + (dir / "o").string() + " bias-estimate --model weibull --data " +
                        (dir / "bad.csv").string(),
                    dir / "log"),
            2);
}

TEST(Cli, BetaBernoulliOracleCheckPasses) {
  const auto dir = fresh_dir("cli_oracle");
  const auto out = dir / "o";
  ASSERT_EQ(run_cli("--out " + out.string() +
                        " oracle-check --model beta-bernoulli --alpha 1 --beta 2 --generate bernoulli:n=10,x=5"
                        " --samples 20000 --seed 3",
                    dir / "log"),
            0)
      << slurp(dir / "log");
  const auto t = read_table(out / "oracle_report.csv");
  // 2 refinement checks, 2 per observation, 4 MCMC-vs-grid, 3 closed-form/jackknife.
  EXPECT_EQ(t.rows.size(), 29u);
  for (const auto& r : t.rows) EXPECT_EQ(r[t.column("pass")], "true") << r[0];
}

TEST(Cli, CoarseQuadratureFailsTheOracleCheck) {
  const auto dir = fresh_dir("cli_oracle_coarse");
  EXPECT_EQ(run_cli("--out " + (dir / "o").string() +
                        " oracle-check --model beta-bernoulli --generate bernoulli:n=10,x=5 --nodes 8" + kQuick,
                    dir / "log"),
            1);
  EXPECT_NE(slurp(dir / "log").find("FAIL normalizer_node_doubling"), std::string::npos);
}

TEST(Cli, OracleCheckRefusesManyParameters) {
  const auto dir = fresh_dir("cli_oracle_logistic");
  EXPECT_EQ(run_cli("--out " + (dir / "o").string() + " oracle-check --model logistic --generate logistic:np=3,n=30" +
                        kQuick,
                    dir / "log"),
            2);
}

TEST(Cli, SameSeedSameBytes) {
  const auto dir = fresh_dir("cli_seed");
  const std::string args = " bias-estimate --model weibull --generate weibull:n=30 --seed 7 --dump-samples" + kQuick;
  ASSERT_EQ(run_cli("--out " + (dir / "a").string() + args, dir / "log"), 0);
  ASSERT_EQ(run_cli("--out " + (dir / "b").string() + " --workers 2" + args, dir / "log"), 0);
  for (const char* f : {"estimate.csv", "diagnostics.csv", "samples.csv", "manifest.ini"})
    EXPECT_EQ(slurp(dir / "a" / f), slurp(dir / "b" / f)) << f;
  const auto t = read_table(dir / "a" / "estimate.csv");
  ASSERT_EQ(t.rows.size(), 2u);
  EXPECT_EQ(t.rows[0][0], "lambda");
  EXPECT_EQ(cell(t, 0, "b_hat"), cell(t, 0, "b0_hat") + cell(t, 0, "b2_hat"));
  EXPECT_EQ(cell(t, 1, "corrected"), cell(t, 1, "posterior_mean") - cell(t, 1, "b_hat"));
  ASSERT_EQ(t.comments.size(), 1u);
  EXPECT_NE(t.comments[0].find("seed=7"), std::string::npos);
}

TEST(Cli, ManifestReproducesTheRun) {
  const auto dir = fresh_dir("cli_manifest");
  ASSERT_EQ(run_cli("--out " + (dir / "a").string() +
                        " bias-correct --model beta-bernoulli --alpha 1 --beta 2 --generate bernoulli:n=10,q=0.4"
                        " --seed 11 --iters 2 --delta 0.5" + kQuick,
                    dir / "log"),
            0);
  ASSERT_EQ(run_cli("--config " + (dir / "a" / "manifest.ini").string() + " --out " + (dir / "b").string(),
                    dir / "log"),
            0)
      << slurp(dir / "log");
  for (const char* f : {"corrected.csv", "history.csv", "manifest.ini"})
    EXPECT_EQ(slurp(dir / "a" / f), slurp(dir / "b" / f)) << f;
}

TEST(Cli, SingleRoundCorrectionMatchesEstimate) {
  const auto dir = fresh_dir("cli_l1");
  const std::string common = " --model weibull --generate weibull:n=30 --seed 5" + kQuick;
  ASSERT_EQ(run_cli("--out " + (dir / "e").string() + " bias-estimate" + common, dir / "log"), 0);
  ASSERT_EQ(run_cli("--out " + (dir / "c").string() + " bias-correct --iters 1" + common, dir / "log"), 0);
  const auto e = read_table(dir / "e" / "estimate.csv");
  const auto c = read_table(dir / "c" / "corrected.csv");
  for (std::size_t k = 0; k < 2; ++k) {
    EXPECT_EQ(cell(e, k, "corrected"), cell(c, k, "corrected"));
    EXPECT_EQ(cell(e, k, "b_hat"), cell(c, k, "bias_hat"));
  }
}

TEST(Cli, LogisticCorrectionHistory) {
  const auto dir = fresh_dir("cli_logistic");
  ASSERT_EQ(run_cli("--out " + (dir / "o").string() +
                        " bias-correct --model logistic --generate logistic:np=21,n=105 --iters 4 --samples 600"
                        " --burn-in 300",
                    dir / "log"),
            0)
      << slurp(dir / "log");
  const auto h = read_table(dir / "o" / "history.csv");
  EXPECT_EQ(h.rows.size(), 4u * 21u);
  EXPECT_EQ(cell(h, h.rows.size() - 1, "step"), 3.0);
  EXPECT_EQ(read_table(dir / "o" / "corrected.csv").rows.size(), 21u);
}

TEST(Cli, LogisticDataFileRoundTrip) {
  const auto dir = fresh_dir("cli_logistic_file");
  const Dataset d = cli::generate_dataset("logistic:np=3,n=40", 2);
  {
    std::ofstream f(dir / "d.csv", std::ios::binary);
    write_dataset(f, d, "y", "generated");
  }
  ASSERT_EQ(run_cli("--out " + (dir / "o").string() + " bias-estimate --model logistic --data " +
                        (dir / "d.csv").string() + kQuick,
                    dir / "log"),
            0)
      << slurp(dir / "log");
  EXPECT_EQ(read_table(dir / "o" / "estimate.csv").rows.size(), 3u);
}

TEST(Cli, WeibullExperimentSmoke) {
  const auto dir = fresh_dir("cli_weibull");
  ASSERT_EQ(run_cli("--out " + (dir / "o").string() + " experiment weibull --replicates 2 --samples 500 --burn-in 200",
                    dir / "log"),
            0)
      << slurp(dir / "log");
  EXPECT_EQ(read_table(dir / "o" / "weibull_rows.csv").rows.size(), 4u);
  const auto s = read_table(dir / "o" / "weibull_summary.csv");
  ASSERT_EQ(s.rows.size(), 2u);
  EXPECT_EQ(cell(s, 0, "replicates"), 2.0);
}

TEST(Cli, LogisticExperimentMedians) {
  const auto dir = fresh_dir("cli_logistic_study");
  ASSERT_EQ(run_cli("--out " + (dir / "o").string() +
                        " experiment logistic --np 21 --trials 1 --iters 2 --mode alg2 --samples 300 --burn-in 200",
                    dir / "log"),
            0)
      << slurp(dir / "log");
  const auto m = read_table(dir / "o" / "logistic_medians.csv");
  ASSERT_EQ(m.rows.size(), 21u);
  for (const char* col : {"raw_median", "alg1_median", "alg2_median"})
    EXPECT_FALSE(m.rows[0][m.column(col)].empty()) << col;
}

TEST(Cli, LiteralCovarianceIsRejected) {
  const auto dir = fresh_dir("cli_rho");
  EXPECT_EQ(run_cli("--out " + (dir / "o").string() + " experiment logistic --np 21 --n 105 --rho-value 0.0238095",
                    dir / "log"),
            2);
  EXPECT_NE(slurp(dir / "log").find("not positive definite"), std::string::npos);
}

TEST(Cli, BetaBernoulliExperiment) {
  const auto dir = fresh_dir("cli_bb");
  ASSERT_EQ(run_cli("--out " + (dir / "o").string() + " experiment beta-bernoulli --alpha 1 --beta 2", dir / "log"), 0);
  const auto t = read_table(dir / "o" / "definitional_bias.csv");
  EXPECT_NEAR(cell(t, 0, "mean_bias"), -1.0 / 26.0, 4.0 * cell(t, 0, "se"));
  EXPECT_EQ(cell(t, 0, "datasets"), 10000.0);
}

TEST(Cli, GeneratorSpecs) {
  EXPECT_EQ(cli::generate_dataset("bernoulli:n=6,x=2", 1)[1].response, 1.0);
  EXPECT_EQ(cli::generate_dataset("bernoulli:n=6,x=2", 1)[2].response, 0.0);
  EXPECT_EQ(cli::generate_dataset("weibull:n=12", 1).size(), 12u);
  EXPECT_EQ(cli::generate_dataset("logistic:np=6,n=20", 1).covariate_count(), 6u);
  EXPECT_THROW(cli::generate_dataset("bernoulli:n=6,x=9", 1), ConfigError);
  EXPECT_THROW(cli::generate_dataset("bernoulli:n=6,z=1", 1), ConfigError);
  EXPECT_THROW(cli::generate_dataset("poisson:n=6", 1), ConfigError);
  EXPECT_THROW(cli::generate_dataset("logistic:np=4", 1), ConfigError);
}

TEST(Cli, ManifestListsEveryResultAffectingKey) {
  cli::RunConfig cfg;
  cfg.command = "experiment";
  cfg.study = "logistic";
  cfg.out = "elsewhere";
  cfg.workers = 3;
  cfg = cli::resolved(cfg);
  EXPECT_EQ(cfg.n, 210u);
  const std::string ini = cli::manifest_ini(cfg);
  EXPECT_NE(ini.find("[experiment.logistic]"), std::string::npos);
  for (const char* key : {"np=", "n=", "rho-value=", "trials=", "mode=", "delta=", "iters=", "seed=", "samples="})
    EXPECT_NE(ini.find(std::string("\n") + key), std::string::npos) << key;
  EXPECT_EQ(ini.find("out="), std::string::npos);
  EXPECT_EQ(ini.find("workers="), std::string::npos);
}
