#pragma once

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <sys/wait.h>

#include "postbias/dataset.hpp"
#include "postbias/estimator.hpp"
#include "postbias/models.hpp"
#include "postbias/sampler.hpp"

namespace testing_support {

/// n=10, five successes first.
inline postbias::Dataset bernoulli_5_of_10() { return postbias::make_scalar_dataset({1, 1, 1, 1, 1, 0, 0, 0, 0, 0}); }

inline postbias::Dataset weibull_fixture_10() {
  return postbias::make_scalar_dataset({0.3, 1.2, 0.05, 2.2, 0.7, 0.9, 1.5, 0.4, 3.1, 0.11});
}

inline postbias::Dataset weibull_fixture_30() {
  return postbias::make_scalar_dataset({0.3,  1.2, 0.05, 2.2, 0.7,  0.9,  1.5,  0.4, 3.1, 0.11,
                                        0.2,  0.8, 0.6,  1.9, 0.01, 0.5,  1.1,  0.35, 2.6, 0.9,
                                        0.15, 1.3, 0.45, 0.07, 1.7, 0.55, 0.25, 2.0, 0.8, 0.3});
}

inline postbias::SamplerConfig quick_sampler(std::uint64_t seed, std::size_t samples = 4000) {
  postbias::SamplerConfig cfg;
  cfg.samples = samples;
  cfg.burn_in = 1000;
  cfg.seed = seed;
  return cfg;
}

/// Draw matrix from explicit columns.
inline postbias::PosteriorSamples samples_from(const std::vector<std::vector<double>>& columns) {
  postbias::DrawMatrix d(static_cast<Eigen::Index>(columns.front().size()), static_cast<Eigen::Index>(columns.size()));
  for (std::size_t k = 0; k < columns.size(); ++k)
    for (std::size_t j = 0; j < columns[k].size(); ++j) d(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(k)) = columns[k][j];
  return postbias::PosteriorSamples(d, {});
}

inline std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline std::filesystem::path fresh_dir(const std::string& name) {
  const std::filesystem::path p = std::filesystem::path(POSTBIAS_TEST_TMP) / name;
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

/// Runs the CLI, returns its exit status; stderr goes to `log` inside `dir`.
inline int run_cli(const std::string& args, const std::filesystem::path& log) {
  const std::string cmd = std::string("\"") + POSTBIAS_CLI + "\" " + args + " 2> \"" + log.string() + "\"";
  const int status = std::system(cmd.c_str());
  if (status == -1) return -1;
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace testing_support
