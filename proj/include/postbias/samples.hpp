#pragma once

#include <cmath>
#include <cstdint>
#include <cstring>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "postbias/error.hpp"

namespace postbias {

/// Row j holds draw θ^(j); rows are contiguous so a draw can be viewed as a span.
using DrawMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct SamplerConfig {
  std::size_t samples = 20000;
  std::size_t burn_in = 5000;
  std::size_t thin = 1;
  std::uint64_t seed = 1;
  double target_accept = 0.3;
  /// Adaptation window inside burn-in; 0 means the whole burn-in.
  std::size_t adapt_steps = 0;
  /// Starting random-walk scale in unconstrained coordinates.
  double initial_step = 0.5;

  void validate() const {
    if (samples < 2) throw ConfigError("sampler: samples must be >= 2");
    if (thin < 1) throw ConfigError("sampler: thin must be >= 1");
    if (!(target_accept > 0.0 && target_accept < 1.0))
      throw ConfigError("sampler: target_accept must lie in (0,1)");
    if (adapt_steps > burn_in) throw ConfigError("sampler: adapt_steps exceeds burn_in");
    if (!(initial_step > 0.0)) throw ConfigError("sampler: initial_step must be positive");
  }
};

struct Provenance {
  std::string model_id;
  std::vector<double> weights;
  std::vector<double> tilt;
  std::uint64_t seed = 0;
  SamplerConfig config;
};

struct ChainDiagnostics {
  std::vector<double> acceptance_rate;
  std::vector<double> step_size;
  std::vector<double> ess;
  std::vector<bool> degenerate;
  /// Some dimension finished with acceptance outside [0.1, 0.6].
  bool acceptance_warning = false;
};

namespace detail {

inline std::uint64_t hash_draws(const DrawMatrix& draws) {
  std::uint64_t h = 0xcbf29ce484222325ULL ^ static_cast<std::uint64_t>(draws.rows() * 131 + draws.cols());
  const auto* bytes = reinterpret_cast<const unsigned char*>(draws.data());
  const std::size_t size = static_cast<std::size_t>(draws.size()) * sizeof(double);
  for (std::size_t i = 0; i < size; ++i) {
    h ^= bytes[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace detail

/// M posterior draws of a K-dimensional parameter plus where they came from.
/// Immutable once built.
class PosteriorSamples {
 public:
  PosteriorSamples(DrawMatrix draws, std::vector<std::string> names, Provenance provenance = {},
                   ChainDiagnostics diagnostics = {})
      : draws_(std::move(draws)),
        names_(std::move(names)),
        provenance_(std::move(provenance)),
        diagnostics_(std::move(diagnostics)) {
    if (draws_.cols() < 1) throw DimensionError("samples: K must be >= 1");
    if (draws_.rows() < 2) throw DimensionError("samples: M must be >= 2");
    if (names_.empty())
      for (Eigen::Index k = 0; k < draws_.cols(); ++k) names_.push_back("theta_" + std::to_string(k + 1));
    if (names_.size() != static_cast<std::size_t>(draws_.cols()))
      throw DimensionError("samples: names length differs from K");
    for (Eigen::Index j = 0; j < draws_.rows(); ++j)
      for (Eigen::Index k = 0; k < draws_.cols(); ++k)
        if (!std::isfinite(draws_(j, k)))
          throw NonFiniteError("samples: non-finite draw", static_cast<std::size_t>(j),
                               static_cast<std::size_t>(k));
    fingerprint_ = detail::hash_draws(draws_);
  }

  std::size_t size() const { return static_cast<std::size_t>(draws_.rows()); }
  std::size_t dim() const { return static_cast<std::size_t>(draws_.cols()); }
  const DrawMatrix& draws() const { return draws_; }
  std::span<const double> draw(std::size_t j) const {
    return {draws_.data() + j * dim(), dim()};
  }
  const std::vector<std::string>& names() const { return names_; }
  const Provenance& provenance() const { return provenance_; }
  const ChainDiagnostics& diagnostics() const { return diagnostics_; }
  /// Content hash of the draws; ties derived tables back to these samples.
  std::uint64_t fingerprint() const { return fingerprint_; }

 private:
  DrawMatrix draws_;
  std::vector<std::string> names_;
  Provenance provenance_;
  ChainDiagnostics diagnostics_;
  std::uint64_t fingerprint_ = 0;
};

}  // namespace postbias
