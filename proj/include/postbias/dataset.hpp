#pragma once

#include <cstddef>
#include <fstream>
#include <string>
#include <vector>

#include "postbias/csv.hpp"
#include "postbias/error.hpp"

namespace postbias {

/// One record X_i: a scalar response and, for regression models, covariates.
struct Observation {
  double response = 0.0;
  std::vector<double> covariates;
};

struct Dataset {
  std::vector<Observation> observations;

  std::size_t size() const { return observations.size(); }
  const Observation& operator[](std::size_t i) const { return observations[i]; }

  std::size_t covariate_count() const {
    return observations.empty() ? 0 : observations.front().covariates.size();
  }

  /// Copy without observation i.
  Dataset without(std::size_t i) const {
    Dataset out;
    out.observations.reserve(size() > 0 ? size() - 1 : 0);
    for (std::size_t j = 0; j < size(); ++j)
      if (j != i) out.observations.push_back(observations[j]);
    return out;
  }
};

inline Dataset make_scalar_dataset(const std::vector<double>& responses) {
  Dataset d;
  d.observations.reserve(responses.size());
  for (double r : responses) d.observations.push_back({r, {}});
  return d;
}

/// Reads `x` (Weibull), `y` (Bernoulli) or `y,x1..xNp` (logistic) columns.
/// `response_column` picks the response; covariates are every column named
/// x1, x2, ... in order.
inline Dataset read_dataset(const std::string& path, const std::string& response_column,
                            bool with_covariates) {
  const csv::Table table = csv::read_file(path);
  const std::size_t response = table.column(response_column);
  std::vector<std::size_t> covariate_columns;
  if (with_covariates) {
    for (std::size_t s = 1;; ++s) {
      const std::string name = "x" + std::to_string(s);
      if (!table.has_column(name)) break;
      covariate_columns.push_back(table.column(name));
    }
    if (covariate_columns.empty()) throw ConfigError(path + ": no covariate columns x1..xNp");
  }
  Dataset d;
  d.observations.reserve(table.rows.size());
  for (const auto& row : table.rows) {
    Observation obs;
    obs.response = csv::parse_number(row[response]);
    obs.covariates.reserve(covariate_columns.size());
    for (std::size_t c : covariate_columns) obs.covariates.push_back(csv::parse_number(row[c]));
    d.observations.push_back(std::move(obs));
  }
  return d;
}

inline void write_dataset(std::ostream& out, const Dataset& data, const std::string& response_column,
                          const std::string& comment = {}) {
  csv::Writer w(out);
  if (!comment.empty()) w.comment(comment);
  std::vector<std::string> header{response_column};
  for (std::size_t s = 1; s <= data.covariate_count(); ++s) header.push_back("x" + std::to_string(s));
  w.row(header);
  for (const auto& obs : data.observations) {
    std::vector<std::string> fields{csv::format_number(obs.response)};
    for (double x : obs.covariates) fields.push_back(csv::format_number(x));
    w.row(fields);
  }
}

}  // namespace postbias
