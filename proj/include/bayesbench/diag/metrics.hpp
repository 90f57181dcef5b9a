#pragma once

// Benchmark metrics: wall time, evaluations, and divergences per effective
// sample. The divergence ratio only applies to gradient-based runs; nested
// sampling reports it as absent.

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>

#include <json.hpp>

namespace bayesbench::diag {

struct RunMetrics {
  std::string method;
  double ess = 0.0;
  double wall_time_s = 0.0;
  std::size_t n_evals = 0;
  std::optional<std::size_t> n_divergences;  // absent for NS

  double wall_time_per_ess = 0.0;
  double evals_per_ess = 0.0;
  std::optional<double> divergences_per_ess;
};

inline RunMetrics assemble_metrics(std::string method, double ess, double wall_time_s,
                                   std::size_t n_evals,
                                   std::optional<std::size_t> n_divergences = std::nullopt) {
  if (!(ess > 0.0)) throw std::invalid_argument("assemble_metrics: ess must be positive");
  if (wall_time_s < 0.0) throw std::invalid_argument("assemble_metrics: negative wall time");
  RunMetrics m;
  m.method = std::move(method);
  m.ess = ess;
  m.wall_time_s = wall_time_s;
  m.n_evals = n_evals;
  m.n_divergences = n_divergences;
  m.wall_time_per_ess = wall_time_s / ess;
  m.evals_per_ess = static_cast<double>(n_evals) / ess;
  if (n_divergences) m.divergences_per_ess = static_cast<double>(*n_divergences) / ess;
  return m;
}

inline nlohmann::json metrics_to_json(const RunMetrics& m) {
  nlohmann::json j{
      {"method", m.method},
      {"ess", m.ess},
      {"wall_time_s", m.wall_time_s},
      {"n_evals", m.n_evals},
      {"wall_time_per_ess", m.wall_time_per_ess},
      {"evals_per_ess", m.evals_per_ess},
  };
  if (m.n_divergences) {
    j["n_divergences"] = *m.n_divergences;
    j["divergences_per_ess"] = *m.divergences_per_ess;
  } else {
    j["n_divergences"] = nullptr;
    j["divergences_per_ess"] = nullptr;
  }
  return j;
}

inline RunMetrics metrics_from_json(const nlohmann::json& j) {
  std::optional<std::size_t> divergences;
  if (j.contains("n_divergences") && !j["n_divergences"].is_null())
    divergences = j["n_divergences"].get<std::size_t>();
  return assemble_metrics(j.at("method").get<std::string>(), j.at("ess").get<double>(),
                          j.at("wall_time_s").get<double>(), j.at("n_evals").get<std::size_t>(),
                          divergences);
}

}  // namespace bayesbench::diag
