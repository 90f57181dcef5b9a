#pragma once

// Experiment configuration. Values left at their zero/empty sentinels are
// filled by apply_defaults() with the per-model, per-method defaults; the
// CLI loads a JSON config file first and then lets explicit flags overwrite
// individual fields, so flags always win over the file.

#include <cstdint>
#include <fstream>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

namespace bayesbench::harness {

struct ExperimentConfig {
  std::string model = "gaussian_fit";  // gaussian_fit | nsi
  std::string method = "ns";           // ns | neutra-ns | nuts | neutra-nuts
  std::uint64_t seed = 0;

  // nested sampling
  std::size_t n_live = 0;
  double frac_remain = 0.0;
  bool stochastic_shrinkage = false;

  // nuts
  std::size_t chains = 0;
  std::size_t warmup = 0;
  std::size_t samples = 0;
  std::optional<double> target_accept;
  std::optional<double> step_size;
  std::size_t max_tree_depth = 10;
  std::size_t threads = 0;

  // flow
  std::size_t flow_stacks = 0;
  std::vector<std::size_t> flow_hidden;
  std::size_t epochs = 0;
  std::size_t batch = 0;
  std::string flow_file;

  // gaussian fit data source: explicit file, generation seed, or the
  // committed reference dataset when both are empty
  std::string dataset_path;
  std::optional<std::uint64_t> data_seed;
  std::size_t data_groups = 3;
  std::size_t data_observations = 2;

  // nsi observation and surrogate-rate constants
  long nsi_n_nr_observed = 6;
  double nsi_lambda_bkg = 5.38;
  double nsi_er_ratio_mean = 1.72;
  double nsi_er_ratio_sigma = 1.72;
  double surrogate_lambda_sm = 0.62;
  double surrogate_weight_proton = 0.81915204428899178968;    // cos(35 deg)
  double surrogate_weight_neutron = -0.57357643635104609610;  // -sin(35 deg)
  double surrogate_weight_electron = 1.0;

  // ground-truth quadrature
  double grid_lo = -50.0;
  double grid_hi = 50.0;
  int points_per_dim = 151;

  std::string output_dir;
  std::size_t repetitions = 0;  // bench only
};

inline bool is_neutra_method(const std::string& method) {
  return method == "neutra-ns" || method == "neutra-nuts";
}
inline bool is_ns_method(const std::string& method) {
  return method == "ns" || method == "neutra-ns";
}
inline bool is_nuts_method(const std::string& method) {
  return method == "nuts" || method == "neutra-nuts";
}

// Fills unset fields with the benchmark defaults for the model/method pair.
inline void apply_defaults(ExperimentConfig& cfg) {
  const bool nsi = cfg.model == "nsi";
  if (cfg.n_live == 0) {
    if (nsi)
      cfg.n_live = cfg.method == "neutra-ns" ? 800 : 1200;
    else
      cfg.n_live = cfg.method == "neutra-ns" ? 2400 : 1600;
  }
  if (cfg.frac_remain == 0.0) cfg.frac_remain = nsi ? 0.02 : 0.01;
  if (cfg.chains == 0) cfg.chains = nsi ? 20 : 4;
  if (cfg.warmup == 0) cfg.warmup = nsi ? 2000 : 3000;
  if (cfg.samples == 0) cfg.samples = 5000;
  if (!cfg.target_accept && !cfg.step_size) {
    if (nsi && is_nuts_method(cfg.method))
      cfg.step_size = cfg.method == "neutra-nuts" ? 0.12 : 0.06;
    else
      cfg.target_accept = 0.8;
  }
  if (cfg.flow_stacks == 0) cfg.flow_stacks = nsi ? 3 : 2;
  if (cfg.flow_hidden.empty()) cfg.flow_hidden = nsi ? std::vector<std::size_t>{10, 10}
                                                     : std::vector<std::size_t>{4, 4};
  if (cfg.epochs == 0) cfg.epochs = nsi ? 10000 : 5000;
  if (cfg.batch == 0) cfg.batch = 30;
  if (cfg.repetitions == 0) cfg.repetitions = nsi ? 6 : 4;
}

inline void validate(const ExperimentConfig& cfg) {
  if (cfg.model != "gaussian_fit" && cfg.model != "nsi")
    throw std::invalid_argument("config: unknown model '" + cfg.model + "'");
  if (cfg.method != "ns" && cfg.method != "neutra-ns" && cfg.method != "nuts" &&
      cfg.method != "neutra-nuts")
    throw std::invalid_argument("config: unknown method '" + cfg.method + "'");
  if (cfg.target_accept && cfg.step_size)
    throw std::invalid_argument(
        "config: step-size and target-accept are mutually exclusive; pick one");
  if (cfg.target_accept && !(*cfg.target_accept > 0.0 && *cfg.target_accept < 1.0))
    throw std::invalid_argument("config: target-accept must lie in (0, 1)");
  if (cfg.step_size && !(*cfg.step_size > 0.0))
    throw std::invalid_argument("config: step-size must be positive");
  if (cfg.frac_remain != 0.0 && !(cfg.frac_remain > 0.0 && cfg.frac_remain < 1.0))
    throw std::invalid_argument("config: frac-remain must lie in (0, 1)");
  if (!cfg.dataset_path.empty() && cfg.data_seed)
    throw std::invalid_argument("config: dataset path and data seed are mutually exclusive");
  if (!(cfg.grid_lo < cfg.grid_hi)) throw std::invalid_argument("config: need grid-lo < grid-hi");
  if (cfg.points_per_dim < 2) throw std::invalid_argument("config: points-per-dim must be >= 2");
}

inline nlohmann::json config_to_json(const ExperimentConfig& c) {
  nlohmann::json j;
  j["model"] = c.model;
  j["method"] = c.method;
  j["seed"] = c.seed;
  j["n_live"] = c.n_live;
  j["frac_remain"] = c.frac_remain;
  j["stochastic_shrinkage"] = c.stochastic_shrinkage;
  j["chains"] = c.chains;
  j["warmup"] = c.warmup;
  j["samples"] = c.samples;
  if (c.target_accept) j["target_accept"] = *c.target_accept;
  if (c.step_size) j["step_size"] = *c.step_size;
  j["max_tree_depth"] = c.max_tree_depth;
  j["threads"] = c.threads;
  j["flow_stacks"] = c.flow_stacks;
  j["flow_hidden"] = c.flow_hidden;
  j["epochs"] = c.epochs;
  j["batch"] = c.batch;
  if (!c.flow_file.empty()) j["flow_file"] = c.flow_file;
  if (!c.dataset_path.empty()) j["dataset_path"] = c.dataset_path;
  if (c.data_seed) j["data_seed"] = *c.data_seed;
  j["data_groups"] = c.data_groups;
  j["data_observations"] = c.data_observations;
  j["nsi_n_nr_observed"] = c.nsi_n_nr_observed;
  j["nsi_lambda_bkg"] = c.nsi_lambda_bkg;
  j["nsi_er_ratio_mean"] = c.nsi_er_ratio_mean;
  j["nsi_er_ratio_sigma"] = c.nsi_er_ratio_sigma;
  j["surrogate_lambda_sm"] = c.surrogate_lambda_sm;
  j["surrogate_weight_proton"] = c.surrogate_weight_proton;
  j["surrogate_weight_neutron"] = c.surrogate_weight_neutron;
  j["surrogate_weight_electron"] = c.surrogate_weight_electron;
  j["grid_lo"] = c.grid_lo;
  j["grid_hi"] = c.grid_hi;
  j["points_per_dim"] = c.points_per_dim;
  if (!c.output_dir.empty()) j["output_dir"] = c.output_dir;
  j["repetitions"] = c.repetitions;
  return j;
}

inline ExperimentConfig config_from_json(const nlohmann::json& j) {
  ExperimentConfig c;
  auto get = [&j](const char* key, auto& field) {
    if (j.contains(key)) field = j.at(key).get<std::decay_t<decltype(field)>>();
  };
  get("model", c.model);
  get("method", c.method);
  get("seed", c.seed);
  get("n_live", c.n_live);
  get("frac_remain", c.frac_remain);
  get("stochastic_shrinkage", c.stochastic_shrinkage);
  get("chains", c.chains);
  get("warmup", c.warmup);
  get("samples", c.samples);
  if (j.contains("target_accept")) c.target_accept = j.at("target_accept").get<double>();
  if (j.contains("step_size")) c.step_size = j.at("step_size").get<double>();
  get("max_tree_depth", c.max_tree_depth);
  get("threads", c.threads);
  get("flow_stacks", c.flow_stacks);
  get("flow_hidden", c.flow_hidden);
  get("epochs", c.epochs);
  get("batch", c.batch);
  get("flow_file", c.flow_file);
  get("dataset_path", c.dataset_path);
  if (j.contains("data_seed")) c.data_seed = j.at("data_seed").get<std::uint64_t>();
  get("data_groups", c.data_groups);
  get("data_observations", c.data_observations);
  get("nsi_n_nr_observed", c.nsi_n_nr_observed);
  get("nsi_lambda_bkg", c.nsi_lambda_bkg);
  get("nsi_er_ratio_mean", c.nsi_er_ratio_mean);
  get("nsi_er_ratio_sigma", c.nsi_er_ratio_sigma);
  get("surrogate_lambda_sm", c.surrogate_lambda_sm);
  get("surrogate_weight_proton", c.surrogate_weight_proton);
  get("surrogate_weight_neutron", c.surrogate_weight_neutron);
  get("surrogate_weight_electron", c.surrogate_weight_electron);
  get("grid_lo", c.grid_lo);
  get("grid_hi", c.grid_hi);
  get("points_per_dim", c.points_per_dim);
  get("output_dir", c.output_dir);
  get("repetitions", c.repetitions);
  return c;
}

// Accepts either a bare config object or a run manifest (config under the
// "config" key), so a manifest can reproduce its run directly.
inline ExperimentConfig load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file: " + path);
  nlohmann::json j;
  in >> j;
  if (j.contains("config") && j.at("config").is_object()) return config_from_json(j.at("config"));
  return config_from_json(j);
}

}  // namespace bayesbench::harness
