#pragma once

// Experiment orchestration: builds the configured model, trains or loads the
// flow for NeuTra methods, runs the selected sampler, and persists artifacts
// (samples CSV, metrics JSON, evidence JSON, flow weights, manifest).
// Wall-time metrics cover the sampling phase only; flow-training time is
// recorded separately in the manifest.

#include <chrono>
#include <cstdint>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "bayesbench/diag/ess.hpp"
#include "bayesbench/diag/intervals.hpp"
#include "bayesbench/diag/metrics.hpp"
#include "bayesbench/flow/train.hpp"
#include "bayesbench/harness/config.hpp"
#include "bayesbench/io/csv.hpp"
#include "bayesbench/model/gaussian_fit.hpp"
#include "bayesbench/model/nsi.hpp"
#include "bayesbench/oracle/gaussian_evidence.hpp"
#include "bayesbench/version.hpp"

namespace bayesbench::harness {

namespace fs = std::filesystem;

inline fs::path output_root() {
  if (const char* env = std::getenv("BAYESBENCH_OUTPUT_ROOT")) return fs::path(env);
  return fs::path("runs");
}

inline fs::path resolve_run_dir(const ExperimentConfig& cfg, const std::string& stem) {
  if (!cfg.output_dir.empty()) return fs::path(cfg.output_dir);
  return output_root() / (cfg.model + "-" + stem + "-seed" + std::to_string(cfg.seed));
}

inline std::string iso_timestamp() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
  return buf;
}

inline model::GaussianFitModel build_gaussian_model(const ExperimentConfig& cfg) {
  if (!cfg.dataset_path.empty()) return model::load_gaussian_fit_dataset(cfg.dataset_path);
  if (cfg.data_seed)
    return model::generate_gaussian_fit_dataset(cfg.data_groups, cfg.data_observations,
                                                *cfg.data_seed);
  return model::reference_gaussian_fit_dataset();
}

inline model::NsiObservation build_nsi_observation(const ExperimentConfig& cfg) {
  model::NsiObservation obs;
  obs.n_nr_observed = cfg.nsi_n_nr_observed;
  obs.lambda_bkg = cfg.nsi_lambda_bkg;
  obs.er_ratio_mean = cfg.nsi_er_ratio_mean;
  obs.er_ratio_sigma = cfg.nsi_er_ratio_sigma;
  return obs;
}

inline model::SurrogateRatePlugin build_surrogate_plugin(const ExperimentConfig& cfg) {
  model::SurrogateRatePlugin plugin;
  plugin.lambda_sm = cfg.surrogate_lambda_sm;
  plugin.weight_proton = cfg.surrogate_weight_proton;
  plugin.weight_neutron = cfg.surrogate_weight_neutron;
  plugin.weight_electron = cfg.surrogate_weight_electron;
  return plugin;
}

inline model::PosteriorModel build_posterior(const ExperimentConfig& cfg) {
  if (cfg.model == "gaussian_fit")
    return model::make_gaussian_fit_posterior(build_gaussian_model(cfg));
  if (cfg.model == "nsi")
    return model::make_nsi_posterior(build_nsi_observation(cfg),
                                     model::RatePlugin(build_surrogate_plugin(cfg)));
  throw std::invalid_argument("unknown model: " + cfg.model);
}

inline flow::BnafConfig build_flow_config(const ExperimentConfig& cfg, std::size_t dimension) {
  flow::BnafConfig fc;
  fc.dimension = dimension;
  fc.n_stacks = cfg.flow_stacks;
  fc.hidden_block_dims = cfg.flow_hidden;
  return fc;
}

struct FlowPreparation {
  flow::BnafFlow flow;
  double training_seconds = 0.0;
  bool loaded_from_file = false;
  std::optional<double> final_mean_elbo;
};

// Loads the flow when a weights file is supplied and exists; otherwise trains
// one and writes weights plus the training trace into the run directory.
inline FlowPreparation prepare_flow(const ExperimentConfig& cfg,
                                    const model::PosteriorModel& posterior,
                                    const fs::path& run_dir) {
  if (!cfg.flow_file.empty() && fs::exists(cfg.flow_file)) {
    FlowPreparation prep{flow::BnafFlow::load(cfg.flow_file), 0.0, true, std::nullopt};
    return prep;
  }
  flow::FlowTrainConfig train;
  train.epochs = cfg.epochs;
  train.batch = cfg.batch;
  train.seed = cfg.seed;
  const auto t0 = std::chrono::steady_clock::now();
  auto [trained, trace] = flow::train_neutra(posterior, build_flow_config(cfg, posterior.dimension),
                                             train);
  const auto t1 = std::chrono::steady_clock::now();

  FlowPreparation prep{std::move(trained), std::chrono::duration<double>(t1 - t0).count(), false,
                       trace.final_mean_elbo};
  const fs::path weights_path =
      cfg.flow_file.empty() ? run_dir / "flow.bin" : fs::path(cfg.flow_file);
  fs::create_directories(weights_path.parent_path().empty() ? "." : weights_path.parent_path());
  prep.flow.save(weights_path);
  std::vector<std::vector<double>> rows;
  rows.reserve(trace.elbo_per_epoch.size());
  for (std::size_t e = 0; e < trace.elbo_per_epoch.size(); ++e)
    rows.push_back({static_cast<double>(e), trace.elbo_per_epoch[e]});
  io::write_numeric_csv(run_dir / "training_trace.csv", {"epoch", "elbo"}, rows);
  return prep;
}

struct RunOutput {
  fs::path dir;
  diag::RunMetrics metrics;
  std::optional<double> log_evidence;
  std::optional<double> log_evidence_err;
  std::vector<std::string> parameter_names;
  diag::WeightedSampleSet samples;
};

namespace detail {

inline void write_manifest(const fs::path& run_dir, const nlohmann::json& manifest) {
  std::ofstream out(run_dir / "manifest.json");
  out << manifest.dump(2) << "\n";
}

inline nlohmann::json base_manifest(const ExperimentConfig& cfg) {
  nlohmann::json m;
  m["code_version"] = kVersionString;
  m["config"] = config_to_json(cfg);
  m["started_at"] = iso_timestamp();
  return m;
}

inline void write_weighted_samples_csv(const fs::path& path,
                                       const std::vector<std::string>& names,
                                       const std::vector<ns::WeightedSample>& samples) {
  std::vector<std::string> header = names;
  header.push_back("weight");
  std::vector<std::vector<double>> rows;
  rows.reserve(samples.size());
  for (const auto& s : samples) {
    std::vector<double> row = s.parameters;
    row.push_back(s.weight);
    rows.push_back(std::move(row));
  }
  io::write_numeric_csv(path, header, rows);
}

inline void write_chain_samples_csv(const fs::path& path, const std::vector<std::string>& names,
                                    const nuts::NutsRunResult& result) {
  std::vector<std::string> header;
  header.push_back("chain");
  for (const auto& n : names) header.push_back(n);
  std::vector<std::vector<double>> rows;
  for (std::size_t c = 0; c < result.chains.size(); ++c) {
    for (const auto& draw : result.chains[c].draws) {
      std::vector<double> row;
      row.reserve(draw.size() + 1);
      row.push_back(static_cast<double>(c));
      row.insert(row.end(), draw.begin(), draw.end());
      rows.push_back(std::move(row));
    }
  }
  io::write_numeric_csv(path, header, rows);
}

}  // namespace detail

inline RunOutput cmd_run(ExperimentConfig cfg) {
  apply_defaults(cfg);
  validate(cfg);
  const fs::path run_dir = resolve_run_dir(cfg, cfg.method);
  fs::create_directories(run_dir);
  nlohmann::json manifest = detail::base_manifest(cfg);

  try {
    model::PosteriorModel posterior = build_posterior(cfg);
    RunOutput out;
    out.dir = run_dir;
    out.parameter_names = posterior.parameter_names;

    std::optional<FlowPreparation> flow_prep;
    if (is_neutra_method(cfg.method)) {
      flow_prep = prepare_flow(cfg, posterior, run_dir);
      manifest["flow"] = {{"loaded_from_file", flow_prep->loaded_from_file},
                          {"training_seconds", flow_prep->training_seconds}};
      if (flow_prep->final_mean_elbo)
        manifest["flow"]["final_mean_elbo"] = *flow_prep->final_mean_elbo;
    }

    if (is_ns_method(cfg.method)) {
      ns::CubeDensity density =
          cfg.method == "ns" ? flow::make_cube_density(posterior)
                             : flow::compose_for_sampling(flow_prep->flow, posterior).cube_density;
      ns::NsConfig ns_cfg;
      ns_cfg.n_live = cfg.n_live;
      ns_cfg.frac_remain = cfg.frac_remain;
      ns_cfg.seed = cfg.seed;
      ns_cfg.stochastic_shrinkage = cfg.stochastic_shrinkage;

      const auto t0 = std::chrono::steady_clock::now();
      ns::NsRunResult result = ns::run_ns(density, ns_cfg);
      const auto t1 = std::chrono::steady_clock::now();
      const double wall = std::chrono::duration<double>(t1 - t0).count();

      out.samples.samples.reserve(result.samples.size());
      out.samples.weights.reserve(result.samples.size());
      for (const auto& s : result.samples) {
        out.samples.samples.push_back(s.parameters);
        out.samples.weights.push_back(s.weight);
      }
      const double ess = diag::kish_ess(out.samples.weights);
      out.metrics = diag::assemble_metrics(cfg.method, ess, wall, result.n_likelihood_evals);
      out.log_evidence = result.log_evidence;
      out.log_evidence_err = result.log_evidence_err;

      detail::write_weighted_samples_csv(run_dir / "samples.csv", posterior.parameter_names,
                                         result.samples);
      nlohmann::json evidence{{"log_evidence", result.log_evidence},
                              {"log_evidence_err", result.log_evidence_err},
                              {"information_nats", result.information_nats},
                              {"n_iterations", result.n_iterations},
                              {"plateau_terminated", result.plateau_terminated}};
      std::ofstream(run_dir / "evidence.json") << evidence.dump(2) << "\n";
      manifest["n_iterations"] = result.n_iterations;
    } else {
      nuts::NutsTarget target =
          cfg.method == "nuts" ? nuts::make_nuts_target(posterior)
                               : flow::compose_for_sampling(flow_prep->flow, posterior).nuts_target;
      nuts::NutsConfig nuts_cfg;
      nuts_cfg.n_chains = cfg.chains;
      nuts_cfg.n_warmup = cfg.warmup;
      nuts_cfg.n_samples = cfg.samples;
      if (cfg.target_accept) nuts_cfg.target_accept = *cfg.target_accept;
      nuts_cfg.fixed_step_size = cfg.step_size;
      nuts_cfg.max_tree_depth = cfg.max_tree_depth;
      nuts_cfg.seed = cfg.seed;
      nuts_cfg.n_threads = cfg.threads;

      const auto t0 = std::chrono::steady_clock::now();
      nuts::NutsRunResult result = nuts::run_nuts(target, nuts_cfg);
      const auto t1 = std::chrono::steady_clock::now();
      const double wall = std::chrono::duration<double>(t1 - t0).count();

      nlohmann::json chain_status = nlohmann::json::array();
      std::vector<std::vector<std::vector<double>>> ok_chains;
      for (const auto& chain : result.chains) {
        chain_status.push_back({{"failed", chain.adaptation_failed},
                                {"message", chain.failure_message},
                                {"divergences", chain.divergence_count},
                                {"mean_accept_stat", chain.mean_accept_stat},
                                {"step_size", chain.adapted_step_size}});
        if (!chain.adaptation_failed && !chain.draws.empty()) ok_chains.push_back(chain.draws);
      }
      manifest["chains"] = chain_status;
      if (ok_chains.empty()) throw std::runtime_error("all NUTS chains failed");

      const double ess = diag::min_mcmc_ess(ok_chains);
      out.metrics = diag::assemble_metrics(cfg.method, ess, wall, result.total_gradient_evals,
                                           result.total_divergences);
      for (const auto& chain : ok_chains)
        for (const auto& draw : chain) {
          out.samples.samples.push_back(draw);
          out.samples.weights.push_back(1.0);
        }
      const double w = 1.0 / static_cast<double>(out.samples.weights.size());
      for (double& wi : out.samples.weights) wi = w;

      detail::write_chain_samples_csv(run_dir / "samples.csv", posterior.parameter_names, result);
    }

    std::ofstream(run_dir / "metrics.json")
        << diag::metrics_to_json(out.metrics).dump(2) << "\n";
    manifest["status"] = "ok";
    manifest["finished_at"] = iso_timestamp();
    manifest["ess"] = out.metrics.ess;
    manifest["n_evals"] = out.metrics.n_evals;
    manifest["wall_time_sampling_s"] = out.metrics.wall_time_s;
    if (out.log_evidence) {
      manifest["log_evidence"] = *out.log_evidence;
      manifest["log_evidence_err"] = *out.log_evidence_err;
    }
    detail::write_manifest(run_dir, manifest);
    return out;
  } catch (const std::exception& e) {
    manifest["status"] = "error";
    manifest["error"] = e.what();
    manifest["finished_at"] = iso_timestamp();
    detail::write_manifest(run_dir, manifest);
    throw;
  }
}

// --- ground truth -------------------------------------------------------------

inline fs::path cmd_ground_truth(ExperimentConfig cfg) {
  apply_defaults(cfg);
  if (cfg.model != "gaussian_fit")
    throw std::invalid_argument("ground-truth: only the gaussian_fit model has an oracle");
  const fs::path run_dir = resolve_run_dir(cfg, "ground-truth");
  fs::create_directories(run_dir);
  nlohmann::json manifest = detail::base_manifest(cfg);

  model::GaussianFitModel m = build_gaussian_model(cfg);
  oracle::QuadratureGrid grid{cfg.grid_lo, cfg.grid_hi, cfg.points_per_dim};
  oracle::EvidenceOracleResult result = oracle::log_evidence_oracle(m, grid);

  std::vector<std::vector<double>> trace_rows;
  for (const auto& [points, log_z] : result.convergence_trace)
    trace_rows.push_back({static_cast<double>(points), log_z});
  io::write_numeric_csv(run_dir / "evidence_trace.csv", {"points_per_dim", "log_evidence"},
                        trace_rows);

  // (mu_1, C_1) contour field over a window wide enough for the marginals
  const oracle::Grid1D inner{cfg.grid_lo, cfg.grid_hi, cfg.points_per_dim};
  const oracle::Grid1D wide{-15.0, 15.0, 301};
  auto window = [&](std::size_t param) {
    const auto curve = oracle::marginal_density_1d(m, param, wide, inner);
    auto [lo, hi] = oracle::curve_equal_tailed_interval(wide, curve, 0.9999);
    const double pad = 0.15 * (hi - lo);
    return oracle::Grid1D{lo - pad, hi + pad, 121};
  };
  const std::size_t mu1 = 0;
  const std::size_t c1 = m.groups();
  oracle::MarginalField field = oracle::marginal_field(m, mu1, c1, window(mu1), window(c1), inner);

  std::vector<std::vector<double>> field_rows;
  for (int iu = 0; iu < field.u_grid.n; ++iu)
    for (int iv = 0; iv < field.v_grid.n; ++iv)
      field_rows.push_back({field.u_grid.point(iu), field.v_grid.point(iv),
                            std::exp(field.at(iu, iv) - result.log_evidence)});
  io::write_numeric_csv(run_dir / "contour_mu1_C1.csv", {"mu_1", "C_1", "density"}, field_rows);

  const double level68 = oracle::contour_level(field, 0.68);
  const double level95 = oracle::contour_level(field, 0.95);
  nlohmann::json summary{
      {"log_evidence", result.log_evidence},
      {"converged", result.converged},
      {"contour_levels",
       {{"level_68", std::exp(level68 - result.log_evidence)},
        {"level_95", std::exp(level95 - result.log_evidence)},
        {"mass_at_level_68", oracle::superlevel_mass_fraction(field, level68)},
        {"mass_at_level_95", oracle::superlevel_mass_fraction(field, level95)}}},
  };
  std::ofstream(run_dir / "ground_truth.json") << summary.dump(2) << "\n";

  manifest["status"] = "ok";
  manifest["log_evidence"] = result.log_evidence;
  manifest["converged"] = result.converged;
  manifest["finished_at"] = iso_timestamp();
  detail::write_manifest(run_dir, manifest);
  return run_dir;
}

// --- corner plot data ----------------------------------------------------------

struct LoadedArtifact {
  std::string method;
  std::vector<std::string> parameter_names;
  diag::WeightedSampleSet samples;
};

inline LoadedArtifact load_artifact(const fs::path& dir) {
  LoadedArtifact art;
  {
    std::ifstream in(dir / "manifest.json");
    if (!in) throw std::runtime_error("corner: missing manifest in " + dir.string());
    nlohmann::json manifest;
    in >> manifest;
    art.method = manifest.at("config").at("method").get<std::string>();
  }
  io::CsvTable table = io::read_csv(dir / "samples.csv");
  std::size_t first_param = 0;
  std::size_t n_cols = table.header.size();
  bool weighted = false;
  if (!table.header.empty() && table.header.front() == "chain") first_param = 1;
  if (!table.header.empty() && table.header.back() == "weight") {
    weighted = true;
    --n_cols;
  }
  for (std::size_t i = first_param; i < n_cols; ++i) art.parameter_names.push_back(table.header[i]);
  auto rows = io::numeric_rows(table);
  double total_weight = 0.0;
  for (const auto& row : rows) {
    std::vector<double> point(row.begin() + first_param, row.begin() + n_cols);
    art.samples.samples.push_back(std::move(point));
    const double w = weighted ? row.back() : 1.0;
    art.samples.weights.push_back(w);
    total_weight += w;
  }
  for (double& w : art.samples.weights) w /= total_weight;
  return art;
}

// Emits plot-ready CSVs: per-parameter 1-D densities with 68% equal-tailed
// markers and per-pair 2-D histogram grids, one long-format file per panel
// with a method label column.
inline fs::path cmd_corner(const std::vector<fs::path>& artifact_dirs, const fs::path& out_dir,
                           int bins_1d = 101, int bins_2d = 61) {
  if (artifact_dirs.empty()) throw std::invalid_argument("corner: need at least one artifact");
  std::vector<LoadedArtifact> artifacts;
  for (const auto& dir : artifact_dirs) artifacts.push_back(load_artifact(dir));
  for (const auto& art : artifacts)
    if (art.parameter_names != artifacts.front().parameter_names)
      throw std::invalid_argument("corner: artifacts have incompatible parameter sets");

  fs::create_directories(out_dir);
  const auto& names = artifacts.front().parameter_names;
  const std::size_t dim = names.size();

  // pooled ranges, padded
  std::vector<double> lo(dim, std::numeric_limits<double>::infinity());
  std::vector<double> hi(dim, -std::numeric_limits<double>::infinity());
  for (const auto& art : artifacts)
    for (const auto& point : art.samples.samples)
      for (std::size_t p = 0; p < dim; ++p) {
        lo[p] = std::min(lo[p], point[p]);
        hi[p] = std::max(hi[p], point[p]);
      }
  for (std::size_t p = 0; p < dim; ++p) {
    const double pad = 0.02 * (hi[p] - lo[p]);
    lo[p] -= pad;
    hi[p] += pad;
  }

  io::CsvTable markers;
  markers.header = {"method", "parameter", "lo_68", "hi_68"};

  for (std::size_t p = 0; p < dim; ++p) {
    io::CsvTable table;
    table.header = {"method", names[p], "density"};
    const double width = (hi[p] - lo[p]) / bins_1d;
    for (const auto& art : artifacts) {
      std::vector<double> hist(static_cast<std::size_t>(bins_1d), 0.0);
      for (std::size_t i = 0; i < art.samples.samples.size(); ++i) {
        int bin = static_cast<int>((art.samples.samples[i][p] - lo[p]) / width);
        bin = std::clamp(bin, 0, bins_1d - 1);
        hist[static_cast<std::size_t>(bin)] += art.samples.weights[i];
      }
      for (int b = 0; b < bins_1d; ++b)
        table.rows.push_back({art.method, io::format_double(lo[p] + (b + 0.5) * width),
                              io::format_double(hist[static_cast<std::size_t>(b)] / width)});
      auto [l68, h68] = diag::equal_tailed_interval(art.samples, p, 0.68);
      markers.rows.push_back(
          {art.method, names[p], io::format_double(l68), io::format_double(h68)});
    }
    io::write_csv(out_dir / ("corner_1d_" + names[p] + ".csv"), table);
  }
  io::write_csv(out_dir / "corner_intervals.csv", markers);

  for (std::size_t pu = 0; pu < dim; ++pu) {
    for (std::size_t pv = pu + 1; pv < dim; ++pv) {
      io::CsvTable table;
      table.header = {"method", names[pu], names[pv], "density"};
      const double wu = (hi[pu] - lo[pu]) / bins_2d;
      const double wv = (hi[pv] - lo[pv]) / bins_2d;
      for (const auto& art : artifacts) {
        std::vector<double> hist(static_cast<std::size_t>(bins_2d) * bins_2d, 0.0);
        for (std::size_t i = 0; i < art.samples.samples.size(); ++i) {
          int bu = static_cast<int>((art.samples.samples[i][pu] - lo[pu]) / wu);
          int bv = static_cast<int>((art.samples.samples[i][pv] - lo[pv]) / wv);
          bu = std::clamp(bu, 0, bins_2d - 1);
          bv = std::clamp(bv, 0, bins_2d - 1);
          hist[static_cast<std::size_t>(bu) * bins_2d + bv] += art.samples.weights[i];
        }
        for (int bu = 0; bu < bins_2d; ++bu)
          for (int bv = 0; bv < bins_2d; ++bv)
            table.rows.push_back(
                {art.method, io::format_double(lo[pu] + (bu + 0.5) * wu),
                 io::format_double(lo[pv] + (bv + 0.5) * wv),
                 io::format_double(hist[static_cast<std::size_t>(bu) * bins_2d + bv] /
                                   (wu * wv))});
      }
      io::write_csv(out_dir / ("corner_2d_" + names[pu] + "__" + names[pv] + ".csv"), table);
    }
  }
  return out_dir;
}

// --- bench ---------------------------------------------------------------------

// Runs every method `repetitions` times with derived seeds, aggregating the
// three metrics into a table mirroring the benchmark layout. NeuTra flows are
// trained once per model and shared across repetitions. Partial failures are
// recorded per cell; the table is still emitted.
inline fs::path cmd_bench(ExperimentConfig base) {
  apply_defaults(base);
  const fs::path bench_dir = resolve_run_dir(base, "bench");
  fs::create_directories(bench_dir);

  const std::vector<std::string> methods = {"ns", "neutra-ns", "nuts", "neutra-nuts"};
  io::CsvTable table;
  table.header = {"method",        "repetitions_ok", "wall_time_per_ess_mean",
                  "wall_time_per_ess_std", "evals_per_ess_mean", "evals_per_ess_std",
                  "divergences_per_ess_mean", "divergences_per_ess_std"};
  nlohmann::json evidence_report;

  for (const auto& method : methods) {
    std::vector<diag::RunMetrics> metrics;
    std::vector<std::pair<double, double>> evidences;
    std::vector<std::string> errors;

    ExperimentConfig method_cfg = base;
    method_cfg.method = method;
    method_cfg.n_live = 0;  // re-resolve per-method defaults
    method_cfg.epochs = base.epochs;
    apply_defaults(method_cfg);
    if (is_neutra_method(method) && method_cfg.flow_file.empty())
      method_cfg.flow_file = (bench_dir / (method + "-flow.bin")).string();

    for (std::size_t rep = 0; rep < base.repetitions; ++rep) {
      ExperimentConfig run_cfg = method_cfg;
      run_cfg.seed = derive_seed(base.seed, 7000 + rep);
      run_cfg.output_dir = (bench_dir / (method + "-rep" + std::to_string(rep))).string();
      try {
        RunOutput out = cmd_run(run_cfg);
        metrics.push_back(out.metrics);
        if (out.log_evidence) evidences.emplace_back(*out.log_evidence, *out.log_evidence_err);
      } catch (const std::exception& e) {
        errors.emplace_back(e.what());
      }
    }

    auto mean_std = [](const std::vector<double>& xs) -> std::pair<double, std::optional<double>> {
      if (xs.empty()) return {0.0, std::nullopt};
      double mean = 0.0;
      for (double x : xs) mean += x;
      mean /= static_cast<double>(xs.size());
      if (xs.size() < 2) return {mean, std::nullopt};
      double var = 0.0;
      for (double x : xs) var += (x - mean) * (x - mean);
      var /= static_cast<double>(xs.size() - 1);
      return {mean, std::sqrt(var)};
    };
    std::vector<double> wall, evals, divs;
    for (const auto& m : metrics) {
      wall.push_back(m.wall_time_per_ess);
      evals.push_back(m.evals_per_ess);
      if (m.divergences_per_ess) divs.push_back(*m.divergences_per_ess);
    }
    auto [wall_m, wall_s] = mean_std(wall);
    auto [evals_m, evals_s] = mean_std(evals);
    auto [divs_m, divs_s] = mean_std(divs);
    auto fmt_opt = [](std::optional<double> v) { return v ? io::format_double(*v) : ""; };
    table.rows.push_back({method, std::to_string(metrics.size()),
                          metrics.empty() ? "" : io::format_double(wall_m), fmt_opt(wall_s),
                          metrics.empty() ? "" : io::format_double(evals_m), fmt_opt(evals_s),
                          divs.empty() ? "" : io::format_double(divs_m), fmt_opt(divs_s)});

    if (!evidences.empty()) {
      nlohmann::json ev = nlohmann::json::array();
      double max_z = 0.0;
      for (std::size_t i = 0; i < evidences.size(); ++i) {
        ev.push_back({{"log_evidence", evidences[i].first},
                      {"log_evidence_err", evidences[i].second}});
        for (std::size_t j = i + 1; j < evidences.size(); ++j) {
          const double scale = std::sqrt(evidences[i].second * evidences[i].second +
                                         evidences[j].second * evidences[j].second);
          max_z = std::max(max_z,
                           std::abs(evidences[i].first - evidences[j].first) / scale);
        }
      }
      evidence_report[method] = {{"runs", ev},
                                 {"max_pairwise_sigma", max_z},
                                 {"mutually_consistent_3sigma", max_z <= 3.0}};
    }
    if (!errors.empty()) evidence_report[method + "_errors"] = errors;
  }

  io::write_csv(bench_dir / "bench_table.csv", table);
  std::ofstream(bench_dir / "evidence_report.json") << evidence_report.dump(2) << "\n";
  return bench_dir;
}

// --- train-flow ------------------------------------------------------------------

inline fs::path cmd_train_flow(ExperimentConfig cfg) {
  apply_defaults(cfg);
  validate(cfg);
  const fs::path run_dir = resolve_run_dir(cfg, "train-flow");
  fs::create_directories(run_dir);
  model::PosteriorModel posterior = build_posterior(cfg);
  ExperimentConfig train_cfg = cfg;
  if (train_cfg.flow_file.empty()) train_cfg.flow_file = (run_dir / "flow.bin").string();
  if (fs::exists(train_cfg.flow_file)) fs::remove(train_cfg.flow_file);
  FlowPreparation prep = prepare_flow(train_cfg, posterior, run_dir);
  nlohmann::json manifest = detail::base_manifest(cfg);
  manifest["status"] = "ok";
  manifest["flow_file"] = train_cfg.flow_file;
  manifest["training_seconds"] = prep.training_seconds;
  if (prep.final_mean_elbo) manifest["final_mean_elbo"] = *prep.final_mean_elbo;
  manifest["finished_at"] = iso_timestamp();
  detail::write_manifest(run_dir, manifest);
  return run_dir;
}

}  // namespace bayesbench::harness
