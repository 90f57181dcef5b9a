// Command-line entry point: run single experiments, benchmark suites, the
// ground-truth oracle, corner-plot data extraction, and standalone flow
// training. A JSON config file supplies defaults; explicit flags override it.

#include <cstdio>
#include <exception>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "bayesbench/harness/runner.hpp"
#include "bayesbench/version.hpp"

namespace {

using bayesbench::harness::ExperimentConfig;

// Shared flag wiring; every subcommand accepts the full config surface so a
// config file can be overridden field by field.
void add_config_options(CLI::App* cmd, ExperimentConfig& cfg) {
  cmd->add_option("--model", cfg.model, "model: gaussian_fit | nsi");
  cmd->add_option("--method", cfg.method, "method: ns | neutra-ns | nuts | neutra-nuts");
  cmd->add_option("--seed", cfg.seed, "master seed");
  cmd->add_option("--n-live", cfg.n_live, "live points (nested sampling)");
  cmd->add_option("--frac-remain", cfg.frac_remain, "remaining-evidence stopping fraction");
  cmd->add_flag("--stochastic-shrinkage", cfg.stochastic_shrinkage,
                "sample volume shrinkage instead of mean shrinkage");
  cmd->add_option("--chains", cfg.chains, "number of NUTS chains");
  cmd->add_option("--warmup", cfg.warmup, "warmup steps per chain");
  cmd->add_option("--samples", cfg.samples, "sampling steps per chain");
  cmd->add_option("--target-accept", cfg.target_accept, "dual-averaging acceptance target");
  cmd->add_option("--step-size", cfg.step_size, "fixed step size (disables dual averaging)");
  cmd->add_option("--max-tree-depth", cfg.max_tree_depth, "NUTS doubling cap");
  cmd->add_option("--threads", cfg.threads, "worker threads (0 = hardware)");
  cmd->add_option("--flow-stacks", cfg.flow_stacks, "number of flow stacks");
  cmd->add_option("--flow-hidden", cfg.flow_hidden, "hidden block dims per stack");
  cmd->add_option("--epochs", cfg.epochs, "flow training epochs");
  cmd->add_option("--batch", cfg.batch, "ELBO batch size");
  cmd->add_option("--flow-file", cfg.flow_file, "flow weights file (load if present, else save)");
  cmd->add_option("--dataset", cfg.dataset_path, "gaussian_fit dataset CSV");
  cmd->add_option("--data-seed", cfg.data_seed, "generate a dataset from this seed");
  cmd->add_option("--data-groups", cfg.data_groups, "generated dataset group count");
  cmd->add_option("--data-observations", cfg.data_observations,
                  "generated dataset observations per group");
  cmd->add_option("--lambda-bkg", cfg.nsi_lambda_bkg, "expected background NR count");
  cmd->add_option("--n-nr", cfg.nsi_n_nr_observed, "observed NR count");
  cmd->add_option("--er-mean", cfg.nsi_er_ratio_mean, "ER ratio measurement mean");
  cmd->add_option("--er-sigma", cfg.nsi_er_ratio_sigma, "ER ratio measurement sigma");
  cmd->add_option("--lambda-sm", cfg.surrogate_lambda_sm, "surrogate SM NR rate");
  cmd->add_option("--w-proton", cfg.surrogate_weight_proton, "surrogate proton weight");
  cmd->add_option("--w-neutron", cfg.surrogate_weight_neutron, "surrogate neutron weight");
  cmd->add_option("--w-electron", cfg.surrogate_weight_electron, "surrogate electron weight");
  cmd->add_option("--grid-lo", cfg.grid_lo, "quadrature domain lower edge");
  cmd->add_option("--grid-hi", cfg.grid_hi, "quadrature domain upper edge");
  cmd->add_option("--points-per-dim", cfg.points_per_dim, "quadrature points per dimension");
  cmd->add_option("--out", cfg.output_dir, "output directory");
  cmd->add_option("--reps", cfg.repetitions, "repetitions per method (bench)");
}

// First pass over argv for --config so file values become the defaults the
// real parse overrides.
ExperimentConfig preload_config(int argc, char** argv) {
  for (int i = 1; i + 1 < argc; ++i) {
    if (std::string(argv[i]) == "--config")
      return bayesbench::harness::load_config_file(argv[i + 1]);
  }
  for (int i = 1; i < argc; ++i) {
    const std::string arg = argv[i];
    if (arg.rfind("--config=", 0) == 0)
      return bayesbench::harness::load_config_file(arg.substr(9));
  }
  return ExperimentConfig{};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Bayesian inference benchmark: nested sampling, NUTS, and "
               "flow-reparameterized (NeuTra) variants"};
  app.set_version_flag("--version", bayesbench::kVersionString);
  app.require_subcommand(1);

  ExperimentConfig cfg;
  try {
    cfg = preload_config(argc, argv);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  std::string config_path;

  auto* run = app.add_subcommand("run", "run one sampling experiment");
  run->add_option("--config", config_path, "JSON config file (flags override it)");
  add_config_options(run, cfg);

  auto* bench = app.add_subcommand("bench", "run the benchmark suite for a model");
  bench->add_option("--config", config_path, "JSON config file (flags override it)");
  add_config_options(bench, cfg);

  auto* ground_truth =
      app.add_subcommand("ground-truth", "evidence trace and contour field from the oracle");
  ground_truth->add_option("--config", config_path, "JSON config file (flags override it)");
  add_config_options(ground_truth, cfg);

  std::vector<std::string> artifact_dirs;
  std::string corner_out = "corner";
  auto* corner = app.add_subcommand("corner", "emit corner-plot data from run artifacts");
  corner->add_option("artifacts", artifact_dirs, "run directories")->required();
  corner->add_option("--out", corner_out, "output directory");

  auto* train_flow = app.add_subcommand("train-flow", "train and save a flow for a model");
  train_flow->add_option("--config", config_path, "JSON config file (flags override it)");
  add_config_options(train_flow, cfg);

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) {
      auto out = bayesbench::harness::cmd_run(cfg);
      std::cout << "run artifacts: " << out.dir.string() << "\n";
      std::cout << "  ess=" << out.metrics.ess << " evals/ess=" << out.metrics.evals_per_ess
                << " wall/ess=" << out.metrics.wall_time_per_ess << "s\n";
      if (out.log_evidence)
        std::cout << "  log_evidence=" << *out.log_evidence << " +- " << *out.log_evidence_err
                  << "\n";
    } else if (bench->parsed()) {
      auto dir = bayesbench::harness::cmd_bench(cfg);
      std::cout << "bench artifacts: " << dir.string() << "\n";
    } else if (ground_truth->parsed()) {
      auto dir = bayesbench::harness::cmd_ground_truth(cfg);
      std::cout << "ground-truth artifacts: " << dir.string() << "\n";
    } else if (corner->parsed()) {
      std::vector<std::filesystem::path> dirs(artifact_dirs.begin(), artifact_dirs.end());
      auto dir = bayesbench::harness::cmd_corner(dirs, corner_out);
      std::cout << "corner data: " << dir.string() << "\n";
    } else if (train_flow->parsed()) {
      auto dir = bayesbench::harness::cmd_train_flow(cfg);
      std::cout << "flow artifacts: " << dir.string() << "\n";
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
