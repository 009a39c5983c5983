// Copyright 2026 The pwlbo Authors.
// SPDX-License-Identifier: Apache-2.0

// Command-line front end.

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "pwlbo/benchmarks.hpp"
#include "pwlbo/experiment.hpp"

namespace {

using namespace pwlbo;

struct SolverFlags {
  std::optional<double> mip_gap;
  std::optional<double> time_limit;
  std::optional<int> pool_size;
  std::optional<long> node_limit;
  bool no_warm_start = false;

  void add(CLI::App* app) {
    app->add_option("--mip-gap", mip_gap, "Relative gap target of the global solve");
    app->add_option("--time-limit", time_limit, "Time limit of the global solve in seconds");
    app->add_option("--pool-size", pool_size, "Solutions kept by the solver and by each warm-start pool");
    app->add_option("--node-limit", node_limit, "Node cap of every solve");
    app->add_flag("--no-warm-start", no_warm_start, "Skip the warm-start pools");
  }

  void apply(BoConfig& bo) const {
    if (mip_gap) bo.solver.mip_gap = *mip_gap;
    if (time_limit) bo.solver.time_limit_s = *time_limit;
    if (pool_size) {
      bo.solver.pool_size = *pool_size;
      bo.pool_sub = *pool_size;
      bo.pool_rand = *pool_size;
    }
    if (node_limit) {
      bo.solver.node_limit = *node_limit;
      bo.sub_solver.node_limit = *node_limit;
    }
    if (no_warm_start) bo.warm_start = false;
  }
};

Box box_from(const std::vector<double>& lower, const std::vector<double>& upper, int dim) {
  if (lower.empty() && upper.empty()) return Box::unit(dim);
  if (static_cast<int>(lower.size()) != dim || static_cast<int>(upper.size()) != dim)
    throw ConfigError("--lower and --upper need one value per dimension");
  return Box(Eigen::Map<const Vector>(lower.data(), dim), Eigen::Map<const Vector>(upper.data(), dim));
}

std::ofstream open_output(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path);
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Bayesian optimization with a piecewise-linear kernel acquisition solver"};
  app.require_subcommand(1);

  // bo-run
  auto* run = app.add_subcommand("bo-run", "Run replicated BO experiments on a benchmark");
  std::string config_path, benchmark, out_dir, groups;
  std::optional<int> replications, budget, workers;
  std::optional<std::uint64_t> seed;
  SolverFlags run_solver;
  run->add_option("--config", config_path, "Sectioned key = value config file")->check(CLI::ExistingFile);
  run->add_option("--benchmark", benchmark, "Benchmark name (see list-benchmarks)");
  run->add_option("--replications", replications, "Independent seeds (default 20)");
  run->add_option("--budget", budget, "BO iterations after the initial design");
  run->add_option("--seed", seed, "Seed of the first replication");
  run->add_option("--addgp-groups", groups, "Additive groups of 1-based dimensions, e.g. \"1,2;3\"");
  run->add_option("--out-dir", out_dir, "Output directory");
  run->add_option("--workers", workers, "Replications run in parallel (default 1)");
  run_solver.add(run);

  // solve-acq
  auto* acq = app.add_subcommand("solve-acq", "Compare the MIQP pipeline and Nelder-Mead on a random LCB instance");
  AcqInstanceSpec spec;
  std::optional<double> acq_beta;
  SolverFlags acq_solver;
  acq->add_option("--dim", spec.dim, "Input dimension")->capture_default_str();
  acq->add_option("--points", spec.points, "Training points")->capture_default_str();
  acq->add_option("--variance", spec.variance, "Kernel variance")->capture_default_str();
  acq->add_option("--lengthscale", spec.lengthscale, "Kernel lengthscale (unit box)")->capture_default_str();
  acq->add_option("--beta", acq_beta, "Exploration weight (default 0.2 D ln(2N))");
  acq->add_option("--seed", spec.seed, "Instance seed")->capture_default_str();
  acq_solver.add(acq);

  // export-model
  auto* exp = app.add_subcommand("export-model", "Write the acquisition model as LP text");
  std::string dataset_path, export_out;
  std::vector<double> exp_lower, exp_upper;
  KernelParams exp_params;
  exp_params.lengthscale = 0.2;
  double exp_beta = 1.0;
  bool mean_only = false;
  exp->add_option("--dataset", dataset_path, "Dataset file (header, D inputs, output)")
      ->required()
      ->check(CLI::ExistingFile);
  exp->add_option("--lower", exp_lower, "Lower bounds, comma separated (default 0)")->delimiter(',');
  exp->add_option("--upper", exp_upper, "Upper bounds, comma separated (default 1)")->delimiter(',');
  exp->add_option("--variance", exp_params.variance, "Kernel variance")->capture_default_str();
  exp->add_option("--lengthscale", exp_params.lengthscale, "Kernel lengthscale (unit box)")->capture_default_str();
  exp->add_option("--noise", exp_params.noise, "Noise variance")->capture_default_str();
  exp->add_option("--beta", exp_beta, "Exploration weight")->capture_default_str();
  exp->add_flag("--mean-only", mean_only, "Export the mean-only sub-problem");
  exp->add_option("--out", export_out, "Output file")->required();

  // linearize
  auto* lin = app.add_subcommand("linearize", "Write the knot table and approximation errors");
  int lin_dim = 1;
  std::vector<double> lin_lower, lin_upper;
  KernelParams lin_params;
  lin_params.lengthscale = 0.2;
  std::string lin_out;
  lin->add_option("--dim", lin_dim, "Input dimension")->capture_default_str();
  lin->add_option("--lower", lin_lower, "Lower bounds, comma separated (default 0)")->delimiter(',');
  lin->add_option("--upper", lin_upper, "Upper bounds, comma separated (default 1)")->delimiter(',');
  lin->add_option("--variance", lin_params.variance, "Kernel variance")->capture_default_str();
  lin->add_option("--lengthscale", lin_params.lengthscale, "Kernel lengthscale")->capture_default_str();
  lin->add_option("--out", lin_out, "Output file")->required();

  auto* list = app.add_subcommand("list-benchmarks", "Print the benchmark registry");

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) {
      ExperimentConfig cfg = config_path.empty() ? ExperimentConfig{} : load_experiment_config(config_path);
      apply_env_overrides(cfg);
      if (!benchmark.empty()) cfg.benchmark = benchmark;
      if (replications) cfg.replications = *replications;
      if (budget) cfg.bo.max_iterations = *budget;
      if (seed) cfg.seed = *seed;
      if (!groups.empty()) cfg.bo.addgp_groups = parse_groups(groups);
      if (!out_dir.empty()) cfg.out_dir = out_dir;
      if (workers) cfg.workers = *workers;
      run_solver.apply(cfg.bo);
      if (cfg.benchmark.empty()) throw ConfigError("no benchmark given (--benchmark or [experiment] benchmark)");
      cmd_bo_run(cfg, std::cout);
    } else if (acq->parsed()) {
      ExperimentConfig cfg;
      apply_env_overrides(cfg);
      acq_solver.apply(cfg.bo);
      cfg.bo.validate(spec.dim);
      spec.beta = acq_beta;
      cmd_solve_acq(spec, cfg.bo, std::cout);
    } else if (exp->parsed()) {
      std::ifstream in(dataset_path);
      ExportSpec es;
      es.data = read_dataset_csv(in);
      es.bounds = box_from(exp_lower, exp_upper, es.data.dim());
      es.params = exp_params;
      es.beta = exp_beta;
      es.mean_only = mean_only;
      std::ofstream out = open_output(export_out);
      cmd_export_model(es, out);
    } else if (lin->parsed()) {
      std::ofstream out = open_output(lin_out);
      cmd_linearize(lin_dim, box_from(lin_lower, lin_upper, lin_dim), lin_params, out);
    } else if (list->parsed()) {
      for (const BenchmarkFn& fn : benchmark_registry()) {
        std::cout << fn.name << " D=" << fn.dim << (fn.constraints.empty() ? "" : " constrained");
        if (fn.reference_min) std::cout << " min=" << format_double(*fn.reference_min);
        std::cout << '\n';
      }
    }
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
