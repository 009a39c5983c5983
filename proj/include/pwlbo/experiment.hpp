// Copyright 2026 The pwlbo Authors.
// SPDX-License-Identifier: Apache-2.0

#ifndef PWLBO_EXPERIMENT_HPP
#define PWLBO_EXPERIMENT_HPP

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "pwlbo/bo.hpp"
#include "pwlbo/gp.hpp"

namespace pwlbo {

struct ExperimentConfig {
  std::string benchmark;
  int replications = 20;
  std::uint64_t seed = 0;  // replication k runs with seed + k
  std::string out_dir = "run";
  int workers = 1;
  BoConfig bo;

  /// Throws ConfigError for unknown benchmarks or out-of-range fields.
  void validate() const;
};

// Sectioned key = value text:
//   [experiment] benchmark replications seed out_dir workers
//   [bo]         budget init_samples pool_sub pool_rand beta_coefficient
//                beta_rule (empirical | theoretical) beta_delta beta_a beta_b
//                beta_r polish_steps polish_step_size addgp_groups
//                warm_start fit_restarts noise max_segment_scale
//   [solver], [sub_solver]  mip_gap time_limit pool_size node_limit cut_rounds
// addgp_groups lists 1-based dimensions, groups separated by ';', e.g. "1,2;3".
ExperimentConfig read_experiment_config(std::istream& in);
ExperimentConfig load_experiment_config(const std::string& path);
void write_experiment_config(std::ostream& out, const ExperimentConfig& config);

/// PWLBO_TIME_LIMIT and PWLBO_SUB_TIME_LIMIT (seconds) replace the solver
/// time limits when set.
void apply_env_overrides(ExperimentConfig& config);

/// "1,2;3" -> {{0,1},{2}}. Throws ConfigError on malformed text.
std::vector<std::vector<int>> parse_groups(const std::string& text);
std::string format_groups(const std::vector<std::vector<int>>& groups);

/// Per-row statistics over replications. Row k pools the k-th record of
/// every trace. Standard deviations use the n - 1 denominator and are 0 for
/// a single replication.
struct SummaryRow {
  int row = 0;
  int iteration = 0;
  int count = 0;
  double mean_best = 0.0;
  double std_best = 0.0;
  double mean_regret = 0.0;
  double std_regret = 0.0;
};
std::vector<SummaryRow> summarize(const std::vector<BoTrace>& traces);
void write_summary_csv(std::ostream& out, const std::vector<SummaryRow>& rows);
std::vector<SummaryRow> read_summary_csv(std::istream& in);

/// Runs every replication, writing into out_dir: config.ini,
/// trace_seed<S>.csv, timings_seed<S>.csv and summary.csv. Returns the
/// traces in replication order.
std::vector<BoTrace> cmd_bo_run(const ExperimentConfig& config, std::ostream& log);

/// Random acquisition instance: N inputs uniform in the unit box, outputs
/// drawn from the GP prior with the given kernel.
struct AcqInstanceSpec {
  int dim = 1;
  int points = 5;
  double variance = 1.0;
  double lengthscale = 0.2;
  double noise = 1e-6;
  std::optional<double> beta;  // default: 0.2 D ln(2N)
  std::uint64_t seed = 0;
};

struct AcqInstance {
  Dataset data;  // unit box
  KernelParams params;
  double beta = 0.0;
};

AcqInstance random_acq_instance(const AcqInstanceSpec& spec);

struct AcqReport {
  Vector pk_x;
  double pk_lcb = 0.0;
  Vector nm_x;
  double nm_lcb = 0.0;
  double gap = 0.0;
  std::string status;
  long nodes = 0;
};

/// Optimizes the exact LCB of one instance with the MIQP pipeline and with
/// Nelder-Mead started at the box center.
AcqReport solve_acquisition(const AcqInstance& instance, const BoConfig& config, std::uint64_t seed);
AcqReport cmd_solve_acq(const AcqInstanceSpec& spec, const BoConfig& config, std::ostream& out);

struct ExportSpec {
  Dataset data;  // original units
  Box bounds;
  KernelParams params;  // lengthscale in unit-box units
  double beta = 1.0;
  bool mean_only = false;
};

/// Builds the acquisition model on the standardized data and writes it in
/// LP text form.
void cmd_export_model(const ExportSpec& spec, std::ostream& out);

/// Knot table with the per-segment and overall maximum approximation
/// errors: columns j, R, k, segment_error (error of the segment ending at
/// knot j, nan for j = 0), eps_M.
void cmd_linearize(int dim, const Box& bounds, const KernelParams& params, std::ostream& out,
                   int samples_per_segment = 1000);

}  // namespace pwlbo

#endif  // PWLBO_EXPERIMENT_HPP
