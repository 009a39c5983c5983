// Copyright 2026 The pwlbo Authors.
// SPDX-License-Identifier: Apache-2.0

#ifndef PWLBO_BO_HPP
#define PWLBO_BO_HPP

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "pwlbo/benchmarks.hpp"
#include "pwlbo/common.hpp"
#include "pwlbo/gp.hpp"
#include "pwlbo/miqp_model.hpp"
#include "pwlbo/miqp_solver.hpp"

namespace pwlbo {

/// coefficient * D * ln(2t). Throws std::invalid_argument for t < 1.
double beta_schedule(int t, int dim, double coefficient = 0.2);

/// Parameters of the high-probability schedule
/// 2 ln(2 t^2 pi^2 / (3 delta)) + 2 D ln(t^2 D b r sqrt(ln(4 D a / delta))).
struct TheoreticalBeta {
  double delta = 0.1;
  double a = 1.0;
  double b = 1.0;
  double r = 1.0;
};
double theoretical_beta(int t, int dim, const TheoreticalBeta& params);

/// mean - sqrt(beta) * std.
double lcb(double mean, double std_dev, double beta);

/// n points, one per stratum along every axis, jittered uniformly inside
/// the strata and coupled by independent random permutations.
Matrix latin_hypercube(int n, const Box& bounds, std::uint64_t seed);

/// Projected gradient descent with central differences (step 1e-6) and
/// backtracking (up to 20 halvings). Moves are accepted only when they
/// strictly improve `f` and keep every constraint within 1e-9, so the
/// returned point is never worse than x0.
Vector polish(const Vector& x0, const std::function<double(const Vector&)>& f, const Box& bounds, int steps,
              double step_size, const std::vector<KnownConstraint>& constraints = {});
Vector polish(const Vector& x0, const GpModel& gp, double beta, int steps, double step_size, const Box& bounds);

struct Problem {
  std::string name;
  std::function<double(const Vector&)> objective;
  Box bounds;
  std::vector<KnownConstraint> constraints;  // original units
  std::optional<double> known_optimum;
};

Problem make_problem(const BenchmarkFn& fn);

enum class BetaRule { Empirical, Theoretical };

struct BoConfig {
  int max_iterations = 20;
  int init_samples = 0;  // 0: min(10 D, 30)
  int pool_sub = 10;
  int pool_rand = 10;
  double beta_coefficient = 0.2;
  BetaRule beta_rule = BetaRule::Empirical;
  TheoreticalBeta theoretical;
  int polish_steps = 50;
  double polish_step_size = 0.05;  // unit-box units
  std::vector<std::vector<int>> addgp_groups;
  SolverConfig solver;
  SolverConfig sub_solver;
  bool warm_start = true;
  bool use_solver = true;
  int fit_restarts = 10;
  double noise = 1e-6;
  FitBounds fit_bounds;
  int rejection_attempts = 10000;
  int max_segment_scale = 16;  // segment refinement allowed for indefinite approximations
  std::uint64_t seed = 0;

  BoConfig();
  /// Throws ConfigError when a field is out of range for a problem of
  /// dimension `dim`.
  void validate(int dim) const;
};

/// Uniform draw from `bounds` accepted when every constraint holds exactly;
/// nullopt after `attempts` rejections.
std::optional<Vector> sample_feasible(const Box& bounds, const std::vector<KnownConstraint>& constraints,
                                      std::uint64_t seed, int attempts);

struct WarmStartPool {
  std::vector<Assignment> candidates;
  int from_sub_model = 0;
  int from_random = 0;
  bool sampling_exhausted = false;
};

/// Mean-only sub-problem pool plus uniform feasible draws, each completed
/// into an assignment of `full`. `bounds` and `known` are in the component's
/// unit-box coordinates.
WarmStartPool warm_start(const ApproxGp& gp, int component, const MiqpModel& full, const Box& bounds,
                         const std::vector<KnownConstraint>& known, const BoConfig& config, std::uint64_t seed);

struct StageTimes {
  double fit = 0.0;
  double linearize = 0.0;
  double warm_start = 0.0;
  double solve = 0.0;
  double polish = 0.0;
  double evaluate = 0.0;
};

/// Piecewise-linear approximation of an additive GP, one component per
/// group, on the unit box. When the jitter ladder cannot repair the
/// approximated Gram matrix every segment count is doubled, up to
/// `max_scale`; the multiplier used is stored in `scale_used`.
ApproxGp build_approx_gp(const Dataset& unit_data, const std::vector<KernelGroup>& groups, double noise,
                         int max_scale = 16, int* scale_used = nullptr);

/// Outcome of optimizing one component's acquisition function. LCB values
/// are of the exact posterior.
struct AcquisitionResult {
  Vector x;
  double lcb_polished = std::numeric_limits<double>::quiet_NaN();
  double lcb_pool = std::numeric_limits<double>::quiet_NaN();  // selected candidate, before polishing
  double lcb_warm = std::numeric_limits<double>::quiet_NaN();  // best warm start
  double gap = std::numeric_limits<double>::quiet_NaN();
  std::string status;
  bool fallback = false;
  long nodes = 0;
};

/// Warm start, global solve, selection of the candidate with the lowest
/// exact LCB among solver pool and warm starts, then polish. `bounds` and
/// `known` are in the component's unit-box coordinates.
AcquisitionResult optimize_acquisition(const ApproxGp& gp, const AdditiveGpModel& exact, int component, double beta,
                                       const Box& bounds, const std::vector<KnownConstraint>& known,
                                       const BoConfig& config, std::uint64_t seed, StageTimes* times = nullptr);

/// One row of a trace. Iteration 0 marks the initial design.
struct IterationRecord {
  int iteration = 0;
  Vector x;
  double value = 0.0;
  double best = 0.0;
  double regret = std::numeric_limits<double>::quiet_NaN();
  double beta = std::numeric_limits<double>::quiet_NaN();
  double gap = std::numeric_limits<double>::quiet_NaN();
  std::string status = "init";
  // True LCB of the polished point, of the best solver-pool candidate and of
  // the best warm start (summed over groups).
  double lcb_polished = std::numeric_limits<double>::quiet_NaN();
  double lcb_pool = std::numeric_limits<double>::quiet_NaN();
  double lcb_warm = std::numeric_limits<double>::quiet_NaN();
  bool fallback = false;   // solver produced no usable candidate
  bool resampled = false;  // proposal duplicated a sample and was redrawn
  long nodes = 0;
  int segment_scale = 0;  // segment-count multiplier used for the approximation
  StageTimes times;
};

struct BoTrace {
  std::string problem;
  int dim = 0;
  std::vector<IterationRecord> records;
  bool aborted = false;
  std::string abort_reason;

  [[nodiscard]] double best() const;
};

/// One acquisition round: standardize, fit, linearize, warm start, solve,
/// select by true LCB, polish, unscale. `data` is in original units and
/// `t` >= 1. `groups` empty means a single group over every coordinate.
IterationRecord bo_step(const Dataset& data, const Problem& problem, int t, const BoConfig& config,
                        const std::vector<std::vector<int>>& groups = {});

/// Initial Latin hypercube design followed by max_iterations rounds.
BoTrace run_bo(const Problem& problem, const BoConfig& config);
/// As run_bo with the additive kernel given by config.addgp_groups.
BoTrace additive_run(const Problem& problem, const BoConfig& config);

// Trace files: the main table holds only deterministic columns; wall-clock
// stage timings go to a separate table keyed by iteration.
void write_trace_csv(std::ostream& out, const BoTrace& trace);
void write_timings_csv(std::ostream& out, const BoTrace& trace);
BoTrace read_trace_csv(std::istream& in);

}  // namespace pwlbo

#endif  // PWLBO_BO_HPP
