// Copyright 2026 The pwlbo Authors.
// SPDX-License-Identifier: Apache-2.0

#ifndef PWLBO_MIQP_SOLVER_HPP
#define PWLBO_MIQP_SOLVER_HPP

#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "pwlbo/lp.hpp"
#include "pwlbo/miqp_model.hpp"

namespace pwlbo {

struct NodeLogEntry {
  long id = 0;
  int depth = 0;
  double node_bound = 0.0;
  double best_bound = 0.0;
  double incumbent = 0.0;  // +inf while none is known
  double gap = 0.0;
};

struct SolverConfig {
  double mip_gap = 0.5;
  double time_limit_s = 5400.0;
  int pool_size = 10;
  long node_limit = 1000000;
  std::uint64_t seed = 0;  // drives the bound perturbation used after LP failures
  int cut_rounds = 20;
  std::function<void(const NodeLogEntry&)> node_log;
  int log_every = 1;

  void validate() const;
};

enum class SolveStatus { Optimal, GapReached, TimeLimit, NodeLimit, Infeasible };
std::string to_string(SolveStatus status);

struct SolveResult {
  SolveStatus status = SolveStatus::Infeasible;
  std::optional<Assignment> incumbent;
  std::vector<Assignment> pool;  // ascending objective, distinct points
  double best_bound = 0.0;
  double gap = 0.0;
  long nodes_explored = 0;
  int rejected_warm_starts = 0;
};

/// Linear inequality lo <= terms.z <= hi on the relaxation variables.
struct Cut {
  std::vector<lp::Term> terms;
  double lower = 0.0;
  double upper = 0.0;
};

/// Search-tree node: a sub-box of x and, per training point, the contiguous
/// range [first, last] of segments its distance may fall in.
struct Node {
  Vector lower;
  Vector upper;
  std::vector<std::pair<int, int>> segments;
  double lower_bound = -std::numeric_limits<double>::infinity();
  int depth = 0;
  long id = 0;
  std::shared_ptr<const std::vector<Cut>> cuts;
};

Node root_node(const MiqpModel& model);

/// Relaxation variables are ordered x (D), r (N), kx (N), mu, then sigma
/// when the model has one.
struct RelaxationLayout {
  int dim = 0;
  int points = 0;
  bool has_sigma = false;
  [[nodiscard]] int x(int d) const { return d; }
  [[nodiscard]] int r(int i) const { return dim + i; }
  [[nodiscard]] int kx(int i) const { return dim + points + i; }
  [[nodiscard]] int mu() const { return dim + 2 * points; }
  [[nodiscard]] int sigma() const { return dim + 2 * points + 1; }
  [[nodiscard]] int size() const { return dim + 2 * points + (has_sigma ? 2 : 1); }
};

struct Relaxation {
  bool feasible = false;
  bool numerical_failure = false;
  double bound = 0.0;
  Node node;     // after bound propagation
  Vector point;  // relaxation variables, RelaxationLayout order
  std::vector<Cut> binding;

  [[nodiscard]] Vector x(const MiqpModel& model) const { return point.head(model.dim()); }
};

/// Propagates the node's bounds, then solves the LP relaxation with rounds
/// of outer-approximation and envelope cuts.
Relaxation node_relaxation(const MiqpModel& model, const Node& node, int cut_rounds = 20);

/// Segment split on the point farthest off its kernel graph, otherwise a
/// spatial split of the coordinate with the largest envelope gap. Throws
/// std::logic_error when the relaxed point needs no branching.
std::pair<Node, Node> branch(const MiqpModel& model, const Relaxation& relaxation);

/// Best-bound branch and bound. Warm starts violating the model by more
/// than 1e-6 are dropped and counted in rejected_warm_starts.
SolveResult solve(const MiqpModel& model, const SolverConfig& config, const std::vector<Assignment>& warm_starts = {});

}  // namespace pwlbo

#endif  // PWLBO_MIQP_SOLVER_HPP
