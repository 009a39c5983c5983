// Copyright 2026 The pwlbo Authors.
// SPDX-License-Identifier: Apache-2.0

#ifndef PWLBO_BENCHMARKS_HPP
#define PWLBO_BENCHMARKS_HPP

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "pwlbo/common.hpp"
#include "pwlbo/miqp_model.hpp"

namespace pwlbo {

// Test functions. Each throws std::domain_error outside its box.
double eval_bumpy(const Vector& x);        // [-10, 10]
double eval_multimodal(const Vector& x);   // [-2.7, 7.5]
double eval_ackley(const Vector& x);       // [-32, 16]^2
double eval_branin(const Vector& x);       // [-5, 10] x [0, 15]
double eval_rosenbrock(const Vector& x);   // [-2, 2] x [-1, 3]
double eval_hartmann(const Vector& x);     // [0, 1]^3
double eval_michalewicz(const Vector& x);  // [0, pi]^5
double eval_ks224(const Vector& x);        // [0, 6]^2, four linear constraints

struct BenchmarkFn {
  std::string name;
  int dim = 0;
  Box bounds;
  std::function<double(const Vector&)> eval;
  std::vector<KnownConstraint> constraints;  // original units
  std::optional<double> reference_min;
  std::optional<Vector> argmin;
  Vector feasible_witness;
};

const std::vector<BenchmarkFn>& benchmark_registry();
/// Throws ConfigError for unknown names.
const BenchmarkFn& find_benchmark(const std::string& name);

struct ConstraintReport {
  bool feasible = true;
  double max_violation = 0.0;
};

/// Box and known constraints; feasible when every violation is <= tol.
ConstraintReport check_constraints(const BenchmarkFn& fn, const Vector& x, double tol = 0.0);
ConstraintReport check_constraints(const std::vector<KnownConstraint>& constraints, const Box& bounds,
                                   const Vector& x, double tol = 0.0);

/// value + weight * sum of constraint violations.
double penalized(const std::vector<KnownConstraint>& constraints, const Vector& x, double value, double weight);

struct NelderMeadConfig {
  double tol = 1e-6;
  int max_iterations = 1000;
  double initial_step = 0.05;  // fraction of each box width
  std::optional<Vector> start;  // default: the origin projected into the box
};

struct NelderMeadResult {
  Vector x;
  double value = 0.0;
  int iterations = 0;
  int evaluations = 0;
};

/// Reflect / expand / contract / shrink simplex search. Trial points are
/// projected onto the box.
NelderMeadResult nelder_mead(const std::function<double(const Vector&)>& objective, const Box& bounds,
                             const NelderMeadConfig& config = {});

}  // namespace pwlbo

#endif  // PWLBO_BENCHMARKS_HPP
