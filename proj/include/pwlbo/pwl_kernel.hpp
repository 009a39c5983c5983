// Copyright 2026 The pwlbo Authors.
// SPDX-License-Identifier: Apache-2.0

#ifndef PWLBO_PWL_KERNEL_HPP
#define PWLBO_PWL_KERNEL_HPP

#include <iosfwd>
#include <vector>

#include "pwlbo/common.hpp"
#include "pwlbo/gp.hpp"

namespace pwlbo {

/// Roots of |k''(r)| = 1.5 e^-2 sigma_f^2 for the Matern-3/2 kernel. They are
/// scale-free: the threshold is proportional to sigma_f^2, which cancels.
struct CurvatureBreakpoints {
  double r1 = 0.0;  // end of the strongly curved head
  double r2 = 0.0;  // end of the near-linear part
  double r3 = 0.0;  // start of the tail
};

/// Bisection to 1e-12 on the analytic second derivative.
CurvatureBreakpoints curvature_breakpoints();

enum class Region { Nonlinear, Linear, Tail };

/// Knots R_0 = 0 < R_1 < ... < R_M in scaled distance.
struct BreakpointSet {
  Vector knots;
  std::vector<Region> region_marks;  // one per segment

  [[nodiscard]] int segments() const { return static_cast<int>(knots.size()) - 1; }
  [[nodiscard]] double max_distance() const { return knots[knots.size() - 1]; }
};

/// Knot placement: 2D segments on [0, r1), D on [r1, r2), 2D on [r2, r3) and
/// 2D on [r3, r4), then r4 = |ub - lb| / l. Every count is multiplied by
/// `scale`. When r4 falls before r3 the regions past r4 are dropped and the
/// region containing r4 keeps a proportional share (at least one) of its
/// segments.
BreakpointSet build_breakpoints(int dim, const Box& bounds, double lengthscale, int scale = 1);

/// Secant interpolation of the Matern-3/2 kernel through the knots.
class PwlKernel {
 public:
  PwlKernel(BreakpointSet breakpoints, KernelParams params);

  struct Value {
    double value = 0.0;
    bool clamped = false;  // r was beyond the last knot
  };

  /// Linear interpolation between bracketing knots; queries past R_M are
  /// clamped to k(R_M) and flagged. Throws std::domain_error for r < 0.
  [[nodiscard]] Value evaluate(double r) const;
  [[nodiscard]] double operator()(double r) const { return evaluate(r).value; }

  /// Segment s spans knots s and s+1. For r exactly on an interior knot the
  /// segment starting there is returned.
  [[nodiscard]] int segment_of(double r) const;

  [[nodiscard]] const BreakpointSet& breakpoints() const { return breakpoints_; }
  [[nodiscard]] const Vector& knots() const { return breakpoints_.knots; }
  [[nodiscard]] const Vector& knot_values() const { return knot_values_; }
  [[nodiscard]] const KernelParams& params() const { return params_; }
  [[nodiscard]] int segments() const { return breakpoints_.segments(); }
  [[nodiscard]] double max_distance() const { return breakpoints_.max_distance(); }

 private:
  BreakpointSet breakpoints_;
  Vector knot_values_;
  KernelParams params_;
};

struct ApproxErrorReport {
  double eps_m = 0.0;
  std::vector<double> per_segment;
};

/// Dense-grid estimate of max |k - k~| on [0, R_M]. samples_per_segment >= 10.
ApproxErrorReport max_error(const PwlKernel& pwl, int samples_per_segment = 1000);

/// Symmetric matrix of k~ over the rows of X (no noise, no jitter).
Matrix approx_gram(const PwlKernel& pwl, const Matrix& X);
/// Vector of k~ between x and the rows of X.
Vector approx_cross(const PwlKernel& pwl, const Matrix& X, const Vector& x);

/// One additive component of an approximated GP.
struct PwlComponent {
  PwlKernel kernel;
  std::vector<int> dims;
};

/// GP posterior with every kernel evaluation replaced by its piecewise-linear
/// approximation. The training Gram matrix gets the noise term and, when it
/// is indefinite, the smallest jitter from jitter_ladder() that makes it
/// factorize.
class ApproxGp {
 public:
  ApproxGp(const PwlKernel& pwl, const Dataset& data);
  ApproxGp(std::vector<PwlComponent> components, const Dataset& data, double noise);

  [[nodiscard]] Posterior posterior(const Vector& x) const;
  [[nodiscard]] Posterior component_posterior(int g, const Vector& xg) const;
  /// Posterior variance before clamping at zero.
  [[nodiscard]] double raw_component_variance(int g, const Vector& xg) const;

  [[nodiscard]] const Vector& weights() const { return weights_; }  // K~^-1 y
  [[nodiscard]] Matrix inverse() const;                              // K~^-1
  [[nodiscard]] const GramFactor& factor() const { return factor_; }
  [[nodiscard]] double jitter() const { return factor_.jitter; }
  [[nodiscard]] int num_components() const { return static_cast<int>(components_.size()); }
  [[nodiscard]] const PwlComponent& component(int g) const { return components_[static_cast<std::size_t>(g)]; }
  [[nodiscard]] const Matrix& component_inputs(int g) const { return inputs_[static_cast<std::size_t>(g)]; }
  [[nodiscard]] const Dataset& data() const { return data_; }

 private:
  std::vector<PwlComponent> components_;
  std::vector<Matrix> inputs_;
  Dataset data_;
  GramFactor factor_;
  Vector weights_;
};

/// Approximated posterior (mean, variance) at x; builds the factorization on
/// every call, so prefer ApproxGp for repeated queries.
Posterior approx_posterior(const PwlKernel& pwl, const Dataset& data, const Vector& x);

/// Two-column table (R_j, k(R_j)) with a header.
void write_breakpoints_csv(std::ostream& out, const PwlKernel& pwl);

}  // namespace pwlbo

#endif  // PWLBO_PWL_KERNEL_HPP
