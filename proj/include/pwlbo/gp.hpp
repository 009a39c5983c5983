// Copyright 2026 The pwlbo Authors.
// SPDX-License-Identifier: Apache-2.0

#ifndef PWLBO_GP_HPP
#define PWLBO_GP_HPP

#include <cstdint>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "pwlbo/common.hpp"

namespace pwlbo {

/// Observed samples: one row of X per point, y the matching outputs.
struct Dataset {
  Matrix X;  // N x D
  Vector y;  // N

  Dataset() = default;
  Dataset(Matrix inputs, Vector outputs);

  [[nodiscard]] int size() const { return static_cast<int>(X.rows()); }
  [[nodiscard]] int dim() const { return static_cast<int>(X.cols()); }
  /// Throws std::invalid_argument on empty data, shape mismatch or
  /// duplicate rows (closer than 1e-12).
  void validate() const;
  void append(const Vector& x, double value);
  /// Columns `dims` of X with y unchanged.
  [[nodiscard]] Dataset slice(const std::vector<int>& dims) const;
};

/// Affine map between problem units and the unit box / unit output range.
struct ScalingTransform {
  Vector input_lb;
  Vector input_ub;
  double output_min = 0.0;
  double output_max = 1.0;

  [[nodiscard]] Vector scale_input(const Vector& x) const;
  [[nodiscard]] Vector unscale_input(const Vector& z) const;
  [[nodiscard]] double scale_output(double y) const;
  [[nodiscard]] double unscale_output(double s) const;
};

/// Maps inputs onto [0,1]^D using `bounds` and outputs onto [0,1] by min-max
/// (a constant output vector maps to 0.5).
std::pair<Dataset, ScalingTransform> standardize(const Dataset& data, const Box& bounds);

struct KernelParams {
  double variance = 1.0;     // sigma_f^2
  double lengthscale = 1.0;  // in scaled-input units
  double noise = 1e-6;       // sigma_eps^2, fixed
};

struct FitBounds {
  double variance_lo = 0.05;
  double variance_hi = 20.0;
  double lengthscale_lo = 0.005;
  double lengthscale_hi = 20.0;
};

/// Matern-3/2 kernel of a scaled distance: variance (1 + sqrt3 r) exp(-sqrt3 r).
double matern32(double r, double variance);
/// d/dr of matern32.
double matern32_derivative(double r, double variance);
/// d^2/dr^2 of matern32: 3 variance (sqrt3 r - 1) exp(-sqrt3 r).
double kernel_second_derivative(double r, double variance);

/// Exact Matern-3/2 Gram matrix of the rows of X (no noise).
Matrix matern_gram(const Matrix& X, const KernelParams& params);
/// Kernel vector between x and every row of X.
Vector matern_cross(const Matrix& X, const Vector& x, const KernelParams& params);

struct Posterior {
  double mean = 0.0;
  double variance = 0.0;
};

/// Cholesky factor of a Gram matrix plus the noise and jitter that were
/// added to its diagonal to make it factorize.
struct GramFactor {
  Eigen::LLT<Matrix> llt;
  double noise = 0.0;
  double jitter = 0.0;
};

/// Factorizes gram + (noise + jitter) I, escalating jitter along
/// jitter_ladder(); throws NumericalError naming the jitters tried.
GramFactor factorize_gram(const Matrix& gram, double noise);

/// Exact GP regression model. Immutable after construction.
class GpModel {
 public:
  GpModel(Dataset data, KernelParams params);

  [[nodiscard]] Posterior posterior(const Vector& x) const;
  [[nodiscard]] double lcb(const Vector& x, double beta) const;

  [[nodiscard]] const KernelParams& params() const { return params_; }
  [[nodiscard]] const Dataset& data() const { return data_; }
  [[nodiscard]] const GramFactor& factor() const { return factor_; }
  [[nodiscard]] const Vector& alpha() const { return alpha_; }
  [[nodiscard]] int dim() const { return data_.dim(); }

 private:
  Dataset data_;
  KernelParams params_;
  GramFactor factor_;
  Vector alpha_;
};

/// Log marginal likelihood of `data` under the given parameters.
double log_marginal_likelihood(const Dataset& data, const KernelParams& params);

/// LML together with its gradient w.r.t. (log variance, log lengthscale).
struct LmlWithGradient {
  double value = 0.0;
  double d_log_variance = 0.0;
  double d_log_lengthscale = 0.0;
};
LmlWithGradient log_marginal_likelihood_with_gradient(const Dataset& data, const KernelParams& params);

struct FitOptions {
  int restarts = 10;
  std::uint64_t seed = 0;
  FitBounds bounds;
  double noise = 1e-6;
  int max_iterations = 100;
};

/// Multi-start bounded quasi-Newton maximization of the LML in log-parameter
/// space. Starts are log-uniform draws inside the bounds.
KernelParams fit_hyperparameters(const Dataset& data, const FitOptions& options);

/// One component of an additive kernel: a Matern-3/2 kernel acting on `dims`.
struct KernelGroup {
  std::vector<int> dims;
  KernelParams params;
};

/// GP with a sum-of-groups kernel. For a single group spanning every
/// dimension this performs exactly the same arithmetic as GpModel.
class AdditiveGpModel {
 public:
  AdditiveGpModel(Dataset data, std::vector<KernelGroup> groups, double noise);

  [[nodiscard]] Posterior posterior(const Vector& x) const;
  /// Posterior of group g's component function at the group-local point xg.
  [[nodiscard]] Posterior component_posterior(int g, const Vector& xg) const;
  [[nodiscard]] double component_lcb(int g, const Vector& xg, double beta) const;

  [[nodiscard]] int num_groups() const { return static_cast<int>(groups_.size()); }
  [[nodiscard]] const KernelGroup& group(int g) const { return groups_[g]; }
  [[nodiscard]] const Dataset& data() const { return data_; }
  [[nodiscard]] const GramFactor& factor() const { return factor_; }

 private:
  Dataset data_;
  std::vector<KernelGroup> groups_;
  std::vector<Matrix> group_inputs_;
  GramFactor factor_;
  Vector alpha_;
};

/// Shared posterior algebra: mean = k.alpha, variance = prior - |L^-1 k|^2,
/// clamped at zero.
Posterior posterior_from_factor(const GramFactor& factor, const Vector& alpha, const Vector& k,
                                double prior_variance);

// Delimited dataset files: header line, then D input columns and one output
// column per row.
void write_dataset_csv(std::ostream& out, const Dataset& data);
Dataset read_dataset_csv(std::istream& in);

}  // namespace pwlbo

#endif  // PWLBO_GP_HPP
