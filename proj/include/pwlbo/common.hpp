// Copyright 2026 The pwlbo Authors.
// SPDX-License-Identifier: Apache-2.0

#ifndef PWLBO_COMMON_HPP
#define PWLBO_COMMON_HPP

#include <Eigen/Dense>

#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

namespace pwlbo {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Raised when a factorization or numerical routine cannot produce a usable
/// result (e.g. a Gram matrix stays indefinite after the jitter ladder).
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised for malformed configuration, files or command-line input.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Axis-aligned box [lb, ub].
struct Box {
  Vector lb;
  Vector ub;

  Box() = default;
  Box(Vector lower, Vector upper);
  static Box unit(int dim);

  [[nodiscard]] int dim() const { return static_cast<int>(lb.size()); }
  [[nodiscard]] Vector width() const { return ub - lb; }
  [[nodiscard]] Vector center() const { return 0.5 * (lb + ub); }
  [[nodiscard]] double diagonal() const { return (ub - lb).norm(); }
  [[nodiscard]] bool contains(const Vector& x, double tol = 0.0) const;
  [[nodiscard]] Vector project(const Vector& x) const;
  /// Sub-box over the listed coordinates.
  [[nodiscard]] Box slice(const std::vector<int>& dims) const;
};

/// Jitter values tried, in order, when a Gram matrix fails to factorize.
const std::vector<double>& jitter_ladder();

// Delimited text. Numbers are written with full round-trip precision and a
// '.' decimal separator regardless of locale.
std::string format_double(double v);
std::vector<std::string> split_fields(const std::string& line, char delim = ',');
double parse_double(const std::string& field);

}  // namespace pwlbo

#endif  // PWLBO_COMMON_HPP
