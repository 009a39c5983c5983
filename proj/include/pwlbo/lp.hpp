// Copyright 2026 The pwlbo Authors.
// SPDX-License-Identifier: Apache-2.0

#ifndef PWLBO_LP_HPP
#define PWLBO_LP_HPP

#include <span>
#include <vector>

#include "pwlbo/common.hpp"

namespace pwlbo::lp {

struct Term {
  int var = 0;
  double coef = 0.0;
};

/// min c.z  s.t.  row_lo <= A z <= row_hi,  lo <= z <= hi.
/// Every variable must have finite bounds; rows may be one-sided (+-inf).
class LinearProgram {
 public:
  int add_variable(double lower, double upper, double cost = 0.0);
  int add_row(std::vector<Term> terms, double lower, double upper);

  [[nodiscard]] int num_variables() const { return static_cast<int>(lower_.size()); }
  [[nodiscard]] int num_rows() const { return static_cast<int>(rows_.size()); }
  [[nodiscard]] double lower(int j) const { return lower_[static_cast<std::size_t>(j)]; }
  [[nodiscard]] double upper(int j) const { return upper_[static_cast<std::size_t>(j)]; }
  [[nodiscard]] double cost(int j) const { return cost_[static_cast<std::size_t>(j)]; }
  void set_cost(int j, double c) { cost_[static_cast<std::size_t>(j)] = c; }
  void set_bounds(int j, double lower, double upper);
  [[nodiscard]] const std::vector<Term>& row(int i) const { return rows_[static_cast<std::size_t>(i)]; }
  [[nodiscard]] double row_lower(int i) const { return row_lo_[static_cast<std::size_t>(i)]; }
  [[nodiscard]] double row_upper(int i) const { return row_hi_[static_cast<std::size_t>(i)]; }

 private:
  std::vector<double> lower_, upper_, cost_;
  std::vector<std::vector<Term>> rows_;
  std::vector<double> row_lo_, row_hi_;
};

enum class LpStatus { Optimal, Infeasible, IterationLimit, NumericalFailure };

struct LpOptions {
  double feasibility_tol = 1e-9;
  double optimality_tol = 1e-9;
  double pivot_tol = 1e-10;
  int max_iterations = 0;  // 0: automatic (proportional to problem size)
  int refactor_interval = 100;
  int degenerate_limit = 50;  // stalled iterations before switching to Bland's rule
};

/// Dual simplex on a dense tableau. Starting from the all-slack basis with
/// each variable at the bound its cost prefers is always dual feasible when
/// every variable is boxed, so no phase 1 is needed. Rows can be appended
/// after a solve and the next solve continues from the current basis.
class DualSimplex {
 public:
  explicit DualSimplex(const LinearProgram& lp, LpOptions options = {});

  LpStatus solve();
  /// Appends lower <= terms.z <= upper and returns its row index.
  int add_row(std::span<const Term> terms, double lower, double upper);

  [[nodiscard]] Vector primal() const;
  [[nodiscard]] double value(int j) const { return x_[static_cast<std::size_t>(j)]; }
  [[nodiscard]] double objective() const;
  [[nodiscard]] int num_rows() const { return m_; }
  [[nodiscard]] int num_variables() const { return n_; }
  [[nodiscard]] int iterations() const { return iterations_; }
  /// Drops rows whose slack is basic. The remaining rows keep their order
  /// and the basis stays valid. Throws std::invalid_argument for a row whose
  /// slack is nonbasic.
  void remove_rows(const std::vector<int>& rows);
  /// True when the row's slack is basic, so remove_rows accepts it.
  [[nodiscard]] bool row_removable(int i) const { return pos_[static_cast<std::size_t>(n_ + i)] >= 0; }
  /// True when the row's activity sits at one of its bounds.
  [[nodiscard]] bool row_active(int i, double tol = 1e-7) const;

 private:
  [[nodiscard]] int ncol() const { return n_ + m_; }
  void pivot(int r, int j);
  bool refactor();
  void recompute_values();
  [[nodiscard]] double row_residual() const;
  int choose_leaving(bool bland) const;
  int choose_entering(int r, bool increase, bool bland) const;
  bool repair_dual_infeasibility();
  [[nodiscard]] double row_activity_bound(std::span<const Term> terms, bool upper) const;

  LpOptions opt_;
  int n_ = 0;
  int m_ = 0;
  Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> T_;
  Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> A_;
  std::vector<double> lo_, hi_, cost_, x_, d_;
  std::vector<int> basis_;  // basis_[row] = column
  std::vector<int> pos_;    // pos_[column] = row, or -1 when nonbasic
  int iterations_ = 0;
  int since_refactor_ = 0;
};

struct LpResult {
  LpStatus status = LpStatus::NumericalFailure;
  Vector x;
  double objective = 0.0;
  int iterations = 0;
};

LpResult lp_solve(const LinearProgram& lp, LpOptions options = {});

}  // namespace pwlbo::lp

#endif  // PWLBO_LP_HPP
