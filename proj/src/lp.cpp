// Copyright 2026 The pwlbo Authors.
// SPDX-License-Identifier: Apache-2.0

#include "pwlbo/lp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

namespace pwlbo::lp {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

enum State : char { kBasic = 0, kLower = 1, kUpper = 2 };

}  // namespace

int LinearProgram::add_variable(double lower, double upper, double cost) {
  if (!std::isfinite(lower) || !std::isfinite(upper) || lower > upper) {
    throw std::invalid_argument("LP variables need finite bounds with lower <= upper");
  }
  lower_.push_back(lower);
  upper_.push_back(upper);
  cost_.push_back(cost);
  return num_variables() - 1;
}

void LinearProgram::set_bounds(int j, double lower, double upper) {
  if (!std::isfinite(lower) || !std::isfinite(upper) || lower > upper) {
    throw std::invalid_argument("LP variables need finite bounds with lower <= upper");
  }
  lower_[static_cast<std::size_t>(j)] = lower;
  upper_[static_cast<std::size_t>(j)] = upper;
}

int LinearProgram::add_row(std::vector<Term> terms, double lower, double upper) {
  for (const Term& t : terms) {
    if (t.var < 0 || t.var >= num_variables()) throw std::invalid_argument("LP row references an unknown variable");
    if (!std::isfinite(t.coef)) throw std::invalid_argument("LP row has a non-finite coefficient");
  }
  rows_.push_back(std::move(terms));
  row_lo_.push_back(lower);
  row_hi_.push_back(upper);
  return num_rows() - 1;
}

// ---------------------------------------------------------------------------

DualSimplex::DualSimplex(const LinearProgram& lp, LpOptions options) : opt_(options) {
  n_ = lp.num_variables();
  m_ = 0;
  lo_.assign(static_cast<std::size_t>(n_), 0.0);
  hi_.assign(static_cast<std::size_t>(n_), 0.0);
  cost_.assign(static_cast<std::size_t>(n_), 0.0);
  x_.assign(static_cast<std::size_t>(n_), 0.0);
  pos_.assign(static_cast<std::size_t>(n_), -1);
  for (int j = 0; j < n_; ++j) {
    const auto u = static_cast<std::size_t>(j);
    lo_[u] = lp.lower(j);
    hi_[u] = lp.upper(j);
    cost_[u] = lp.cost(j);
    x_[u] = (cost_[u] < 0.0) ? hi_[u] : lo_[u];
  }
  d_ = cost_;
  T_.resize(0, n_);
  A_.resize(0, n_);
  for (int i = 0; i < lp.num_rows(); ++i) add_row(lp.row(i), lp.row_lower(i), lp.row_upper(i));
}

double DualSimplex::row_activity_bound(std::span<const Term> terms, bool upper) const {
  double s = 0.0;
  for (const Term& t : terms) {
    const auto u = static_cast<std::size_t>(t.var);
    const bool take_hi = (t.coef > 0.0) == upper;
    s += t.coef * (take_hi ? hi_[u] : lo_[u]);
  }
  return s;
}

int DualSimplex::add_row(std::span<const Term> terms, double lower, double upper) {
  const int old_ncol = ncol();
  // Append the new slack column to the existing tableau.
  T_.conservativeResize(m_ + 1, old_ncol + 1);
  T_.col(old_ncol).setZero();
  A_.conservativeResize(m_ + 1, n_);
  A_.row(m_).setZero();

  Eigen::Matrix<double, 1, Eigen::Dynamic> row = Eigen::Matrix<double, 1, Eigen::Dynamic>::Zero(old_ncol + 1);
  double activity = 0.0;
  for (const Term& t : terms) {
    if (t.var < 0 || t.var >= n_) throw std::invalid_argument("LP row references an unknown variable");
    row[t.var] += t.coef;
    A_(m_, t.var) += t.coef;
    activity += t.coef * x_[static_cast<std::size_t>(t.var)];
  }
  row[old_ncol] = -1.0;
  // Eliminate the current basic columns so the new slack can be basic.
  for (int i = 0; i < m_; ++i) {
    const double c = row[basis_[static_cast<std::size_t>(i)]];
    if (c != 0.0) row.head(old_ncol) -= c * T_.row(i).head(old_ncol);
  }
  for (int i = 0; i < m_; ++i) row[basis_[static_cast<std::size_t>(i)]] = 0.0;
  T_.row(m_) = -row;

  const double amin = row_activity_bound(terms, false);
  const double amax = row_activity_bound(terms, true);
  lo_.push_back(std::isfinite(lower) ? lower : amin);
  hi_.push_back(std::isfinite(upper) ? upper : amax);
  cost_.push_back(0.0);
  x_.push_back(activity);
  d_.push_back(0.0);
  basis_.push_back(old_ncol);
  pos_.push_back(m_);
  ++m_;
  return m_ - 1;
}

void DualSimplex::remove_rows(const std::vector<int>& rows) {
  if (rows.empty()) return;
  std::vector<char> drop_row(static_cast<std::size_t>(m_), 0);
  std::vector<char> drop_col(static_cast<std::size_t>(ncol()), 0);
  std::vector<char> drop_tab(static_cast<std::size_t>(m_), 0);
  for (int i : rows) {
    if (i < 0 || i >= m_) throw std::invalid_argument("remove_rows: row index out of range");
    const int p = pos_[static_cast<std::size_t>(n_ + i)];
    if (p < 0) throw std::invalid_argument("remove_rows: row is active");
    drop_row[static_cast<std::size_t>(i)] = 1;
    drop_col[static_cast<std::size_t>(n_ + i)] = 1;
    drop_tab[static_cast<std::size_t>(p)] = 1;
  }
  std::vector<int> col_map(static_cast<std::size_t>(ncol()), -1);
  int nc = 0;
  for (int k = 0; k < ncol(); ++k) {
    if (!drop_col[static_cast<std::size_t>(k)]) col_map[static_cast<std::size_t>(k)] = nc++;
  }
  const int nm = nc - n_;
  decltype(T_) T(nm, nc);
  decltype(A_) A(nm, n_);
  std::vector<int> basis;
  basis.reserve(static_cast<std::size_t>(nm));
  int t = 0;
  for (int r = 0; r < m_; ++r) {
    if (drop_tab[static_cast<std::size_t>(r)]) continue;
    for (int k = 0; k < ncol(); ++k) {
      const int c = col_map[static_cast<std::size_t>(k)];
      if (c >= 0) T(t, c) = T_(r, k);
    }
    basis.push_back(col_map[static_cast<std::size_t>(basis_[static_cast<std::size_t>(r)])]);
    ++t;
  }
  int a = 0;
  for (int i = 0; i < m_; ++i) {
    if (!drop_row[static_cast<std::size_t>(i)]) A.row(a++) = A_.row(i);
  }
  auto compact = [&](std::vector<double>& v) {
    std::vector<double> out;
    out.reserve(static_cast<std::size_t>(nc));
    for (int k = 0; k < ncol(); ++k) {
      if (!drop_col[static_cast<std::size_t>(k)]) out.push_back(v[static_cast<std::size_t>(k)]);
    }
    v.swap(out);
  };
  compact(lo_);
  compact(hi_);
  compact(cost_);
  compact(x_);
  compact(d_);
  T_.swap(T);
  A_.swap(A);
  basis_.swap(basis);
  m_ = nm;
  pos_.assign(static_cast<std::size_t>(nc), -1);
  for (int r = 0; r < m_; ++r) pos_[static_cast<std::size_t>(basis_[static_cast<std::size_t>(r)])] = r;
}

void DualSimplex::pivot(int r, int j) {
  const double p = T_(r, j);
  T_.row(r) /= p;
  T_(r, j) = 1.0;
  for (int i = 0; i < m_; ++i) {
    if (i == r) continue;
    const double f = T_(i, j);
    if (f != 0.0) {
      T_.row(i) -= f * T_.row(r);
      T_(i, j) = 0.0;
    }
  }
  const double dj = d_[static_cast<std::size_t>(j)];
  if (dj != 0.0) {
    for (int k = 0; k < ncol(); ++k) d_[static_cast<std::size_t>(k)] -= dj * T_(r, k);
  }
  d_[static_cast<std::size_t>(j)] = 0.0;
  const int leaving = basis_[static_cast<std::size_t>(r)];
  pos_[static_cast<std::size_t>(leaving)] = -1;
  pos_[static_cast<std::size_t>(j)] = r;
  basis_[static_cast<std::size_t>(r)] = j;
}

bool DualSimplex::refactor() {
  since_refactor_ = 0;
  if (m_ == 0) {
    d_ = cost_;
    return true;
  }
  Matrix full = Matrix::Zero(m_, ncol());
  full.leftCols(n_) = A_;
  for (int i = 0; i < m_; ++i) full(i, n_ + i) = -1.0;
  Matrix B(m_, m_);
  for (int i = 0; i < m_; ++i) B.col(i) = full.col(basis_[static_cast<std::size_t>(i)]);
  Eigen::PartialPivLU<Matrix> lu(B);
  if (!(lu.rcond() > 1e-14)) return false;
  T_ = lu.solve(full);
  for (int i = 0; i < m_; ++i) {
    T_.col(basis_[static_cast<std::size_t>(i)]).setZero();
    T_(i, basis_[static_cast<std::size_t>(i)]) = 1.0;
  }
  // Reduced costs d = c - c_B^T T.
  Eigen::RowVectorXd cb(m_);
  for (int i = 0; i < m_; ++i) cb[i] = cost_[static_cast<std::size_t>(basis_[static_cast<std::size_t>(i)])];
  const Eigen::RowVectorXd y = cb * T_;
  for (int k = 0; k < ncol(); ++k) d_[static_cast<std::size_t>(k)] = (pos_[static_cast<std::size_t>(k)] >= 0) ? 0.0 : cost_[static_cast<std::size_t>(k)] - y[k];
  recompute_values();
  return true;
}

double DualSimplex::row_residual() const {
  double worst = 0.0;
  for (int i = 0; i < m_; ++i) {
    double act = 0.0, scale = 1.0;
    for (int j = 0; j < n_; ++j) {
      const double t = A_(i, j) * x_[static_cast<std::size_t>(j)];
      act += t;
      scale = std::max(scale, std::abs(t));
    }
    worst = std::max(worst, std::abs(act - x_[static_cast<std::size_t>(n_ + i)]) / scale);
  }
  return worst;
}

void DualSimplex::recompute_values() {
  Vector xn = Vector::Zero(ncol());
  for (int k = 0; k < ncol(); ++k) {
    if (pos_[static_cast<std::size_t>(k)] < 0) xn[k] = x_[static_cast<std::size_t>(k)];
  }
  const Vector xb = -(T_ * xn);
  for (int i = 0; i < m_; ++i) x_[static_cast<std::size_t>(basis_[static_cast<std::size_t>(i)])] = xb[i];
}

int DualSimplex::choose_leaving(bool bland) const {
  int best = -1;
  double best_inf = 0.0;
  int best_col = std::numeric_limits<int>::max();
  for (int i = 0; i < m_; ++i) {
    const auto b = static_cast<std::size_t>(basis_[static_cast<std::size_t>(i)]);
    const double tol_lo = opt_.feasibility_tol * (1.0 + std::abs(lo_[b]));
    const double tol_hi = opt_.feasibility_tol * (1.0 + std::abs(hi_[b]));
    double inf = 0.0;
    if (x_[b] < lo_[b] - tol_lo) inf = lo_[b] - x_[b];
    else if (x_[b] > hi_[b] + tol_hi) inf = x_[b] - hi_[b];
    if (inf <= 0.0) continue;
    if (bland) {
      if (static_cast<int>(b) < best_col) {
        best_col = static_cast<int>(b);
        best = i;
      }
    } else if (inf > best_inf) {
      best_inf = inf;
      best = i;
    }
  }
  return best;
}

int DualSimplex::choose_entering(int r, bool increase, bool bland) const {
  struct Candidate {
    int k;
    double dk;
    double ak;
  };
  thread_local std::vector<Candidate> cands;
  cands.clear();
  const double* row = T_.row(r).data();
  double row_max = 0.0;
  for (int k = 0; k < ncol(); ++k) {
    const auto u = static_cast<std::size_t>(k);
    if (pos_[u] >= 0) continue;
    const double ak = row[k];
    row_max = std::max(row_max, std::abs(ak));
    if (lo_[u] >= hi_[u] || ak == 0.0) continue;
    const bool at_upper = x_[u] >= hi_[u] && x_[u] > lo_[u];
    // x_b changes by -ak * delta; delta > 0 from the lower bound, < 0 from the upper.
    const bool ok = increase ? (at_upper ? ak > 0.0 : ak < 0.0) : (at_upper ? ak < 0.0 : ak > 0.0);
    if (!ok) continue;
    cands.push_back({k, at_upper ? std::max(0.0, -d_[u]) : std::max(0.0, d_[u]), std::abs(ak)});
  }
  const double piv_tol = opt_.pivot_tol * std::max(1.0, row_max);

  if (bland) {
    double best_ratio = kInf;
    for (const Candidate& c : cands) {
      if (c.ak > piv_tol) best_ratio = std::min(best_ratio, c.dk / c.ak);
    }
    if (!std::isfinite(best_ratio)) return -1;
    for (const Candidate& c : cands) {
      if (c.ak > piv_tol && c.dk / c.ak <= best_ratio + 1e-15) return c.k;
    }
    return -1;
  }

  // Harris two-pass ratio test.
  double theta = kInf;
  for (const Candidate& c : cands) {
    if (c.ak > piv_tol) theta = std::min(theta, (c.dk + opt_.optimality_tol) / c.ak);
  }
  if (!std::isfinite(theta)) return -1;
  int best = -1;
  double best_a = 0.0;
  for (const Candidate& c : cands) {
    if (c.ak > piv_tol && c.dk / c.ak <= theta && c.ak > best_a) {
      best_a = c.ak;
      best = c.k;
    }
  }
  return best;
}

bool DualSimplex::repair_dual_infeasibility() {
  bool flipped = false;
  for (int k = 0; k < ncol(); ++k) {
    const auto u = static_cast<std::size_t>(k);
    if (pos_[u] >= 0 || lo_[u] >= hi_[u]) continue;
    const bool at_upper = x_[u] >= hi_[u];
    const double tol = 10.0 * opt_.optimality_tol * (1.0 + std::abs(cost_[u]));
    if (!at_upper && d_[u] < -tol) {
      x_[u] = hi_[u];
      flipped = true;
    } else if (at_upper && d_[u] > tol) {
      x_[u] = lo_[u];
      flipped = true;
    }
  }
  if (flipped) recompute_values();
  return flipped;
}

LpStatus DualSimplex::solve() {
  const int limit = opt_.max_iterations > 0 ? opt_.max_iterations : 50 * (m_ + n_) + 1000;
  bool bland = false;
  int stalled = 0;
  double last_obj = objective();
  int verifications = 0;
  int budget = limit;
  while (budget-- > 0) {
    const int r = choose_leaving(bland);
    if (r < 0) {
      // Candidate optimum: refactor for accuracy unless the basis is fresh
      // and the row residuals are clean, then re-check both feasibilities.
      if (since_refactor_ >= opt_.refactor_interval / 2 || row_residual() > 1e-9) {
        if (!refactor()) return LpStatus::NumericalFailure;
      }
      const bool dual_fix = repair_dual_infeasibility();
      if (!dual_fix && choose_leaving(false) < 0) return LpStatus::Optimal;
      if (++verifications > 20) return LpStatus::NumericalFailure;
      continue;
    }
    const auto b = static_cast<std::size_t>(basis_[static_cast<std::size_t>(r)]);
    const bool increase = x_[b] < lo_[b];
    const double target = increase ? lo_[b] : hi_[b];
    const int j = choose_entering(r, increase, bland);
    if (j < 0) {
      // No entering candidate: the row cannot be repaired. Confirm on a fresh
      // factorization before declaring infeasibility.
      if (since_refactor_ > 0) {
        if (!refactor()) return LpStatus::NumericalFailure;
        continue;
      }
      return LpStatus::Infeasible;
    }
    const double alpha = T_(r, j);
    const double delta = (x_[b] - target) / alpha;
    x_[static_cast<std::size_t>(j)] += delta;
    for (int i = 0; i < m_; ++i) {
      const double t = T_(i, j);
      if (t != 0.0) x_[static_cast<std::size_t>(basis_[static_cast<std::size_t>(i)])] -= t * delta;
    }
    x_[b] = target;
    pivot(r, j);
    ++iterations_;
    if (++since_refactor_ >= opt_.refactor_interval) {
      if (!refactor()) return LpStatus::NumericalFailure;
    }
    const double obj = objective();
    if (obj > last_obj + 1e-12 * (1.0 + std::abs(last_obj))) {
      stalled = 0;
      bland = false;
      last_obj = obj;
    } else if (++stalled > opt_.degenerate_limit) {
      bland = true;
    }
  }
  return LpStatus::IterationLimit;
}

Vector DualSimplex::primal() const {
  Vector z(n_);
  for (int j = 0; j < n_; ++j) z[j] = x_[static_cast<std::size_t>(j)];
  return z;
}

double DualSimplex::objective() const {
  double s = 0.0;
  for (int j = 0; j < n_; ++j) s += cost_[static_cast<std::size_t>(j)] * x_[static_cast<std::size_t>(j)];
  return s;
}

bool DualSimplex::row_active(int i, double tol) const {
  const auto s = static_cast<std::size_t>(n_ + i);
  if (pos_[s] < 0) return true;
  return std::abs(x_[s] - lo_[s]) <= tol * (1.0 + std::abs(lo_[s])) ||
         std::abs(x_[s] - hi_[s]) <= tol * (1.0 + std::abs(hi_[s]));
}

LpResult lp_solve(const LinearProgram& lp, LpOptions options) {
  DualSimplex solver(lp, options);
  LpResult res;
  res.status = solver.solve();
  res.iterations = solver.iterations();
  if (res.status == LpStatus::Optimal) {
    res.x = solver.primal();
    res.objective = solver.objective();
  }
  return res;
}

}  // namespace pwlbo::lp
