// Copyright 2026 The pwlbo Authors.
// SPDX-License-Identifier: Apache-2.0

#include "pwlbo/pwl_kernel.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

namespace pwlbo {
namespace {

constexpr double kSqrt3 = 1.7320508075688772935;

template <typename F>
double bisect(F f, double lo, double hi) {
  double flo = f(lo);
  for (int it = 0; it < 200 && hi - lo > 1e-14; ++it) {
    const double mid = 0.5 * (lo + hi);
    const double fm = f(mid);
    if ((fm < 0.0) == (flo < 0.0)) {
      lo = mid;
      flo = fm;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

}  // namespace

CurvatureBreakpoints curvature_breakpoints() {
  const double threshold = 1.5 * std::exp(-2.0);
  auto excess = [threshold](double r) { return std::abs(kernel_second_derivative(r, 1.0)) - threshold; };
  // k'' is negative on [0, 1/sqrt3), rises to its maximum 3e^-2 at 2/sqrt3
  // and then decays, so each bracket holds exactly one crossing.
  CurvatureBreakpoints b;
  b.r1 = bisect(excess, 0.0, 1.0 / kSqrt3);
  b.r2 = bisect(excess, 1.0 / kSqrt3, 2.0 / kSqrt3);
  b.r3 = bisect(excess, 2.0 / kSqrt3, 20.0);
  return b;
}

BreakpointSet build_breakpoints(int dim, const Box& bounds, double lengthscale, int scale) {
  if (dim < 1) throw std::invalid_argument("build_breakpoints: dimension must be >= 1");
  if (!(lengthscale > 0.0)) throw std::invalid_argument("build_breakpoints: lengthscale must be positive");
  if (scale < 1) throw std::invalid_argument("build_breakpoints: scale must be >= 1");
  const double r4 = bounds.diagonal() / lengthscale;
  if (!(r4 > 0.0) || !std::isfinite(r4)) throw std::invalid_argument("build_breakpoints: degenerate bounds");

  const CurvatureBreakpoints c = curvature_breakpoints();
  struct Part {
    double a, b;
    int count;
    Region mark;
  };
  const Part parts[] = {{0.0, c.r1, 2 * dim * scale, Region::Nonlinear},
                        {c.r1, c.r2, dim * scale, Region::Linear},
                        {c.r2, c.r3, 2 * dim * scale, Region::Nonlinear},
                        {c.r3, std::max(r4, c.r3), 2 * dim * scale, Region::Tail}};

  BreakpointSet set;
  std::vector<double> knots;
  for (const Part& p : parts) {
    if (p.a >= r4 || p.b <= p.a) continue;
    double b = p.b;
    int n = p.count;
    if (b > r4) {
      n = std::max(1, static_cast<int>(std::ceil(n * (r4 - p.a) / (p.b - p.a))));
      b = r4;
    }
    for (int k = 0; k < n; ++k) {
      knots.push_back(p.a + (b - p.a) * k / n);
      set.region_marks.push_back(p.mark);
    }
  }
  knots.push_back(r4);
  set.knots = Eigen::Map<Vector>(knots.data(), static_cast<Eigen::Index>(knots.size()));
  return set;
}

// ---------------------------------------------------------------------------

PwlKernel::PwlKernel(BreakpointSet breakpoints, KernelParams params)
    : breakpoints_(std::move(breakpoints)), params_(params) {
  const Vector& R = breakpoints_.knots;
  if (R.size() < 2 || R[0] != 0.0) throw std::invalid_argument("PwlKernel: knots must start at 0 with M >= 1");
  for (Eigen::Index j = 1; j < R.size(); ++j) {
    if (!(R[j] > R[j - 1])) throw std::invalid_argument("PwlKernel: knots must be strictly increasing");
  }
  knot_values_.resize(R.size());
  for (Eigen::Index j = 0; j < R.size(); ++j) knot_values_[j] = matern32(R[j], params_.variance);
}

int PwlKernel::segment_of(double r) const {
  const Vector& R = breakpoints_.knots;
  const int m = segments();
  if (r <= 0.0) return 0;
  if (r >= R[m]) return m - 1;
  const double* begin = R.data();
  const double* it = std::upper_bound(begin, begin + m + 1, r);
  return std::clamp(static_cast<int>(it - begin) - 1, 0, m - 1);
}

PwlKernel::Value PwlKernel::evaluate(double r) const {
  if (r < 0.0 || std::isnan(r)) throw std::domain_error("PwlKernel: negative distance");
  const Vector& R = breakpoints_.knots;
  const int m = segments();
  if (r >= R[m]) return {knot_values_[m], r > R[m]};
  const int s = segment_of(r);
  const double t = (r - R[s]) / (R[s + 1] - R[s]);
  return {knot_values_[s] + t * (knot_values_[s + 1] - knot_values_[s]), false};
}

ApproxErrorReport max_error(const PwlKernel& pwl, int samples_per_segment) {
  if (samples_per_segment < 10) throw std::invalid_argument("max_error: need at least 10 samples per segment");
  const Vector& R = pwl.knots();
  ApproxErrorReport rep;
  for (int s = 0; s < pwl.segments(); ++s) {
    double worst = 0.0;
    for (int k = 0; k <= samples_per_segment; ++k) {
      const double r = R[s] + (R[s + 1] - R[s]) * k / samples_per_segment;
      worst = std::max(worst, std::abs(matern32(r, pwl.params().variance) - pwl(r)));
    }
    rep.per_segment.push_back(worst);
    rep.eps_m = std::max(rep.eps_m, worst);
  }
  return rep;
}

Matrix approx_gram(const PwlKernel& pwl, const Matrix& X) {
  const Eigen::Index n = X.rows();
  const double l = pwl.params().lengthscale;
  Matrix K(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    K(i, i) = pwl(0.0);
    for (Eigen::Index j = i + 1; j < n; ++j) {
      K(i, j) = K(j, i) = pwl((X.row(i) - X.row(j)).norm() / l);
    }
  }
  return K;
}

Vector approx_cross(const PwlKernel& pwl, const Matrix& X, const Vector& x) {
  if (x.size() != X.cols()) throw std::invalid_argument("query point has wrong dimension");
  const double l = pwl.params().lengthscale;
  Vector k(X.rows());
  for (Eigen::Index i = 0; i < X.rows(); ++i) k[i] = pwl((X.row(i).transpose() - x).norm() / l);
  return k;
}

// ---------------------------------------------------------------------------

namespace {

std::vector<int> all_dims(int d) {
  std::vector<int> dims(static_cast<std::size_t>(d));
  for (int k = 0; k < d; ++k) dims[static_cast<std::size_t>(k)] = k;
  return dims;
}

}  // namespace

ApproxGp::ApproxGp(const PwlKernel& pwl, const Dataset& data)
    : ApproxGp(std::vector<PwlComponent>{PwlComponent{pwl, all_dims(data.dim())}}, data, pwl.params().noise) {}

ApproxGp::ApproxGp(std::vector<PwlComponent> components, const Dataset& data, double noise)
    : components_(std::move(components)), data_(data) {
  data_.validate();
  if (components_.empty()) throw std::invalid_argument("ApproxGp needs at least one component");
  Matrix gram = Matrix::Zero(data_.size(), data_.size());
  for (const PwlComponent& c : components_) {
    for (int d : c.dims) {
      if (d < 0 || d >= data_.dim()) throw std::invalid_argument("ApproxGp component references a missing dimension");
    }
    inputs_.push_back(data_.slice(c.dims).X);
    gram += approx_gram(c.kernel, inputs_.back());
  }
  factor_ = factorize_gram(gram, noise);
  weights_ = factor_.llt.solve(data_.y);
}

Posterior ApproxGp::posterior(const Vector& x) const {
  if (x.size() != data_.dim()) throw std::invalid_argument("query point has wrong dimension");
  Vector k = Vector::Zero(data_.size());
  double prior = 0.0;
  for (std::size_t g = 0; g < components_.size(); ++g) {
    Vector xg(components_[g].dims.size());
    for (std::size_t j = 0; j < components_[g].dims.size(); ++j) {
      xg[static_cast<Eigen::Index>(j)] = x[components_[g].dims[j]];
    }
    k += approx_cross(components_[g].kernel, inputs_[g], xg);
    prior += components_[g].kernel.params().variance;
  }
  return posterior_from_factor(factor_, weights_, k, prior);
}

Posterior ApproxGp::component_posterior(int g, const Vector& xg) const {
  const PwlComponent& c = components_.at(static_cast<std::size_t>(g));
  const Vector k = Vector::Zero(data_.size()) + approx_cross(c.kernel, inputs_[static_cast<std::size_t>(g)], xg);
  return posterior_from_factor(factor_, weights_, k, c.kernel.params().variance);
}

double ApproxGp::raw_component_variance(int g, const Vector& xg) const {
  const PwlComponent& c = components_.at(static_cast<std::size_t>(g));
  const Vector k = approx_cross(c.kernel, inputs_[static_cast<std::size_t>(g)], xg);
  const Vector v = factor_.llt.matrixL().solve(k);
  return c.kernel.params().variance - v.squaredNorm();
}

Matrix ApproxGp::inverse() const { return factor_.llt.solve(Matrix::Identity(data_.size(), data_.size())); }

Posterior approx_posterior(const PwlKernel& pwl, const Dataset& data, const Vector& x) {
  return ApproxGp(pwl, data).posterior(x);
}

void write_breakpoints_csv(std::ostream& out, const PwlKernel& pwl) {
  out << "r,k\n";
  for (Eigen::Index j = 0; j < pwl.knots().size(); ++j) {
    out << format_double(pwl.knots()[j]) << ',' << format_double(pwl.knot_values()[j]) << '\n';
  }
}

}  // namespace pwlbo
