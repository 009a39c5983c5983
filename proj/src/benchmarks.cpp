// Copyright 2026 The pwlbo Authors.
// SPDX-License-Identifier: Apache-2.0

#include "pwlbo/benchmarks.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace pwlbo {
namespace {

using std::numbers::pi;

void require_in(const Vector& x, const Box& box, const char* name) {
  if (x.size() != box.dim()) throw std::domain_error(std::string(name) + ": wrong dimension");
  const Vector slack = 1e-9 * box.width();
  for (int d = 0; d < x.size(); ++d) {
    if (!(x[d] >= box.lb[d] - slack[d] && x[d] <= box.ub[d] + slack[d])) {
      throw std::domain_error(std::string(name) + ": point outside the domain");
    }
  }
}

Box uniform_box(int dim, double lo, double hi) {
  return Box(Vector::Constant(dim, lo), Vector::Constant(dim, hi));
}

Box box2(double a, double b, double c, double d) {
  Vector lo(2), hi(2);
  lo << a, c;
  hi << b, d;
  return Box(lo, hi);
}

const Box& bumpy_box() {
  static const Box b = uniform_box(1, -10.0, 10.0);
  return b;
}
const Box& multimodal_box() {
  static const Box b = uniform_box(1, -2.7, 7.5);
  return b;
}
const Box& ackley_box() {
  static const Box b = uniform_box(2, -32.0, 16.0);
  return b;
}
const Box& branin_box() {
  static const Box b = box2(-5.0, 10.0, 0.0, 15.0);
  return b;
}
const Box& rosenbrock_box() {
  static const Box b = box2(-2.0, 2.0, -1.0, 3.0);
  return b;
}
const Box& hartmann_box() {
  static const Box b = uniform_box(3, 0.0, 1.0);
  return b;
}
const Box& michalewicz_box() {
  static const Box b = uniform_box(5, 0.0, pi);
  return b;
}
const Box& ks224_box() {
  static const Box b = uniform_box(2, 0.0, 6.0);
  return b;
}

std::vector<KnownConstraint> ks224_constraints() {
  return {
      {{{0, -1.0}, {1, -3.0}}, {}, Sense::LessEqual, 0.0},
      {{{0, 1.0}, {1, 3.0}}, {}, Sense::LessEqual, 18.0},
      {{{0, -1.0}, {1, -1.0}}, {}, Sense::LessEqual, 0.0},
      {{{0, 1.0}, {1, 1.0}}, {}, Sense::LessEqual, 8.0},
  };
}

Vector vec(std::initializer_list<double> v) {
  Vector x(static_cast<Eigen::Index>(v.size()));
  Eigen::Index k = 0;
  for (double e : v) x[k++] = e;
  return x;
}

}  // namespace

double eval_bumpy(const Vector& x) {
  require_in(x, bumpy_box(), "bumpy");
  double s = 0.0;
  for (int i = 1; i <= 6; ++i) s -= i * std::sin((i + 1) * x[0] + i);
  return s;
}

double eval_multimodal(const Vector& x) {
  require_in(x, multimodal_box(), "multimodal");
  return std::sin(x[0]) + std::sin(10.0 / 3.0 * x[0]);
}

double eval_ackley(const Vector& x) {
  require_in(x, ackley_box(), "ackley");
  const double a = -20.0 * std::exp(-0.2 * std::sqrt(0.5 * (x[0] * x[0] + x[1] * x[1])));
  const double b = -std::exp(0.5 * (std::cos(2.0 * pi * x[0]) + std::cos(2.0 * pi * x[1])));
  return a + b + 20.0 + std::exp(1.0);
}

double eval_branin(const Vector& x) {
  require_in(x, branin_box(), "branin");
  const double b = 5.1 / (4.0 * pi * pi), c = 5.0 / pi, r = 6.0, s = 10.0, t = 1.0 / (8.0 * pi);
  const double q = x[1] - b * x[0] * x[0] + c * x[0] - r;
  return q * q + s * (1.0 - t) * std::cos(x[0]) + s;
}

double eval_rosenbrock(const Vector& x) {
  require_in(x, rosenbrock_box(), "rosenbrock");
  const double u = 1.0 - x[0], v = x[1] - x[0] * x[0];
  return u * u + 100.0 * v * v;
}

double eval_hartmann(const Vector& x) {
  require_in(x, hartmann_box(), "hartmann");
  static const double alpha[4] = {1.0, 1.2, 3.0, 3.2};
  static const double A[4][3] = {{3, 10, 30}, {0.1, 10, 35}, {3, 10, 30}, {0.1, 10, 35}};
  static const double P[4][3] = {{3689, 1170, 2673}, {4699, 4387, 7470}, {1091, 8732, 5547}, {381, 5743, 8828}};
  double s = 0.0;
  for (int i = 0; i < 4; ++i) {
    double e = 0.0;
    for (int j = 0; j < 3; ++j) {
      const double d = x[j] - 1e-4 * P[i][j];
      e += A[i][j] * d * d;
    }
    s -= alpha[i] * std::exp(-e);
  }
  return s;
}

double eval_michalewicz(const Vector& x) {
  require_in(x, michalewicz_box(), "michalewicz");
  double s = 0.0;
  for (int i = 0; i < 5; ++i) s -= std::sin(x[i]) * std::pow(std::sin((i + 1) * x[i] * x[i] / pi), 20);
  return s;
}

double eval_ks224(const Vector& x) {
  require_in(x, ks224_box(), "ks224");
  return 2.0 * x[0] * x[0] + x[1] * x[1] - 48.0 * x[0] - 40.0 * x[1];
}

// Reference minima come from a dense-grid search followed by local
// refinement (tools/derive_reference_minima.py); the unit tests recompute
// them at lower density.
const std::vector<BenchmarkFn>& benchmark_registry() {
  static const std::vector<BenchmarkFn> reg = [] {
    std::vector<BenchmarkFn> r;
    r.push_back({"bumpy", 1, bumpy_box(), eval_bumpy, {}, -16.532194721073317, vec({-0.5580997846274051}), vec({0.0})});
    r.push_back({"multimodal", 1, multimodal_box(), eval_multimodal, {}, -1.8995993491521135, vec({5.145735290233693}),
                 vec({0.0})});
    r.push_back({"ackley", 2, ackley_box(), eval_ackley, {}, 0.0, vec({0.0, 0.0}), vec({0.0, 0.0})});
    r.push_back({"branin", 2, branin_box(), eval_branin, {}, 0.39788735772973816, vec({pi, 2.275}), vec({0.0, 0.0})});
    r.push_back({"rosenbrock", 2, rosenbrock_box(), eval_rosenbrock, {}, 0.0, vec({1.0, 1.0}), vec({0.0, 0.0})});
    r.push_back({"hartmann", 3, hartmann_box(), eval_hartmann, {}, -3.8627797873326593,
                 vec({0.11458888, 0.55564889, 0.85254698}), vec({0.5, 0.5, 0.5})});
    r.push_back({"michalewicz", 5, michalewicz_box(), eval_michalewicz, {}, -4.687658179088144,
                 vec({2.202905520186834, 1.5707963267948966, 1.2849915705402832, 1.9230584698680722,
                      1.7204697725650733}),
                 vec({1.0, 1.0, 1.0, 1.0, 1.0})});
    r.push_back({"ks224", 2, ks224_box(), eval_ks224, ks224_constraints(), -304.0, vec({4.0, 4.0}), vec({1.0, 1.0})});
    return r;
  }();
  return reg;
}

const BenchmarkFn& find_benchmark(const std::string& name) {
  for (const BenchmarkFn& f : benchmark_registry()) {
    if (f.name == name) return f;
  }
  throw ConfigError("unknown benchmark '" + name + "'");
}

ConstraintReport check_constraints(const std::vector<KnownConstraint>& constraints, const Box& bounds,
                                   const Vector& x, double tol) {
  ConstraintReport rep;
  for (int d = 0; d < x.size(); ++d) {
    rep.max_violation = std::max({rep.max_violation, bounds.lb[d] - x[d], x[d] - bounds.ub[d]});
  }
  for (const KnownConstraint& c : constraints) rep.max_violation = std::max(rep.max_violation, c.violation(x));
  rep.feasible = rep.max_violation <= tol;
  return rep;
}

ConstraintReport check_constraints(const BenchmarkFn& fn, const Vector& x, double tol) {
  return check_constraints(fn.constraints, fn.bounds, x, tol);
}

double penalized(const std::vector<KnownConstraint>& constraints, const Vector& x, double value, double weight) {
  double s = 0.0;
  for (const KnownConstraint& c : constraints) s += c.violation(x);
  return s > 0.0 ? value + weight * s : value;
}

}  // namespace pwlbo
