// Copyright 2026 The pwlbo Authors.
// SPDX-License-Identifier: Apache-2.0

#include "pwlbo/miqp_model.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>

namespace pwlbo {
namespace {

std::string indexed(const char* stem, int i) { return std::string(stem) + "_" + std::to_string(i); }
std::string indexed(const char* stem, int i, int j) { return indexed(stem, i) + "_" + std::to_string(j); }

double sense_violation(double lhs, Sense sense, double rhs) {
  switch (sense) {
    case Sense::LessEqual:
      return std::max(0.0, lhs - rhs);
    case Sense::GreaterEqual:
      return std::max(0.0, rhs - lhs);
    case Sense::Equal:
      return std::abs(lhs - rhs);
  }
  return 0.0;
}

Matrix quad_matrix(const std::vector<QuadTerm>& quad, int dim) {
  Matrix Q = Matrix::Zero(dim, dim);
  for (const QuadTerm& t : quad) {
    if (t.first == t.second) {
      Q(t.first, t.first) += t.coef;
    } else {
      Q(t.first, t.second) += 0.5 * t.coef;
      Q(t.second, t.first) += 0.5 * t.coef;
    }
  }
  return Q;
}

void check_coordinates(const KnownConstraint& c, int dim) {
  for (const auto& [d, a] : c.linear) {
    if (d < 0 || d >= dim) throw std::invalid_argument("known constraint references a coordinate outside x");
    if (!std::isfinite(a)) throw std::invalid_argument("known constraint has a non-finite coefficient");
  }
  for (const QuadTerm& t : c.quad) {
    if (t.first < 0 || t.first >= dim || t.second < 0 || t.second >= dim) {
      throw std::invalid_argument("known constraint references a coordinate outside x");
    }
  }
}

bool is_convex(const KnownConstraint& c, int dim) {
  if (c.is_linear()) return true;
  if (c.sense == Sense::Equal) return false;
  Matrix Q = quad_matrix(c.quad, dim);
  if (c.sense == Sense::GreaterEqual) Q = -Q;
  const double scale = std::max(1.0, Q.cwiseAbs().maxCoeff());
  Eigen::SelfAdjointEigenSolver<Matrix> eig(Q, Eigen::EigenvaluesOnly);
  return eig.eigenvalues().minCoeff() >= -1e-12 * scale;
}

int add_var(MiqpModel& m, std::string name, VarKind kind, double lo, double hi) {
  m.variables.push_back({std::move(name), kind, lo, hi});
  return m.num_variables() - 1;
}

MiqpModel build_model(const ApproxGp& gp, int component, double beta, bool with_variance, const Box& bounds,
                      const std::vector<KnownConstraint>& known) {
  if (!(beta >= 0.0)) throw std::invalid_argument("beta must be non-negative");
  if (component < 0 || component >= gp.num_components()) throw std::invalid_argument("unknown GP component");
  const PwlComponent& comp = gp.component(component);
  const Matrix& C = gp.component_inputs(component);
  const int n = static_cast<int>(C.rows());
  const int dim = static_cast<int>(C.cols());
  if (bounds.dim() != dim) throw std::invalid_argument("model bounds do not match the component dimension");
  const PwlKernel& pwl = comp.kernel;
  const double l = pwl.params().lengthscale;
  const double var = pwl.params().variance;
  const int segs = pwl.segments();
  const Vector& R = pwl.knots();
  const Vector& kv = pwl.knot_values();

  MiqpModel m;
  ModelData& data = m.data;
  data.centers = C;
  data.knots = R;
  data.knot_values = kv;
  data.variance = var;
  data.lengthscale = l;
  data.weights = gp.weights();
  data.factor = gp.factor();
  data.inverse = gp.inverse();
  data.beta = beta;
  data.lower = bounds.lb;
  data.upper = bounds.ub;
  if (with_variance) {
    Eigen::SelfAdjointEigenSolver<Matrix> eig(data.inverse, Eigen::EigenvaluesOnly);
    if (!(eig.eigenvalues().minCoeff() > 0.0)) throw NumericalError("precomputed inverse Gram matrix is not positive definite");
  }

  ModelLayout& lay = m.layout;
  for (int d = 0; d < dim; ++d) lay.x.push_back(add_var(m, indexed("x", d), VarKind::Continuous, bounds.lb[d], bounds.ub[d]));
  const double r_max = R[segs];
  for (int i = 0; i < n; ++i) {
    const Vector c = C.row(i).transpose();
    const double near = (c - bounds.project(c)).norm() / l;
    double far2 = 0.0;
    for (int d = 0; d < dim; ++d) {
      const double e = std::max(std::abs(c[d] - bounds.lb[d]), std::abs(c[d] - bounds.ub[d]));
      far2 += e * e;
    }
    const double hi = std::min(r_max, std::sqrt(far2) / l);
    lay.r.push_back(add_var(m, indexed("r", i), VarKind::Continuous, std::min(near, hi), hi));
  }
  const double kmin = kv[segs];
  for (int i = 0; i < n; ++i) lay.kx.push_back(add_var(m, indexed("kx", i), VarKind::Continuous, kmin, var));
  lay.w.resize(static_cast<std::size_t>(n));
  lay.lam.resize(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j <= segs; ++j) lay.w[i].push_back(add_var(m, indexed("w", i, j), VarKind::Continuous, 0.0, 1.0));
  }
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < segs; ++j) lay.lam[i].push_back(add_var(m, indexed("lam", i, j), VarKind::Binary, 0.0, 1.0));
  }
  double mu_lo = 0.0, mu_hi = 0.0;
  for (int i = 0; i < n; ++i) {
    const double a = data.weights[i];
    mu_lo += std::min(a * kmin, a * var);
    mu_hi += std::max(a * kmin, a * var);
  }
  lay.mu = add_var(m, "mu", VarKind::Continuous, mu_lo, mu_hi);
  if (with_variance) lay.sigma = add_var(m, "sigma", VarKind::Continuous, 0.0, std::sqrt(var));

  // Mean as a linear function of the kernel values.
  {
    LinearConstraint c{{{lay.mu, 1.0}}, Sense::Equal, 0.0, "mean"};
    for (int i = 0; i < n; ++i) c.coefficients.emplace_back(lay.kx[i], -data.weights[i]);
    m.linear.push_back(std::move(c));
  }
  for (int i = 0; i < n; ++i) {
    LinearConstraint sw{{}, Sense::Equal, 1.0, indexed("wsum", i)};
    for (int j = 0; j <= segs; ++j) sw.coefficients.emplace_back(lay.w[i][j], 1.0);
    m.linear.push_back(std::move(sw));
    LinearConstraint sl{{}, Sense::Equal, 1.0, indexed("lamsum", i)};
    for (int j = 0; j < segs; ++j) sl.coefficients.emplace_back(lay.lam[i][j], 1.0);
    m.linear.push_back(std::move(sl));
    for (int j = 0; j <= segs; ++j) {
      LinearConstraint cap{{{lay.w[i][j], 1.0}}, Sense::LessEqual, 0.0, indexed("adj", i, j)};
      if (j > 0) cap.coefficients.emplace_back(lay.lam[i][j - 1], -1.0);
      if (j < segs) cap.coefficients.emplace_back(lay.lam[i][j], -1.0);
      m.linear.push_back(std::move(cap));
    }
    LinearConstraint rd{{{lay.r[i], 1.0}}, Sense::Equal, 0.0, indexed("rdef", i)};
    LinearConstraint kd{{{lay.kx[i], 1.0}}, Sense::Equal, 0.0, indexed("kdef", i)};
    for (int j = 0; j <= segs; ++j) {
      if (R[j] != 0.0) rd.coefficients.emplace_back(lay.w[i][j], -R[j]);
      kd.coefficients.emplace_back(lay.w[i][j], -kv[j]);
    }
    m.linear.push_back(std::move(rd));
    m.linear.push_back(std::move(kd));
  }

  if (with_variance) {
    QuadConstraint q;
    q.name = "variance";
    q.tag = QuadTag::Convex;
    q.sense = Sense::LessEqual;
    q.rhs = var;
    q.quad.push_back({lay.sigma, lay.sigma, 1.0});
    for (int i = 0; i < n; ++i) {
      q.quad.push_back({lay.kx[i], lay.kx[i], data.inverse(i, i)});
      for (int j = i + 1; j < n; ++j) q.quad.push_back({lay.kx[i], lay.kx[j], 2.0 * data.inverse(i, j)});
    }
    m.quadratic.push_back(std::move(q));
  }
  const double il2 = 1.0 / (l * l);
  for (int i = 0; i < n; ++i) {
    QuadConstraint q;
    q.name = indexed("dist", i);
    q.tag = QuadTag::NonconvexEquality;
    q.sense = Sense::Equal;
    q.quad.push_back({lay.r[i], lay.r[i], 1.0});
    double rhs = 0.0;
    for (int d = 0; d < dim; ++d) {
      q.quad.push_back({lay.x[d], lay.x[d], -il2});
      const double c = C(i, d);
      if (c != 0.0) q.linear.emplace_back(lay.x[d], 2.0 * c * il2);
      rhs += c * c * il2;
    }
    q.rhs = rhs;
    m.quadratic.push_back(std::move(q));
  }

  m.objective.emplace_back(lay.mu, 1.0);
  if (with_variance && beta > 0.0) m.objective.emplace_back(lay.sigma, -std::sqrt(beta));
  add_known_constraints(m, known);
  return m;
}

}  // namespace

double KnownConstraint::activity(const Vector& x) const {
  double s = 0.0;
  for (const auto& [d, a] : linear) s += a * x[d];
  for (const QuadTerm& t : quad) s += t.coef * x[t.first] * x[t.second];
  return s;
}

double KnownConstraint::violation(const Vector& x) const { return sense_violation(activity(x), sense, rhs); }

std::vector<KnownConstraint> scale_constraints(const std::vector<KnownConstraint>& constraints,
                                               const ScalingTransform& transform) {
  const Vector& lb = transform.input_lb;
  const Vector w = transform.input_ub - transform.input_lb;
  std::vector<KnownConstraint> out;
  for (const KnownConstraint& c : constraints) {
    check_coordinates(c, static_cast<int>(lb.size()));
    std::map<int, double> lin;
    std::map<std::pair<int, int>, double> quad;
    double shift = 0.0;
    for (const auto& [d, a] : c.linear) {
      lin[d] += a * w[d];
      shift += a * lb[d];
    }
    for (const QuadTerm& t : c.quad) {
      const int a = std::min(t.first, t.second), b = std::max(t.first, t.second);
      quad[{a, b}] += t.coef * w[a] * w[b];
      lin[a] += t.coef * lb[b] * w[a];
      lin[b] += t.coef * lb[a] * w[b];
      shift += t.coef * lb[a] * lb[b];
    }
    double scale = 0.0;
    for (const auto& [d, a] : lin) scale = std::max(scale, std::abs(a));
    for (const auto& [k, a] : quad) scale = std::max(scale, std::abs(a));
    if (scale == 0.0) scale = 1.0;
    KnownConstraint s;
    s.sense = c.sense;
    s.rhs = (c.rhs - shift) / scale;
    for (const auto& [d, a] : lin) {
      if (a != 0.0) s.linear.emplace_back(d, a / scale);
    }
    for (const auto& [k, a] : quad) {
      if (a != 0.0) s.quad.push_back({k.first, k.second, a / scale});
    }
    out.push_back(std::move(s));
  }
  return out;
}

std::vector<KnownConstraint> restrict_constraints(const std::vector<KnownConstraint>& constraints,
                                                  const std::vector<int>& dims) {
  std::vector<KnownConstraint> out;
  auto local = [&dims](int d) {
    const auto it = std::find(dims.begin(), dims.end(), d);
    return it == dims.end() ? -1 : static_cast<int>(it - dims.begin());
  };
  for (const KnownConstraint& c : constraints) {
    int inside = 0, outside = 0;
    for (const auto& [d, a] : c.linear) (local(d) >= 0 ? inside : outside) += 1;
    for (const QuadTerm& t : c.quad) {
      (local(t.first) >= 0 ? inside : outside) += 1;
      (local(t.second) >= 0 ? inside : outside) += 1;
    }
    if (inside == 0) continue;
    if (outside > 0) throw std::invalid_argument("known constraint couples coordinates of different groups");
    KnownConstraint r = c;
    for (auto& [d, a] : r.linear) d = local(d);
    for (QuadTerm& t : r.quad) {
      t.first = local(t.first);
      t.second = local(t.second);
    }
    out.push_back(std::move(r));
  }
  return out;
}

int MiqpModel::num_binaries() const {
  return static_cast<int>(std::count_if(variables.begin(), variables.end(),
                                        [](const VariableDef& v) { return v.kind == VarKind::Binary; }));
}

MiqpModel build_full_model(const ApproxGp& gp, int component, double beta, const Box& bounds,
                           const std::vector<KnownConstraint>& known) {
  return build_model(gp, component, beta, true, bounds, known);
}

MiqpModel build_full_model(const PwlKernel& pwl, const Dataset& data, double beta, const Box& bounds,
                           const std::vector<KnownConstraint>& known) {
  return build_model(ApproxGp(pwl, data), 0, beta, true, bounds, known);
}

MiqpModel build_sub_model(const ApproxGp& gp, int component, const Box& bounds,
                          const std::vector<KnownConstraint>& known) {
  return build_model(gp, component, 0.0, false, bounds, known);
}

MiqpModel build_sub_model(const PwlKernel& pwl, const Dataset& data, const Box& bounds,
                          const std::vector<KnownConstraint>& known) {
  return build_model(ApproxGp(pwl, data), 0, 0.0, false, bounds, known);
}

void add_known_constraints(MiqpModel& model, const std::vector<KnownConstraint>& constraints) {
  const int dim = model.dim();
  for (const KnownConstraint& c : constraints) {
    check_coordinates(c, dim);
    if (c.linear.empty() && c.quad.empty()) {
      if (sense_violation(0.0, c.sense, c.rhs) > 0.0) throw std::invalid_argument("empty known constraint is infeasible");
      continue;
    }
    if (!is_convex(c, dim)) throw std::invalid_argument("nonconvex known quadratic constraints are not supported");
  }
  for (const KnownConstraint& c : constraints) {
    if (c.linear.empty() && c.quad.empty()) continue;
    const int k = static_cast<int>(model.data.known.size());
    SparseRow lin;
    for (const auto& [d, a] : c.linear) lin.emplace_back(model.layout.x[d], a);
    if (c.is_linear()) {
      model.layout.known_linear.push_back(static_cast<int>(model.linear.size()));
      model.linear.push_back({std::move(lin), c.sense, c.rhs, indexed("known", k)});
    } else {
      QuadConstraint q;
      q.linear = std::move(lin);
      for (const QuadTerm& t : c.quad) q.quad.push_back({model.layout.x[t.first], model.layout.x[t.second], t.coef});
      q.sense = c.sense;
      q.rhs = c.rhs;
      q.tag = QuadTag::Convex;
      q.name = indexed("known", k);
      model.layout.known_quadratic.push_back(static_cast<int>(model.quadratic.size()));
      model.quadratic.push_back(std::move(q));
    }
    model.data.known.push_back(c);
  }
}

Assignment evaluate_candidate(const MiqpModel& model, const Vector& x) {
  const ModelLayout& lay = model.layout;
  const ModelData& data = model.data;
  const int dim = model.dim();
  const int n = model.num_points();
  if (x.size() != dim) throw std::invalid_argument("candidate has wrong dimension");
  for (int d = 0; d < dim; ++d) {
    if (!(x[d] >= data.lower[d] - 1e-6 && x[d] <= data.upper[d] + 1e-6)) {
      throw std::invalid_argument("candidate lies outside the box");
    }
  }
  for (const KnownConstraint& c : data.known) {
    if (c.violation(x) > 1e-6) throw std::invalid_argument("candidate violates a known constraint");
  }
  Vector v = Vector::Zero(model.num_variables());
  const Vector xc = x.cwiseMax(data.lower).cwiseMin(data.upper);
  for (int d = 0; d < dim; ++d) v[lay.x[d]] = xc[d];
  const Vector& R = data.knots;
  const Vector& kv = data.knot_values;
  const int segs = model.segments();
  Vector k(n);
  for (int i = 0; i < n; ++i) {
    const double r = std::min((data.centers.row(i).transpose() - xc).norm() / data.lengthscale, R[segs]);
    const double* begin = R.data();
    int s = static_cast<int>(std::upper_bound(begin, begin + segs + 1, r) - begin) - 1;
    s = std::clamp(s, 0, segs - 1);
    const double t = (r - R[s]) / (R[s + 1] - R[s]);
    v[lay.r[i]] = r;
    v[lay.lam[i][s]] = 1.0;
    if (t <= 0.0) {
      v[lay.w[i][s]] = 1.0;
      k[i] = kv[s];
    } else if (t >= 1.0) {
      v[lay.w[i][s + 1]] = 1.0;
      k[i] = kv[s + 1];
    } else {
      v[lay.w[i][s]] = 1.0 - t;
      v[lay.w[i][s + 1]] = t;
      k[i] = (1.0 - t) * kv[s] + t * kv[s + 1];
    }
    v[lay.kx[i]] = k[i];
  }
  v[lay.mu] = k.dot(data.weights);
  if (model.has_variance()) {
    const Vector z = data.factor.llt.matrixL().solve(k);
    v[lay.sigma] = std::sqrt(std::max(0.0, data.variance - z.squaredNorm()));
  }
  return {v, objective_value(model, v)};
}

Vector point_of(const MiqpModel& model, const Vector& values) {
  Vector x(model.dim());
  for (int d = 0; d < model.dim(); ++d) x[d] = values[model.layout.x[d]];
  return x;
}

double objective_value(const MiqpModel& model, const Vector& values) {
  double s = 0.0;
  for (const auto& [j, c] : model.objective) s += c * values[j];
  return s;
}

double max_violation(const MiqpModel& model, const Vector& values) {
  if (values.size() != model.num_variables()) throw std::invalid_argument("assignment has wrong size");
  double worst = 0.0;
  for (int j = 0; j < model.num_variables(); ++j) {
    const VariableDef& v = model.variables[j];
    worst = std::max({worst, v.lower - values[j], values[j] - v.upper});
    if (v.kind == VarKind::Binary) worst = std::max(worst, std::min(std::abs(values[j]), std::abs(values[j] - 1.0)));
  }
  for (const LinearConstraint& c : model.linear) {
    double lhs = 0.0;
    for (const auto& [j, a] : c.coefficients) lhs += a * values[j];
    worst = std::max(worst, sense_violation(lhs, c.sense, c.rhs));
  }
  for (const QuadConstraint& c : model.quadratic) {
    double lhs = 0.0;
    for (const auto& [j, a] : c.linear) lhs += a * values[j];
    for (const QuadTerm& t : c.quad) lhs += t.coef * values[t.first] * values[t.second];
    worst = std::max(worst, sense_violation(lhs, c.sense, c.rhs));
  }
  return worst;
}

}  // namespace pwlbo
