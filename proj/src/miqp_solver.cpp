// Copyright 2026 The pwlbo Authors.
// SPDX-License-Identifier: Apache-2.0

#include "pwlbo/miqp_solver.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <queue>
#include <random>
#include <stdexcept>

namespace pwlbo {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kGraphTol = 1e-9;
constexpr double kDistTol = 1e-9;
constexpr double kMinWidth = 1e-9;

double pwl_value(const ModelData& d, double r) {
  const Vector& R = d.knots;
  const int segs = static_cast<int>(R.size()) - 1;
  if (r <= 0.0) return d.knot_values[0];
  if (r >= R[segs]) return d.knot_values[segs];
  const double* begin = R.data();
  const int s = std::clamp(static_cast<int>(std::upper_bound(begin, begin + segs + 1, r) - begin) - 1, 0, segs - 1);
  const double t = (r - R[s]) / (R[s + 1] - R[s]);
  return d.knot_values[s] + t * (d.knot_values[s + 1] - d.knot_values[s]);
}

// Largest s with R_s <= r.
int segment_from_below(const Vector& R, double r) {
  const int segs = static_cast<int>(R.size()) - 1;
  const double* begin = R.data();
  return std::clamp(static_cast<int>(std::upper_bound(begin, begin + segs + 1, r) - begin) - 1, 0, segs - 1);
}

// Smallest s with R_{s+1} >= r.
int segment_from_above(const Vector& R, double r) {
  const int segs = static_cast<int>(R.size()) - 1;
  const double* begin = R.data();
  return std::clamp(static_cast<int>(std::lower_bound(begin, begin + segs + 1, r) - begin) - 1, 0, segs - 1);
}

bool moved(double before, double after) { return std::abs(after - before) > 1e-9 * (1.0 + std::abs(before)); }

// Clips [lo, hi] to exclude the open hole (c - t, c + t).
bool cut_hole(double& lo, double& hi, double c, double t) {
  if (lo > c - t && lo < c + t) lo = c + t;
  if (hi < c + t && hi > c - t) hi = c - t;
  return lo <= hi;
}

bool propagate_linear(const KnownConstraint& c, Vector& lo, Vector& hi, bool& changed) {
  const bool upper_side = c.sense != Sense::GreaterEqual;
  const bool lower_side = c.sense != Sense::LessEqual;
  double min_act = 0.0, max_act = 0.0;
  for (const auto& [d, a] : c.linear) {
    min_act += std::min(a * lo[d], a * hi[d]);
    max_act += std::max(a * lo[d], a * hi[d]);
  }
  const double tol = 1e-9 * (1.0 + std::abs(c.rhs));
  if (upper_side && min_act > c.rhs + tol) return false;
  if (lower_side && max_act < c.rhs - tol) return false;
  for (const auto& [d, a] : c.linear) {
    if (a == 0.0) continue;
    if (upper_side) {
      const double rest = c.rhs - (min_act - std::min(a * lo[d], a * hi[d]));
      const double v = rest / a + (a > 0 ? 1 : -1) * tol / std::abs(a);
      if (a > 0 && v < hi[d]) {
        changed |= moved(hi[d], v);
        hi[d] = v;
      } else if (a < 0 && v > lo[d]) {
        changed |= moved(lo[d], v);
        lo[d] = v;
      }
    }
    if (lower_side) {
      const double rest = c.rhs - (max_act - std::max(a * lo[d], a * hi[d]));
      const double v = rest / a - (a > 0 ? 1 : -1) * tol / std::abs(a);
      if (a > 0 && v > lo[d]) {
        changed |= moved(lo[d], v);
        lo[d] = v;
      } else if (a < 0 && v < hi[d]) {
        changed |= moved(hi[d], v);
        hi[d] = v;
      }
    }
    if (lo[d] > hi[d]) {
      if (lo[d] > hi[d] + 1e-9) return false;
      lo[d] = hi[d] = 0.5 * (lo[d] + hi[d]);
    }
  }
  return true;
}

// Tightens the node box and segment ranges; fills the distance interval of
// every point. Returns false when the node is empty.
bool propagate(const MiqpModel& model, Node& node, Vector& rlo, Vector& rhi) {
  const ModelData& data = model.data;
  const Matrix& C = data.centers;
  const Vector& R = data.knots;
  const double l = data.lengthscale;
  const int n = model.num_points();
  const int dim = model.dim();
  Vector& lo = node.lower;
  Vector& hi = node.upper;
  rlo.resize(n);
  rhi.resize(n);
  Vector nd(dim), fd(dim);
  for (int pass = 0; pass < 10; ++pass) {
    bool changed = false;
    for (int i = 0; i < n; ++i) {
      double near2 = 0.0, far2 = 0.0;
      for (int d = 0; d < dim; ++d) {
        const double c = C(i, d);
        const double g = std::max({0.0, lo[d] - c, c - hi[d]});
        const double f = std::max(std::abs(c - lo[d]), std::abs(hi[d] - c));
        nd[d] = g * g;
        fd[d] = f * f;
        near2 += nd[d];
        far2 += fd[d];
      }
      const double rnear = std::sqrt(near2) / l;
      const double rfar = std::sqrt(far2) / l;
      auto& [first, last] = node.segments[static_cast<std::size_t>(i)];
      const int f2 = std::max(first, segment_from_below(R, rnear * (1.0 - 1e-12) - 1e-12));
      const int l2 = std::min(last, segment_from_above(R, rfar * (1.0 + 1e-12) + 1e-12));
      if (f2 > l2) return false;
      if (f2 != first || l2 != last) changed = true;
      first = f2;
      last = l2;
      double a = std::max(R[first], rnear);
      double b = std::min(R[last + 1], rfar);
      if (a > b) {
        if (a > b + 1e-10 * (1.0 + b)) return false;
        a = b;
      }
      rlo[i] = a;
      rhi[i] = b;

      const double cap = l * l * b * b;
      const double need = l * l * a * a;
      for (int d = 0; d < dim; ++d) {
        const double c = C(i, d);
        const double rest = cap - (near2 - nd[d]);
        if (rest < -1e-12 * (1.0 + cap)) return false;
        const double t = std::sqrt(std::max(0.0, rest)) * (1.0 + 1e-12) + 1e-12;
        const double nlo = std::max(lo[d], c - t), nhi = std::min(hi[d], c + t);
        double glo = nlo, ghi = nhi;
        const double want = need - (far2 - fd[d]);
        if (want > 0.0) {
          const double th = std::sqrt(want) * (1.0 - 1e-12) - 1e-12;
          if (th > 0.0 && !cut_hole(glo, ghi, c, th)) return false;
        }
        if (glo > ghi) return false;
        if (moved(lo[d], glo) || moved(hi[d], ghi)) changed = true;
        lo[d] = glo;
        hi[d] = ghi;
      }
    }
    for (const KnownConstraint& c : data.known) {
      if (c.is_linear() && !propagate_linear(c, lo, hi, changed)) return false;
    }
    if (!changed) break;
  }
  return true;
}

struct HullPoint {
  double r, k;
};

double cross(const HullPoint& o, const HullPoint& a, const HullPoint& b) {
  return (a.r - o.r) * (b.k - o.k) - (a.k - o.k) * (b.r - o.r);
}

// Upper and lower convex hull of the kernel graph over [a, b].
struct GraphHull {
  std::vector<HullPoint> upper, lower;
};

GraphHull graph_hull(const ModelData& data, double a, double b) {
  std::vector<HullPoint> pts{{a, pwl_value(data, a)}};
  for (Eigen::Index j = 0; j < data.knots.size(); ++j) {
    if (data.knots[j] > a && data.knots[j] < b) pts.push_back({data.knots[j], data.knot_values[j]});
  }
  if (b > a) pts.push_back({b, pwl_value(data, b)});
  GraphHull h;
  for (const HullPoint& p : pts) {
    while (h.upper.size() >= 2 && cross(h.upper[h.upper.size() - 2], h.upper.back(), p) >= 0.0) h.upper.pop_back();
    h.upper.push_back(p);
    while (h.lower.size() >= 2 && cross(h.lower[h.lower.size() - 2], h.lower.back(), p) <= 0.0) h.lower.pop_back();
    h.lower.push_back(p);
  }
  return h;
}

// Facet of the chain over r: value and (slope, intercept).
struct Facet {
  double value, slope, intercept;
};

Facet facet_at(const std::vector<HullPoint>& chain, double r) {
  std::size_t k = 0;
  while (k + 2 < chain.size() && chain[k + 1].r < r) ++k;
  const HullPoint& p = chain[k];
  const HullPoint& q = chain[k + 1];
  const double slope = (q.k - p.k) / (q.r - p.r);
  const double intercept = p.k - slope * p.r;
  return {intercept + slope * r, slope, intercept};
}

void normalize(Cut& c) {
  double s = 0.0;
  for (const lp::Term& t : c.terms) s = std::max(s, std::abs(t.coef));
  if (s == 0.0 || !std::isfinite(s)) return;
  for (lp::Term& t : c.terms) t.coef /= s;
  c.lower /= s;
  c.upper /= s;
}

bool finite_cut(const Cut& c) {
  for (const lp::Term& t : c.terms) {
    if (!std::isfinite(t.coef)) return false;
  }
  return !std::isnan(c.lower) && !std::isnan(c.upper);
}

struct Separator {
  const MiqpModel& model;
  const Node& node;
  const Vector& rlo;
  const Vector& rhi;
  const RelaxationLayout& lay;
  std::vector<GraphHull> hulls;

  std::vector<Cut> separate(const Vector& z) const {
    const ModelData& data = model.data;
    const int n = lay.points;
    const int dim = lay.dim;
    const double l = data.lengthscale;
    std::vector<Cut> cuts;
    auto push = [&cuts](Cut c) {
      normalize(c);
      if (finite_cut(c)) cuts.push_back(std::move(c));
    };
    const double ktol = kGraphTol * std::max(1.0, data.variance);
    for (int i = 0; i < n; ++i) {
      const double r = std::clamp(z[lay.r(i)], rlo[i], rhi[i]);
      const double k = z[lay.kx(i)];
      if (rhi[i] - rlo[i] > 1e-14) {
        const GraphHull& h = hulls[static_cast<std::size_t>(i)];
        const Facet up = facet_at(h.upper, r);
        if (k > up.value + ktol) push({{{lay.kx(i), 1.0}, {lay.r(i), -up.slope}}, -kInf, up.intercept});
        const Facet dn = facet_at(h.lower, r);
        if (k < dn.value - ktol) push({{{lay.kx(i), 1.0}, {lay.r(i), -dn.slope}}, dn.intercept, kInf});
      }
      const Vector c = data.centers.row(i).transpose();
      const Vector x = z.head(dim);
      const double dist = (x - c).norm();
      const double rz = z[lay.r(i)];
      if (dist / l - rz > kDistTol * (1.0 + rz) && dist > 1e-12) {
        Cut cut{{{lay.r(i), -1.0}}, -kInf, 0.0};
        double rhs = 0.0;
        for (int d = 0; d < dim; ++d) {
          const double g = (x[d] - c[d]) / dist;
          cut.terms.push_back({lay.x(d), g / l});
          rhs += g * c[d] / l;
        }
        cut.upper = rhs;
        push(std::move(cut));
      }
      // Secant overestimate of the squared distance over the node box.
      double S = 0.0, base = 0.0;
      Vector slope(dim);
      for (int d = 0; d < dim; ++d) {
        const double lo = node.lower[d], hi = node.upper[d];
        slope[d] = lo + hi - 2.0 * c[d];
        const double v0 = (lo - c[d]) * (lo - c[d]);
        S += v0 + slope[d] * (x[d] - lo);
        base += v0 - slope[d] * lo;
      }
      S = std::max(S, 0.0);
      if (l * rz - std::sqrt(S) > kDistTol * (1.0 + l * rz)) {
        const double r0 = std::max(std::sqrt(S) / l, 1e-9);
        Cut cut{{{lay.r(i), 2.0 * l * l * r0}}, -kInf, l * l * r0 * r0 + base};
        for (int d = 0; d < dim; ++d) {
          if (slope[d] != 0.0) cut.terms.push_back({lay.x(d), -slope[d]});
        }
        push(std::move(cut));
      }
    }
    if (lay.has_sigma) {
      const double s0 = z[lay.sigma()];
      Vector k0(n);
      for (int i = 0; i < n; ++i) k0[i] = z[lay.kx(i)];
      const Vector bk = data.inverse * k0;
      const double q = k0.dot(bk);
      if (s0 * s0 + q - data.variance > kGraphTol * data.variance) {
        Cut cut{{{lay.sigma(), 2.0 * s0}}, -kInf, data.variance + s0 * s0 + q};
        for (int i = 0; i < n; ++i) cut.terms.push_back({lay.kx(i), 2.0 * bk[i]});
        push(std::move(cut));
      }
    }
    const Vector x = z.head(dim);
    for (const KnownConstraint& c : data.known) {
      if (c.is_linear()) continue;
      const double sgn = (c.sense == Sense::GreaterEqual) ? -1.0 : 1.0;
      const double act = c.activity(x);
      if (sgn * (act - c.rhs) <= 1e-9 * (1.0 + std::abs(c.rhs))) continue;
      Vector grad = Vector::Zero(dim);
      for (const auto& [d, a] : c.linear) grad[d] += a;
      for (const QuadTerm& t : c.quad) {
        grad[t.first] += t.coef * x[t.second];
        grad[t.second] += t.coef * x[t.first];
      }
      Cut cut{{}, -kInf, sgn * (c.rhs - act + grad.dot(x))};
      for (int d = 0; d < dim; ++d) {
        if (grad[d] != 0.0) cut.terms.push_back({lay.x(d), sgn * grad[d]});
      }
      push(std::move(cut));
    }
    return cuts;
  }
};

RelaxationLayout layout_of(const MiqpModel& model) { return {model.dim(), model.num_points(), model.has_variance()}; }

Relaxation relax(const MiqpModel& model, const Node& input, int cut_rounds) {
  Relaxation out;
  out.node = input;
  Node& node = out.node;
  Vector rlo, rhi;
  if (!propagate(model, node, rlo, rhi)) return out;

  const ModelData& data = model.data;
  const RelaxationLayout lay = layout_of(model);
  const int n = lay.points;
  const int dim = lay.dim;
  const double l = data.lengthscale;

  lp::LinearProgram prog;
  for (int d = 0; d < dim; ++d) prog.add_variable(node.lower[d], node.upper[d]);
  for (int i = 0; i < n; ++i) prog.add_variable(rlo[i], rhi[i]);
  double mu_lo = 0.0, mu_hi = 0.0;
  for (int i = 0; i < n; ++i) {
    const double klo = pwl_value(data, rhi[i]), khi = std::max(klo, pwl_value(data, rlo[i]));
    prog.add_variable(klo, khi);
    const double a = data.weights[i];
    mu_lo += std::min(a * klo, a * khi);
    mu_hi += std::max(a * klo, a * khi);
  }
  const double pad = 1e-9 * (1.0 + std::abs(mu_lo) + std::abs(mu_hi));
  prog.add_variable(mu_lo - pad, mu_hi + pad, 1.0);
  if (lay.has_sigma) prog.add_variable(0.0, std::sqrt(data.variance), -std::sqrt(data.beta));

  {
    std::vector<lp::Term> mean{{lay.mu(), 1.0}};
    for (int i = 0; i < n; ++i) {
      if (data.weights[i] != 0.0) mean.push_back({lay.kx(i), -data.weights[i]});
    }
    prog.add_row(std::move(mean), 0.0, 0.0);
  }
  for (const KnownConstraint& c : data.known) {
    if (!c.is_linear()) continue;
    std::vector<lp::Term> row;
    for (const auto& [d, a] : c.linear) row.push_back({lay.x(d), a});
    const double lo = c.sense == Sense::LessEqual ? -kInf : c.rhs;
    const double hi = c.sense == Sense::GreaterEqual ? kInf : c.rhs;
    prog.add_row(std::move(row), lo, hi);
  }
  if (dim == 1) {
    // On one side of a center the distance is affine in x.
    for (int i = 0; i < n; ++i) {
      const double c = data.centers(i, 0);
      if (node.lower[0] >= c) prog.add_row({{lay.r(i), l}, {lay.x(0), -1.0}}, -c, -c);
      else if (node.upper[0] <= c) prog.add_row({{lay.r(i), l}, {lay.x(0), 1.0}}, c, c);
    }
  }

  lp::DualSimplex simplex(prog);
  std::vector<Cut> active;
  const int first_cut_row = simplex.num_rows();
  if (node.cuts) {
    for (const Cut& c : *node.cuts) {
      simplex.add_row(c.terms, c.lower, c.upper);
      active.push_back(c);
    }
  }

  Separator sep{model, node, rlo, rhi, lay, {}};
  for (int i = 0; i < n; ++i) sep.hulls.push_back(graph_hull(data, rlo[i], rhi[i]));

  double previous = -kInf;
  int stalled = 0;
  for (int round = 0;; ++round) {
    const lp::LpStatus st = simplex.solve();
    if (st == lp::LpStatus::Infeasible) return out;
    if (st != lp::LpStatus::Optimal) {
      out.numerical_failure = true;
      return out;
    }
    if (round >= cut_rounds) break;
    // Drop cuts that went slack so the tableau stays small.
    {
      std::vector<int> slack_rows;
      std::vector<Cut> kept;
      for (std::size_t k = 0; k < active.size(); ++k) {
        const int row = first_cut_row + static_cast<int>(k);
        if (simplex.row_removable(row) && !simplex.row_active(row)) slack_rows.push_back(row);
        else kept.push_back(std::move(active[k]));
      }
      simplex.remove_rows(slack_rows);
      active.swap(kept);
    }
    // Stop after three rounds in a row that barely move the bound.
    const double obj = simplex.objective();
    stalled = obj - previous <= 1e-4 * std::max(1.0, std::abs(obj)) ? stalled + 1 : 0;
    previous = obj;
    if (stalled >= 3) break;
    std::vector<Cut> cuts = sep.separate(simplex.primal());
    if (cuts.empty()) break;
    for (Cut& c : cuts) {
      simplex.add_row(c.terms, c.lower, c.upper);
      active.push_back(std::move(c));
    }
  }
  out.feasible = true;
  out.point = simplex.primal();
  out.bound = simplex.objective();
  for (std::size_t k = 0; k < active.size(); ++k) {
    if (simplex.row_active(first_cut_row + static_cast<int>(k))) out.binding.push_back(active[k]);
  }
  return out;
}

struct Violations {
  int graph_point = -1;  // eligible for a segment split
  double graph = 0.0;
  int dist_point = -1;
  double dist = 0.0;
};

Violations violations(const MiqpModel& model, const Relaxation& rel) {
  const ModelData& data = model.data;
  const RelaxationLayout lay = layout_of(model);
  const Vector& z = rel.point;
  Violations v;
  const double ktol = 1e-7 * std::max(1.0, data.variance);
  for (int i = 0; i < lay.points; ++i) {
    const auto [first, last] = rel.node.segments[static_cast<std::size_t>(i)];
    const double g = std::abs(z[lay.kx(i)] - pwl_value(data, z[lay.r(i)]));
    if (last > first && g > ktol && g > v.graph) {
      v.graph = g;
      v.graph_point = i;
    }
    const double dist = (z.head(lay.dim) - data.centers.row(i).transpose()).norm() / data.lengthscale;
    const double dv = std::abs(dist - z[lay.r(i)]);
    if (dv > 1e-7 * (1.0 + dist) && dv > v.dist) {
      v.dist = dv;
      v.dist_point = i;
    }
  }
  return v;
}

// Returns false when no coordinate is wide enough to split.
bool branch_impl(const MiqpModel& model, const Relaxation& rel, bool force, std::pair<Node, Node>& out) {
  const Violations v = violations(model, rel);
  const Node& node = rel.node;
  const Vector& z = rel.point;
  const RelaxationLayout lay = layout_of(model);
  Node a = node, b = node;
  a.depth = b.depth = node.depth + 1;
  a.lower_bound = b.lower_bound = std::max(node.lower_bound, rel.bound);
  a.cuts = b.cuts = std::make_shared<const std::vector<Cut>>(rel.binding);

  if (v.graph_point >= 0) {
    const int i = v.graph_point;
    const auto [first, last] = node.segments[static_cast<std::size_t>(i)];
    const int s = std::clamp(segment_from_below(model.data.knots, z[lay.r(i)]), first, last - 1);
    a.segments[static_cast<std::size_t>(i)] = {first, s};
    b.segments[static_cast<std::size_t>(i)] = {s + 1, last};
    out = {std::move(a), std::move(b)};
    return true;
  }
  if (v.dist_point < 0 && !force) throw std::logic_error("branch: relaxed point needs no branching");

  int best = -1;
  double best_gap = 0.0;
  if (v.dist_point >= 0) {
    for (int d = 0; d < lay.dim; ++d) {
      const double gap = (z[d] - node.lower[d]) * (node.upper[d] - z[d]);
      if (node.upper[d] - node.lower[d] > kMinWidth && gap > best_gap) {
        best_gap = gap;
        best = d;
      }
    }
  }
  if (best < 0) {
    double width = kMinWidth;
    for (int d = 0; d < lay.dim; ++d) {
      if (node.upper[d] - node.lower[d] > width) {
        width = node.upper[d] - node.lower[d];
        best = d;
      }
    }
  }
  if (best < 0) return false;
  const double lo = node.lower[best], hi = node.upper[best], w = hi - lo;
  const double split = std::clamp(z[best], lo + 0.1 * w, hi - 0.1 * w);
  a.upper[best] = split;
  b.lower[best] = split;
  out = {std::move(a), std::move(b)};
  return true;
}

class Pool {
 public:
  explicit Pool(const MiqpModel& model, int capacity) : model_(model), capacity_(capacity) {}

  void offer(Assignment a) {
    const Vector x = point_of(model_, a.values);
    for (Assignment& p : items_) {
      if ((point_of(model_, p.values) - x).lpNorm<Eigen::Infinity>() <= 1e-6) {
        if (a.objective < p.objective) p = std::move(a);
        sort();
        return;
      }
    }
    items_.push_back(std::move(a));
    sort();
    if (static_cast<int>(items_.size()) > capacity_) items_.pop_back();
  }
  [[nodiscard]] bool empty() const { return items_.empty(); }
  [[nodiscard]] double best() const { return items_.empty() ? kInf : items_.front().objective; }
  [[nodiscard]] const std::vector<Assignment>& items() const { return items_; }

 private:
  void sort() {
    std::stable_sort(items_.begin(), items_.end(),
                     [](const Assignment& p, const Assignment& q) { return p.objective < q.objective; });
  }
  const MiqpModel& model_;
  int capacity_;
  std::vector<Assignment> items_;
};

struct NodeOrder {
  bool operator()(const Node& a, const Node& b) const {
    if (a.lower_bound != b.lower_bound) return a.lower_bound > b.lower_bound;
    return a.id > b.id;
  }
};

double relative_gap(double incumbent, double bound) {
  if (!std::isfinite(incumbent)) return kInf;
  if (bound >= incumbent) return 0.0;
  return (incumbent - bound) / std::max(1e-9, std::abs(incumbent));
}

void require_structure(const MiqpModel& model) {
  if (model.layout.mu < 0 || model.data.knots.size() < 2 || model.data.centers.rows() != model.num_points()) {
    throw std::invalid_argument("model lacks the structural data the solver needs");
  }
}

}  // namespace

void SolverConfig::validate() const {
  if (!(mip_gap >= 0.0 && mip_gap < 1.0)) throw std::invalid_argument("mip_gap must lie in [0, 1)");
  if (pool_size < 1) throw std::invalid_argument("pool_size must be >= 1");
  if (node_limit < 1) throw std::invalid_argument("node_limit must be >= 1");
  if (cut_rounds < 0) throw std::invalid_argument("cut_rounds must be >= 0");
  if (std::isnan(time_limit_s)) throw std::invalid_argument("time_limit_s must be a number");
}

std::string to_string(SolveStatus status) {
  switch (status) {
    case SolveStatus::Optimal:
      return "optimal";
    case SolveStatus::GapReached:
      return "gap_reached";
    case SolveStatus::TimeLimit:
      return "time_limit";
    case SolveStatus::NodeLimit:
      return "node_limit";
    case SolveStatus::Infeasible:
      return "infeasible";
  }
  return "unknown";
}

Node root_node(const MiqpModel& model) {
  require_structure(model);
  Node node;
  node.lower = model.data.lower;
  node.upper = model.data.upper;
  node.segments.assign(static_cast<std::size_t>(model.num_points()), {0, model.segments() - 1});
  return node;
}

Relaxation node_relaxation(const MiqpModel& model, const Node& node, int cut_rounds) {
  require_structure(model);
  return relax(model, node, cut_rounds);
}

std::pair<Node, Node> branch(const MiqpModel& model, const Relaxation& relaxation) {
  if (!relaxation.feasible) throw std::logic_error("branch: node relaxation is infeasible");
  std::pair<Node, Node> out;
  if (!branch_impl(model, relaxation, false, out)) throw std::logic_error("branch: node box is too narrow to split");
  return out;
}

SolveResult solve(const MiqpModel& model, const SolverConfig& config, const std::vector<Assignment>& warm_starts) {
  config.validate();
  require_structure(model);
  const auto start = std::chrono::steady_clock::now();
  auto elapsed = [&start] { return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count(); };

  SolveResult res;
  Pool pool(model, config.pool_size);
  for (const Assignment& w : warm_starts) {
    if (w.values.size() != model.num_variables() || max_violation(model, w.values) > 1e-6) {
      ++res.rejected_warm_starts;
      continue;
    }
    pool.offer({w.values, objective_value(model, w.values)});
  }
  auto finish = [&](SolveStatus status, double bound) {
    res.status = status;
    res.pool = pool.items();
    if (!pool.empty()) res.incumbent = pool.items().front();
    res.best_bound = std::min(bound, pool.best());
    res.gap = relative_gap(pool.best(), res.best_bound);
    return res;
  };
  if (config.time_limit_s <= 0.0) return finish(SolveStatus::TimeLimit, -kInf);

  std::priority_queue<Node, std::vector<Node>, NodeOrder> open;
  long next_id = 0;
  Node root = root_node(model);
  root.id = next_id++;
  open.push(root);
  double leaf_bound = kInf;
  std::mt19937_64 rng(config.seed);

  auto best_bound = [&] { return std::min({open.empty() ? kInf : open.top().lower_bound, leaf_bound, pool.best()}); };
  auto log = [&](const Node& node, double node_bound) {
    if (!config.node_log || res.nodes_explored % std::max(1, config.log_every) != 0) return;
    const double bb = best_bound();
    config.node_log({node.id, node.depth, node_bound, bb, pool.best(), relative_gap(pool.best(), bb)});
  };
  auto offer_point = [&](const Vector& x) {
    try {
      pool.offer(evaluate_candidate(model, x));
    } catch (const std::invalid_argument&) {
    }
  };

  while (!open.empty()) {
    if (relative_gap(pool.best(), best_bound()) <= config.mip_gap) return finish(SolveStatus::GapReached, best_bound());
    if (res.nodes_explored >= config.node_limit) return finish(SolveStatus::NodeLimit, best_bound());
    if (elapsed() > config.time_limit_s) return finish(SolveStatus::TimeLimit, best_bound());
    Node node = open.top();
    open.pop();
    const double inc = pool.best();
    if (node.lower_bound >= inc - 1e-9 * std::max(1.0, std::abs(inc))) continue;
    ++res.nodes_explored;

    Relaxation rel = relax(model, node, config.cut_rounds);
    if (rel.numerical_failure) {
      Node perturbed = node;
      std::uniform_real_distribution<double> u(0.0, 1e-9);
      for (Eigen::Index d = 0; d < perturbed.lower.size(); ++d) {
        perturbed.lower[d] -= u(rng);
        perturbed.upper[d] += u(rng);
      }
      perturbed.cuts.reset();
      rel = relax(model, perturbed, config.cut_rounds);
      if (rel.numerical_failure) {
        leaf_bound = std::min(leaf_bound, node.lower_bound);
        log(node, node.lower_bound);
        continue;
      }
    }
    if (!rel.feasible) {
      log(node, kInf);
      continue;
    }
    const double bound = std::max(node.lower_bound, rel.bound - 1e-9 * std::max(1.0, std::abs(rel.bound)));
    rel.bound = bound;

    const Vector x = rel.x(model);
    offer_point(x);
    if (node.depth == 0) offer_point(0.5 * (rel.node.lower + rel.node.upper));
    double cand = kInf;
    try {
      cand = evaluate_candidate(model, x).objective;
    } catch (const std::invalid_argument&) {
    }

    const double best = pool.best();
    if (bound >= best - 1e-9 * std::max(1.0, std::abs(best))) {
      log(rel.node, bound);
      continue;
    }
    if (cand <= bound + 1e-7 * std::max(1.0, std::abs(bound))) {
      leaf_bound = std::min(leaf_bound, bound);
      log(rel.node, bound);
      continue;
    }
    std::pair<Node, Node> kids;
    if (!branch_impl(model, rel, true, kids)) {
      leaf_bound = std::min(leaf_bound, bound);
      log(rel.node, bound);
      continue;
    }
    kids.first.id = next_id++;
    kids.second.id = next_id++;
    open.push(std::move(kids.first));
    open.push(std::move(kids.second));
    log(rel.node, bound);
  }
  if (pool.empty()) return finish(SolveStatus::Infeasible, kInf);
  return finish(SolveStatus::Optimal, best_bound());
}

}  // namespace pwlbo
