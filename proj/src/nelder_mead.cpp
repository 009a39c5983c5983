// Copyright 2026 The pwlbo Authors.
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <cmath>
#include <numeric>

#include "pwlbo/benchmarks.hpp"

namespace pwlbo {

NelderMeadResult nelder_mead(const std::function<double(const Vector&)>& objective, const Box& bounds,
                             const NelderMeadConfig& config) {
  const int n = bounds.dim();
  NelderMeadResult res;
  auto f = [&](const Vector& x) {
    ++res.evaluations;
    return objective(x);
  };
  const Vector x0 = bounds.project(config.start ? *config.start : Vector::Zero(n));
  std::vector<Vector> simplex{x0};
  for (int d = 0; d < n; ++d) {
    Vector v = x0;
    const double step = config.initial_step * (bounds.ub[d] - bounds.lb[d]);
    v[d] = (x0[d] + step <= bounds.ub[d]) ? x0[d] + step : x0[d] - step;
    simplex.push_back(v);
  }
  std::vector<double> fv;
  for (const Vector& v : simplex) fv.push_back(f(v));
  std::vector<int> order(static_cast<std::size_t>(n + 1));

  auto sort_simplex = [&] {
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return fv[a] < fv[b]; });
    std::vector<Vector> s2;
    std::vector<double> f2;
    for (int k : order) {
      s2.push_back(simplex[k]);
      f2.push_back(fv[k]);
    }
    simplex = std::move(s2);
    fv = std::move(f2);
  };

  sort_simplex();
  for (res.iterations = 0; res.iterations < config.max_iterations; ++res.iterations) {
    double xspread = 0.0, fspread = 0.0;
    for (int k = 1; k <= n; ++k) {
      xspread = std::max(xspread, (simplex[k] - simplex[0]).lpNorm<Eigen::Infinity>());
      fspread = std::max(fspread, std::abs(fv[k] - fv[0]));
    }
    if (xspread <= config.tol && fspread <= config.tol) break;

    Vector centroid = Vector::Zero(n);
    for (int k = 0; k < n; ++k) centroid += simplex[k];
    centroid /= n;
    const Vector& worst = simplex[n];
    const Vector xr = bounds.project(centroid + (centroid - worst));
    const double fr = f(xr);
    if (fr < fv[0]) {
      const Vector xe = bounds.project(centroid + 2.0 * (centroid - worst));
      const double fe = f(xe);
      if (fe < fr) {
        simplex[n] = xe;
        fv[n] = fe;
      } else {
        simplex[n] = xr;
        fv[n] = fr;
      }
    } else if (fr < fv[n - 1]) {
      simplex[n] = xr;
      fv[n] = fr;
    } else {
      bool shrink = false;
      if (fr < fv[n]) {
        const Vector xc = bounds.project(centroid + 0.5 * (xr - centroid));
        const double fc = f(xc);
        if (fc <= fr) {
          simplex[n] = xc;
          fv[n] = fc;
        } else {
          shrink = true;
        }
      } else {
        const Vector xcc = bounds.project(centroid + 0.5 * (worst - centroid));
        const double fcc = f(xcc);
        if (fcc < fv[n]) {
          simplex[n] = xcc;
          fv[n] = fcc;
        } else {
          shrink = true;
        }
      }
      if (shrink) {
        for (int k = 1; k <= n; ++k) {
          simplex[k] = simplex[0] + 0.5 * (simplex[k] - simplex[0]);
          fv[k] = f(simplex[k]);
        }
      }
    }
    sort_simplex();
  }
  res.x = simplex[0];
  res.value = fv[0];
  return res;
}

}  // namespace pwlbo
