// Copyright 2026 The pwlbo Authors.
// SPDX-License-Identifier: Apache-2.0

#include "pwlbo/bo.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <iostream>
#include <numbers>
#include <numeric>
#include <random>
#include <sstream>
#include <stdexcept>

#include "pwlbo/pwl_kernel.hpp"

namespace pwlbo {
namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr double kFeasTol = 1e-9;

// Purposes mixed into per-iteration seeds.
enum Purpose : std::uint64_t {
  kDesign = 1,
  kDesignRepair = 2,
  kFit = 3,
  kWarm = 4,
  kSolver = 5,
  kResample = 6,
  kFallback = 7,
};

std::uint64_t splitmix(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t t, std::uint64_t purpose, std::uint64_t index = 0) {
  return splitmix(splitmix(splitmix(splitmix(seed) ^ t) ^ purpose) ^ index);
}

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

double max_violation_of(const std::vector<KnownConstraint>& constraints, const Vector& x) {
  double v = 0.0;
  for (const KnownConstraint& c : constraints) v = std::max(v, c.violation(x));
  return v;
}

std::vector<std::vector<int>> single_group(int dim) {
  std::vector<int> all(static_cast<std::size_t>(dim));
  std::iota(all.begin(), all.end(), 0);
  return {all};
}

void validate_groups(const std::vector<std::vector<int>>& groups, int dim) {
  if (groups.empty()) throw ConfigError("addgp_groups is empty");
  std::vector<int> seen(static_cast<std::size_t>(dim), 0);
  for (const auto& g : groups) {
    if (g.empty()) throw ConfigError("addgp_groups contains an empty group");
    for (int d : g) {
      if (d < 0 || d >= dim) throw ConfigError("addgp_groups references missing dimension " + std::to_string(d + 1));
      if (seen[static_cast<std::size_t>(d)]++ > 0)
        throw ConfigError("addgp_groups lists dimension " + std::to_string(d + 1) + " twice");
    }
  }
  for (int d = 0; d < dim; ++d) {
    if (seen[static_cast<std::size_t>(d)] == 0)
      throw ConfigError("addgp_groups misses dimension " + std::to_string(d + 1));
  }
}

double iteration_beta(int t, int dim, const BoConfig& config) {
  return config.beta_rule == BetaRule::Empirical ? beta_schedule(t, dim, config.beta_coefficient)
                                                 : theoretical_beta(t, dim, config.theoretical);
}

BoTrace run_groups(const Problem& problem, const BoConfig& config, const std::vector<std::vector<int>>& groups) {
  const int dim = problem.bounds.dim();
  config.validate(dim);
  validate_groups(groups, dim);
  BoTrace trace;
  trace.problem = problem.name;
  trace.dim = dim;

  const int n0 = config.init_samples > 0 ? config.init_samples : std::min(10 * dim, 30);
  Matrix design = latin_hypercube(n0, problem.bounds, derive_seed(config.seed, 0, kDesign));
  for (int i = 0; i < n0; ++i) {
    if (max_violation_of(problem.constraints, design.row(i).transpose()) <= 0.0) continue;
    const auto draw = sample_feasible(problem.bounds, problem.constraints,
                                      derive_seed(config.seed, 0, kDesignRepair, static_cast<std::uint64_t>(i)),
                                      config.rejection_attempts);
    if (!draw) throw std::runtime_error("no feasible initial point found by rejection sampling");
    design.row(i) = draw->transpose();
  }

  Dataset data;
  double best = std::numeric_limits<double>::infinity();
  const auto record = [&](IterationRecord rec) {
    best = std::min(best, rec.value);
    rec.best = best;
    if (problem.known_optimum) rec.regret = best - *problem.known_optimum;
    trace.records.push_back(std::move(rec));
  };
  const auto evaluate = [&](const Vector& x, IterationRecord& rec) {
    const auto clock = std::chrono::steady_clock::now();
    try {
      rec.value = problem.objective(x);
    } catch (const std::exception& e) {
      trace.aborted = true;
      trace.abort_reason = e.what();
      return false;
    }
    rec.times.evaluate = seconds_since(clock);
    if (!std::isfinite(rec.value)) {
      trace.aborted = true;
      trace.abort_reason = "objective returned a non-finite value";
      return false;
    }
    return true;
  };

  for (int i = 0; i < n0; ++i) {
    IterationRecord rec;
    rec.iteration = 0;
    rec.x = design.row(i).transpose();
    if (!evaluate(rec.x, rec)) return trace;
    data.append(rec.x, rec.value);
    record(rec);
  }
  for (int t = 1; t <= config.max_iterations; ++t) {
    IterationRecord rec = bo_step(data, problem, t, config, groups);
    if (!evaluate(rec.x, rec)) return trace;
    data.append(rec.x, rec.value);
    record(rec);
  }
  return trace;
}

}  // namespace

double beta_schedule(int t, int dim, double coefficient) {
  if (t < 1) throw std::invalid_argument("beta_schedule needs t >= 1");
  if (dim < 1) throw std::invalid_argument("beta_schedule needs dim >= 1");
  return coefficient * dim * std::log(2.0 * t);
}

double theoretical_beta(int t, int dim, const TheoreticalBeta& p) {
  if (t < 1) throw std::invalid_argument("theoretical_beta needs t >= 1");
  if (dim < 1) throw std::invalid_argument("theoretical_beta needs dim >= 1");
  if (!(p.delta > 0.0 && p.delta < 1.0) || p.a <= 0.0 || p.b <= 0.0 || p.r <= 0.0)
    throw std::invalid_argument("theoretical_beta parameters out of range");
  const double tt = static_cast<double>(t) * t;
  const double pi2 = std::numbers::pi * std::numbers::pi;
  return 2.0 * std::log(2.0 * tt * pi2 / (3.0 * p.delta)) +
         2.0 * dim * std::log(tt * dim * p.b * p.r * std::sqrt(std::log(4.0 * dim * p.a / p.delta)));
}

double lcb(double mean, double std_dev, double beta) {
  if (std_dev < 0.0) throw std::invalid_argument("lcb needs std >= 0");
  if (beta < 0.0) throw std::invalid_argument("lcb needs beta >= 0");
  return mean - std::sqrt(beta) * std_dev;
}

Matrix latin_hypercube(int n, const Box& bounds, std::uint64_t seed) {
  if (n < 1) throw std::invalid_argument("latin_hypercube needs n >= 1");
  const int dim = bounds.dim();
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  Matrix X(n, dim);
  std::vector<int> perm(static_cast<std::size_t>(n));
  for (int d = 0; d < dim; ++d) {
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    const double w = bounds.ub[d] - bounds.lb[d];
    for (int i = 0; i < n; ++i) {
      const double u = (perm[static_cast<std::size_t>(i)] + unif(rng)) / n;
      X(i, d) = std::min(bounds.lb[d] + w * u, bounds.ub[d]);
    }
  }
  return X;
}

Vector polish(const Vector& x0, const std::function<double(const Vector&)>& f, const Box& bounds, int steps,
              double step_size, const std::vector<KnownConstraint>& constraints) {
  constexpr double h = 1e-6;
  Vector x = bounds.project(x0);
  if ((x - x0).lpNorm<Eigen::Infinity>() > 0.0 && f(x) > f(x0)) x = x0;
  double fx = f(x);
  const int dim = static_cast<int>(x.size());
  for (int s = 0; s < steps; ++s) {
    Vector grad(dim);
    for (int d = 0; d < dim; ++d) {
      Vector xp = x, xm = x;
      xp[d] = std::min(x[d] + h, bounds.ub[d]);
      xm[d] = std::max(x[d] - h, bounds.lb[d]);
      grad[d] = (f(xp) - f(xm)) / (xp[d] - xm[d]);
    }
    // Drop components that push through an active bound.
    for (int d = 0; d < dim; ++d) {
      if ((x[d] <= bounds.lb[d] && grad[d] > 0.0) || (x[d] >= bounds.ub[d] && grad[d] < 0.0)) grad[d] = 0.0;
    }
    const double norm = grad.norm();
    if (!(norm > 0.0) || !std::isfinite(norm)) break;
    const Vector dir = -grad / norm;
    double alpha = step_size;
    bool moved = false;
    for (int k = 0; k <= 20; ++k, alpha *= 0.5) {
      const Vector trial = bounds.project(x + alpha * dir);
      if (max_violation_of(constraints, trial) > kFeasTol) continue;
      const double ft = f(trial);
      if (ft < fx) {
        x = trial;
        fx = ft;
        moved = true;
        break;
      }
    }
    if (!moved) break;
  }
  return x;
}

Vector polish(const Vector& x0, const GpModel& gp, double beta, int steps, double step_size, const Box& bounds) {
  return polish(x0, [&](const Vector& x) { return gp.lcb(x, beta); }, bounds, steps, step_size);
}

Problem make_problem(const BenchmarkFn& fn) {
  Problem p;
  p.name = fn.name;
  p.objective = fn.eval;
  p.bounds = fn.bounds;
  p.constraints = fn.constraints;
  p.known_optimum = fn.reference_min;
  return p;
}

BoConfig::BoConfig() { sub_solver.time_limit_s = 30.0; }

void BoConfig::validate(int dim) const {
  if (dim < 1) throw ConfigError("problem dimension must be >= 1");
  if (max_iterations < 0) throw ConfigError("max_iterations must be >= 0");
  if (init_samples != 0 && init_samples < 2) throw ConfigError("init_samples must be >= 2");
  if (pool_sub < 1 || pool_rand < 1) throw ConfigError("pool sizes must be >= 1");
  if (!(beta_coefficient >= 0.0)) throw ConfigError("beta coefficient must be >= 0");
  if (polish_steps < 0) throw ConfigError("polish_steps must be >= 0");
  if (!(polish_step_size > 0.0)) throw ConfigError("polish_step_size must be > 0");
  if (fit_restarts < 1) throw ConfigError("fit_restarts must be >= 1");
  if (!(noise > 0.0)) throw ConfigError("noise must be > 0");
  if (rejection_attempts < 1) throw ConfigError("rejection_attempts must be >= 1");
  if (max_segment_scale < 1) throw ConfigError("max_segment_scale must be >= 1");
  if (!addgp_groups.empty()) validate_groups(addgp_groups, dim);
  try {
    solver.validate();
    sub_solver.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
}

std::optional<Vector> sample_feasible(const Box& bounds, const std::vector<KnownConstraint>& constraints,
                                      std::uint64_t seed, int attempts) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const int dim = bounds.dim();
  for (int a = 0; a < attempts; ++a) {
    Vector x(dim);
    for (int d = 0; d < dim; ++d) x[d] = bounds.lb[d] + (bounds.ub[d] - bounds.lb[d]) * unif(rng);
    if (max_violation_of(constraints, x) <= 0.0) return x;
  }
  return std::nullopt;
}

WarmStartPool warm_start(const ApproxGp& gp, int component, const MiqpModel& full, const Box& bounds,
                         const std::vector<KnownConstraint>& known, const BoConfig& config, std::uint64_t seed) {
  WarmStartPool pool;
  const MiqpModel sub = build_sub_model(gp, component, bounds, known);
  SolverConfig sc = config.sub_solver;
  sc.pool_size = config.pool_sub;
  sc.seed = derive_seed(seed, 0, kSolver);
  const SolveResult res = solve(sub, sc);
  for (const Assignment& a : res.pool) {
    try {
      pool.candidates.push_back(evaluate_candidate(full, point_of(sub, a.values)));
      ++pool.from_sub_model;
    } catch (const std::invalid_argument&) {
      // Sub-model point outside the full model's tolerance; skip it.
    }
  }
  for (int k = 0; k < config.pool_rand; ++k) {
    const auto draw = sample_feasible(bounds, known, derive_seed(seed, 0, kWarm, static_cast<std::uint64_t>(k)),
                                      config.rejection_attempts);
    if (!draw) {
      pool.sampling_exhausted = true;
      std::clog << "warning: rejection sampling exhausted " << config.rejection_attempts
                << " attempts; continuing with the sub-problem pool only\n";
      break;
    }
    pool.candidates.push_back(evaluate_candidate(full, *draw));
    ++pool.from_random;
  }
  return pool;
}

AcquisitionResult optimize_acquisition(const ApproxGp& agp, const AdditiveGpModel& exact, int g, double beta,
                                       const Box& unit, const std::vector<KnownConstraint>& known,
                                       const BoConfig& config, std::uint64_t seed, StageTimes* stage_times) {
  StageTimes local;
  StageTimes& times = stage_times ? *stage_times : local;
  AcquisitionResult out;
  const auto true_lcb = [&](const Vector& xg) { return exact.component_lcb(g, xg, beta); };

  auto clock = std::chrono::steady_clock::now();
  const MiqpModel full = build_full_model(agp, g, beta, unit, known);
  times.linearize += seconds_since(clock);

  clock = std::chrono::steady_clock::now();
  WarmStartPool warm;
  if (config.warm_start) warm = warm_start(agp, g, full, unit, known, config, derive_seed(seed, 0, kWarm));
  times.warm_start += seconds_since(clock);

  std::vector<Vector> candidates;
  for (const Assignment& a : warm.candidates) {
    const Vector xg = point_of(full, a.values);
    const double v = true_lcb(xg);
    if (std::isnan(out.lcb_warm) || v < out.lcb_warm) out.lcb_warm = v;
  }

  clock = std::chrono::steady_clock::now();
  bool solver_ok = false;
  if (config.use_solver) {
    SolverConfig sc = config.solver;
    sc.seed = derive_seed(seed, 0, kSolver);
    const SolveResult res = solve(full, sc, warm.candidates);
    out.status = to_string(res.status);
    out.gap = res.gap;
    out.nodes = res.nodes_explored;
    solver_ok = res.status != SolveStatus::Infeasible && !res.pool.empty();
    for (const Assignment& a : res.pool) candidates.push_back(point_of(full, a.values));
  } else {
    out.status = "disabled";
  }
  times.solve += seconds_since(clock);
  out.fallback = config.use_solver && !solver_ok;
  for (const Assignment& a : warm.candidates) candidates.push_back(point_of(full, a.values));

  Vector selected;
  double selected_value = std::numeric_limits<double>::infinity();
  for (const Vector& c : candidates) {
    const Vector xg = unit.project(c);
    if (max_violation_of(known, xg) > kFeasTol) continue;
    const double v = true_lcb(xg);
    if (v < selected_value) {
      selected_value = v;
      selected = xg;
    }
  }
  if (selected.size() == 0) {
    out.fallback = true;
    const auto draw = sample_feasible(unit, known, derive_seed(seed, 0, kFallback), config.rejection_attempts);
    if (!draw) throw std::runtime_error("no feasible candidate for the acquisition step");
    selected = *draw;
    selected_value = true_lcb(selected);
  }
  out.lcb_pool = selected_value;

  clock = std::chrono::steady_clock::now();
  out.x = polish(selected, true_lcb, unit, config.polish_steps, config.polish_step_size, known);
  out.lcb_polished = true_lcb(out.x);
  times.polish += seconds_since(clock);
  return out;
}

ApproxGp build_approx_gp(const Dataset& unit_data, const std::vector<KernelGroup>& groups, double noise,
                         int max_scale, int* scale_used) {
  for (int scale = 1;; scale *= 2) {
    std::vector<PwlComponent> components;
    for (const KernelGroup& kg : groups) {
      const int gd = static_cast<int>(kg.dims.size());
      components.push_back(
          {PwlKernel(build_breakpoints(gd, Box::unit(gd), kg.params.lengthscale, scale), kg.params), kg.dims});
    }
    try {
      ApproxGp gp(std::move(components), unit_data, noise);
      if (scale_used) *scale_used = scale;
      return gp;
    } catch (const NumericalError&) {
      if (2 * scale > max_scale) throw;
    }
  }
}

double BoTrace::best() const {
  return records.empty() ? std::numeric_limits<double>::infinity() : records.back().best;
}

IterationRecord bo_step(const Dataset& data, const Problem& problem, int t, const BoConfig& config,
                        const std::vector<std::vector<int>>& groups_in) {
  if (data.size() < 1) throw std::invalid_argument("bo_step needs a nonempty dataset");
  const int dim = problem.bounds.dim();
  const std::vector<std::vector<int>> groups = groups_in.empty() ? single_group(dim) : groups_in;
  validate_groups(groups, dim);

  IterationRecord rec;
  rec.iteration = t;
  rec.beta = iteration_beta(t, dim, config);

  auto clock = std::chrono::steady_clock::now();
  const auto [sd, transform] = standardize(data, problem.bounds);
  std::vector<KernelGroup> fitted;
  for (std::size_t g = 0; g < groups.size(); ++g) {
    FitOptions fo;
    fo.restarts = config.fit_restarts;
    fo.seed = derive_seed(config.seed, static_cast<std::uint64_t>(t), kFit, g);
    fo.bounds = config.fit_bounds;
    fo.noise = config.noise;
    fitted.push_back({groups[g], fit_hyperparameters(sd.slice(groups[g]), fo)});
  }
  const AdditiveGpModel exact(sd, fitted, config.noise);
  rec.times.fit = seconds_since(clock);

  clock = std::chrono::steady_clock::now();
  const std::vector<KnownConstraint> scaled = scale_constraints(problem.constraints, transform);
  const ApproxGp agp = build_approx_gp(sd, fitted, config.noise, config.max_segment_scale, &rec.segment_scale);
  rec.times.linearize = seconds_since(clock);

  Vector z(dim);
  rec.lcb_polished = rec.lcb_pool = 0.0;
  rec.lcb_warm = config.warm_start ? 0.0 : kNaN;
  rec.gap = 0.0;
  rec.status.clear();
  for (std::size_t g = 0; g < groups.size(); ++g) {
    const int gd = static_cast<int>(groups[g].size());
    const double beta_g = iteration_beta(t, gd, config);
    const std::vector<KnownConstraint> known = restrict_constraints(scaled, groups[g]);
    const AcquisitionResult out =
        optimize_acquisition(agp, exact, static_cast<int>(g), beta_g, Box::unit(gd), known, config,
                             derive_seed(config.seed, static_cast<std::uint64_t>(t), kSolver, g), &rec.times);
    for (int k = 0; k < gd; ++k) z[groups[g][static_cast<std::size_t>(k)]] = out.x[k];
    rec.lcb_polished += out.lcb_polished;
    rec.lcb_pool += out.lcb_pool;
    rec.lcb_warm += out.lcb_warm;
    rec.gap = std::isnan(out.gap) ? rec.gap : std::max(rec.gap, out.gap);
    rec.status += (g == 0 ? "" : "/") + out.status;
    rec.fallback = rec.fallback || out.fallback;
    rec.nodes += out.nodes;
  }

  for (int i = 0; i < sd.size(); ++i) {
    if ((sd.X.row(i).transpose() - z).lpNorm<Eigen::Infinity>() <= 1e-6) {
      const auto draw = sample_feasible(Box::unit(dim), scaled,
                                        derive_seed(config.seed, static_cast<std::uint64_t>(t), kResample),
                                        config.rejection_attempts);
      if (draw) {
        z = *draw;
        rec.resampled = true;
      }
      break;
    }
  }
  rec.x = problem.bounds.project(transform.unscale_input(z));
  return rec;
}

BoTrace run_bo(const Problem& problem, const BoConfig& config) {
  return run_groups(problem, config, single_group(problem.bounds.dim()));
}

BoTrace additive_run(const Problem& problem, const BoConfig& config) {
  if (config.addgp_groups.empty()) throw ConfigError("additive_run needs addgp_groups");
  return run_groups(problem, config, config.addgp_groups);
}

void write_trace_csv(std::ostream& out, const BoTrace& trace) {
  out << "iteration";
  for (int d = 0; d < trace.dim; ++d) out << ",x" << d + 1;
  out << ",f,best,regret,beta,gap,status,lcb_polished,lcb_pool,lcb_warm,fallback,resampled,nodes,segment_scale\n";
  for (const IterationRecord& r : trace.records) {
    out << r.iteration;
    for (int d = 0; d < trace.dim; ++d) out << ',' << format_double(r.x[d]);
    out << ',' << format_double(r.value) << ',' << format_double(r.best) << ',' << format_double(r.regret) << ','
        << format_double(r.beta) << ',' << format_double(r.gap) << ',' << r.status << ','
        << format_double(r.lcb_polished) << ',' << format_double(r.lcb_pool) << ',' << format_double(r.lcb_warm)
        << ',' << (r.fallback ? 1 : 0) << ',' << (r.resampled ? 1 : 0) << ',' << r.nodes << ',' << r.segment_scale << '\n';
  }
}

void write_timings_csv(std::ostream& out, const BoTrace& trace) {
  out << "iteration,fit,linearize,warm_start,solve,polish,evaluate\n";
  for (const IterationRecord& r : trace.records) {
    const StageTimes& s = r.times;
    out << r.iteration << ',' << format_double(s.fit) << ',' << format_double(s.linearize) << ','
        << format_double(s.warm_start) << ',' << format_double(s.solve) << ',' << format_double(s.polish) << ','
        << format_double(s.evaluate) << '\n';
  }
}

BoTrace read_trace_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw ConfigError("trace file is empty");
  const std::vector<std::string> header = split_fields(line);
  BoTrace trace;
  for (const std::string& h : header) {
    if (h.size() > 1 && h[0] == 'x' && std::isdigit(static_cast<unsigned char>(h[1]))) ++trace.dim;
  }
  const auto column = [&](const std::string& name) {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw ConfigError("trace file lacks column " + name);
    return static_cast<std::size_t>(it - header.begin());
  };
  const std::size_t c_iter = column("iteration"), c_f = column("f"), c_best = column("best"),
                    c_regret = column("regret"), c_beta = column("beta"), c_gap = column("gap"),
                    c_status = column("status"), c_pol = column("lcb_polished"), c_pool = column("lcb_pool"),
                    c_warm = column("lcb_warm"), c_fb = column("fallback"), c_rs = column("resampled"),
                    c_nodes = column("nodes"), c_scale = column("segment_scale");
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const std::vector<std::string> f = split_fields(line);
    if (f.size() != header.size()) throw ConfigError("trace row has " + std::to_string(f.size()) + " fields");
    IterationRecord r;
    r.iteration = std::stoi(f[c_iter]);
    r.x.resize(trace.dim);
    for (int d = 0; d < trace.dim; ++d) r.x[d] = parse_double(f[column("x" + std::to_string(d + 1))]);
    r.value = parse_double(f[c_f]);
    r.best = parse_double(f[c_best]);
    r.regret = parse_double(f[c_regret]);
    r.beta = parse_double(f[c_beta]);
    r.gap = parse_double(f[c_gap]);
    r.status = f[c_status];
    r.lcb_polished = parse_double(f[c_pol]);
    r.lcb_pool = parse_double(f[c_pool]);
    r.lcb_warm = parse_double(f[c_warm]);
    r.fallback = f[c_fb] == "1";
    r.resampled = f[c_rs] == "1";
    r.nodes = std::stol(f[c_nodes]);
    r.segment_scale = std::stoi(f[c_scale]);
    trace.records.push_back(std::move(r));
  }
  return trace;
}

}  // namespace pwlbo
