// Copyright 2026 The pwlbo Authors.
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cmath>
#include <random>
#include <set>
#include <sstream>

#include "pwlbo/bo.hpp"
#include "unit/oracles.hpp"

using namespace pwlbo;

namespace {

BoConfig quick_config(std::uint64_t seed) {
  BoConfig c;
  c.seed = seed;
  c.solver.node_limit = 20;
  c.sub_solver.node_limit = 10;
  c.fit_restarts = 3;
  return c;
}

Dataset sample_dataset(const Problem& p, int n, std::uint64_t seed) {
  const Matrix X = latin_hypercube(n, p.bounds, seed);
  Vector y(n);
  for (int i = 0; i < n; ++i) y[i] = p.objective(X.row(i).transpose());
  return {X, y};
}

}  // namespace

TEST_SUITE("bo") {
  TEST_CASE("exploration schedule") {
    CHECK(std::abs(beta_schedule(1, 2) - 0.27726) < 1e-5);
    CHECK(std::abs(beta_schedule(1, 1) - 0.13863) < 1e-5);
    for (int t = 1; t <= 200; ++t) {
      for (int d = 1; d <= 5; ++d) CHECK(std::abs(beta_schedule(t, d) - 0.2 * d * std::log(2.0 * t)) <= 1e-12);
    }
    CHECK_THROWS_AS(beta_schedule(0, 2), std::invalid_argument);
    const TheoreticalBeta tb{0.1, 1.0, 1.0, 1.0};
    const double pi2 = M_PI * M_PI;
    for (int t : {1, 5, 30}) {
      const double expect = 2.0 * std::log(2.0 * t * t * pi2 / (3.0 * 0.1)) +
                            2.0 * 2 * std::log(t * t * 2 * 1.0 * 1.0 * std::sqrt(std::log(4.0 * 2 * 1.0 / 0.1)));
      CHECK(theoretical_beta(t, 2, tb) == doctest::Approx(expect).epsilon(1e-12));
    }
  }

  TEST_CASE("lower confidence bound") {
    CHECK(lcb(1.0, 0.0, 123.0) == 1.0);
    CHECK(lcb(0.0, 1.0, 4.0) == -2.0);
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> u(-3.0, 3.0);
    for (int q = 0; q < 100; ++q) {
      const double m = u(rng);
      CHECK(lcb(m, std::abs(u(rng)), std::abs(u(rng))) <= m);
    }
  }

  TEST_CASE("Latin hypercube stratification") {
    const Matrix q = latin_hypercube(4, Box::unit(1), 3);
    std::set<int> quartiles;
    for (int i = 0; i < 4; ++i) quartiles.insert(static_cast<int>(q(i, 0) * 4.0));
    CHECK(quartiles == std::set<int>{0, 1, 2, 3});
    Vector lo(3), hi(3);
    lo << -1.0, 0.0, 10.0;
    hi << 1.0, 5.0, 20.0;
    const Box box(lo, hi);
    const Matrix d = latin_hypercube(17, box, 9);
    for (int c = 0; c < 3; ++c) {
      std::set<int> strata;
      for (int i = 0; i < 17; ++i) {
        CHECK(box.contains(d.row(i).transpose()));
        strata.insert(static_cast<int>((d(i, c) - lo[c]) / (hi[c] - lo[c]) * 17.0));
      }
      CHECK(strata.size() == 17);
    }
    CHECK(latin_hypercube(17, box, 9) == d);
    int differ = 0;
    for (std::uint64_t s = 0; s < 100; ++s) differ += latin_hypercube(5, box, 2 * s) != latin_hypercube(5, box, 2 * s + 1);
    CHECK(differ >= 99);
  }

  TEST_CASE("polish descends and respects the box and constraints") {
    const auto bowl = [](const Vector& x) { return (x[0] - 0.3) * (x[0] - 0.3) + 0.1 * std::sin(3.0 * x[0]); };
    const Box unit = Box::unit(1);
    const Vector out = polish(Vector::Constant(1, 1.0), bowl, unit, 200, 0.05);
    const auto [grid, arg] = oracle::grid_min([&](const Eigen::VectorXd& x) { return bowl(x); }, Vector::Zero(1),
                                              Vector::Ones(1), 100000);
    CHECK(std::abs(out[0] - arg[0]) < 1e-3);
    CHECK(bowl(out) <= bowl(Vector::Constant(1, 1.0)));
    const Vector still = polish(arg, bowl, unit, 50, 0.05);
    CHECK(std::abs(still[0] - arg[0]) < 1e-4);
    // Minimum outside the box: ends on the face.
    const auto slope = [](const Vector& x) { return x[0] + x[1]; };
    const Vector face = polish(Vector::Constant(2, 0.5), slope, Box::unit(2), 100, 0.1);
    CHECK(face.minCoeff() >= 0.0);
    CHECK(face.maxCoeff() < 1e-3);
    KnownConstraint c;
    c.linear = {{0, -1.0}, {1, -1.0}};
    c.rhs = -0.6;  // x0 + x1 >= 0.6
    const Vector held = polish(Vector::Constant(2, 0.5), slope, Box::unit(2), 100, 0.1, {c});
    CHECK(c.violation(held) <= 1e-9);
    CHECK(slope(held) <= 1.0);
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    Matrix X(6, 2);
    Vector y(6);
    for (int i = 0; i < 6; ++i) {
      X.row(i) << u(rng), u(rng);
      y[i] = u(rng);
    }
    const GpModel gp(Dataset(X, y), {1.0, 0.3, 1e-6});
    for (int q = 0; q < 20; ++q) {
      Vector x0(2);
      x0 << u(rng), u(rng);
      const Vector x1 = polish(x0, gp, 1.0, 50, 0.05, Box::unit(2));
      CHECK(gp.lcb(x1, 1.0) <= gp.lcb(x0, 1.0));
      CHECK(Box::unit(2).contains(x1));
    }
  }

  TEST_CASE("feasible sampling") {
    KnownConstraint c;
    c.linear = {{0, 1.0}, {1, 1.0}};
    c.rhs = 0.2;
    for (std::uint64_t s = 0; s < 20; ++s) {
      const auto x = sample_feasible(Box::unit(2), {c}, s, 10000);
      REQUIRE(x);
      CHECK(c.violation(*x) == 0.0);
    }
    KnownConstraint impossible;
    impossible.linear = {{0, 1.0}};
    impossible.rhs = -1.0;
    CHECK_FALSE(sample_feasible(Box::unit(2), {impossible}, 1, 100));
  }

  TEST_CASE("warm-start pool") {
    std::mt19937_64 rng(8);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    Matrix X(5, 2);
    Vector y(5);
    for (int i = 0; i < 5; ++i) {
      X.row(i) << u(rng), u(rng);
      y[i] = u(rng);
    }
    const KernelParams p{1.0, 0.3, 1e-6};
    const Dataset data(X, y);
    const ApproxGp gp({{PwlKernel(build_breakpoints(2, Box::unit(2), 0.3), p), {0, 1}}}, data, 1e-6);
    const MiqpModel full = build_full_model(gp, 0, 1.0, Box::unit(2));
    BoConfig cfg = quick_config(1);
    const WarmStartPool pool = warm_start(gp, 0, full, Box::unit(2), {}, cfg, 11);
    CHECK(pool.from_random == cfg.pool_rand);
    CHECK(pool.from_sub_model >= 1);
    CHECK(pool.from_sub_model <= cfg.pool_sub);
    CHECK(static_cast<int>(pool.candidates.size()) == pool.from_sub_model + pool.from_random);
    double best = std::numeric_limits<double>::infinity();
    for (const Assignment& a : pool.candidates) {
      CHECK(max_violation(full, a.values) <= 1e-7);
      best = std::min(best, a.objective);
    }
    const SolveResult r = solve(full, cfg.solver, pool.candidates);
    REQUIRE(r.incumbent);
    CHECK(r.incumbent->objective <= best + 1e-12);

    KnownConstraint c;
    c.linear = {{0, 1.0}, {1, 1.0}};
    c.rhs = 0.5;
    const MiqpModel cm = build_full_model(gp, 0, 1.0, Box::unit(2), {c});
    const WarmStartPool cp = warm_start(gp, 0, cm, Box::unit(2), {c}, cfg, 11);
    for (const Assignment& a : cp.candidates) CHECK(c.violation(point_of(cm, a.values)) <= 1e-7);

    KnownConstraint thin;
    thin.linear = {{0, 1.0}, {1, 1.0}};
    thin.rhs = 1e-9;
    const MiqpModel tm = build_full_model(gp, 0, 1.0, Box::unit(2), {thin});
    cfg.rejection_attempts = 50;
    const WarmStartPool tp = warm_start(gp, 0, tm, Box::unit(2), {thin}, cfg, 3);
    CHECK(tp.sampling_exhausted);
    CHECK(tp.from_random == 0);
  }

  TEST_CASE("acquisition selection chain") {
    const Problem prob = make_problem(find_benchmark("branin"));
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      const Dataset raw = sample_dataset(prob, 8, seed);
      const auto [sd, tr] = standardize(raw, prob.bounds);
      const KernelGroup g{{0, 1}, {1.0, 0.3, 1e-6}};
      const AdditiveGpModel exact(sd, {g}, 1e-6);
      const ApproxGp agp = build_approx_gp(sd, {g}, 1e-6);
      BoConfig cfg = quick_config(seed);
      const AcquisitionResult a = optimize_acquisition(agp, exact, 0, 0.5, Box::unit(2), {}, cfg, seed);
      CHECK(a.lcb_polished <= a.lcb_pool);
      CHECK(a.lcb_pool <= a.lcb_warm);
      CHECK(a.lcb_polished == doctest::Approx(exact.component_lcb(0, a.x, 0.5)).epsilon(1e-14));
      CHECK(Box::unit(2).contains(a.x));
      CHECK_FALSE(a.fallback);
      cfg.use_solver = false;
      const AcquisitionResult b = optimize_acquisition(agp, exact, 0, 0.5, Box::unit(2), {}, cfg, seed);
      CHECK(b.status == "disabled");
      CHECK(b.lcb_pool == b.lcb_warm);
      CHECK(b.lcb_polished <= b.lcb_pool);
    }
  }

  TEST_CASE("segment refinement repairs indefinite approximations") {
    // Close points with a long lengthscale make the coarse approximation
    // indefinite.
    Matrix X(4, 1);
    X << 0.0, 0.001, 0.002, 0.5;
    const Dataset d(X, Vector::LinSpaced(4, 0.0, 1.0));
    const KernelGroup g{{0}, {1.0, 5.0, 1e-10}};
    int used = 0;
    try {
      const ApproxGp gp = build_approx_gp(d, {g}, 1e-10, 16, &used);
      CHECK(used >= 1);
      CHECK(used <= 16);
    } catch (const NumericalError&) {
      CHECK(used == 0);
    }
    int scale = 0;
    const ApproxGp ok = build_approx_gp(d, {{{0}, {1.0, 0.2, 1e-6}}}, 1e-6, 16, &scale);
    CHECK(scale == 1);
  }

  TEST_CASE("proposals on Branin stay in the box") {
    const Problem prob = make_problem(find_benchmark("branin"));
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
      const Dataset raw = sample_dataset(prob, 5, 1000 + seed);
      BoConfig cfg = quick_config(seed);
      cfg.solver.node_limit = 3;
      cfg.sub_solver.node_limit = 3;
      cfg.fit_restarts = 2;
      cfg.polish_steps = 5;
      const IterationRecord r = bo_step(raw, prob, 1, cfg);
      CHECK(prob.bounds.contains(r.x));
      CHECK(r.lcb_polished <= r.lcb_pool);
      CHECK(r.lcb_pool <= r.lcb_warm);
    }
  }

  TEST_CASE("constrained proposals are feasible") {
    const Problem prob = make_problem(find_benchmark("ks224"));
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      Dataset raw;
      for (int k = 0; raw.size() < 6; ++k) {
        const auto x = sample_feasible(prob.bounds, prob.constraints, seed * 100 + static_cast<std::uint64_t>(k), 10000);
        raw.append(*x, prob.objective(*x));
      }
      const IterationRecord r = bo_step(raw, prob, 1 + static_cast<int>(seed), quick_config(seed));
      CHECK(check_constraints(prob.constraints, prob.bounds, r.x, 1e-6).feasible);
    }
  }

  TEST_CASE("runs: initial design, monotone best, regret") {
    const Problem prob = make_problem(find_benchmark("multimodal"));
    BoConfig cfg = quick_config(4);
    cfg.max_iterations = 0;
    const BoTrace empty = run_bo(prob, cfg);
    CHECK(empty.records.size() == 10);
    for (const auto& r : empty.records) CHECK(r.iteration == 0);
    cfg.max_iterations = 4;
    const BoTrace t = run_bo(prob, cfg);
    REQUIRE(t.records.size() == 14);
    CHECK_FALSE(t.aborted);
    for (std::size_t i = 1; i < t.records.size(); ++i) CHECK(t.records[i].best <= t.records[i - 1].best);
    for (const auto& r : t.records) {
      CHECK(r.regret >= 0.0);
      CHECK(r.regret == r.best - *prob.known_optimum);
    }
    for (std::size_t i = 10; i < 14; ++i) {
      CHECK(t.records[i].iteration == static_cast<int>(i) - 9);
      CHECK(t.records[i].beta == doctest::Approx(beta_schedule(static_cast<int>(i) - 9, 1)).epsilon(1e-14));
    }
    const BoTrace again = run_bo(prob, cfg);
    for (std::size_t i = 0; i < 14; ++i) CHECK(again.records[i].x == t.records[i].x);
    cfg.init_samples = 3;
    CHECK(run_bo(prob, cfg).records.size() == 7);
  }

  TEST_CASE("constrained runs start from a feasible design") {
    const Problem prob = make_problem(find_benchmark("ks224"));
    BoConfig cfg = quick_config(2);
    cfg.max_iterations = 0;
    const BoTrace t = run_bo(prob, cfg);
    CHECK(t.records.size() == 20);
    for (const auto& r : t.records) CHECK(check_constraints(prob.constraints, prob.bounds, r.x).feasible);
  }

  TEST_CASE("objective failures abort with a partial trace") {
    Problem prob = make_problem(find_benchmark("multimodal"));
    int calls = 0;
    prob.objective = [&](const Vector& x) {
      if (++calls > 11) throw std::runtime_error("simulator crashed");
      return eval_multimodal(x);
    };
    BoConfig cfg = quick_config(1);
    cfg.max_iterations = 5;
    const BoTrace t = run_bo(prob, cfg);
    CHECK(t.aborted);
    CHECK(t.abort_reason == "simulator crashed");
    CHECK(t.records.size() == 11);
    prob.objective = [](const Vector&) { return std::nan(""); };
    const BoTrace n = run_bo(prob, cfg);
    CHECK(n.aborted);
    CHECK(n.records.empty());
  }

  TEST_CASE("single-group additive run equals the plain run") {
    const Problem prob = make_problem(find_benchmark("branin"));
    BoConfig cfg = quick_config(7);
    cfg.max_iterations = 2;
    const BoTrace plain = run_bo(prob, cfg);
    cfg.addgp_groups = {{0, 1}};
    const BoTrace add = additive_run(prob, cfg);
    REQUIRE(add.records.size() == plain.records.size());
    for (std::size_t i = 0; i < add.records.size(); ++i)
      CHECK((add.records[i].x - plain.records[i].x).cwiseAbs().maxCoeff() <= 1e-9);
    cfg.addgp_groups = {{0}, {1}};
    const BoTrace split = additive_run(prob, cfg);
    CHECK(split.records.size() == plain.records.size());
    CHECK(split.records.back().status.find('/') != std::string::npos);
    cfg.addgp_groups = {{0}, {2}};
    CHECK_THROWS_AS(additive_run(prob, cfg), ConfigError);
    cfg.addgp_groups = {};
    CHECK_THROWS_AS(additive_run(prob, cfg), ConfigError);
  }

  TEST_CASE("configuration checks") {
    BoConfig c;
    CHECK_NOTHROW(c.validate(2));
    c.pool_sub = 0;
    CHECK_THROWS_AS(c.validate(2), ConfigError);
    c = BoConfig{};
    c.solver.mip_gap = 2.0;
    CHECK_THROWS_AS(c.validate(2), ConfigError);
    c = BoConfig{};
    c.addgp_groups = {{0}, {0, 1}};
    CHECK_THROWS_AS(c.validate(2), ConfigError);
    c = BoConfig{};
    c.addgp_groups = {{0}};
    CHECK_THROWS_AS(c.validate(2), ConfigError);
    CHECK(BoConfig{}.sub_solver.time_limit_s == 30.0);
    CHECK(BoConfig{}.solver.mip_gap == 0.5);
    CHECK(BoConfig{}.pool_sub == 10);
  }

  TEST_CASE("trace text round trip") {
    const Problem prob = make_problem(find_benchmark("branin"));
    BoConfig cfg = quick_config(3);
    cfg.max_iterations = 2;
    const BoTrace t = run_bo(prob, cfg);
    std::stringstream ss;
    write_trace_csv(ss, t);
    const std::string text = ss.str();
    CHECK(text.rfind("iteration,x1,x2,f,best,regret,beta,gap,status", 0) == 0);
    const BoTrace back = read_trace_csv(ss);
    REQUIRE(back.records.size() == t.records.size());
    CHECK(back.dim == 2);
    for (std::size_t i = 0; i < t.records.size(); ++i) {
      CHECK(back.records[i].x == t.records[i].x);
      CHECK(back.records[i].value == t.records[i].value);
      CHECK(back.records[i].best == t.records[i].best);
      CHECK(back.records[i].status == t.records[i].status);
      CHECK(back.records[i].resampled == t.records[i].resampled);
    }
    std::stringstream again;
    write_trace_csv(again, back);
    CHECK(again.str() == text);
    std::stringstream times;
    write_timings_csv(times, t);
    std::string header;
    std::getline(times, header);
    CHECK(header == "iteration,fit,linearize,warm_start,solve,polish,evaluate");
  }
}
