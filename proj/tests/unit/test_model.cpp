// Copyright 2026 The pwlbo Authors.
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "pwlbo/miqp_model.hpp"
#include "unit/oracles.hpp"

using namespace pwlbo;

namespace {

struct Instance {
  PwlKernel kernel;
  Dataset data;
};

Instance random_instance(std::uint64_t seed, int n, int dim, double lengthscale = 0.25) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Matrix X(n, dim);
  Vector y(n);
  for (int i = 0; i < n; ++i) {
    for (int d = 0; d < dim; ++d) X(i, d) = u(rng);
    y[i] = u(rng);
  }
  return {PwlKernel(build_breakpoints(dim, Box::unit(dim), lengthscale), {1.0, lengthscale, 1e-6}), Dataset(X, y)};
}

int count_kind(const MiqpModel& m, VarKind kind) {
  int c = 0;
  for (const auto& v : m.variables) c += v.kind == kind ? 1 : 0;
  return c;
}

}  // namespace

TEST_SUITE("model") {
  TEST_CASE("variable roster") {
    const Instance inst = random_instance(1, 5, 1);
    const MiqpModel m = build_full_model(inst.kernel, inst.data, 1.0, Box::unit(1));
    CHECK(m.segments() == 7);
    CHECK(m.num_variables() == 1 + 10 + 40 + 35 + 2);
    CHECK(m.num_binaries() == 35);
    CHECK(count_kind(m, VarKind::Binary) == 35);
    CHECK(m.has_variance());
    for (const auto& v : m.variables) {
      CHECK(v.lower <= v.upper);
      if (v.kind == VarKind::Binary) {
        CHECK(v.lower == 0.0);
        CHECK(v.upper == 1.0);
      }
    }
    const auto& sigma = m.variables[static_cast<std::size_t>(m.layout.sigma)];
    CHECK(sigma.lower == 0.0);
    CHECK(sigma.upper == doctest::Approx(1.0));
    int nonconvex = 0;
    for (const auto& q : m.quadratic) nonconvex += q.tag == QuadTag::NonconvexEquality ? 1 : 0;
    CHECK(nonconvex == 5);
  }

  TEST_CASE("mean-only model drops the variance block") {
    const Instance inst = random_instance(2, 4, 2);
    const MiqpModel full = build_full_model(inst.kernel, inst.data, 1.0, Box::unit(2));
    const MiqpModel sub = build_sub_model(inst.kernel, inst.data, Box::unit(2));
    CHECK_FALSE(sub.has_variance());
    CHECK(sub.num_variables() == full.num_variables() - 1);
    for (const auto& q : sub.quadratic) CHECK(q.tag == QuadTag::NonconvexEquality);
    CHECK(static_cast<int>(sub.quadratic.size()) == 4);
  }

  TEST_CASE("completed candidates are feasible and score the approximate LCB") {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      const int dim = 1 + static_cast<int>(seed % 3);
      const int n = 1 + static_cast<int>(seed % 5);
      const Instance inst = random_instance(seed + 40, n, dim);
      const double beta = 0.5 + 0.1 * static_cast<double>(seed);
      const MiqpModel m = build_full_model(inst.kernel, inst.data, beta, Box::unit(dim));
      const ApproxGp gp(inst.kernel, inst.data);
      std::mt19937_64 rng(seed);
      std::uniform_real_distribution<double> u(0.0, 1.0);
      for (int q = 0; q < 10; ++q) {
        Vector x(dim);
        for (int d = 0; d < dim; ++d) x[d] = u(rng);
        const Assignment a = evaluate_candidate(m, x);
        CHECK(max_violation(m, a.values) <= 1e-7);
        CHECK(point_of(m, a.values) == x);
        const Posterior p = gp.posterior(x);
        CHECK(a.objective == doctest::Approx(p.mean - std::sqrt(beta * p.variance)).epsilon(1e-9).scale(1.0));
        CHECK(objective_value(m, a.values) == doctest::Approx(a.objective).epsilon(1e-12).scale(1.0));
        // Oracle from the interpolated kernel and a dense inverse.
        const auto ref = oracle::dense_posterior(inst.data.X, inst.data.y, 0.25, 1e-6 + gp.jitter(), x, [&](double r) {
          return oracle::interpolate(inst.kernel.knots(), inst.kernel.knot_values(), r);
        });
        CHECK(a.objective ==
              doctest::Approx(ref.mean - std::sqrt(beta * ref.variance)).epsilon(1e-7).scale(1.0));
      }
    }
  }

  TEST_CASE("candidate at a knot distance uses one vertex") {
    Matrix X = Matrix::Zero(1, 1);
    const PwlKernel k(build_breakpoints(1, Box::unit(1), 0.2), {1.0, 0.2, 1e-6});
    const MiqpModel m = build_full_model(k, Dataset(X, Vector::Ones(1)), 1.0, Box::unit(1));
    const double x = k.knots()[3] * 0.2;
    const Assignment a = evaluate_candidate(m, Vector::Constant(1, x));
    int w_on = 0, lam_on = 0;
    for (int id : m.layout.w[0]) w_on += a.values[id] > 1e-12 ? 1 : 0;
    for (int id : m.layout.lam[0]) lam_on += a.values[id] > 0.5 ? 1 : 0;
    CHECK(w_on == 1);
    CHECK(lam_on == 1);
    CHECK(a.values[m.layout.w[0][3]] == doctest::Approx(1.0));
  }

  TEST_CASE("candidates outside the box or the constraints are refused") {
    const Instance inst = random_instance(3, 3, 2);
    KnownConstraint c;
    c.linear = {{0, 1.0}, {1, 1.0}};
    c.rhs = 1.0;
    const MiqpModel m = build_full_model(inst.kernel, inst.data, 1.0, Box::unit(2), {c});
    CHECK_THROWS_AS(evaluate_candidate(m, Vector::Constant(2, 0.9)), std::invalid_argument);
    CHECK_THROWS_AS(evaluate_candidate(m, Vector::Constant(2, -0.1)), std::invalid_argument);
    CHECK_NOTHROW(evaluate_candidate(m, Vector::Constant(2, 0.5)));
  }

  TEST_CASE("known constraints") {
    const Instance inst = random_instance(4, 3, 2);
    MiqpModel m = build_full_model(inst.kernel, inst.data, 1.0, Box::unit(2));
    const auto rows = m.linear.size();
    KnownConstraint lin;
    lin.linear = {{0, -1.0}, {1, -3.0}};
    lin.rhs = 0.0;
    add_known_constraints(m, {lin});
    CHECK(m.linear.size() == rows + 1);
    CHECK(m.layout.known_linear.size() == 1);
    KnownConstraint bad;
    bad.linear = {{2, 1.0}};
    CHECK_THROWS_AS(add_known_constraints(m, {bad}), std::invalid_argument);
    KnownConstraint nonconvex;
    nonconvex.quad = {{0, 0, -1.0}};
    nonconvex.rhs = -0.1;
    CHECK_THROWS_AS(add_known_constraints(m, {nonconvex}), std::invalid_argument);
    KnownConstraint disk;
    disk.quad = {{0, 0, 1.0}, {1, 1, 1.0}};
    disk.rhs = 0.5;
    CHECK_NOTHROW(add_known_constraints(m, {disk}));
    CHECK(m.layout.known_quadratic.size() == 1);
    CHECK(disk.violation(Vector::Constant(2, 0.6)) == doctest::Approx(0.22));
    CHECK(disk.violation(Vector::Constant(2, 0.1)) == 0.0);
  }

  TEST_CASE("constraints in scaled coordinates") {
    KnownConstraint c;
    c.linear = {{0, 1.0}, {1, 2.0}};
    c.rhs = 4.0;
    c.quad = {{0, 1, 0.5}};
    ScalingTransform t;
    t.input_lb = Vector::Map(std::vector<double>{-1.0, 2.0}.data(), 2);
    t.input_ub = Vector::Map(std::vector<double>{3.0, 5.0}.data(), 2);
    const auto scaled = scale_constraints({c}, t);
    // Rows are normalized by a positive factor, fixed by one sample.
    const Vector z0 = Vector::Constant(2, 0.5);
    const double factor = (c.activity(t.unscale_input(z0)) - c.rhs) / (scaled[0].activity(z0) - scaled[0].rhs);
    CHECK(factor > 0.0);
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int q = 0; q < 50; ++q) {
      Vector z(2);
      z << u(rng), u(rng);
      CHECK(factor * (scaled[0].activity(z) - scaled[0].rhs) ==
            doctest::Approx(c.activity(t.unscale_input(z)) - c.rhs).epsilon(1e-12).scale(1.0));
    }
  }

  TEST_CASE("restricting constraints to groups") {
    KnownConstraint a, b, both;
    a.linear = {{0, 1.0}};
    b.linear = {{2, 1.0}};
    both.linear = {{0, 1.0}, {1, 1.0}};
    const auto g0 = restrict_constraints({a, b}, {0, 1});
    REQUIRE(g0.size() == 1);
    CHECK(g0[0].linear[0].first == 0);
    const auto g1 = restrict_constraints({a, b}, {2});
    REQUIRE(g1.size() == 1);
    CHECK(g1[0].linear[0].first == 0);
    CHECK_THROWS_AS(restrict_constraints({both}, {1}), std::invalid_argument);
  }
}

TEST_SUITE("lpformat") {
  TEST_CASE("one point in one dimension has a single binary block") {
    Matrix X = Matrix::Constant(1, 1, 0.3);
    const PwlKernel k(build_breakpoints(1, Box::unit(1), 0.2), {1.0, 0.2, 1e-6});
    const MiqpModel m = build_full_model(k, Dataset(X, Vector::Constant(1, 0.7)), 1.0, Box::unit(1));
    const std::string text = export_lp_text(m);
    const auto pos = text.find("Binaries");
    REQUIRE(pos != std::string::npos);
    std::istringstream tail(text.substr(pos));
    std::string line, tok;
    std::getline(tail, line);
    int binaries = 0;
    while (tail >> tok && tok != "End") {
      CHECK(tok.rfind("lam_0_", 0) == 0);
      ++binaries;
    }
    CHECK(binaries == 7);
    CHECK(text.find("0 <= sigma <= 1") != std::string::npos);
    CHECK(text.find("Minimize") != std::string::npos);
    CHECK(text.find("Subject To") != std::string::npos);
    CHECK(text.find("Bounds") != std::string::npos);
    CHECK(text.find("[") != std::string::npos);
  }

  TEST_CASE("round trip keeps rows, variables and the objective") {
    for (std::uint64_t seed = 0; seed < 6; ++seed) {
      const int dim = 1 + static_cast<int>(seed % 2);
      const Instance inst = random_instance(seed, 2 + static_cast<int>(seed % 3), dim);
      KnownConstraint c;
      c.linear = {{0, 1.0}};
      c.sense = Sense::GreaterEqual;
      c.rhs = 0.1;
      MiqpModel m = seed % 2 == 0 ? build_full_model(inst.kernel, inst.data, 2.0, Box::unit(dim), {c})
                                  : build_sub_model(inst.kernel, inst.data, Box::unit(dim), {c});
      std::istringstream in(export_lp_text(m));
      const MiqpModel back = parse_lp_text(in);
      CHECK(back.num_variables() == m.num_variables());
      CHECK(back.num_binaries() == m.num_binaries());
      CHECK(back.linear.size() == m.linear.size());
      CHECK(back.quadratic.size() == m.quadratic.size());
      for (int j = 0; j < m.num_variables(); ++j) {
        CHECK(back.variables[static_cast<std::size_t>(j)].name == m.variables[static_cast<std::size_t>(j)].name);
        CHECK(back.variables[static_cast<std::size_t>(j)].lower == m.variables[static_cast<std::size_t>(j)].lower);
        CHECK(back.variables[static_cast<std::size_t>(j)].upper == m.variables[static_cast<std::size_t>(j)].upper);
      }
      // Same rows: a completed candidate is feasible in the parsed model too.
      const Assignment a = evaluate_candidate(m, Vector::Constant(dim, 0.5));
      CHECK(max_violation(back, a.values) <= 1e-7);
      CHECK(objective_value(back, a.values) == doctest::Approx(a.objective).epsilon(1e-12).scale(1.0));
    }
  }

  TEST_CASE("malformed text") {
    std::istringstream bad("Minimize\n obj: + 1 x\nSubject To\n c: + 1 y <= \nEnd\n");
    CHECK_THROWS(parse_lp_text(bad));
  }
}
