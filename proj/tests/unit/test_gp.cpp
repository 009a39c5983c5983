// Copyright 2026 The pwlbo Authors.
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

#include "pwlbo/gp.hpp"
#include "unit/oracles.hpp"

using namespace pwlbo;

namespace {

Dataset random_dataset(std::mt19937_64& rng, int n, int dim) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Matrix X(n, dim);
  Vector y(n);
  for (int i = 0; i < n; ++i) {
    for (int d = 0; d < dim; ++d) X(i, d) = u(rng);
    y[i] = u(rng);
  }
  return {X, y};
}

double fd(const std::function<double(double)>& f, double r, double h = 1e-5) {
  return (f(r + h) - f(r - h)) / (2.0 * h);
}

}  // namespace

TEST_SUITE("gp") {
  TEST_CASE("kernel values") {
    CHECK(matern32(0.0, 1.0) == 1.0);
    CHECK(matern32(0.0, 2.5) == 2.5);
    double prev = 1.0;
    for (double r = 0.1; r < 40.0; r += 0.1) {
      const double v = matern32(r, 1.0);
      CHECK(v < prev);
      prev = v;
    }
    CHECK(matern32(60.0, 1.0) < 1e-40);
    CHECK_THROWS_AS(matern32(-1e-3, 1.0), std::domain_error);
    for (double r : {0.0, 0.3, 1.0, 2.7}) CHECK(matern32(r, 1.7) == doctest::Approx(oracle::matern(r, 1.7)).epsilon(1e-14));
  }

  TEST_CASE("second derivative by hand and by finite differences") {
    CHECK(kernel_second_derivative(0.0, 1.0) == doctest::Approx(-3.0).epsilon(1e-14));
    CHECK(std::abs(kernel_second_derivative(1.0 / std::sqrt(3.0), 1.0)) < 1e-15);
    CHECK(kernel_second_derivative(2.0 / std::sqrt(3.0), 1.0) == doctest::Approx(3.0 * std::exp(-2.0)).epsilon(1e-12));
    CHECK(3.0 * std::exp(-2.0) == doctest::Approx(0.40601).epsilon(1e-5));
    for (double r : {0.05, 0.4, 1.155, 2.0, 3.5}) {
      const auto k = [](double s) { return matern32(s, 1.3); };
      const auto dk = [](double s) { return matern32_derivative(s, 1.3); };
      CHECK(matern32_derivative(r, 1.3) == doctest::Approx(fd(k, r)).epsilon(1e-6));
      CHECK(kernel_second_derivative(r, 1.3) == doctest::Approx(fd(dk, r)).epsilon(1e-6));
    }
    // 2/sqrt3 maximizes k'' over r > 0.
    const double peak = kernel_second_derivative(2.0 / std::sqrt(3.0), 1.0);
    for (double r = 0.0; r < 6.0; r += 0.01) CHECK(kernel_second_derivative(r, 1.0) <= peak + 1e-15);
  }

  TEST_CASE("dataset guards") {
    Matrix X(2, 1);
    X << 0.5, 0.5;
    CHECK_THROWS_AS(Dataset(X, Vector::Zero(2)).validate(), std::invalid_argument);
    CHECK_THROWS_AS(Dataset(Matrix(0, 1), Vector(0)).validate(), std::invalid_argument);
    CHECK_THROWS_AS(Dataset(Matrix::Zero(2, 1), Vector::Zero(3)).validate(), std::invalid_argument);
  }

  TEST_CASE("standardization") {
    Matrix X(2, 2);
    X << -5.0, 0.0, 10.0, 15.0;
    Vector y(2);
    y << 3.0, 7.0;
    const Box box(Vector::Map(std::vector<double>{-5.0, 0.0}.data(), 2),
                  Vector::Map(std::vector<double>{10.0, 15.0}.data(), 2));
    const auto [s, t] = standardize(Dataset(X, y), box);
    CHECK(s.X.row(0).norm() == 0.0);
    CHECK((s.X.row(1).array() == 1.0).all());
    CHECK(s.y[0] == 0.0);
    CHECK(s.y[1] == 1.0);
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(-5.0, 10.0);
    for (int k = 0; k < 100; ++k) {
      Vector x(2);
      x << u(rng), u(rng) + 5.0;
      const Vector back = t.unscale_input(t.scale_input(x));
      for (int d = 0; d < 2; ++d) CHECK(std::abs(back[d] - x[d]) <= 1e-12 * std::max(1.0, std::abs(x[d])));
      const double v = u(rng);
      CHECK(std::abs(t.unscale_output(t.scale_output(v)) - v) <= 1e-12 * std::max(1.0, std::abs(v)));
    }
    Vector flat(2);
    flat << 4.0, 4.0;
    CHECK(standardize(Dataset(X, flat), box).first.y[0] == 0.5);
    Matrix outside = X;
    outside(0, 0) = -6.0;
    CHECK_THROWS_AS(standardize(Dataset(outside, y), box), std::invalid_argument);
  }

  TEST_CASE("posterior matches a dense-inverse oracle on random instances") {
    std::mt19937_64 rng(101);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int trial = 0; trial < 100; ++trial) {
      const int n = 1 + trial % 30;
      const int dim = 1 + trial % 5;
      Dataset data = random_dataset(rng, n, dim);
      KernelParams p{0.5 + u(rng), 0.2 + u(rng), 1e-4};
      const GpModel gp(data, p);
      for (int q = 0; q < 5; ++q) {
        Vector x(dim);
        for (int d = 0; d < dim; ++d) x[d] = u(rng);
        const Posterior got = gp.posterior(x);
        const auto ref = oracle::dense_posterior(data.X, data.y, p.lengthscale, p.noise + gp.factor().jitter, x,
                                                 [&](double r) { return oracle::matern(r, p.variance); });
        CHECK(std::abs(got.mean - ref.mean) < 1e-8);
        CHECK(std::abs(got.variance - ref.variance) < 1e-8);
        CHECK(got.variance >= 0.0);
        CHECK(got.variance <= p.variance + 1e-9);
      }
      const Matrix L = gp.factor().llt.matrixL();
      Matrix K = matern_gram(data.X, p);
      K.diagonal().array() += p.noise + gp.factor().jitter;
      CHECK((L * L.transpose() - K).cwiseAbs().maxCoeff() < 1e-8);
    }
  }

  TEST_CASE("interpolation, single point and prior recovery") {
    std::mt19937_64 rng(5);
    Dataset data = random_dataset(rng, 6, 2);
    const GpModel gp(data, {1.0, 0.3, 0.0});
    for (int i = 0; i < 6; ++i) {
      const Posterior p = gp.posterior(data.X.row(i).transpose());
      CHECK(p.mean == doctest::Approx(data.y[i]).epsilon(1e-6));
      CHECK(p.variance < 1e-6);
    }
    Matrix X1 = Matrix::Zero(1, 1);
    Vector y1 = Vector::Ones(1);
    const GpModel one(Dataset(X1, y1), {1.0, 1.0, 0.0});
    for (double r : {0.1, 0.7, 2.0}) {
      const Posterior p = one.posterior(Vector::Constant(1, r));
      CHECK(p.mean == doctest::Approx(matern32(r, 1.0)).epsilon(1e-12));
      CHECK(p.variance == doctest::Approx(1.0 - std::pow(matern32(r, 1.0), 2)).epsilon(1e-12));
    }
    const Posterior far = gp.posterior(Vector::Constant(2, 200.0));
    CHECK(std::abs(far.mean) < 1e-12);
    CHECK(far.variance == doctest::Approx(1.0).epsilon(1e-12));
    CHECK_THROWS_AS(static_cast<void>(gp.posterior(Vector::Zero(3))), std::invalid_argument);
  }

  TEST_CASE("variance never grows when points are added") {
    std::mt19937_64 rng(9);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int trial = 0; trial < 20; ++trial) {
      Dataset data = random_dataset(rng, 12, 2);
      Vector x(2);
      x << u(rng), u(rng);
      double prev = 1.0 + 1e-12;
      for (int n = 1; n <= 12; ++n) {
        const GpModel gp(Dataset(data.X.topRows(n), data.y.head(n)), {1.0, 0.25, 0.0});
        const double v = gp.posterior(x).variance;
        CHECK(v <= prev + 1e-9);
        prev = v;
      }
    }
  }

  TEST_CASE("log marginal likelihood closed forms") {
    const Dataset one(Matrix::Zero(1, 1), Vector::Zero(1));
    CHECK(log_marginal_likelihood(one, {1.0, 1.0, 0.0}) == doctest::Approx(-0.5 * std::log(2.0 * std::numbers::pi)));
    std::mt19937_64 rng(2);
    Dataset data = random_dataset(rng, 5, 2);
    data.y.setZero();
    const KernelParams p{1.3, 0.4, 1e-6};
    Matrix K = matern_gram(data.X, p);
    K.diagonal().array() += p.noise;
    const double logdet = 2.0 * Eigen::LLT<Matrix>(K).matrixLLT().diagonal().array().log().sum();
    CHECK(log_marginal_likelihood(data, p) ==
          doctest::Approx(-0.5 * logdet - 2.5 * std::log(2.0 * std::numbers::pi)).epsilon(1e-10));
  }

  TEST_CASE("likelihood gradient matches central differences") {
    std::mt19937_64 rng(4);
    for (int trial = 0; trial < 10; ++trial) {
      Dataset data = random_dataset(rng, 8, 1 + trial % 3);
      const KernelParams p{0.7 + 0.2 * trial, 0.15 + 0.05 * trial, 1e-6};
      const auto g = log_marginal_likelihood_with_gradient(data, p);
      CHECK(g.value == doctest::Approx(log_marginal_likelihood(data, p)).epsilon(1e-12));
      const double h = 1e-5;
      auto at = [&](double dv, double dl) {
        KernelParams q = p;
        q.variance = std::exp(std::log(p.variance) + dv);
        q.lengthscale = std::exp(std::log(p.lengthscale) + dl);
        return log_marginal_likelihood(data, q);
      };
      const double fv = (at(h, 0) - at(-h, 0)) / (2 * h);
      const double fl = (at(0, h) - at(0, -h)) / (2 * h);
      CHECK(g.d_log_variance == doctest::Approx(fv).epsilon(1e-4).scale(1e-3));
      CHECK(g.d_log_lengthscale == doctest::Approx(fl).epsilon(1e-4).scale(1e-3));
    }
  }

  TEST_CASE("hyperparameter fit is deterministic and respects bounds") {
    std::mt19937_64 rng(12);
    Dataset data = random_dataset(rng, 10, 2);
    FitOptions opt;
    opt.seed = 77;
    const KernelParams a = fit_hyperparameters(data, opt);
    const KernelParams b = fit_hyperparameters(data, opt);
    CHECK(a.variance == b.variance);
    CHECK(a.lengthscale == b.lengthscale);
    CHECK(a.variance >= opt.bounds.variance_lo);
    CHECK(a.variance <= opt.bounds.variance_hi);
    CHECK(a.lengthscale >= opt.bounds.lengthscale_lo);
    CHECK(a.lengthscale <= opt.bounds.lengthscale_hi);
    CHECK(a.noise == opt.noise);
  }

  TEST_CASE("lengthscale recovery from prior samples") {
    int recovered = 0;
    for (int seed = 0; seed < 10; ++seed) {
      std::mt19937_64 rng(1000 + static_cast<unsigned>(seed));
      std::uniform_real_distribution<double> u(0.0, 1.0);
      std::normal_distribution<double> z(0.0, 1.0);
      const int n = 25;
      Matrix X(n, 1);
      for (int i = 0; i < n; ++i) X(i, 0) = u(rng);
      const KernelParams truth{2.0, 0.3, 1e-6};
      Matrix K = matern_gram(X, truth);
      K.diagonal().array() += 1e-8;
      const Matrix L = Eigen::LLT<Matrix>(K).matrixL();
      Vector e(n);
      for (int i = 0; i < n; ++i) e[i] = z(rng);
      FitOptions opt;
      opt.seed = static_cast<std::uint64_t>(seed);
      const KernelParams fit = fit_hyperparameters(Dataset(X, L * e), opt);
      if (fit.lengthscale >= 0.15 && fit.lengthscale <= 0.6) ++recovered;
    }
    CHECK(recovered >= 8);
  }

  TEST_CASE("factorization escalates jitter and reports failure") {
    Matrix ones = Matrix::Ones(3, 3);
    const GramFactor f = factorize_gram(ones, 0.0);
    CHECK(f.jitter > 0.0);
    Matrix bad = Matrix::Identity(2, 2);
    bad(0, 0) = -1.0;
    CHECK_THROWS_AS(factorize_gram(bad, 0.0), NumericalError);
    try {
      factorize_gram(bad, 0.0);
    } catch (const NumericalError& e) {
      CHECK(std::string(e.what()).find("0.0001") != std::string::npos);
    }
  }

  TEST_CASE("additive model: single group equals the plain model") {
    std::mt19937_64 rng(8);
    Dataset data = random_dataset(rng, 9, 3);
    const KernelParams p{1.2, 0.4, 1e-6};
    const GpModel plain(data, p);
    const AdditiveGpModel add(data, {{{0, 1, 2}, p}}, p.noise);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int q = 0; q < 20; ++q) {
      Vector x(3);
      x << u(rng), u(rng), u(rng);
      CHECK(add.posterior(x).mean == plain.posterior(x).mean);
      CHECK(add.posterior(x).variance == plain.posterior(x).variance);
    }
    CHECK_THROWS_AS(AdditiveGpModel(data, {{{0, 3}, p}}, p.noise), std::invalid_argument);
    CHECK_THROWS_AS(AdditiveGpModel(data, {{{0, 1}, p}, {{1, 2}, p}}, p.noise), std::invalid_argument);
  }

  TEST_CASE("additive mean on separable data") {
    // f(x) = f1(x1) + f2(x2). With the sum kernel the posterior mean is the
    // sum of the component means.
    std::mt19937_64 rng(21);
    Dataset data = random_dataset(rng, 15, 2);
    for (int i = 0; i < 15; ++i) data.y[i] = std::sin(6.0 * data.X(i, 0)) + std::cos(4.0 * data.X(i, 1));
    const KernelParams p1{1.0, 0.3, 1e-6}, p2{0.8, 0.5, 1e-6};
    const AdditiveGpModel add(data, {{{0}, p1}, {{1}, p2}}, 1e-6);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int q = 0; q < 20; ++q) {
      Vector x(2);
      x << u(rng), u(rng);
      const double sum = add.component_posterior(0, x.head(1)).mean + add.component_posterior(1, x.tail(1)).mean;
      CHECK(add.posterior(x).mean == doctest::Approx(sum).epsilon(1e-10));
      // Oracle with the explicit sum kernel.
      const auto n = data.X.rows();
      Matrix K(n, n);
      Vector k(n);
      for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < n; ++j)
          K(i, j) = oracle::matern(std::abs(data.X(i, 0) - data.X(j, 0)) / 0.3, 1.0) +
                    oracle::matern(std::abs(data.X(i, 1) - data.X(j, 1)) / 0.5, 0.8);
        K(i, i) += 1e-6 + add.factor().jitter;
        k[i] = oracle::matern(std::abs(data.X(i, 0) - x[0]) / 0.3, 1.0) +
               oracle::matern(std::abs(data.X(i, 1) - x[1]) / 0.5, 0.8);
      }
      CHECK(add.posterior(x).mean == doctest::Approx(k.dot(K.inverse() * data.y)).epsilon(1e-7));
    }
  }

  TEST_CASE("dataset text round trip") {
    std::mt19937_64 rng(30);
    Dataset data = random_dataset(rng, 7, 3);
    std::stringstream ss;
    write_dataset_csv(ss, data);
    const Dataset back = read_dataset_csv(ss);
    CHECK(back.X == data.X);
    CHECK(back.y == data.y);
    std::stringstream bad("x1,y\n1,2,3\n");
    CHECK_THROWS_AS(read_dataset_csv(bad), ConfigError);
  }
}
