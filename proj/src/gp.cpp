// Copyright 2026 The pwlbo Authors.
// SPDX-License-Identifier: Apache-2.0

#include "pwlbo/gp.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <numbers>
#include <ostream>
#include <random>
#include <sstream>

namespace pwlbo {
namespace {

constexpr double kSqrt3 = 1.7320508075688772935;

}  // namespace

// ---------------------------------------------------------------------------
// Dataset / scaling

Dataset::Dataset(Matrix inputs, Vector outputs) : X(std::move(inputs)), y(std::move(outputs)) {}

void Dataset::validate() const {
  if (X.rows() < 1 || X.cols() < 1) throw std::invalid_argument("dataset needs N >= 1 and D >= 1");
  if (y.size() != X.rows()) throw std::invalid_argument("dataset output count does not match inputs");
  for (int i = 0; i < X.rows(); ++i) {
    for (int j = i + 1; j < X.rows(); ++j) {
      if ((X.row(i) - X.row(j)).cwiseAbs().maxCoeff() <= 1e-12) {
        throw std::invalid_argument("dataset contains duplicate rows " + std::to_string(i) + " and " +
                                    std::to_string(j));
      }
    }
  }
}

void Dataset::append(const Vector& x, double value) {
  if (X.rows() > 0 && x.size() != X.cols()) throw std::invalid_argument("appended point has wrong dimension");
  const Eigen::Index n = X.rows();
  X.conservativeResize(n + 1, x.size());
  X.row(n) = x.transpose();
  y.conservativeResize(n + 1);
  y[n] = value;
}

Dataset Dataset::slice(const std::vector<int>& dims) const {
  Matrix sub(X.rows(), static_cast<Eigen::Index>(dims.size()));
  for (std::size_t k = 0; k < dims.size(); ++k) sub.col(static_cast<Eigen::Index>(k)) = X.col(dims[k]);
  return Dataset(sub, y);
}

Vector ScalingTransform::scale_input(const Vector& x) const {
  return (x - input_lb).cwiseQuotient(input_ub - input_lb);
}

Vector ScalingTransform::unscale_input(const Vector& z) const {
  return input_lb + z.cwiseProduct(input_ub - input_lb);
}

double ScalingTransform::scale_output(double y) const {
  if (output_max == output_min) return 0.5;
  return (y - output_min) / (output_max - output_min);
}

double ScalingTransform::unscale_output(double s) const {
  if (output_max == output_min) return output_min;
  return output_min + s * (output_max - output_min);
}

std::pair<Dataset, ScalingTransform> standardize(const Dataset& data, const Box& bounds) {
  if (bounds.dim() != data.dim()) throw std::invalid_argument("bounds dimension does not match dataset");
  for (int i = 0; i < data.size(); ++i) {
    if (!bounds.contains(data.X.row(i).transpose(), 1e-12)) {
      throw std::invalid_argument("sample " + std::to_string(i) + " lies outside the bounds");
    }
  }
  ScalingTransform t;
  t.input_lb = bounds.lb;
  t.input_ub = bounds.ub;
  t.output_min = data.y.minCoeff();
  t.output_max = data.y.maxCoeff();
  Dataset out;
  out.X.resize(data.size(), data.dim());
  out.y.resize(data.size());
  for (int i = 0; i < data.size(); ++i) {
    out.X.row(i) = t.scale_input(data.X.row(i).transpose()).transpose();
    out.y[i] = t.scale_output(data.y[i]);
  }
  return {out, t};
}

// ---------------------------------------------------------------------------
// Kernel

double matern32(double r, double variance) {
  if (r < 0.0 || std::isnan(r)) throw std::domain_error("matern32: negative distance");
  const double s = kSqrt3 * r;
  return variance * (1.0 + s) * std::exp(-s);
}

double matern32_derivative(double r, double variance) {
  if (r < 0.0) throw std::domain_error("matern32_derivative: negative distance");
  return -3.0 * variance * r * std::exp(-kSqrt3 * r);
}

double kernel_second_derivative(double r, double variance) {
  if (r < 0.0) throw std::domain_error("kernel_second_derivative: negative distance");
  return 3.0 * variance * (kSqrt3 * r - 1.0) * std::exp(-kSqrt3 * r);
}

Matrix matern_gram(const Matrix& X, const KernelParams& params) {
  const Eigen::Index n = X.rows();
  Matrix K(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    K(i, i) = params.variance;
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const double r = (X.row(i) - X.row(j)).norm() / params.lengthscale;
      K(i, j) = K(j, i) = matern32(r, params.variance);
    }
  }
  return K;
}

Vector matern_cross(const Matrix& X, const Vector& x, const KernelParams& params) {
  if (x.size() != X.cols()) throw std::invalid_argument("query point has wrong dimension");
  Vector k(X.rows());
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    k[i] = matern32((X.row(i).transpose() - x).norm() / params.lengthscale, params.variance);
  }
  return k;
}

GramFactor factorize_gram(const Matrix& gram, double noise) {
  std::ostringstream tried;
  for (double jitter : jitter_ladder()) {
    Matrix K = gram;
    K.diagonal().array() += noise + jitter;
    GramFactor f;
    f.llt.compute(K);
    if (f.llt.info() == Eigen::Success && f.llt.matrixL().toDenseMatrix().diagonal().minCoeff() > 0.0) {
      f.noise = noise;
      f.jitter = jitter;
      return f;
    }
    tried << (tried.tellp() > 0 ? ", " : "") << jitter;
  }
  throw NumericalError("Gram matrix is not positive definite after jitters {" + tried.str() + "}");
}

Posterior posterior_from_factor(const GramFactor& factor, const Vector& alpha, const Vector& k,
                                double prior_variance) {
  Posterior p;
  p.mean = k.dot(alpha);
  const Vector v = factor.llt.matrixL().solve(k);
  p.variance = std::max(0.0, prior_variance - v.squaredNorm());
  return p;
}

// ---------------------------------------------------------------------------
// GpModel

GpModel::GpModel(Dataset data, KernelParams params) : data_(std::move(data)), params_(params) {
  data_.validate();
  if (!(params_.variance > 0.0) || !(params_.lengthscale > 0.0) || params_.noise < 0.0) {
    throw std::invalid_argument("kernel parameters must be positive");
  }
  factor_ = factorize_gram(matern_gram(data_.X, params_), params_.noise);
  alpha_ = factor_.llt.solve(data_.y);
}

Posterior GpModel::posterior(const Vector& x) const {
  return posterior_from_factor(factor_, alpha_, matern_cross(data_.X, x, params_), params_.variance);
}

double GpModel::lcb(const Vector& x, double beta) const {
  const Posterior p = posterior(x);
  return p.mean - std::sqrt(beta) * std::sqrt(p.variance);
}

// ---------------------------------------------------------------------------
// Marginal likelihood

double log_marginal_likelihood(const Dataset& data, const KernelParams& params) {
  const GramFactor f = factorize_gram(matern_gram(data.X, params), params.noise);
  const Vector alpha = f.llt.solve(data.y);
  const double log_det = 2.0 * f.llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
  const double n = static_cast<double>(data.size());
  return -0.5 * data.y.dot(alpha) - 0.5 * log_det - 0.5 * n * std::log(2.0 * std::numbers::pi);
}

LmlWithGradient log_marginal_likelihood_with_gradient(const Dataset& data, const KernelParams& params) {
  const Eigen::Index n = data.X.rows();
  Matrix gram(n, n), d_len(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    gram(i, i) = params.variance;
    d_len(i, i) = 0.0;
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const double r = (data.X.row(i) - data.X.row(j)).norm() / params.lengthscale;
      const double e = std::exp(-kSqrt3 * r);
      gram(i, j) = gram(j, i) = params.variance * (1.0 + kSqrt3 * r) * e;
      // dk/dlog(l) = -r k'(r) = 3 variance r^2 exp(-sqrt3 r)
      d_len(i, j) = d_len(j, i) = 3.0 * params.variance * r * r * e;
    }
  }
  const GramFactor f = factorize_gram(gram, params.noise);
  const Vector alpha = f.llt.solve(data.y);
  const Matrix L = f.llt.matrixL();
  const Matrix Kinv = f.llt.solve(Matrix::Identity(n, n));
  const Matrix outer = alpha * alpha.transpose() - Kinv;

  LmlWithGradient out;
  out.value = -0.5 * data.y.dot(alpha) - L.diagonal().array().log().sum() -
              0.5 * static_cast<double>(n) * std::log(2.0 * std::numbers::pi);
  // dK/dlog(variance) is the noiseless Gram itself.
  out.d_log_variance = 0.5 * (outer.cwiseProduct(gram)).sum();
  out.d_log_lengthscale = 0.5 * (outer.cwiseProduct(d_len)).sum();
  return out;
}

// ---------------------------------------------------------------------------
// Hyperparameter fitting

namespace {

struct LogBox {
  Eigen::Vector2d lo;
  Eigen::Vector2d hi;
  [[nodiscard]] Eigen::Vector2d project(const Eigen::Vector2d& t) const { return t.cwiseMax(lo).cwiseMin(hi); }
};

KernelParams params_from_log(const Eigen::Vector2d& t, double noise) {
  return KernelParams{std::exp(t[0]), std::exp(t[1]), noise};
}

struct Eval {
  double f = std::numeric_limits<double>::infinity();  // negative LML
  Eigen::Vector2d g = Eigen::Vector2d::Zero();
  bool ok = false;
};

Eval evaluate_negative_lml(const Dataset& data, const Eigen::Vector2d& t, double noise) {
  Eval e;
  try {
    const LmlWithGradient l = log_marginal_likelihood_with_gradient(data, params_from_log(t, noise));
    if (!std::isfinite(l.value)) return e;
    e.f = -l.value;
    e.g = Eigen::Vector2d(-l.d_log_variance, -l.d_log_lengthscale);
    e.ok = true;
  } catch (const NumericalError&) {
  }
  return e;
}

// Gradient with components that point out of the box at an active bound removed.
Eigen::Vector2d projected_gradient(const Eigen::Vector2d& t, const Eigen::Vector2d& g, const LogBox& box) {
  Eigen::Vector2d pg = g;
  for (int k = 0; k < 2; ++k) {
    if ((t[k] <= box.lo[k] && g[k] > 0.0) || (t[k] >= box.hi[k] && g[k] < 0.0)) pg[k] = 0.0;
  }
  return pg;
}

Eval local_search(const Dataset& data, Eigen::Vector2d t, const LogBox& box, double noise, int max_iter,
                  Eigen::Vector2d& t_out) {
  Eval cur = evaluate_negative_lml(data, t, noise);
  if (!cur.ok) return cur;
  Eigen::Matrix2d H = Eigen::Matrix2d::Identity();
  for (int it = 0; it < max_iter; ++it) {
    const Eigen::Vector2d pg = projected_gradient(t, cur.g, box);
    if (pg.norm() < 1e-7) break;
    Eigen::Vector2d p = -H * cur.g;
    // Freeze coordinates held at a bound by the gradient.
    for (int k = 0; k < 2; ++k) {
      if (pg[k] == 0.0) p[k] = 0.0;
    }
    if (p.dot(cur.g) >= 0.0) {
      H.setIdentity();
      p = -pg;
    }
    double step = 1.0;
    bool moved = false;
    Eval next;
    Eigen::Vector2d t_next;
    for (int ls = 0; ls < 30; ++ls) {
      t_next = box.project(t + step * p);
      next = evaluate_negative_lml(data, t_next, noise);
      if (next.ok && next.f <= cur.f + 1e-4 * cur.g.dot(t_next - t)) {
        moved = true;
        break;
      }
      step *= 0.5;
    }
    if (!moved) break;
    const Eigen::Vector2d s = t_next - t;
    const Eigen::Vector2d yv = next.g - cur.g;
    const double sy = s.dot(yv);
    if (sy > 1e-12) {
      const double rho = 1.0 / sy;
      const Eigen::Matrix2d I = Eigen::Matrix2d::Identity();
      H = (I - rho * s * yv.transpose()) * H * (I - rho * yv * s.transpose()) + rho * s * s.transpose();
    }
    const double improvement = cur.f - next.f;
    t = t_next;
    cur = next;
    if (s.norm() < 1e-9 || improvement < 1e-12 * (1.0 + std::abs(cur.f))) break;
  }
  t_out = t;
  return cur;
}

}  // namespace

KernelParams fit_hyperparameters(const Dataset& data, const FitOptions& options) {
  data.validate();
  if (options.restarts < 1) throw std::invalid_argument("fit_hyperparameters needs at least one restart");
  LogBox box{Eigen::Vector2d(std::log(options.bounds.variance_lo), std::log(options.bounds.lengthscale_lo)),
             Eigen::Vector2d(std::log(options.bounds.variance_hi), std::log(options.bounds.lengthscale_hi))};
  std::mt19937_64 rng(options.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  double best_f = std::numeric_limits<double>::infinity();
  Eigen::Vector2d best_t = Eigen::Vector2d::Zero();
  for (int restart = 0; restart < options.restarts; ++restart) {
    Eigen::Vector2d start;
    for (int k = 0; k < 2; ++k) start[k] = box.lo[k] + unit(rng) * (box.hi[k] - box.lo[k]);
    Eigen::Vector2d t_end = start;
    const Eval e = local_search(data, start, box, options.noise, options.max_iterations, t_end);
    if (e.ok && e.f < best_f) {
      best_f = e.f;
      best_t = t_end;
    }
  }
  if (!std::isfinite(best_f)) {
    std::ostringstream msg;
    msg << "hyperparameter fit failed: every restart produced a non-PD Gram matrix (jitters tried:";
    for (double j : jitter_ladder()) msg << ' ' << j;
    msg << ')';
    throw NumericalError(msg.str());
  }
  return params_from_log(best_t, options.noise);
}

// ---------------------------------------------------------------------------
// Additive GP

AdditiveGpModel::AdditiveGpModel(Dataset data, std::vector<KernelGroup> groups, double noise)
    : data_(std::move(data)), groups_(std::move(groups)) {
  data_.validate();
  if (groups_.empty()) throw std::invalid_argument("additive GP needs at least one group");
  std::vector<int> seen(static_cast<std::size_t>(data_.dim()), 0);
  for (const KernelGroup& g : groups_) {
    if (g.dims.empty()) throw std::invalid_argument("additive GP group is empty");
    for (int d : g.dims) {
      if (d < 0 || d >= data_.dim()) throw std::invalid_argument("additive GP group references a missing dimension");
      if (seen[static_cast<std::size_t>(d)]++) throw std::invalid_argument("additive GP groups overlap");
    }
  }
  Matrix gram = Matrix::Zero(data_.size(), data_.size());
  for (const KernelGroup& g : groups_) {
    group_inputs_.push_back(data_.slice(g.dims).X);
    gram += matern_gram(group_inputs_.back(), g.params);
  }
  factor_ = factorize_gram(gram, noise);
  alpha_ = factor_.llt.solve(data_.y);
}

Posterior AdditiveGpModel::posterior(const Vector& x) const {
  if (x.size() != data_.dim()) throw std::invalid_argument("query point has wrong dimension");
  Vector k = Vector::Zero(data_.size());
  double prior = 0.0;
  for (std::size_t g = 0; g < groups_.size(); ++g) {
    Vector xg(groups_[g].dims.size());
    for (std::size_t j = 0; j < groups_[g].dims.size(); ++j) xg[static_cast<Eigen::Index>(j)] = x[groups_[g].dims[j]];
    k += matern_cross(group_inputs_[g], xg, groups_[g].params);
    prior += groups_[g].params.variance;
  }
  return posterior_from_factor(factor_, alpha_, k, prior);
}

Posterior AdditiveGpModel::component_posterior(int g, const Vector& xg) const {
  const auto& grp = groups_.at(static_cast<std::size_t>(g));
  const Vector k = Vector::Zero(data_.size()) + matern_cross(group_inputs_[static_cast<std::size_t>(g)], xg, grp.params);
  return posterior_from_factor(factor_, alpha_, k, grp.params.variance);
}

double AdditiveGpModel::component_lcb(int g, const Vector& xg, double beta) const {
  const Posterior p = component_posterior(g, xg);
  return p.mean - std::sqrt(beta) * std::sqrt(p.variance);
}

// ---------------------------------------------------------------------------
// Files

void write_dataset_csv(std::ostream& out, const Dataset& data) {
  for (int d = 0; d < data.dim(); ++d) out << 'x' << (d + 1) << ',';
  out << "y\n";
  for (int i = 0; i < data.size(); ++i) {
    for (int d = 0; d < data.dim(); ++d) out << format_double(data.X(i, d)) << ',';
    out << format_double(data.y[i]) << '\n';
  }
}

Dataset read_dataset_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw ConfigError("dataset file is empty");
  const auto header = split_fields(line);
  if (header.size() < 2) throw ConfigError("dataset header needs at least one input and one output column");
  const int dim = static_cast<int>(header.size()) - 1;
  Dataset data;
  data.X.resize(0, dim);
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto fields = split_fields(line);
    if (static_cast<int>(fields.size()) != dim + 1) {
      throw ConfigError("dataset line " + std::to_string(lineno) + " has " + std::to_string(fields.size()) +
                        " columns, expected " + std::to_string(dim + 1));
    }
    Vector x(dim);
    for (int d = 0; d < dim; ++d) x[d] = parse_double(fields[static_cast<std::size_t>(d)]);
    data.append(x, parse_double(fields.back()));
  }
  data.validate();
  return data;
}

}  // namespace pwlbo
