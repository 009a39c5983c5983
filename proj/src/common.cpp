// Copyright 2026 The pwlbo Authors.
// SPDX-License-Identifier: Apache-2.0

#include "pwlbo/common.hpp"

#include <charconv>
#include <cmath>
#include <sstream>
#include <system_error>

namespace pwlbo {

Box::Box(Vector lower, Vector upper) : lb(std::move(lower)), ub(std::move(upper)) {
  if (lb.size() != ub.size() || lb.size() == 0) {
    throw std::invalid_argument("box bounds must be non-empty and of equal dimension");
  }
  for (int d = 0; d < lb.size(); ++d) {
    if (!std::isfinite(lb[d]) || !std::isfinite(ub[d]) || !(ub[d] > lb[d])) {
      throw std::invalid_argument("box requires finite bounds with ub > lb in every dimension");
    }
  }
}

Box Box::unit(int dim) { return Box(Vector::Zero(dim), Vector::Ones(dim)); }

bool Box::contains(const Vector& x, double tol) const {
  if (x.size() != lb.size()) return false;
  for (int d = 0; d < x.size(); ++d) {
    if (x[d] < lb[d] - tol || x[d] > ub[d] + tol) return false;
  }
  return true;
}

Vector Box::project(const Vector& x) const { return x.cwiseMax(lb).cwiseMin(ub); }

Box Box::slice(const std::vector<int>& dims) const {
  Vector lo(dims.size()), hi(dims.size());
  for (std::size_t k = 0; k < dims.size(); ++k) {
    lo[k] = lb[dims[k]];
    hi[k] = ub[dims[k]];
  }
  return Box(lo, hi);
}

const std::vector<double>& jitter_ladder() {
  static const std::vector<double> ladder{0.0, 1e-8, 1e-7, 1e-6, 1e-5, 1e-4};
  return ladder;
}

std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

std::vector<std::string> split_fields(const std::string& line, char delim) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream in(line);
  while (std::getline(in, field, delim)) {
    auto b = field.find_first_not_of(" \t\r");
    auto e = field.find_last_not_of(" \t\r");
    out.push_back(b == std::string::npos ? std::string() : field.substr(b, e - b + 1));
  }
  if (!line.empty() && line.back() == delim) out.emplace_back();
  return out;
}

double parse_double(const std::string& field) {
  double v = 0.0;
  const char* first = field.data();
  const char* last = first + field.size();
  if (first != last && *first == '+') ++first;
  auto res = std::from_chars(first, last, v);
  if (res.ec != std::errc() || res.ptr != last) {
    throw ConfigError("not a number: '" + field + "'");
  }
  return v;
}

}  // namespace pwlbo
