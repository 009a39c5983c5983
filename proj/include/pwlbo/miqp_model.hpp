// Copyright 2026 The pwlbo Authors.
// SPDX-License-Identifier: Apache-2.0

#ifndef PWLBO_MIQP_MODEL_HPP
#define PWLBO_MIQP_MODEL_HPP

#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "pwlbo/common.hpp"
#include "pwlbo/gp.hpp"
#include "pwlbo/pwl_kernel.hpp"

namespace pwlbo {

enum class VarKind { Continuous, Binary };
enum class Sense { LessEqual, Equal, GreaterEqual };

struct VariableDef {
  std::string name;
  VarKind kind = VarKind::Continuous;
  double lower = 0.0;
  double upper = 0.0;
};

using SparseRow = std::vector<std::pair<int, double>>;

struct LinearConstraint {
  SparseRow coefficients;
  Sense sense = Sense::LessEqual;
  double rhs = 0.0;
  std::string name;
};

enum class QuadTag { Convex, NonconvexEquality };

struct QuadTerm {
  int first = 0;
  int second = 0;
  double coef = 0.0;
};

/// sum quad(first, second) * v_first * v_second + linear.v  (sense)  rhs.
struct QuadConstraint {
  std::vector<QuadTerm> quad;
  SparseRow linear;
  Sense sense = Sense::LessEqual;
  double rhs = 0.0;
  QuadTag tag = QuadTag::Convex;
  std::string name;
};

/// A user constraint on the decision point. Variable indices are coordinates
/// of x (0-based), not model variable ids.
struct KnownConstraint {
  SparseRow linear;
  std::vector<QuadTerm> quad;  // empty for linear constraints
  Sense sense = Sense::LessEqual;
  double rhs = 0.0;

  [[nodiscard]] bool is_linear() const { return quad.empty(); }
  [[nodiscard]] double activity(const Vector& x) const;
  /// Amount by which x violates the constraint (0 when satisfied).
  [[nodiscard]] double violation(const Vector& x) const;
};

/// Rewrites constraints on original coordinates as constraints on the unit
/// box coordinates z with x = lb + (ub - lb) z. Each row is divided by its
/// largest coefficient magnitude.
std::vector<KnownConstraint> scale_constraints(const std::vector<KnownConstraint>& constraints,
                                               const ScalingTransform& transform);

/// Keeps the constraints whose support lies inside `dims`, re-indexed to the
/// positions within `dims`. Throws std::invalid_argument when a constraint
/// touches both `dims` and other coordinates.
std::vector<KnownConstraint> restrict_constraints(const std::vector<KnownConstraint>& constraints,
                                                  const std::vector<int>& dims);

/// Variable ids of each block of the model.
struct ModelLayout {
  std::vector<int> x;
  std::vector<int> r;
  std::vector<int> kx;
  std::vector<std::vector<int>> w;    // N x (M + 1)
  std::vector<std::vector<int>> lam;  // N x M
  int mu = -1;
  int sigma = -1;  // -1 in the mean-only model
  std::vector<int> known_linear;     // indices into MiqpModel::linear
  std::vector<int> known_quadratic;  // indices into MiqpModel::quadratic
};

/// Data the model was generated from. Solvers that exploit the structure
/// read it from here rather than re-deriving it from the rows.
struct ModelData {
  Matrix centers;      // N x D training inputs of the component
  Vector knots;        // R_0..R_M
  Vector knot_values;  // k(R_j)
  double variance = 1.0;
  double lengthscale = 1.0;
  Vector weights;  // K~^-1 y
  Matrix inverse;  // K~^-1
  GramFactor factor;
  double beta = 0.0;
  Vector lower;  // x box
  Vector upper;
  std::vector<KnownConstraint> known;
};

struct MiqpModel {
  std::vector<VariableDef> variables;
  std::vector<LinearConstraint> linear;
  std::vector<QuadConstraint> quadratic;
  SparseRow objective;  // minimized
  ModelLayout layout;
  ModelData data;

  [[nodiscard]] int num_variables() const { return static_cast<int>(variables.size()); }
  [[nodiscard]] int num_binaries() const;
  [[nodiscard]] int num_points() const { return static_cast<int>(layout.r.size()); }
  [[nodiscard]] int dim() const { return static_cast<int>(layout.x.size()); }
  [[nodiscard]] int segments() const { return static_cast<int>(data.knots.size()) - 1; }
  [[nodiscard]] bool has_variance() const { return layout.sigma >= 0; }
};

/// Acquisition model of component `component` of `gp`: minimize
/// mu - sqrt(beta) sigma over x in `bounds` (component-local coordinates).
MiqpModel build_full_model(const ApproxGp& gp, int component, double beta, const Box& bounds,
                           const std::vector<KnownConstraint>& known = {});
MiqpModel build_full_model(const PwlKernel& pwl, const Dataset& data, double beta, const Box& bounds,
                           const std::vector<KnownConstraint>& known = {});
/// Mean-only variant: no sigma variable and no variance constraint.
MiqpModel build_sub_model(const ApproxGp& gp, int component, const Box& bounds,
                          const std::vector<KnownConstraint>& known = {});
MiqpModel build_sub_model(const PwlKernel& pwl, const Dataset& data, const Box& bounds,
                          const std::vector<KnownConstraint>& known = {});

/// Appends constraints on x. Nonconvex quadratic constraints are rejected.
void add_known_constraints(MiqpModel& model, const std::vector<KnownConstraint>& constraints);

struct Assignment {
  Vector values;
  double objective = 0.0;
};

/// Completes x into a feasible assignment: distances, the bracketing
/// segment, kernel values, mean and the largest admissible sigma.
/// Throws std::invalid_argument when x violates the box or a known
/// constraint by more than 1e-6.
Assignment evaluate_candidate(const MiqpModel& model, const Vector& x);

/// x block of an assignment.
Vector point_of(const MiqpModel& model, const Vector& values);

/// Largest violation of any bound, integrality requirement or constraint.
double max_violation(const MiqpModel& model, const Vector& values);

double objective_value(const MiqpModel& model, const Vector& values);

/// LP-file text dialect (objective, constraints, bounds, binaries).
void export_lp_text(std::ostream& out, const MiqpModel& model);
std::string export_lp_text(const MiqpModel& model);
/// Parses the dialect written by export_lp_text. Only variables, rows and
/// the objective are recovered; the layout and data blocks stay empty.
MiqpModel parse_lp_text(std::istream& in);

}  // namespace pwlbo

#endif  // PWLBO_MIQP_MODEL_HPP
