#pragma once

#include "orbitshade/core.hpp"
#include "orbitshade/expr.hpp"

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace orbitshade {

enum class Constraint { None, UnitSphere };

using ParamMap = std::map<std::string, double>;

// A vector field on a Euclidean chart, or on the unit sphere S^2 embedded in
// R^3 (the right-hand side is then projected onto the tangent plane).
// Immutable after construction; copies share the compiled programs.
class VectorFieldDef {
 public:
  VectorFieldDef(std::vector<std::string> coordinates, std::vector<expr::NodePtr> rhs,
                 std::vector<std::string> param_names, std::vector<double> param_values,
                 Constraint constraint = Constraint::None);

  std::size_t dimension() const { return coordinates_.size(); }
  const std::vector<std::string>& coordinates() const { return coordinates_; }
  const std::vector<std::string>& parameter_names() const { return param_names_; }
  const std::vector<double>& parameter_values() const { return param_values_; }
  const std::vector<expr::NodePtr>& expressions() const { return rhs_; }
  Constraint constraint() const { return constraint_; }
  const std::string& builtin_id() const { return builtin_id_; }
  double parameter(std::string_view name) const;

  // Throws FieldError on a non-finite component.
  Vec evaluate(const Vec& x) const;
  // Unchecked hot path used by the integrator; returns false on non-finite output.
  bool evaluate_into(const double* x, double* out) const;

  // Exact Jacobian from differentiated expression trees (including the
  // tangential projection under the sphere constraint).
  Mat jacobian(const Vec& x) const;

  // Chart metric: Euclidean, or great-circle distance on the sphere.
  double distance(const Vec& a, const Vec& b) const;

  // Restore the constraint (unit norm on the sphere); identity otherwise.
  Vec project(const Vec& x) const;

  VectorFieldDef with_parameter(std::string_view name, double value) const;
  VectorFieldDef with_builtin_id(std::string id) const;

 private:
  struct Compiled;

  std::vector<std::string> coordinates_;
  std::vector<expr::NodePtr> rhs_;
  std::vector<std::string> param_names_;
  std::vector<double> param_values_;
  Constraint constraint_;
  std::string builtin_id_;
  std::shared_ptr<const Compiled> compiled_;
};

// Text format, one statement per line or separated by ';':
//   x' = y            coordinate equation (coordinates ordered by first equation)
//   param r = 28      parameter declaration (constant expression)
//   constraint sphere field lives on the unit sphere (3 coordinates)
//   # comment
// `overrides` replaces or supplies parameter values.
VectorFieldDef parse_field_definition(std::string_view source, const ParamMap& overrides = {});

// Inverse of parse_field_definition up to formatting.
std::string print_field_definition(const VectorFieldDef& field);

// Builtin catalog: linear-saddle-2d, linear-saddle-3d, duffing-saddle, lorenz,
// sphere-morse-smale, saddle-with-return.
VectorFieldDef builtin_field(std::string_view id, const ParamMap& overrides = {});
std::vector<std::string> builtin_ids();
std::optional<std::string> builtin_source(std::string_view id);

// Central differences with h = max(1e-6, 1e-6 |x|).
Mat jacobian_fd(const VectorFieldDef& field, const Vec& x);

// The field seen in coordinates y = Q x for orthogonal Q: y' = Q f(Q^T y).
VectorFieldDef conjugate_by_orthogonal(const VectorFieldDef& field, const Mat& q);

// Orthonormal basis (n x (n-1)) of the tangent plane of the sphere at x.
Mat sphere_tangent_basis(const Vec& x);

}  // namespace orbitshade
