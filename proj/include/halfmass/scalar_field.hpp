#pragma once

#include <functional>
#include <memory>
#include <span>

#include "halfmass/expr.hpp"
#include "halfmass/jet.hpp"

namespace halfmass {

/// Radial profile f(r) with f'(r) and f''(r).
struct RadialValue {
  double f, df, d2f;
};

/// Smooth function on the exterior region, queried as a second-order jet.
/// Cheap to copy; the underlying evaluator is shared and immutable.
class ScalarField {
 public:
  using JetFn = std::function<Jet2(std::span<const double>)>;
  using RadialFn = std::function<RadialValue(double)>;
  using ValueFn = std::function<double(std::span<const double>)>;

  ScalarField() = default;

  static ScalarField from_expression(Expression e);
  static ScalarField parse(std::string_view source, int n, const ConstantTable& constants = {});
  static ScalarField constant(int n, double value);
  static ScalarField radial(int n, RadialFn profile);
  /// `value` is an optional cheaper path for the value alone.
  static ScalarField from_jet(int n, JetFn fn, ValueFn value = {});

  int dimension() const noexcept { return n_; }
  bool valid() const noexcept { return static_cast<bool>(jet_); }
  /// Set when the field is a known constant (value in constant_value()).
  bool is_constant() const noexcept { return is_constant_; }
  double constant_value() const noexcept { return constant_; }

  Jet2 jet(std::span<const double> x) const { return jet_(x); }
  double value(std::span<const double> x) const { return value_ ? value_(x) : jet_(x).value; }

 private:
  int n_ = 0;
  bool is_constant_ = false;
  double constant_ = 0.0;
  JetFn jet_;
  ValueFn value_;
};

ScalarField operator*(const ScalarField& a, const ScalarField& b);

}  // namespace halfmass
