#include "halfmass/scalar_field.hpp"

#include <cmath>

#include "halfmass/error.hpp"

namespace halfmass {

ScalarField ScalarField::from_expression(Expression e) {
  ScalarField s;
  s.n_ = e.dimension();
  if (e.is_constant()) {
    s.is_constant_ = true;
    s.constant_ = e.node(e.root()).constant;
  }
  s.jet_ = [e](std::span<const double> x) { return e.eval_jet(x); };
  s.value_ = [e](std::span<const double> x) { return e.eval(x); };
  return s;
}

ScalarField ScalarField::parse(std::string_view source, int n, const ConstantTable& constants) {
  return from_expression(Expression::parse(source, n, constants));
}

ScalarField ScalarField::constant(int n, double value) {
  ScalarField s;
  s.n_ = n;
  s.is_constant_ = true;
  s.constant_ = value;
  s.jet_ = [n, value](std::span<const double>) { return Jet2::constant(n, value); };
  s.value_ = [value](std::span<const double>) { return value; };
  return s;
}

ScalarField ScalarField::radial(int n, RadialFn profile) {
  ScalarField s;
  s.n_ = n;
  s.jet_ = [profile](std::span<const double> x) {
    double r2 = 0.0;
    for (double v : x) r2 += v * v;
    if (r2 == 0.0) throw DomainError("r = 0");
    const RadialValue p = profile(std::sqrt(r2));
    return radial_jet(x, p.f, p.df, p.d2f);
  };
  s.value_ = [profile](std::span<const double> x) {
    double r2 = 0.0;
    for (double v : x) r2 += v * v;
    if (r2 == 0.0) throw DomainError("r = 0");
    return profile(std::sqrt(r2)).f;
  };
  return s;
}

ScalarField ScalarField::from_jet(int n, JetFn fn, ValueFn value) {
  ScalarField s;
  s.n_ = n;
  s.jet_ = std::move(fn);
  s.value_ = std::move(value);
  return s;
}

ScalarField operator*(const ScalarField& a, const ScalarField& b) {
  if (a.dimension() != b.dimension()) throw InvalidArgument("scalar field dimension mismatch");
  if (a.is_constant() && b.is_constant())
    return ScalarField::constant(a.dimension(), a.constant_value() * b.constant_value());
  return ScalarField::from_jet(a.dimension(),
                               [a, b](std::span<const double> x) { return a.jet(x) * b.jet(x); });
}

}  // namespace halfmass
