#include <doctest.h>

#include <random>
#include <string>

#include "halfmass/error.hpp"
#include "halfmass/expr.hpp"
#include "random_expression.hpp"
#include "support.hpp"

using namespace halfmass;

TEST_CASE("parse: spine, range errors and folding") {
  const Expression e = Expression::parse("1 + 0.5*r^(-1)", 3);
  CHECK(e.spine_length() == 4);
  CHECK_THROWS_AS(Expression::parse("x4", 3), ParseError);
  const ConstantTable k{{"m", 1.0}, {"n", 3.0}};
  CHECK(Expression::parse("1 + (m/2)*r^(2-n)", 3, k) == Expression::parse("1+0.5*r^(-1)", 3));
  CHECK_THROWS_AS(Expression::parse("r^x1", 3), ParseError);
  CHECK_THROWS_AS(Expression::parse("foo + 1", 3), ParseError);
}

TEST_CASE("print-parse round trip is stable") {
  std::mt19937_64 rng(3);
  for (int t = 0; t < 200; ++t) {
    const Expression e = Expression::parse(test::clean(test::random_expression(rng, 3)), 3);
    const Expression f = Expression::parse(e.to_string(), 3);
    CHECK(e == f);
    CHECK(f.to_string() == e.to_string());
  }
}

TEST_CASE("jet examples") {
  const double a[3] = {0, 0, 2};
  const Jet2 j = Expression::parse("1+0.5/r", 3).eval_jet(a);
  CHECK(j.value == doctest::Approx(1.25));
  const Expression u = Expression::parse("1+0.5/r", 3);
  const double fd = test::central_difference([&](std::span<const double> y) { return u.eval(y); },
                                             {0, 0, 2}, 2, 1e-5);
  CHECK(fd == doctest::Approx(-0.125).epsilon(1e-9));
  CHECK(j.grad[2] == doctest::Approx(fd).epsilon(1e-9));
  CHECK(j.grad[0] == 0.0);

  const double b[3] = {1, 2, 3};
  const Jet2 p = Expression::parse("x1*x3", 3).eval_jet(b);
  CHECK(p.value == 3.0);
  CHECK(p.grad[0] == 3.0);
  CHECK(p.grad[1] == 0.0);
  CHECK(p.grad[2] == 1.0);
  for (int i = 0; i < 3; ++i)
    for (int k = 0; k < 3; ++k) CHECK(p.h(i, k) == ((i == 0 && k == 2) || (i == 2 && k == 0) ? 1.0 : 0.0));

  const double c[3] = {3, 0, 4};
  const Jet2 q = Expression::parse("r^(-1)", 3).eval_jet(c);
  CHECK(q.value == doctest::Approx(0.2));
  CHECK(std::abs(q.laplacian()) < 1e-15);

  const Jet2 k = Expression::parse("2.5", 3).eval_jet(c);
  for (int i = 0; i < 3; ++i) CHECK(k.grad[i] == 0.0);
  for (double h : k.hess) CHECK(h == 0.0);
}

TEST_CASE("domain errors are reported, not NaN") {
  const double x[3] = {1, 0, 0};
  CHECK_THROWS_AS(Expression::parse("1/(x1-1)", 3).eval_jet(x), DomainError);
  CHECK_THROWS_AS(Expression::parse("log(x2)", 3).eval(x), DomainError);
  CHECK_THROWS_AS(Expression::parse("(x1-2)^0.5", 3).eval(x), DomainError);
  const double o[3] = {0, 0, 0};
  CHECK_THROWS_AS(Expression::parse("r", 3).eval_jet(o), DomainError);
}

TEST_CASE("random expressions match finite differences") {
  std::mt19937_64 rng(11);
  std::normal_distribution<double> normal;
  std::uniform_real_distribution<double> radius(1.5, 4.0);
  int checked = 0;
  for (int t = 0; t < 1000; ++t) {
    const Expression e = Expression::parse(test::clean(test::random_expression(rng, 3)), 3);
    std::vector<double> x(3);
    double s = 0;
    for (auto& v : x) {
      v = normal(rng);
      s += v * v;
    }
    const double r = radius(rng);
    for (auto& v : x) v *= r / std::sqrt(s);
    const Jet2 j = e.eval_jet(x);
    const double h = 1e-3;
    auto value = [&](std::span<const double> y) { return e.eval(y); };
    for (int i = 0; i < 3; ++i) {
      const double fd = test::central_difference(value, x, i, h);
      CHECK(test::close(j.grad[i], fd, 1e-6, 1e-9));
      for (int k = 0; k < 3; ++k) {
        auto gradient_k = [&](std::span<const double> y) { return e.eval_jet(y).grad[k]; };
        const double fdh = test::central_difference(gradient_k, x, i, h);
        CHECK(test::close(j.h(i, k), fdh, 1e-6, 1e-9));
      }
    }
    ++checked;
  }
  CHECK(checked == 1000);
}

TEST_CASE("sum and product jets equal the rules applied to sub-jets") {
  std::mt19937_64 rng(5);
  const double x[3] = {1.2, -0.7, 0.9};
  for (int t = 0; t < 100; ++t) {
    const std::string a = test::clean(test::random_expression(rng, 2)), b = test::clean(test::random_expression(rng, 2));
    const Jet2 ja = Expression::parse(a, 3).eval_jet(x), jb = Expression::parse(b, 3).eval_jet(x);
    const Jet2 s = Expression::parse("(" + a + ")+(" + b + ")", 3).eval_jet(x);
    const Jet2 p = Expression::parse("(" + a + ")*(" + b + ")", 3).eval_jet(x);
    const Jet2 s_rule = ja + jb, p_rule = ja * jb;
    CHECK(s.value == s_rule.value);
    CHECK(p.value == p_rule.value);
    for (int i = 0; i < 3; ++i) {
      CHECK(s.grad[i] == s_rule.grad[i]);
      CHECK(p.grad[i] == p_rule.grad[i]);
    }
    for (int k = 0; k < packed_size(3); ++k) {
      CHECK(s.hess[k] == s_rule.hess[k]);
      CHECK(p.hess[k] == p_rule.hess[k]);
    }
  }
}

TEST_CASE("parsing is total on random input") {
  std::mt19937_64 rng(99);
  const std::string alphabet = "x123r+-*/^()., eplogsqrt0.59";
  std::uniform_int_distribution<std::size_t> ch(0, alphabet.size() - 1), len(0, 24);
  int parsed = 0, rejected = 0;
  for (int t = 0; t < 20000; ++t) {
    std::string s;
    const std::size_t l = len(rng);
    for (std::size_t i = 0; i < l; ++i) s += alphabet[ch(rng)];
    try {
      Expression::parse(s, 3);
      ++parsed;
    } catch (const ParseError&) {
      ++rejected;
    }
  }
  CHECK(parsed + rejected == 20000);
}
