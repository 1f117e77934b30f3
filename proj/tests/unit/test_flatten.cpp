#include <doctest.h>

#include "halfmass/elliptic.hpp"
#include "halfmass/error.hpp"
#include "halfmass/grid.hpp"
#include "halfmass/mass.hpp"
#include "halfmass/suites.hpp"
#include "support.hpp"

using namespace halfmass;

TEST_CASE("cutoff profile") {
  for (double t : {-1.0, 0.0, 0.5, 1.0}) {
    const RadialValue c = cutoff(t);
    CHECK(c.f == 1.0);
    CHECK(c.df == 0.0);
    CHECK(c.d2f == 0.0);
  }
  for (double t : {2.0, 2.5, 10.0}) CHECK(cutoff(t).f == 0.0);
  double prev = 1.0;
  for (double t = 1.01; t < 2.0; t += 0.01) {
    const RadialValue c = cutoff(t);
    CHECK(c.f <= prev);
    CHECK(c.f >= 0.0);
    prev = c.f;
    const double h = 1e-4;
    const double df = (-cutoff(t + 2 * h).f + 8 * cutoff(t + h).f - 8 * cutoff(t - h).f + cutoff(t - 2 * h).f) / (12 * h);
    const double d2 = (-cutoff(t + 2 * h).df + 8 * cutoff(t + h).df - 8 * cutoff(t - h).df + cutoff(t - 2 * h).df) / (12 * h);
    CHECK(test::close(c.df, df, 1e-6, 1e-9));
    CHECK(test::close(c.d2f, d2, 1e-6, 1e-8));
  }
  CHECK(cutoff(1.5).f == doctest::Approx(0.5).epsilon(1e-14));
}

TEST_CASE("flattening the flat half-space is the identity") {
  const FlatteningResult r = conformal_flatten(flat_half_space(3), 16.0, 0.1);
  double worst = 0;
  for (double v : r.discrete->u) worst = std::max(worst, std::abs(v - 1.0));
  CHECK(worst <= 1e-12);
  CHECK(r.min_u == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(r.mass_delta <= 1e-12);
  CHECK(r.within_epsilon);
  CHECK(r.hypotheses_hold);
  const double x[3] = {30.0, 5.0, 2.0};
  CHECK((r.g_bar.value(x) - SmallMatrix::Identity(3, 3)).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("flattening a perturbed half-Schwarzschild metric") {
  const MetricField g = perturbed_half_schwarzschild(0.01);
  const FlatteningResult r = conformal_flatten(g, 16.0, 0.1);
  CHECK(r.hypotheses_hold);
  CHECK(r.min_u > 0.0);
  CHECK(r.scalar_residual <= 10 * r.residual_scale);
  CHECK(r.mean_residual <= 10 * r.residual_scale);
  CHECK(r.mass_g.extrapolated == doctest::Approx(8 * test::kPi).epsilon(0.005));
  CHECK(r.mass_delta < 0.1);
  CHECK(r.within_epsilon);
  // Far out, u_R = 1 + C/r + D/r^2 and g_bar = u_R^4 delta.
  const double x[3] = {0.0, 200.0, 50.0};
  const double rr = std::hypot(x[1], x[2]);
  const double u = 1 + r.C / rr + r.D / (rr * rr);
  CHECK(r.u_R.value(x) == doctest::Approx(u).epsilon(1e-14));
  CHECK(r.g_bar.value(x)(0, 0) == doctest::Approx(std::pow(u, 4)).epsilon(1e-12));
}

TEST_CASE("hypothesis check flags negative boundary mean curvature") {
  const MetricField g = conformal(flat_half_space(3), ScalarField::parse("1 + 0.5/r + 0.1*x3/r^3", 3));
  const FlatteningResult r = conformal_flatten(g, 16.0, 0.1);
  CHECK_FALSE(r.hypotheses_hold);
  CHECK_FALSE(r.warnings.empty());
}

TEST_CASE("weighted norms") {
  const ScalarField inv = ScalarField::parse("r^(-1)", 3);
  const WeightedNormReport a = weighted_norm(inv, -1.0, 1);
  CHECK(a.finite);
  CHECK(a.estimated_norm == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(a.terms[0] == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(a.terms[1] == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(a.fitted_decay == doctest::Approx(1.0).epsilon(1e-10));

  const WeightedNormReport b = weighted_norm(inv, -2.0, 1);
  CHECK_FALSE(b.finite);
  CHECK(std::isinf(b.estimated_norm));

  const WeightedNormReport z = weighted_norm(ScalarField::constant(3, 0.0), -1.0, 2);
  CHECK(z.estimated_norm == 0.0);

  CHECK_THROWS_AS(weighted_norm(inv, -1.0, 3), InvalidArgument);
  WeightedNormSpec bad;
  bad.radii = {0.5, 1, 2};
  CHECK_THROWS_AS(weighted_norm(inv, -1.0, 1, bad), InvalidArgument);

  // Monotone in k (more terms) and in gamma (weaker weight); finite norms
  // come with a decay of at least -gamma - slack.
  for (const char* src : {"r^(-1)", "x1/r^2 + 0.5/r", "exp(-r/8)/r", "(1+r^2)^(-0.6)"}) {
    const ScalarField u = ScalarField::parse(src, 3);
    for (double gamma : {-1.5, -1.0, -0.5, 0.0}) {
      double prev = 0;
      for (int k = 0; k <= 2; ++k) {
        const WeightedNormReport w = weighted_norm(u, gamma, k);
        CHECK(w.estimated_norm >= prev);
        prev = w.estimated_norm;
        CHECK(weighted_norm(u, gamma + 0.25, k).estimated_norm <= w.estimated_norm);
        if (w.finite) CHECK(w.fitted_decay >= -gamma - 0.25);
      }
    }
  }
}

TEST_CASE("integral weighted norm") {
  // u = 1/r, beta = -1, q = 2: int r^{-3} over the half shell = 2 pi ln(b / a).
  const double v = lq_norm(ScalarField::parse("r^(-1)", 3), 2.0, -1.0, 2.0, 32.0);
  CHECK(v == doctest::Approx(std::sqrt(2 * test::kPi * std::log(16.0))).epsilon(1e-10));
}

TEST_CASE("asymptotic coefficient") {
  const std::vector<double> radii{16, 32, 64, 128};
  const AsymptoticFit a = asymptotic_coefficient(ScalarField::parse("1 + 0.5/r", 3), 1.0, radii);
  CHECK(a.C == doctest::Approx(0.5).epsilon(1e-12));
  CHECK_FALSE(a.flagged);
  const AsymptoticFit z = asymptotic_coefficient(ScalarField::parse("1 + exp(-r)", 3), 1.0, radii);
  CHECK(std::abs(z.C) <= 1e-5);

  CHECK(coefficient_factor(3) == doctest::Approx(1.0 / (16 * test::kPi)).epsilon(1e-15));
  const double cc = 0.25;
  const MetricField g = conformal(flat_half_space(3), ScalarField::parse("1 + 0.25/r", 3));
  const double m = mass(g, std::vector<double>{20, 40, 80, 160}).extrapolated;
  CHECK(m * coefficient_factor(3) == doctest::Approx(cc).epsilon(0.01));

  // Discrete solution with Robin closure against the closed form.
  OracleProblem prob;
  prob.r_in = 1.0;
  prob.r_out = 8.0;
  RadialBump b;
  b.center = {1.6, 0.3, 0.0};
  b.radius = 0.5;
  b.power = 2;
  prob.balls.push_back(b);
  BvpProblem p;
  p.data = prob.load();
  const auto grid = std::make_shared<const DiscreteHalfAnnulus>(1.0, 8.0, 0.125, 3);
  const DiscreteSolution s = solve_bvp(grid, p);
  const std::vector<double> shells{3, 4, 5, 6, 7};
  const ScalarField exact = ScalarField::from_jet(3, [&](std::span<const double> y) {
    const auto e = prob.exact(y);
    Jet2 j(3, e[0]);
    for (int i = 0; i < 3; ++i) j.grad[i] = e[static_cast<std::size_t>(i + 1)];
    return j;
  });
  const double c_exact = asymptotic_coefficient(exact, 0.0, shells).C;
  CHECK(asymptotic_coefficient(s, 0.0, shells).C == doctest::Approx(c_exact).epsilon(0.01));
  const double outside[1] = {9.0};
  CHECK_THROWS_AS(asymptotic_coefficient(s, 0.0, outside), InvalidArgument);
}
