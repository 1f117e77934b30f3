#include <doctest.h>

#include <random>

#include "halfmass/error.hpp"
#include "halfmass/mass.hpp"
#include "halfmass/metric.hpp"
#include "halfmass/quadrature.hpp"
#include "support.hpp"

using namespace halfmass;

namespace {

// Upper unit hemisphere integral of prod x_i^{a_i}, all a_i even except
// possibly a_n: prod Gamma((a_i + 1)/2) / Gamma(sum (a_i + 1)/2).
double hemisphere_monomial(const std::vector<int>& a) {
  for (std::size_t i = 0; i + 1 < a.size(); ++i)
    if (a[i] % 2) return 0.0;
  double lg = 0, s = 0;
  for (int e : a) {
    lg += std::lgamma((e + 1) / 2.0);
    s += (e + 1) / 2.0;
  }
  return std::exp(lg - std::lgamma(s));
}

double omega(int k) { return 2 * std::pow(test::kPi, (k + 1) / 2.0) / std::tgamma((k + 1) / 2.0); }

}  // namespace

TEST_CASE("Gauss-Legendre integrates polynomials of degree 2p-1") {
  const GaussRule g = gauss_legendre(6);
  for (int d = 0; d <= 11; ++d) {
    double s = 0;
    for (std::size_t i = 0; i < g.nodes.size(); ++i) s += g.weights[i] * std::pow(g.nodes[i], d);
    CHECK(s == doctest::Approx(d % 2 ? 0.0 : 2.0 / (d + 1)).epsilon(1e-14));
  }
}

TEST_CASE("hemisphere examples") {
  const HemisphereRule h = hemisphere_rule(3, 1.0, 12);
  double area = 0;
  for (double w : h.weights) {
    CHECK(w > 0);
    area += w;
  }
  CHECK(area == doctest::Approx(2 * test::kPi).epsilon(1e-13));
  const VectorFieldFn e3 = [](std::span<const double>, std::span<double> out) {
    out[0] = out[1] = 0;
    out[2] = 1;
  };
  CHECK(integrate_flux(e3, h) == doctest::Approx(test::kPi).epsilon(1e-13));
  const VectorFieldFn e1 = [](std::span<const double>, std::span<double> out) {
    out[0] = 1;
    out[1] = out[2] = 0;
  };
  CHECK(std::abs(integrate_flux(e1, h)) < 1e-14);

  const HemisphereRule h2 = hemisphere_rule(3, 2.0, 12);
  double len = 0;
  for (double w : h2.equator_weights) {
    CHECK(w > 0);
    len += w;
  }
  CHECK(len == doctest::Approx(4 * test::kPi).epsilon(1e-13));

  const HemisphereRule h5 = hemisphere_rule(3, 5.0, 12);
  const VectorFieldFn inv = [](std::span<const double> x, std::span<double> out) {
    const double r2 = x[0] * x[0] + x[1] * x[1] + x[2] * x[2];
    for (int i = 0; i < 3; ++i) out[i] = x[i] / r2;
  };
  CHECK(integrate_flux(inv, h5) == doctest::Approx(10 * test::kPi).epsilon(1e-13));

  CHECK_THROWS_AS(hemisphere_rule(2, 1.0, 8), InvalidArgument);
  CHECK_THROWS_AS(hemisphere_rule(8, 1.0, 8), InvalidArgument);
  CHECK_THROWS_AS(hemisphere_rule(3, 1.0, 1), InvalidArgument);
}

TEST_CASE("equator integrals") {
  for (double r : {1.0, 3.0, 17.0}) {
    const HemisphereRule h = hemisphere_rule(3, r, 12);
    const double c = 0.7;
    const VectorFieldFn f = [c](std::span<const double> x, std::span<double> out) {
      const double r2 = x[0] * x[0] + x[1] * x[1] + x[2] * x[2];
      out[0] = c * x[0] / r2;
      out[1] = out[2] = 0;
    };
    CHECK(integrate_equator(f, h) == doctest::Approx(c * test::kPi).epsilon(1e-13));
    const VectorFieldFn zero = [](std::span<const double>, std::span<double> out) {
      for (auto& v : out) v = 0;
    };
    CHECK(integrate_equator(zero, h) == 0.0);
    const VectorFieldFn k = [](std::span<const double>, std::span<double> out) {
      out[0] = 1.3;
      out[1] = -0.4;
      out[2] = 2.0;
    };
    CHECK(std::abs(integrate_equator(k, h)) < 1e-13 * r);
  }
}

TEST_CASE("areas and monomial exactness in dimensions 3..7") {
  std::mt19937_64 rng(17);
  for (int n = 3; n <= 7; ++n) {
    const int order = 10;
    const HemisphereRule h = hemisphere_rule(n, 1.5, order);
    double area = 0, eq = 0;
    for (double w : h.weights) area += w;
    for (double w : h.equator_weights) eq += w;
    INFO("n=" << n << " rel=" << area / (0.5 * omega(n - 1) * std::pow(1.5, n - 1)) - 1);
    CHECK(area == doctest::Approx(0.5 * omega(n - 1) * std::pow(1.5, n - 1)).epsilon(1e-12));
    CHECK(eq == doctest::Approx(omega(n - 2) * std::pow(1.5, n - 2)).epsilon(1e-12));

    // Odd n: the polar factor is polynomial, so the rule is exact to `order`.
    // Even n: spectral accuracy only, checked at the looser level.
    const double tol = n % 2 ? 1e-12 : 1e-10;
    std::uniform_int_distribution<int> e(0, 4);
    for (int t = 0; t < 40; ++t) {
      std::vector<int> a(static_cast<std::size_t>(n));
      int deg;
      do {
        deg = 0;
        for (auto& v : a) deg += (v = e(rng));
      } while (deg > order);
      const ScalarFn f = [&a](std::span<const double> x) {
        double p = 1;
        for (std::size_t i = 0; i < a.size(); ++i) p *= std::pow(x[i] / 1.5, a[i]);
        return p;
      };
      const double exact = hemisphere_monomial(a) * std::pow(1.5, n - 1);
      const double got = integrate_scalar(f, h.nodes, h.weights);
      INFO("n=" << n << " got=" << got << " exact=" << exact);
      CHECK(test::close(got, exact, tol, 1e-13));
    }
  }
}

TEST_CASE("full-sphere flux of the fundamental solution gradient is radius independent") {
  for (int n = 3; n <= 7; ++n)
    for (double r : {1.0, 4.0, 64.0}) {
      const SphereRule s = sphere_rule(n, r, 12);
      double flux = 0;
      for (std::size_t k = 0; k < s.nodes.size(); ++k) {
        // x / r^n dotted with x / r.
        flux += s.weights[k] * std::pow(r, 1 - n);
      }
      CHECK(flux == doctest::Approx(omega(n - 1)).epsilon(1e-8));
    }
}

TEST_CASE("mass integrand is converged in the node count at order >= 8") {
  const MetricField g = half_schwarzschild(3, 1.0);
  const MetricField p = conformal(g, ScalarField::parse("1 + 0.05*x1*x3/r^3", 3));
  for (const MetricField& m : {g, p})
    for (int order : {8, 12}) {
      const double a = mass_at_radius(m, 10.0, order).total;
      const double b = mass_at_radius(m, 10.0, 2 * order).total;
      CHECK(std::abs(a - b) <= 1e-10 * std::abs(b));
    }
}

TEST_CASE("pairwise summation depends only on input order") {
  std::vector<double> v(1000);
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(-1, 1);
  for (auto& x : v) x = u(rng);
  const double a = pairwise_sum(v), b = pairwise_sum(v);
  CHECK(a == b);
  double naive = 0;
  for (double x : v) naive += x;
  CHECK(a == doctest::Approx(naive).epsilon(1e-12));
}
