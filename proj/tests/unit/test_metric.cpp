#include <doctest.h>

#include <Eigen/Eigenvalues>
#include <random>

#include "halfmass/error.hpp"
#include "halfmass/metric.hpp"
#include "halfmass/sampling.hpp"
#include "halfmass/scalar_field.hpp"
#include "support.hpp"

using namespace halfmass;

namespace {

// Packed index list for a single entry (i, j), other entries invalid.
std::vector<ScalarField> only(int n, int i, int j, const std::string& src) {
  std::vector<ScalarField> a(static_cast<std::size_t>(packed_size(n)));
  a[static_cast<std::size_t>(packed_index(i, j))] = ScalarField::parse(src, n);
  return a;
}

double max_abs_diff(const MetricJet& a, const MetricJet& b, double& scale) {
  double d = 0.0;
  scale = 0.0;
  for (int k = 0; k < packed_size(a.n); ++k) {
    const Jet2 &x = a.c[static_cast<std::size_t>(k)], &y = b.c[static_cast<std::size_t>(k)];
    d = std::max(d, std::abs(x.value - y.value));
    scale = std::max(scale, std::abs(y.value));
    for (int i = 0; i < a.n; ++i) {
      d = std::max(d, std::abs(x.grad[i] - y.grad[i]));
      scale = std::max(scale, std::abs(y.grad[i]));
    }
    for (int p = 0; p < packed_size(a.n); ++p) {
      d = std::max(d, std::abs(x.hess[p] - y.hess[p]));
      scale = std::max(scale, std::abs(y.hess[p]));
    }
  }
  return d;
}

}  // namespace

TEST_CASE("flat half-space") {
  const MetricField g = flat_half_space(3);
  const double x[3] = {0.3, -2, 5};
  CHECK(g.value(x).isApprox(SmallMatrix::Identity(3, 3), 0.0));
  REQUIRE(g.exact_mass);
  CHECK(*g.exact_mass == 0.0);
  CHECK(g.boundary_orthogonal);
  const double y[7] = {1, 1, 1, 1, 1, 1, 1};
  CHECK(is_positive_definite(flat_half_space(7), y));
}

TEST_CASE("half-Schwarzschild closed form") {
  const MetricField g = half_schwarzschild(3, 1.0);
  REQUIRE(g.exact_mass);
  CHECK(*g.exact_mass == doctest::Approx(8 * test::kPi).epsilon(1e-14));
  const double x[3] = {0, 0, 2};
  const double u = 1 + 0.5 / 2;
  CHECK(g.value(x)(0, 0) == doctest::Approx(u * u * u * u).epsilon(1e-15));
  CHECK(g.value(x)(0, 0) == doctest::Approx(2.44140625).epsilon(1e-15));
  CHECK(g.value(x)(0, 1) == 0.0);
  CHECK(half_schwarzschild(4, 2.0).r0 == doctest::Approx(1.0));
  CHECK(*half_schwarzschild(4, 1.0).exact_mass ==
        doctest::Approx(6 * test::kPi * test::kPi).epsilon(1e-14));
}

TEST_CASE("conformal change") {
  const MetricField flat = flat_half_space(3);
  const MetricField same = conformal(flat, ScalarField::constant(3, 1.0));
  const MetricField hs = conformal(flat, ScalarField::parse("1+0.5/r", 3));
  const MetricField ref = half_schwarzschild(3, 1.0);
  const PointSet pts = sample_sphere(3, 3.0, 50, SphereRegion::UpperHemisphere, 4);
  for (std::size_t k = 0; k < pts.size(); ++k) {
    double scale;
    CHECK(max_abs_diff(same.jet(pts[k]), flat.jet(pts[k]), scale) == 0.0);
    const double d = max_abs_diff(hs.jet(pts[k]), ref.jet(pts[k]), scale);
    CHECK(d <= 1e-14 * scale);
  }
  CHECK_THROWS_AS(conformal(flat, ScalarField::parse("1-2/r", 3)), DomainError);
}

TEST_CASE("conformal composition matches the product factor") {
  const MetricField g = perturbation(3, only(3, 0, 2, "0.1*x1*x3*(1+r^2)^(-1.6)"), 1.2, 1.0);
  const ScalarField u = ScalarField::parse("1 + 0.3/r + 0.05*x1/r^2", 3);
  const ScalarField v = ScalarField::parse("1 + 0.2*exp(-r/4)", 3);
  const MetricField a = conformal(conformal(g, u), v);
  const MetricField b = conformal(g, u * v);
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> c(-6, 6);
  for (int t = 0; t < 200; ++t) {
    double x[3] = {c(rng), c(rng), std::abs(c(rng))};
    if (std::hypot(x[0], x[1], x[2]) < 1.5) continue;
    double scale;
    const double d = max_abs_diff(a.jet(x), b.jet(x), scale);
    CHECK(d <= 1e-12 * scale);
  }
}

TEST_CASE("perturbation flags and decay warnings") {
  const MetricField none = perturbation(3, std::vector<ScalarField>(6), 1.0, 1.0);
  const double x[3] = {2, 1, 0.5};
  CHECK(none.value(x).isApprox(SmallMatrix::Identity(3, 3), 0.0));

  const MetricField tilted = perturbation(3, only(3, 0, 2, "0.1*x1/r^2"), 1.0, 1.0);
  CHECK_FALSE(tilted.boundary_orthogonal);
  const MetricField straight = perturbation(3, only(3, 0, 0, "0.1*x1/r^2"), 1.0, 1.0);
  CHECK(straight.boundary_orthogonal);

  CHECK(perturbation(3, only(3, 0, 0, "r^(-1)"), 1.0, 1.0).warnings.empty());
  CHECK_FALSE(perturbation(3, only(3, 0, 0, "r^(-1)"), 2.0, 1.0).warnings.empty());

  CHECK_THROWS_AS(perturbation(3, only(3, 0, 0, "-1.5 + 0*r"), 1.0, 1.0), MetricError);
}

TEST_CASE("metric jets share storage for g_ij and g_ji") {
  MetricJet m(4);
  CHECK(&m(1, 3) == &m(3, 1));
  const MetricField g = perturbation(3, only(3, 0, 1, "0.2*x3/r^2"), 1.0, 1.0);
  const double x[3] = {1.5, -0.5, 2};
  const SmallMatrix v = g.value(x);
  CHECK(v(0, 1) == v(1, 0));
}

TEST_CASE("random rigid motions are admissible") {
  for (int n = 3; n <= 7; ++n)
    for (std::uint64_t s = 0; s < 20; ++s) {
      const RigidMotion m = random_rigid_motion(n, s, 2.0);
      CHECK((m.q.transpose() * m.q - SmallMatrix::Identity(n, n)).norm() < 1e-13);
      CHECK(m.q.determinant() == doctest::Approx(1.0).epsilon(1e-13));
      for (int i = 0; i < n; ++i) {
        CHECK(m.q(i, n - 1) == (i == n - 1 ? 1.0 : 0.0));
        CHECK(m.q(n - 1, i) == (i == n - 1 ? 1.0 : 0.0));
      }
      CHECK(m.b(n - 1) == 0.0);
      CHECK(m.b.norm() <= 2.0);
    }
}

TEST_CASE("pullback preserves eigenvalues at corresponding points") {
  const MetricField g = perturbation(
      3,
      {ScalarField::parse("0.3*(1+r^2)^(-0.6)", 3), ScalarField(), ScalarField::parse("0.2*(1+r^2)^(-0.6)", 3),
       ScalarField::parse("0.1*x1*x3*(1+r^2)^(-1.6)", 3), ScalarField(),
       ScalarField::parse("0.25*(1+r^2)^(-0.6)", 3)},
      1.2, 1.0);
  CHECK_FALSE(pullback_rigid(g, SmallMatrix::Identity(3, 3), SmallVector::Zero(3)).source == nullptr);
  const double y0[3] = {2, 3, 1};
  CHECK(pullback_rigid(g, SmallMatrix::Identity(3, 3), SmallVector::Zero(3)).value(y0) == g.value(y0));

  for (std::uint64_t s = 0; s < 10; ++s) {
    const RigidMotion m = random_rigid_motion(3, s, 1.0);
    const MetricField p = pullback_rigid(g, m.q, m.b);
    const PointSet pts = sample_sphere(3, 4.0, 20, SphereRegion::UpperHemisphere, s);
    for (std::size_t k = 0; k < pts.size(); ++k) {
      SmallVector y(3);
      for (int i = 0; i < 3; ++i) y(i) = pts[k][static_cast<std::size_t>(i)];
      const SmallVector x = m.q * y + m.b;
      Eigen::SelfAdjointEigenSolver<SmallMatrix> ey(p.value(pts[k])), ex(g.value({x.data(), 3}));
      CHECK((ey.eigenvalues() - ex.eigenvalues()).cwiseAbs().maxCoeff() < 1e-12);
    }
  }
}

TEST_CASE("sampled decay follows the declared rate") {
  const MetricDecay d = sampled_decay(half_schwarzschild(3, 1.0));
  CHECK(d.rate0 == doctest::Approx(1.0).epsilon(0.05));
  CHECK(d.rate1 == doctest::Approx(2.0).epsilon(0.05));
  CHECK(d.rate2 == doctest::Approx(3.0).epsilon(0.05));
  CHECK_NOTHROW(check_positive_definite(half_schwarzschild(3, 1.0)));
}
