#include <doctest.h>

#include "halfmass/error.hpp"
#include "halfmass/mass.hpp"
#include "halfmass/metric_file.hpp"
#include "halfmass/suites.hpp"
#include "support.hpp"

using namespace halfmass;

TEST_CASE("metric file: families and keys") {
  const MetricFile f = parse_metric_file(
      "# comment\n"
      "dimension = 3\n"
      "\n"
      "family = half_schwarzschild\n"
      "m = 1\n"
      "schedule = 20 40 80 160\n");
  CHECK(f.n == 3);
  CHECK(f.family == "half_schwarzschild");
  CHECK(f.schedule == std::vector<double>{20, 40, 80, 160});
  const MetricField g = build_metric(f);
  REQUIRE(g.exact_mass);
  CHECK(*g.exact_mass == doctest::Approx(8 * test::kPi));

  const MetricField c = build_metric(parse_metric_file(
      "dimension = 3\nfamily = conformal\nconst C = 0.25\nu = 1 + C/r\nflags = conformally_flat boundary_orthogonal\n"));
  const double x[3] = {0, 0, 2};
  CHECK(c.value(x)(0, 0) == doctest::Approx(std::pow(1.125, 4)).epsilon(1e-15));
  CHECK(c.conformally_flat);

  const MetricField p = build_metric(parse_metric_file(
      "dimension = 3\ntau = 1.2\nr0 = 1\nfamily = perturbation\na13 = 0.1*x1/r^2\na31 = 0.1*x1/r^2\n"));
  CHECK_FALSE(p.boundary_orthogonal);
  CHECK(p.tau == 1.2);
}

TEST_CASE("metric file: errors carry line numbers") {
  try {
    parse_metric_file("dimension = 3\nfamily = perturbation\ntau = 1\na12 = 0.1/r\na21 = 0.2/r\n");
    FAIL("expected a symmetry error");
  } catch (const ParseError& e) {
    CHECK(e.position() == 5);
    CHECK(std::string(e.detail()).find("symmetric") != std::string::npos);
  }
  CHECK_THROWS_AS(parse_metric_file("dimension = 3\nfamly = flat\n"), ParseError);
  CHECK_THROWS_AS(parse_metric_file("dimension = 3\nfamily = flat\nr0 = abc\n"), ParseError);
  CHECK_THROWS_AS(parse_metric_file("dimension = 3\nfamily = conformal\nu = 1 + x4\n"), ParseError);
  CHECK_THROWS_AS(parse_metric_file("dimension = 3\nfamily = perturbation\na11 = 0.1/r\n"), ParseError);
  CHECK_THROWS_AS(parse_metric_file("family = flat\n"), ParseError);
  // Equal repeats of a symmetric entry are fine.
  CHECK_NOTHROW(parse_metric_file("dimension = 3\nfamily = perturbation\ntau = 1\na12 = 0.1/r\na21 = 0.1 / r\n"));
}

TEST_CASE("metric file: rigid motion pullback") {
  const MetricField g = build_metric(parse_metric_file(
      "dimension = 3\nfamily = half_schwarzschild\nm = 1\nmotion_seed = 5\nmotion_shift = 0.5\n"));
  const std::vector<double> s{20, 40, 80, 160};
  CHECK(mass(g, s).extrapolated == doctest::Approx(mass(half_schwarzschild(3, 1.0), s).extrapolated).epsilon(1e-4));
}

TEST_CASE("perturbed half-Schwarzschild family") {
  const MetricField g = perturbed_half_schwarzschild(0.01);
  REQUIRE(g.exact_mass);
  CHECK(*g.exact_mass == doctest::Approx(8 * test::kPi));
  // Identical to half-Schwarzschild beyond r = 4.
  const double x[3] = {3.0, 2.0, 4.0};
  CHECK((g.value(x) - half_schwarzschild(3, 1.0).value(x)).cwiseAbs().maxCoeff() <= 1e-15);
  CHECK(mass(g, default_schedule(g)).extrapolated == doctest::Approx(8 * test::kPi).epsilon(0.005));
}

TEST_CASE("builtin suite components") {
  const auto fams = builtin_families();
  CHECK(fams.size() >= 4);
  for (const NamedMetric& f : fams) {
    CHECK(positivity(f.metric, f.schedule).pass);
    const SuiteCheck r = rigid_invariance(f.metric, f.schedule, 3, 11);
    INFO(f.name << ": " << r.detail);
    CHECK(r.pass);
  }
  CHECK(variational_identity(half_schwarzschild(3, 1.0), 11).pass);
  const CompactTensor k = random_compact_tensor(3, 4, 8.0, 1.0);
  CHECK(k.k.size() == 6);
  CHECK(k.center[2] == doctest::Approx(0.5));
}
