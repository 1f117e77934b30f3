#include <doctest.h>

#include <omp.h>

#include <filesystem>
#include <fstream>
#include <random>

#include "halfmass/elliptic.hpp"
#include "halfmass/error.hpp"
#include "halfmass/grid.hpp"
#include "support.hpp"

using namespace halfmass;

namespace {

std::shared_ptr<const DiscreteHalfAnnulus> grid(double r_in, double r_out, double h, int levels = 2) {
  return std::make_shared<const DiscreteHalfAnnulus>(r_in, r_out, h, levels);
}

bool inside(const DiscreteHalfAnnulus& g, std::size_t i) {
  const auto x = g.node_point(i);
  const double r = std::hypot(x[0], x[1], x[2]);
  return r >= g.r_in() && r <= g.r_out();
}

// Composite Simpson on [a, b].
template <class F>
double simpson(F f, double a, double b, int m = 2000) {
  const double h = (b - a) / m;
  double s = f(a) + f(b);
  for (int i = 1; i < m; ++i) s += f(a + i * h) * (i % 2 ? 4 : 2);
  return s * h / 3;
}

}  // namespace

TEST_CASE("image kernel") {
  const double x[3] = {0, 0, 1}, y[3] = {0, 0, 2};
  CHECK(image_kernel(x, y, 3) == doctest::Approx(4.0 / 3.0).epsilon(1e-15));
  CHECK_THROWS_AS(image_kernel(x, x, 3), DomainError);
  const double s[3] = {0.5, 0.2, 0}, t[3] = {0.5, 0.2, 0};
  CHECK_THROWS_AS(image_kernel(s, t, 3), DomainError);

  std::mt19937_64 rng(42);
  std::uniform_real_distribution<double> c(-5, 5);
  for (int n : {3, 4}) {
    double worst = 0;
    for (int t = 0; t < 10000; ++t) {
      std::vector<double> a(static_cast<std::size_t>(n)), b(static_cast<std::size_t>(n));
      for (auto& v : a) v = c(rng);
      for (auto& v : b) v = c(rng);
      a.back() = 0.0;
      b.back() = std::abs(b.back()) + 0.1;
      worst = std::max(worst, std::abs(image_kernel_gradient(a, b, n)[static_cast<std::size_t>(n - 1)]));
    }
    CHECK(worst <= 1e-12);
  }

  // Gradient against finite differences.
  const double p[3] = {1.2, -0.4, 0.7}, q[3] = {-0.3, 0.8, 1.5};
  const auto grad = image_kernel_gradient(p, q, 3);
  for (int i = 0; i < 3; ++i) {
    const double fd = test::central_difference(
        [&](std::span<const double> z) { return image_kernel(z, q, 3); }, {p[0], p[1], p[2]}, i, 1e-3);
    CHECK(grad[static_cast<std::size_t>(i)] == doctest::Approx(fd).epsilon(1e-9));
  }
}

TEST_CASE("bump sources: totals and closed-form potentials") {
  RadialBump b;
  b.center = {0, 0, 2};
  b.radius = 0.25;
  b.amplitude = 3.0;
  b.power = 3;
  const double total = 4 * test::kPi * simpson([&](double s) {
    return b.amplitude * std::pow(1 - s * s / (b.radius * b.radius), b.power) * s * s;
  }, 0.0, b.radius);
  CHECK(b.total() == doctest::Approx(total).epsilon(1e-10));

  // Outside the ball the potential is that of a point charge plus its image.
  const double y[3] = {1.0, 0.5, 0.3};
  CHECK(b.exterior_solution(y)[0] == doctest::Approx(total * image_kernel(y, b.center, 3) / (4 * test::kPi)).epsilon(1e-12));

  const ScalarField zero = harmonic_oracle(ScalarField(), {}, ScalarField(), {}, 3);
  CHECK(zero.value(y) == 0.0);

  const ScalarField u = harmonic_oracle(b.field(), b.support(), ScalarField(), {}, 3);
  for (double d : {1.0, 2.0, 5.0}) {
    const double z[3] = {d, 0.0, 2.0};
    CHECK(u.value(z) == doctest::Approx(b.exterior_solution(z)[0]).epsilon(1e-8));
  }

  DiscBump disc;
  disc.center = {0.5, -0.5};
  disc.radius = 0.3;
  disc.amplitude = 2.0;
  disc.power = 2;
  // Far field: 2 / (4 pi d) times the disc integral A pi a^2 / (k + 1).
  const double q = disc.amplitude * test::kPi * disc.radius * disc.radius / (disc.power + 1);
  const double far[3] = {30.5, -0.5, 4.0};
  const double d = std::hypot(30.0, 4.0);
  CHECK(disc.exterior_solution(far)[0] == doctest::Approx(2 * q / (4 * test::kPi * d)).epsilon(1e-3));
  const ScalarField ud = harmonic_oracle(ScalarField(), {}, disc.field(), disc.support(), 3);
  for (double r : {0.6, 1.0, 3.0}) {
    const double z[3] = {0.5 + r, -0.5, 0.4 * r};
    CHECK(ud.value(z) == doctest::Approx(disc.exterior_solution(z)[0]).epsilon(1e-8));
  }
}

TEST_CASE("grid geometry: exact volumes and areas") {
  const auto g = grid(1.0, 4.0, 0.125);
  DiscreteOperator op = assemble_operator(g, flat_half_space(3), {}, {});
  double vol = 0, sig = 0, in = 0, out = 0;
  for (double v : op.volume_mass) vol += v;
  for (double v : op.sigma_mass) sig += v;
  for (double v : op.inner_mass) in += v;
  for (double v : op.outer_mass) out += v;
  CHECK(vol == doctest::Approx(2.0 / 3.0 * test::kPi * (64.0 - 1.0)).epsilon(1e-10));
  // Surface pieces of cut cells use the default six-point rules.
  CHECK(sig == doctest::Approx(test::kPi * (16.0 - 1.0)).epsilon(1e-8));
  CHECK(in == doctest::Approx(2 * test::kPi).epsilon(1e-8));
  CHECK(out == doctest::Approx(2 * test::kPi * 16.0).epsilon(1e-8));

  std::size_t interior = 0;
  for (std::size_t i = 0; i < g->node_count(); ++i) {
    const auto p = g->node_point(i);
    if (g->node_class(i) == NodeClass::Sigma) CHECK(p[2] == 0.0);
    if (g->node_class(i) != NodeClass::Interior) continue;
    ++interior;
    const auto& c = g->node_ijk(i);
    for (int d = 0; d < 3; ++d)
      for (int s : {-1, 1}) {
        std::array<int, 3> nb = c;
        nb[static_cast<std::size_t>(d)] += s;
        CHECK(g->node_at(nb[0], nb[1], nb[2]) >= 0);
      }
  }
  CHECK(interior > 0);
  CHECK_THROWS_AS(DiscreteHalfAnnulus(1.0, 3.0, 0.125), InvalidArgument);
  CHECK_THROWS_AS(DiscreteHalfAnnulus(1.0, 4.0, 0.5), InvalidArgument);
}

TEST_CASE("constants solve the homogeneous problem") {
  BvpProblem p;
  p.data.u_infinity = 1.0;
  const DiscreteSolution s = solve_bvp(grid(1.0, 4.0, 0.25), p);
  CHECK(s.relative_residual <= 1e-10);
  double worst = 0;
  for (double v : s.u) worst = std::max(worst, std::abs(v - 1.0));
  // Nodal error is bounded by the condition number times the residual.
  CHECK(worst <= 1e-8);
}

TEST_CASE("discrete maximum principle") {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(0, 1);
  const auto g = grid(1.0, 4.0, 0.25);
  for (int t = 0; t < 6; ++t) {
    const double a = u(rng), c = u(rng), px = 2 * u(rng) - 1;
    BvpProblem p;
    p.h = [a](std::span<const double> x) { return a * std::exp(-x[0] * x[0]); };
    p.hbar = [c](std::span<const double> x) { return c / (1 + x[1] * x[1]); };
    RadialBump b;
    b.center = {2.0 * px, 0.5, 0.0};
    b.radius = 0.5;
    p.data.f = [b](std::span<const double> x) { return b.value(x); };
    p.data.fbar = [c](std::span<const double> x) { return c * std::exp(-x[0] * x[0] - x[1] * x[1]); };
    const DiscreteSolution s = solve_bvp(g, p);
    double lo = kInfinity;
    // Nodes outside the annulus carry the cut-cell extension, not point values.
    for (std::size_t i = 0; i < g->node_count(); ++i)
      if (inside(*g, i)) lo = std::min(lo, s.u[i]);
    CHECK(lo >= 0.0);
  }
}

TEST_CASE("parallel and serial paths agree bit for bit") {
  omp_set_num_threads(4);
  const auto g = grid(1.0, 4.0, 0.125);
  const OracleProblem prob = random_oracle_problem(3, 1.0, 4.0);
  BvpProblem p;
  p.h = [](std::span<const double> x) { return 0.1 / (1 + x[0] * x[0]); };
  p.data = prob.load();
  AssemblyOptions ap, as;
  as.execution = Execution::Serial;
  SolveOptions sp, ss;
  ss.execution = Execution::Serial;
  const DiscreteSolution a = solve_bvp(g, p, sp, ap);
  const DiscreteSolution b = solve_bvp(g, p, ss, as);
  CHECK(a.iterations == b.iterations);
  CHECK(a.u == b.u);
  CHECK(a.load == b.load);
}

TEST_CASE("solver against the closed-form oracle on one problem") {
  const OracleProblem prob = random_oracle_problem(1000, 1.0, 4.0);
  BvpProblem p;
  p.data = prob.load();
  const auto g = grid(1.0, 4.0, 0.125);
  const DiscreteSolution s = solve_bvp(g, p);
  double err = 0, scale = 0;
  for (std::size_t i = 0; i < g->node_count(); ++i) {
    const auto x = g->node_point(i);
    if (!inside(*g, i) || prob.clearance(x) < 2.5) continue;
    const double e = prob.exact(x)[0];
    err = std::max(err, std::abs(s.u[i] - e));
    scale = std::max(scale, std::abs(e));
  }
  CHECK(err / scale <= 3e-3);
}

TEST_CASE("oracle study: second order on a small sample") {
  OracleStudyOptions o;
  o.count = 2;
  const OracleStudy st = oracle_study(o);
  REQUIRE(st.cases.size() == 2);
  CHECK(st.min_order >= 1.7);
  CHECK(st.max_order <= 2.3);
  CHECK(st.compared_points > 0);
  for (const OracleCase& c : st.cases) {
    CHECK(c.error_fine < c.error_coarse);
    CHECK(c.oracle_vs_closed <= 1e-6);
  }
}

TEST_CASE("interpolation and local jets reproduce polynomials") {
  const auto g = grid(1.0, 4.0, 0.25);
  DiscreteSolution s;
  s.grid = g;
  auto quad = [](const std::array<double, 3>& x) {
    return 1.0 + 0.3 * x[0] - 0.2 * x[2] + 0.1 * x[0] * x[1] + 0.05 * x[2] * x[2];
  };
  for (std::size_t i = 0; i < g->node_count(); ++i) s.u.push_back(quad(g->node_point(i)));
  const double x[3] = {1.3, 0.7, 1.1};
  const Jet2 j = discrete_jet(s, x);
  CHECK(j.value == doctest::Approx(quad({1.3, 0.7, 1.1})).epsilon(1e-12));
  CHECK(j.grad[0] == doctest::Approx(0.3 + 0.07).epsilon(1e-11));
  CHECK(j.grad[2] == doctest::Approx(-0.2 + 0.11).epsilon(1e-11));
  CHECK(j.h(0, 1) == doctest::Approx(0.1).epsilon(1e-10));
  CHECK(j.h(2, 2) == doctest::Approx(0.1).epsilon(1e-10));
  const double far[3] = {9.0, 0, 0};
  CHECK_THROWS_AS(discrete_jet(s, far), DomainError);

  for (auto& v : s.u) v = 0;
  for (std::size_t i = 0; i < g->node_count(); ++i) {
    const auto p = g->node_point(i);
    s.u[i] = 2 * p[0] - p[1] + 0.5 * p[2];
  }
  const double y[3] = {-1.61, 2.07, 0.33};
  CHECK(s.interpolate(y) == doctest::Approx(2 * -1.61 - 2.07 + 0.5 * 0.33).epsilon(1e-13));
  CHECK_THROWS_AS(s.interpolate(far), DomainError);
}

TEST_CASE("grid CSV export") {
  const auto g = grid(1.0, 4.0, 0.25);
  DiscreteSolution s;
  s.grid = g;
  s.u.assign(g->node_count(), 1.5);
  const auto path = std::filesystem::temp_directory_path() / "halfmass_grid_test.csv";
  write_grid_csv(s, path.string());
  std::ifstream in(path);
  std::string line;
  std::getline(in, line);
  CHECK(line == "n,h,r_in,r_out");
  std::getline(in, line);
  CHECK(line.rfind("3,", 0) == 0);
  std::getline(in, line);
  CHECK(line == "x1,x2,x3,u");
  std::size_t rows = 0;
  while (std::getline(in, line)) ++rows;
  CHECK(rows == g->node_count());
  std::filesystem::remove(path);
}
