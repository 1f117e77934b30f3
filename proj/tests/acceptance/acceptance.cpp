// One PASS/FAIL line per acceptance criterion, then the positivity sweep.
//
//   acceptance [--only 1,2,...] [--known-failures 6,...]
//
// Exit status is 0 when every failing criterion is listed in
// --known-failures, 1 otherwise. Known failures still print FAIL.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "halfmass/elliptic.hpp"
#include "halfmass/error.hpp"
#include "halfmass/expr.hpp"
#include "halfmass/geometry.hpp"
#include "halfmass/mass.hpp"
#include "halfmass/metric.hpp"
#include "halfmass/sampling.hpp"
#include "halfmass/suites.hpp"
#include "random_expression.hpp"
#include "support.hpp"

using namespace halfmass;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Verdict {
  bool pass = true;
  std::string detail;

  void require(bool ok, const std::string& what) {
    pass = pass && ok;
    if (!detail.empty()) detail += "; ";
    detail += what + (ok ? "" : " [violated]");
  }
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

double rel(double a, double b) { return std::abs(a - b) / std::abs(b); }

const std::vector<double> kSchedule{20, 40, 80, 160};

MetricField conformally_flat(int n, const std::string& u, double tau) {
  MetricField g = conformal(flat_half_space(n), ScalarField::parse(u, n));
  g.tau = tau;
  g.conformally_flat = true;
  return g;
}

// Brute-force hemisphere flux of C_i = g_ij,j - g_jj,i from central
// differences of metric values, averaged over uniform random points. For a
// radial conformal factor the integrand is constant on the sphere, so the
// average is exact up to differencing error. The equator term vanishes
// because g_an = 0.
double brute_force_flux(const MetricField& g, double r) {
  const int n = g.n;
  const PointSet pts = sample_sphere(n, r, 64, SphereRegion::UpperHemisphere, 7);
  const double step = 1e-3 * r;
  double sum = 0.0;
  for (std::size_t p = 0; p < pts.size(); ++p) {
    std::vector<double> x(pts[p].begin(), pts[p].end());
    auto d = [&](int i, int j, int k) {
      std::vector<double> y = x;
      y[k] += step;
      const double up = g.value(y)(i, j);
      y[k] -= 2 * step;
      return (up - g.value(y)(i, j)) / (2 * step);
    };
    double flux = 0.0;
    for (int i = 0; i < n; ++i) {
      double c = 0.0;
      for (int j = 0; j < n; ++j) c += d(i, j, j) - d(j, j, i);
      flux += c * x[i] / r;
    }
    sum += flux;
  }
  return sum / static_cast<double>(pts.size()) * 0.5 * sphere_area(n - 1) * std::pow(r, n - 1);
}

Verdict criterion1() {
  Verdict v;
  for (int n : {3, 4}) {
    const double expected = (n - 1) * sphere_area(n - 1);
    const auto t0 = Clock::now();
    const MassEstimate m = mass(half_schwarzschild(n, 1.0), kSchedule, {12, false});
    const double t = seconds_since(t0);
    v.require(rel(m.extrapolated, expected) <= 5e-3,
              "n=" + std::to_string(n) + " rel err " + fmt("%.2e", rel(m.extrapolated, expected)));
    v.require(t < 10.0, fmt("%.2f s", t));
  }
  return v;
}

Verdict criterion2() {
  Verdict v;
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> coord(-50, 50);
  double worst = 0.0;
  for (int n : {3, 4, 5}) {
    const MetricField g = flat_half_space(n);
    for (int t = 0; t < 1000; ++t) {
      std::vector<double> x(static_cast<std::size_t>(n));
      for (auto& c : x) c = coord(rng);
      x.back() = std::abs(x.back());
      const CurvaturePoint p = curvature_at(g, x);
      worst = std::max({worst, std::abs(p.scalar), p.ricci.cwiseAbs().maxCoeff(),
                        mass_density(g, x).cwiseAbs().maxCoeff()});
      x.back() = 0.0;
      const BoundaryPoint b = boundary_at(g, x);
      worst = std::max({worst, std::abs(b.H), b.A.cwiseAbs().maxCoeff()});
    }
    std::uniform_real_distribution<double> radius(2, 1000);
    for (int t = 0; t < 1000; t += 250) {
      const double r0 = radius(rng);
      const std::vector<double> s{r0, 2 * r0, 4 * r0, 8 * r0};
      worst = std::max(worst, std::abs(mass(g, s).extrapolated));
    }
  }
  v.require(worst <= 1e-10, "max " + fmt("%.1e", worst));
  return v;
}

Verdict criterion3() {
  Verdict v;
  double worst_oracle = 0.0, worst = 0.0;
  for (int n : {3, 4}) {
    for (double c : {0.1, 0.25, 0.5}) {
      const MetricField g = conformally_flat(n, "1 + " + std::to_string(c) + "*r^(" + std::to_string(2 - n) + ")",
                                             n - 2.0);
      // Flux ~ m + a r^{2-n}: eliminate a from two radii.
      const double p = std::pow(2.0, n - 2);
      const double brute = (p * brute_force_flux(g, 2000.0) - brute_force_flux(g, 1000.0)) / (p - 1);
      const double law = 2 * (n - 1) * sphere_area(n - 1) * c;
      worst_oracle = std::max(worst_oracle, rel(brute, law));
      worst = std::max(worst, rel(mass(g, kSchedule).extrapolated, law));
    }
  }
  v.require(worst_oracle <= 1e-3, "brute force vs 2(n-1)w C " + fmt("%.1e", worst_oracle));
  v.require(worst <= 5e-3, "mass vs law " + fmt("%.2e", worst));
  return v;
}

Verdict criterion4() {
  Verdict v;
  struct Family {
    std::string name;
    MetricField g;
    double r_k;
  };
  const std::vector<Family> families{
      {"half-Schwarzschild", half_schwarzschild(3, 1.0), 4.0},
      {"u=1+0.25/r", conformally_flat(3, "1 + 0.25/r", 1.0), 4.0},
      {"u=1+0.5/r-0.1x3exp(-(r-3)^2)", conformally_flat(3, "1 + 0.5/r - 0.1*x3*exp(-(r-3)^2)", 1.0), 6.0}};
  for (const Family& f : families) {
    const DoubledMetric d = double_of(f.g, f.r_k);
    const double ratio = adm_mass_double(d, kSchedule).extrapolated / (2 * mass(f.g, kSchedule).extrapolated);
    v.require(ratio >= 0.995 && ratio <= 1.005, f.name + " ratio " + fmt("%.5f", ratio));
    v.require(d.max_corner_jump <= 1e-8, "corner " + fmt("%.1e", d.max_corner_jump));
  }
  return v;
}

Verdict criterion5() {
  Verdict v;
  for (const NamedMetric& f : builtin_families()) {
    if (f.name == "flat_3") continue;  // relative change undefined at mass 0
    const SuiteCheck c = rigid_invariance(f.metric, f.schedule, 10, 5, 1e-4);
    v.require(c.pass, f.name + " " + fmt("%.1e", c.value));
  }
  return v;
}

Verdict criterion6() {
  Verdict v;
  const OracleStudyOptions opts;
  const DiscreteHalfAnnulus fine(opts.r_in, opts.r_out, opts.r_in / opts.coarse_ratio / 2, 4);
  const auto t0 = Clock::now();
  const OracleStudy s = oracle_study(opts);
  const double t = seconds_since(t0);
  v.require(s.cases.size() == 20, std::to_string(s.cases.size()) + " problems");
  v.require(s.max_error <= 1e-3, "max rel err " + fmt("%.3e", s.max_error));
  v.require(s.min_order >= 1.7 && s.max_order <= 2.3,
            "order [" + fmt("%.2f", s.min_order) + ", " + fmt("%.2f", s.max_order) + "]");
  v.require(t < 60.0, fmt("%.1f s", t));
  v.require(fine.node_count() <= 96u * 96u * 96u, std::to_string(fine.node_count()) + " fine nodes");
  return v;
}

Verdict criterion7() {
  Verdict v;
  const MetricField g = perturbed_half_schwarzschild(0.01);
  double delta[2] = {0, 0};
  int k = 0;
  for (double R : {16.0, 32.0}) {
    const FlatteningResult f = conformal_flatten(g, R, 0.1);
    const std::string tag = "R=" + fmt("%.0f", R);
    v.require(f.hypotheses_hold, tag + " R,H >= 0");
    v.require(f.min_u > 0.0, tag + " min_u " + fmt("%.4f", f.min_u));
    const double worst = std::max(f.scalar_residual, f.mean_residual);
    v.require(worst <= 10 * f.residual_scale, tag + " residual/scale " + fmt("%.2f", worst / f.residual_scale));
    delta[k++] = f.mass_delta;
  }
  v.require(delta[1] < delta[0], "mass_delta " + fmt("%.3e", delta[0]) + " -> " + fmt("%.3e", delta[1]));
  return v;
}

Verdict criterion8() {
  Verdict v;
  const SuiteCheck c = variational_identity(half_schwarzschild(3, 1.0), 17);
  v.require(c.pass, c.detail);
  return v;
}

Verdict criterion9() {
  Verdict v;
  const std::vector<double> radii{8, 16, 32, 64};
  auto check = [&](const std::string& name, const MetricField& g) {
    const ResidualDecay d = residual_decay(g, radii);
    v.require(d.theta_rate >= 2 * g.tau + 2 - 0.25, name + " theta " + fmt("%.2f", d.theta_rate));
    v.require(d.theta_prime_rate >= 2 * g.tau + 1 - 0.25, name + " theta' " + fmt("%.2f", d.theta_prime_rate));
  };
  check("hS n=3", half_schwarzschild(3, 1.0));
  check("hS n=4", half_schwarzschild(4, 1.0));
  std::vector<ScalarField> a(static_cast<std::size_t>(packed_size(3)));
  auto set = [&](int i, int j, const char* src) {
    a[static_cast<std::size_t>(packed_index(i, j))] = ScalarField::parse(src, 3);
  };
  set(0, 0, "0.3*(1+r^2)^(-0.6)");
  set(1, 1, "0.2*(1+r^2)^(-0.6)");
  set(0, 2, "0.1*x1*x3*(1+r^2)^(-1.6)");
  set(2, 2, "0.25*(1+r^2)^(-0.6)");
  check("tau=1.2", perturbation(3, a, 1.2, 1.0));
  return v;
}

Verdict criterion10() {
  Verdict v;
  std::mt19937_64 rng(10);
  std::normal_distribution<double> normal;
  std::uniform_real_distribution<double> radius(1.5, 4.0);
  int bad = 0;
  double worst = 0.0;
  for (int t = 0; t < 1000; ++t) {
    const Expression e = Expression::parse(test::clean(test::random_expression(rng, 3)), 3);
    std::vector<double> x(3);
    double s = 0;
    for (auto& c : x) {
      c = normal(rng);
      s += c * c;
    }
    const double r = radius(rng);
    for (auto& c : x) c *= r / std::sqrt(s);
    const Jet2 j = e.eval_jet(x);
    auto value = [&](std::span<const double> y) { return e.eval(y); };
    auto score = [&](double a, double b) {
      const double d = std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-3});
      worst = std::max(worst, d);
      if (!test::close(a, b, 1e-6, 1e-9)) ++bad;
    };
    for (int i = 0; i < 3; ++i) {
      score(j.grad[i], test::central_difference(value, x, i, 1e-3));
      for (int k = 0; k < 3; ++k) {
        auto grad_k = [&](std::span<const double> y) { return e.eval_jet(y).grad[k]; };
        score(j.h(i, k), test::central_difference(grad_k, x, i, 1e-3));
      }
    }
  }
  v.require(bad == 0, std::to_string(bad) + " mismatches, worst rel " + fmt("%.1e", worst));
  return v;
}

Verdict positivity_sweep() {
  Verdict v;
  for (const NamedMetric& f : builtin_families()) {
    const SuiteCheck c = positivity(f.metric, f.schedule);
    v.require(c.pass, f.name + " " + fmt("%.4g", c.value));
  }
  return v;
}

std::set<int> parse_list(const std::string& s) {
  std::set<int> out;
  std::stringstream in(s);
  for (std::string item; std::getline(in, item, ',');) out.insert(std::stoi(item));
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  std::set<int> only, known;
  for (int i = 1; i + 1 < argc; i += 2) {
    const std::string flag = argv[i];
    if (flag == "--only") only = parse_list(argv[i + 1]);
    else if (flag == "--known-failures") known = parse_list(argv[i + 1]);
    else {
      std::fprintf(stderr, "usage: acceptance [--only LIST] [--known-failures LIST]\n");
      return 1;
    }
  }

  const std::vector<std::pair<const char*, std::function<Verdict()>>> criteria{
      {"half-Schwarzschild mass", criterion1},
      {"flat annihilation", criterion2},
      {"conformal coefficient law", criterion3},
      {"doubling identity", criterion4},
      {"rigid-motion invariance", criterion5},
      {"solver-oracle equivalence", criterion6},
      {"flattening pipeline", criterion7},
      {"variational identity", criterion8},
      {"expansion residual decay", criterion9},
      {"autodiff correctness", criterion10},
  };

  bool ok = true;
  for (std::size_t k = 0; k < criteria.size(); ++k) {
    const int id = static_cast<int>(k) + 1;
    if (!only.empty() && !only.count(id)) continue;
    const auto t0 = Clock::now();
    Verdict v;
    try {
      v = criteria[k].second();
    } catch (const std::exception& e) {
      v.pass = false;
      v.detail = std::string("exception: ") + e.what();
    }
    std::printf("criterion %2d %s  %s (%.1f s): %s%s\n", id, v.pass ? "PASS" : "FAIL", criteria[k].first,
                seconds_since(t0), v.detail.c_str(), !v.pass && known.count(id) ? " [known failure]" : "");
    std::fflush(stdout);
    if (!v.pass && !known.count(id)) ok = false;
  }
  if (only.empty()) {
    const Verdict v = positivity_sweep();
    std::printf("witness      %s  positivity sweep: %s\n", v.pass ? "PASS" : "FAIL", v.detail.c_str());
    ok = ok && v.pass;
  }
  return ok ? 0 : 1;
}
