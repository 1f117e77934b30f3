#include "halfmass/suites.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include "halfmass/error.hpp"

namespace halfmass {

MetricField perturbed_half_schwarzschild(double eps) {
  const ScalarField u = ScalarField::radial(3, [eps](double r) {
    RadialValue v{1.0 + 0.5 / r, -0.5 / (r * r), 1.0 / (r * r * r)};
    if (r < 4.0) {
      auto F = [](double s) { return -64.0 / s - 48.0 * std::log(s) + 12.0 * s - 0.5 * s * s; };
      const double c = (4.0 - r) * (4.0 - r);
      v.f += eps * (F(r) - F(4.0));
      v.df += eps * c * (4.0 - r) / (r * r);
      v.d2f += eps * (-3.0 * c / (r * r) - 2.0 * c * (4.0 - r) / (r * r * r));
    }
    return v;
  });
  MetricField g = conformal(flat_half_space(3), u);
  g.tau = 1.0;
  g.r0 = 1.0;
  g.conformally_flat = true;
  g.boundary_orthogonal = true;
  g.exact_mass = 8.0 * std::acos(-1.0);
  g.family = "perturbed_half_schwarzschild";
  return g;
}

std::vector<double> default_schedule(const MetricField& g) {
  const double s = std::max(1.0, g.r0);
  return {20 * s, 40 * s, 80 * s, 160 * s};
}

std::vector<NamedMetric> builtin_families() {
  std::vector<NamedMetric> out;
  auto add = [&](std::string name, MetricField g) {
    auto s = default_schedule(g);
    out.push_back({std::move(name), std::move(g), std::move(s)});
  };
  add("flat_3", flat_half_space(3));
  add("half_schwarzschild_3", half_schwarzschild(3, 1.0));
  add("half_schwarzschild_4", half_schwarzschild(4, 1.0));
  MetricField c = conformal(flat_half_space(3), ScalarField::parse("1 + 0.25/r", 3));
  c.tau = 1.0;
  c.conformally_flat = true;
  c.boundary_orthogonal = true;
  add("conformal_C0.25_3", c);
  add("perturbed_half_schwarzschild_3", perturbed_half_schwarzschild(0.01));
  return out;
}

SuiteCheck rigid_invariance(const MetricField& g, std::span<const double> schedule, int motions,
                            std::uint64_t seed, double tolerance) {
  SuiteCheck c;
  c.name = "rigid-motion invariance (" + g.family + ")";
  c.tolerance = tolerance;
  const double m0 = mass(g, schedule).extrapolated;
  const double scale = std::max(std::abs(m0), 1.0);
  double worst = 0.0;
  for (int k = 0; k < motions; ++k) {
    const RigidMotion rm = random_rigid_motion(g.n, seed + static_cast<std::uint64_t>(k), 0.5 * g.r0);
    const double m1 = mass(pullback_rigid(g, rm.q, rm.b), schedule).extrapolated;
    worst = std::max(worst, std::abs(m1 - m0) / scale);
  }
  c.value = worst;
  c.pass = worst <= tolerance;
  std::ostringstream os;
  os << motions << " motions, reference mass " << m0 << (std::abs(m0) < 1.0 ? " (absolute change)" : "");
  c.detail = os.str();
  return c;
}

SuiteCheck positivity(const MetricField& g, std::span<const double> schedule) {
  SuiteCheck c;
  c.name = "mass positivity (" + g.family + ")";
  const MassEstimate e = mass(g, schedule);
  c.value = e.extrapolated;
  c.tolerance = e.error_bound > 0.0 ? -e.error_bound : 0.0;
  c.pass = e.extrapolated >= -e.error_bound;
  std::ostringstream os;
  os << "extrapolated " << e.extrapolated << ", error bound " << e.error_bound;
  c.detail = os.str();
  return c;
}

CompactTensor random_compact_tensor(int n, std::uint64_t seed, double radius, double rho) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  CompactTensor k;
  k.n = n;
  k.rho = rho;
  double s2 = 0.0;
  for (int i = 0; i < n - 1; ++i) {
    k.center[i] = unit(rng);
    s2 += k.center[i] * k.center[i];
  }
  for (int i = 0; i < n - 1; ++i) k.center[i] *= radius / std::sqrt(s2);
  k.center[n - 1] = 0.5 * rho;  // the support meets Sigma
  k.k.resize(static_cast<std::size_t>(packed_size(n)));
  for (double& v : k.k) v = 0.1 * unit(rng);
  return k;
}

SuiteCheck variational_identity(const MetricField& g, std::uint64_t seed) {
  SuiteCheck c;
  c.name = "variational identity (" + g.family + ")";
  const double radius = 4.0 * std::max(1.0, g.r0);
  const CompactTensor k = random_compact_tensor(g.n, seed, radius, 1.0);
  const VariationalReport r = variational_check(g, k, 1e-3, 4.0 * radius);
  c.value = std::abs(r.mismatch);
  c.tolerance = 1e-5;
  c.pass = c.value <= c.tolerance && r.richardson_ratio >= 3.0 && r.richardson_ratio <= 5.0;
  std::ostringstream os;
  os << "lhs " << r.lhs << ", rhs " << r.rhs << ", mismatch(dt/2) " << r.mismatch_half << ", Richardson ratio "
     << r.richardson_ratio << " (required in [3, 5])";
  c.detail = os.str();
  return c;
}

}  // namespace halfmass
