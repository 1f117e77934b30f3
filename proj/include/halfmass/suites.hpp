#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "halfmass/mass.hpp"
#include "halfmass/metric.hpp"

namespace halfmass {

/// One checked invariant: pass iff value <= tolerance (or the stated bound).
struct SuiteCheck {
  std::string name;
  bool pass = false;
  double value = 0.0;
  double tolerance = 0.0;
  std::string detail;
};

struct NamedMetric {
  std::string name;
  MetricField metric;
  std::vector<double> schedule;
};

/// Conformally flat u^4 delta (n = 3) with u = 1 + 1/(2r) + psi(r), where
/// psi' = eps (4 - r)^3 / r^2 for r < 4 and psi = 0 beyond: scalar curvature
/// >= 0, Sigma totally geodesic, mass 8 pi.
MetricField perturbed_half_schwarzschild(double eps);

/// Families with R >= 0 and H >= 0 used by the builtin suite.
std::vector<NamedMetric> builtin_families();

/// Default mass schedule: 20, 40, 80, 160 times max(1, r0).
std::vector<double> default_schedule(const MetricField& g);

/// Largest relative mass change over random boundary-preserving rigid motions.
SuiteCheck rigid_invariance(const MetricField& g, std::span<const double> schedule, int motions,
                            std::uint64_t seed, double tolerance = 1e-4);

/// Extrapolated mass >= -error_bound.
SuiteCheck positivity(const MetricField& g, std::span<const double> schedule);

/// Random compact symmetric tensor supported in a cube of half-width rho
/// touching Sigma, centred at radius about `radius`.
CompactTensor random_compact_tensor(int n, std::uint64_t seed, double radius, double rho);

/// Richardson ratio of the variational mismatch in [3, 5] and |mismatch|
/// <= 1e-5 at dt = 1e-3.
SuiteCheck variational_identity(const MetricField& g, std::uint64_t seed);

}  // namespace halfmass
