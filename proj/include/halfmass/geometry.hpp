#pragma once

#include <array>
#include <span>
#include <vector>

#include "halfmass/metric.hpp"

namespace halfmass {

/// Christoffel symbols, Ricci tensor and scalar curvature at a point.
struct CurvaturePoint {
  int n = 0;
  std::array<double, kMaxDim> x{};
  SmallMatrix metric;
  SmallMatrix inverse_metric;
  std::array<double, kMaxDim * kMaxPacked> gamma{};  // gamma[k * kMaxPacked + packed(i, j)]
  SmallMatrix ricci;
  double scalar = 0.0;
  double sqrt_det = 1.0;

  double christoffel(int k, int i, int j) const { return gamma[k * kMaxPacked + packed_index(i, j)]; }
};

/// Geometry of Sigma = {x_n = 0} as the boundary of {x_n >= 0}.
struct BoundaryPoint {
  int n = 0;
  std::array<double, kMaxDim> x{};
  SmallVector eta;     // outward unit normal, contravariant components
  SmallMatrix A;       // second fundamental form A_ab, a, b < n
  SmallMatrix h;       // induced metric h_ab
  double H = 0.0;      // h^ab A_ab
  double H_div = 0.0;  // div_g eta of the unit normal field to the x_n foliation
  double sqrt_det_h = 1.0;
};

CurvaturePoint curvature_from_jet(const MetricJet& m, std::span<const double> x);
CurvaturePoint curvature_at(const MetricField& g, std::span<const double> x);

/// `x` must have x_n = 0.
/// The normal is eta = -(g^nn)^{-1/2} g^{ni} d_i, pointing toward -x_n; for a
/// metric given on {x_n <= 0} this is the inward normal of that side.
BoundaryPoint boundary_from_jet(const MetricJet& m, std::span<const double> x);
BoundaryPoint boundary_at(const MetricField& g, std::span<const double> x);

/// 1/2 (g^nn)^{1/2} (2 g_{n a, a} - g_{a a, n}): the coordinate mean
/// curvature, valid where h_ab = delta_ab and g_{a n} = 0.
double mean_curvature_adapted(const MetricJet& m);

/// C_i = g_{ij,j} - g_{jj,i}.
SmallVector mass_density(const MetricJet& m);
SmallVector mass_density(const MetricField& g, std::span<const double> x);
/// C_{i,i}.
double mass_density_divergence(const MetricJet& m);

struct ExpansionResiduals {
  double theta_sup = 0.0;        // sup |R - C_{i,i}| over the hemisphere nodes
  double theta_prime_sup = 0.0;  // sup |H - 1/2(-<C, eta> + g_{n a, a})| over the equator
  // Round-off level of each residual; values at or below it are zero.
  double theta_floor = 0.0;
  double theta_prime_floor = 0.0;
};
ExpansionResiduals expansion_residuals(const MetricField& g, double r, int order = 8);

struct ResidualDecay {
  std::vector<double> radii;
  std::vector<double> theta, theta_prime;
  double theta_rate = 0.0, theta_prime_rate = 0.0;  // +infinity when at round-off
};
/// Dyadic fit of the residual decay rates over `radii`.
ResidualDecay residual_decay(const MetricField& g, std::span<const double> radii, int order = 8);

}  // namespace halfmass
