#pragma once

#include <array>
#include <span>
#include <string>
#include <vector>

#include "halfmass/metric.hpp"
#include "halfmass/scalar_field.hpp"

namespace halfmass {

/// The two terms of the finite-radius mass integral.
struct MassSample {
  double r = 0.0;
  double hemisphere = 0.0;  // flux of C_i against mu over the hemisphere
  double equator = 0.0;     // g_{a n} theta^a over the equator
  double total = 0.0;
};

struct MassEstimate {
  std::vector<double> radii;
  std::vector<MassSample> samples;
  double extrapolated = 0.0;
  double fitted_exponent = 0.0;  // -s of the fitted r^{-s}; -infinity if no variation
  double error_bound = 0.0;
  bool converged = true;
  std::string note;
};

struct MassOptions {
  int order = 12;
  bool two_term = false;  // m_inf + c1 r^{-s} + c2 r^{-2s}
};

MassSample mass_at_radius(const MetricField& g, double r, int order = 12);

/// Requires >= 4 increasing radii with ratio 2, all >= 2 r0, and tau > (n-2)/2.
MassEstimate mass(const MetricField& g, std::span<const double> schedule, const MassOptions& opts = {});

/// Power-law extrapolation of samples m(r_k) to r -> infinity.
MassEstimate extrapolate(std::span<const double> radii, std::span<const double> values,
                         bool two_term = false);

/// Sample of the corner condition along Sigma: H_minus from sheet 0,
/// H_plus from sheet 1, both with respect to the normal pointing into sheet 1.
struct CornerSample {
  std::array<double, kMaxDim> x{};
  double h_minus = 0.0;
  double h_plus = 0.0;
  double induced_mismatch = 0.0;  // max |h_ab(sheet 0) - h_ab(sheet 1)|
};

/// Two copies of the half-space glued along Sigma. Sheet 1 occupies
/// {x_n <= 0} with the reflected metric.
struct DoubledMetric {
  MetricField base;
  MetricField sheet1;
  double r_k = 0.0;
  std::vector<CornerSample> corner;
  double max_corner_jump = 0.0;  // max |H_plus + H_minus|
  double max_induced_mismatch = 0.0;

  MetricJet jet(std::span<const double> x) const;
};

DoubledMetric double_of(const MetricField& g, double r_k, int corner_radii = 8,
                        std::size_t points_per_radius = 16);

/// Full-sphere ADM flux of the doubled metric.
MassSample adm_at_radius(const DoubledMetric& d, double r, int order = 12);
MassEstimate adm_mass_double(const DoubledMetric& d, std::span<const double> schedule,
                             const MassOptions& opts = {});

/// Symmetric tensor bump(x) K, with bump(x) = prod_i (1 - ((x_i - c_i)/rho)^2)^4
/// inside the cube |x_i - c_i| < rho and 0 outside.
struct CompactTensor {
  int n = 3;
  std::array<double, kMaxDim> center{};
  double rho = 1.0;
  std::vector<double> k;  // packed coefficients of K

  std::vector<ScalarField> fields() const;
};

struct VariationalOptions {
  int points_per_dim = 24;
  int mass_order = 12;
  bool richardson = true;
};

struct VariationalReport {
  double lhs = 0.0;
  double rhs = 0.0;
  double mismatch = 0.0;
  double rhs_bulk = 0.0;
  double rhs_boundary = 0.0;
  double mass_difference = 0.0;  // change of the mass integral at R_V along the path
  double tail_estimate = 0.0;
  double mismatch_half = 0.0;    // with dt / 2
  double richardson_ratio = 0.0;
  bool support_meets_boundary = false;
};

/// Compares the central difference of (int R dM + 2 int H dSigma - m) along
/// g + t k with the first-variation integral at t = 0.
VariationalReport variational_check(const MetricField& g, const CompactTensor& k, double dt,
                                    double r_v, const VariationalOptions& opts = {});

}  // namespace halfmass
