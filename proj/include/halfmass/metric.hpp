#pragma once

#include <Eigen/Dense>
#include <array>
#include <cstdint>
#include <limits>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "halfmass/jet.hpp"
#include "halfmass/scalar_field.hpp"

namespace halfmass {

using SmallMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, 0, kMaxDim, kMaxDim>;
using SmallVector = Eigen::Matrix<double, Eigen::Dynamic, 1, 0, kMaxDim, 1>;

inline constexpr double kInfinity = std::numeric_limits<double>::infinity();

/// Area of the unit k-sphere S^k in R^{k+1}.
double sphere_area(int k);

/// Jets of the metric coefficients g_ij (packed, so g_ij and g_ji share storage).
struct MetricJet {
  int n = 0;
  std::array<Jet2, kMaxPacked> c;

  explicit MetricJet(int dim = 0) : n(dim) {
    for (auto& j : c) j = Jet2(dim);
  }
  const Jet2& operator()(int i, int j) const { return c[packed_index(i, j)]; }
  Jet2& operator()(int i, int j) { return c[packed_index(i, j)]; }

  double g(int i, int j) const { return (*this)(i, j).value; }
  double dg(int i, int j, int k) const { return (*this)(i, j).grad[k]; }
  double ddg(int i, int j, int k, int l) const { return (*this)(i, j).h(k, l); }
  SmallMatrix value() const;
};

class MetricSource {
 public:
  virtual ~MetricSource() = default;
  virtual MetricJet jet(std::span<const double> x) const = 0;
  virtual SmallMatrix value(std::span<const double> x) const { return jet(x).value(); }
};

/// A metric on {x_n >= 0, |x| >= r0}. Copies share the immutable source.
struct MetricField {
  int n = 3;
  double tau = kInfinity;  // +infinity for the flat model
  double r0 = 1.0;
  bool conformally_flat = false;
  bool boundary_orthogonal = false;
  std::optional<double> exact_mass;
  std::string family;
  std::vector<std::string> warnings;
  std::shared_ptr<const MetricSource> source;

  MetricJet jet(std::span<const double> x) const { return source->jet(x); }
  SmallMatrix value(std::span<const double> x) const { return source->value(x); }
};

MetricField flat_half_space(int n);
MetricField half_schwarzschild(int n, double m);

/// u^{4/(n-2)} g. Throws DomainError if u <= 0 at a sample point.
MetricField conformal(const MetricField& g, const ScalarField& u);

/// delta + a with `a` given in packed order (invalid fields mean 0).
/// Throws MetricError if delta + a is not positive definite at a sample
/// point; a decay slower than tau is recorded as a warning.
MetricField perturbation(int n, const std::vector<ScalarField>& a, double tau, double r0);

/// Pullback under x = Q y + b with Q orthogonal, Q e_n = e_n and b_n = 0.
MetricField pullback_rigid(const MetricField& g, const SmallMatrix& q, const SmallVector& b);

/// Boundary-preserving rigid motion: Q orthogonal with det Q = 1 and
/// Q e_n = e_n, b in Sigma with |b| <= max_shift.
struct RigidMotion {
  SmallMatrix q;
  SmallVector b;
};
RigidMotion random_rigid_motion(int n, std::uint64_t seed, double max_shift);

/// Pullback under x = Q y for an arbitrary orthogonal Q; no admissibility
/// checks (used for the reflected sheet of the double).
MetricField pullback_orthogonal(const MetricField& g, const SmallMatrix& q);

/// chi g + (1 - chi) delta.
MetricField blend_with_flat(const MetricField& g, const ScalarField& chi);

/// g + t k with k given in packed order (invalid fields mean 0).
MetricField add_tensor(const MetricField& g, const std::vector<ScalarField>& k, double t);

bool is_positive_definite(const MetricField& g, std::span<const double> x);

/// Radii r0 * 2^k for k = first..last.
std::vector<double> dyadic_radii(double r0, int first, int last);

/// Measured decay rates of |g - delta|, |dg|, |d^2 g| on dyadic hemispheres.
struct MetricDecay {
  std::vector<double> radii;
  std::vector<double> sup0, sup1, sup2;
  double rate0 = kInfinity, rate1 = kInfinity, rate2 = kInfinity;
};
MetricDecay sampled_decay(const MetricField& g, int levels = 6, std::size_t points = 64);

/// Throws MetricError at the first sampled point where g is not positive definite.
void check_positive_definite(const MetricField& g, int levels = 6, std::size_t points = 64);

}  // namespace halfmass
