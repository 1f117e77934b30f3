#pragma once

#include <functional>
#include <span>
#include <vector>

#include "halfmass/sampling.hpp"

namespace halfmass {

/// Nodes and weights on [-1, 1] for the weight (1 - x)^alpha (1 + x)^beta.
struct GaussRule {
  std::vector<double> nodes, weights;
};
GaussRule gauss_jacobi(int points, double alpha, double beta);
GaussRule gauss_legendre(int points);

/// Product rule on the coordinate hemisphere {|x| = r, x_n >= 0} together
/// with a rule on its equator {|x| = r, x_n = 0}.
struct HemisphereRule {
  int n = 0;
  double r = 0.0;
  int order = 0;
  PointSet nodes;
  std::vector<double> weights;
  PointSet equator_nodes;
  std::vector<double> equator_weights;
};

/// Rule on the full coordinate sphere {|x| = r}.
struct SphereRule {
  int n = 0;
  double r = 0.0;
  int order = 0;
  PointSet nodes;
  std::vector<double> weights;
};

/// `order` is the polynomial degree integrated exactly (for even n the
/// hemisphere polar factor is not polynomial, so exactness there is only
/// spectral). Throws InvalidArgument for n outside 3..7 or order < 2.
HemisphereRule hemisphere_rule(int n, double r, int order);

/// The hemisphere rule together with its mirror image under x_n -> -x_n.
SphereRule sphere_rule(int n, double r, int order);

/// Pairwise (cascade) summation; the result depends only on the input order.
double pairwise_sum(std::span<const double> v);

/// out <- v(x), with out of length n.
using VectorFieldFn = std::function<void(std::span<const double> x, std::span<double> out)>;
using ScalarFn = std::function<double(std::span<const double> x)>;

/// Sum of w <v(x), x / r> over the hemisphere nodes.
double integrate_flux(const VectorFieldFn& v, const HemisphereRule& rule);
/// Sum of w f_alpha(x) x_alpha / r over the equator nodes (alpha < n).
double integrate_equator(const VectorFieldFn& f, const HemisphereRule& rule);
/// Sum of w f(x) over an arbitrary node set.
double integrate_scalar(const ScalarFn& f, const PointSet& nodes, std::span<const double> weights);

}  // namespace halfmass
