#include "halfmass/quadrature.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>
#include <numbers>
#include <string>

#include "halfmass/error.hpp"

namespace halfmass {

GaussRule gauss_jacobi(int points, double alpha, double beta) {
  if (points < 1) throw InvalidArgument("quadrature needs at least one point");
  if (!(alpha > -1.0) || !(beta > -1.0)) throw InvalidArgument("Jacobi parameters must exceed -1");
  const int q = points;
  const double ab = alpha + beta;
  Eigen::MatrixXd jm = Eigen::MatrixXd::Zero(q, q);
  for (int k = 0; k < q; ++k) {
    const double s = 2.0 * k + ab;
    jm(k, k) = (k == 0) ? (beta - alpha) / (ab + 2.0) : (beta * beta - alpha * alpha) / (s * (s + 2.0));
    if (k + 1 < q) {
      const double kk = k + 1.0;
      const double t = 2.0 * kk + ab;
      const double b2 = 4.0 * kk * (kk + alpha) * (kk + beta) * (kk + ab) / (t * t * (t + 1.0) * (t - 1.0));
      jm(k, k + 1) = jm(k + 1, k) = std::sqrt(b2);
    }
  }
  const double mu0 = std::exp((ab + 1.0) * std::log(2.0) + std::lgamma(alpha + 1.0) +
                              std::lgamma(beta + 1.0) - std::lgamma(ab + 2.0));
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(jm);
  GaussRule rule;
  rule.nodes.resize(static_cast<std::size_t>(q));
  rule.weights.resize(static_cast<std::size_t>(q));
  for (int i = 0; i < q; ++i) {
    rule.nodes[static_cast<std::size_t>(i)] = es.eigenvalues()(i);
    const double v0 = es.eigenvectors()(0, i);
    rule.weights[static_cast<std::size_t>(i)] = mu0 * v0 * v0;
  }
  return rule;
}

GaussRule gauss_legendre(int points) { return gauss_jacobi(points, 0.0, 0.0); }

namespace {

struct UnitRule {
  PointSet nodes;
  std::vector<double> weights;
};

int points_for_order(int order) { return order / 2 + 1; }

/// Rule on the unit sphere S^k in R^{k+1}.
UnitRule unit_sphere_rule(int k, int order) {
  UnitRule out;
  out.nodes.n = k + 1;
  if (k == 1) {
    const int m = order + 1;
    for (int j = 0; j < m; ++j) {
      const double phi = 2.0 * std::numbers::pi * j / m;
      out.nodes.coords.push_back(std::cos(phi));
      out.nodes.coords.push_back(std::sin(phi));
      out.weights.push_back(2.0 * std::numbers::pi / m);
    }
    return out;
  }
  const UnitRule sub = unit_sphere_rule(k - 1, order);
  const double a = 0.5 * (k - 2);
  const GaussRule polar = gauss_jacobi(points_for_order(order), a, a);
  for (std::size_t p = 0; p < polar.nodes.size(); ++p) {
    const double t = polar.nodes[p];
    const double s = std::sqrt(std::max(0.0, 1.0 - t * t));
    for (std::size_t i = 0; i < sub.weights.size(); ++i) {
      for (double y : sub.nodes[i]) out.nodes.coords.push_back(s * y);
      out.nodes.coords.push_back(t);
      out.weights.push_back(polar.weights[p] * sub.weights[i]);
    }
  }
  return out;
}

}  // namespace

HemisphereRule hemisphere_rule(int n, double r, int order) {
  if (n < 3 || n > 7) throw InvalidArgument("hemisphere rules support n in 3..7, got " + std::to_string(n));
  if (order < 2) throw InvalidArgument("quadrature order must be at least 2");
  if (!(r > 0.0)) throw InvalidArgument("radius must be positive");
  HemisphereRule rule;
  rule.n = n;
  rule.r = r;
  rule.order = order;
  rule.nodes.n = n;
  rule.equator_nodes.n = n;

  // t = x_n / r in [0, 1] with density (1 - t^2)^a; t = (1 + s) / 2 moves the
  // (1 - t)^a factor into a Jacobi weight and leaves a smooth (1 + t)^a.
  const UnitRule sub = unit_sphere_rule(n - 2, order);
  const double a = 0.5 * (n - 3);
  // The leftover (1 + t)^a adds a to the polynomial degree for odd n. For
  // even n it is analytic on [0, 1] with error ~ (3 + sqrt 8)^(-2p); four
  // extra points take the area to round-off.
  const int extra = n % 2 ? static_cast<int>(a) : 8;
  const GaussRule polar = gauss_jacobi(points_for_order(order + extra), a, 0.0);
  const double area_scale = std::pow(r, n - 1);
  for (std::size_t p = 0; p < polar.nodes.size(); ++p) {
    const double t = 0.5 * (1.0 + polar.nodes[p]);
    const double wt = polar.weights[p] * std::pow(0.5, a + 1.0) * std::pow(1.0 + t, a);
    const double s = std::sqrt(std::max(0.0, 1.0 - t * t));
    for (std::size_t i = 0; i < sub.weights.size(); ++i) {
      for (double y : sub.nodes[i]) rule.nodes.coords.push_back(r * s * y);
      rule.nodes.coords.push_back(r * t);
      rule.weights.push_back(area_scale * wt * sub.weights[i]);
    }
  }

  const double eq_scale = std::pow(r, n - 2);
  for (std::size_t i = 0; i < sub.weights.size(); ++i) {
    for (double y : sub.nodes[i]) rule.equator_nodes.coords.push_back(r * y);
    rule.equator_nodes.coords.push_back(0.0);
    rule.equator_weights.push_back(eq_scale * sub.weights[i]);
  }
  return rule;
}

SphereRule sphere_rule(int n, double r, int order) {
  const HemisphereRule h = hemisphere_rule(n, r, order);
  SphereRule s;
  s.n = n;
  s.r = r;
  s.order = order;
  s.nodes.n = n;
  s.nodes.coords = h.nodes.coords;
  s.weights = h.weights;
  for (std::size_t i = 0; i < h.weights.size(); ++i) {
    auto p = h.nodes[i];
    for (int c = 0; c < n - 1; ++c) s.nodes.coords.push_back(p[static_cast<std::size_t>(c)]);
    s.nodes.coords.push_back(-p[static_cast<std::size_t>(n - 1)]);
    s.weights.push_back(h.weights[i]);
  }
  return s;
}

double pairwise_sum(std::span<const double> v) {
  if (v.size() <= 8) {
    double s = 0.0;
    for (double x : v) s += x;
    return s;
  }
  const std::size_t half = v.size() / 2;
  return pairwise_sum(v.first(half)) + pairwise_sum(v.subspan(half));
}

double integrate_flux(const VectorFieldFn& v, const HemisphereRule& rule) {
  const int n = rule.n;
  std::vector<double> terms(rule.weights.size());
  std::vector<double> out(static_cast<std::size_t>(n));
  for (std::size_t i = 0; i < terms.size(); ++i) {
    const auto x = rule.nodes[i];
    v(x, out);
    double dot = 0.0;
    for (int c = 0; c < n; ++c) dot += out[static_cast<std::size_t>(c)] * x[static_cast<std::size_t>(c)];
    terms[i] = rule.weights[i] * dot / rule.r;
  }
  return pairwise_sum(terms);
}

double integrate_equator(const VectorFieldFn& f, const HemisphereRule& rule) {
  const int n = rule.n;
  std::vector<double> terms(rule.equator_weights.size());
  std::vector<double> out(static_cast<std::size_t>(n));
  for (std::size_t i = 0; i < terms.size(); ++i) {
    const auto x = rule.equator_nodes[i];
    f(x, out);
    double dot = 0.0;
    for (int c = 0; c < n - 1; ++c) dot += out[static_cast<std::size_t>(c)] * x[static_cast<std::size_t>(c)];
    terms[i] = rule.equator_weights[i] * dot / rule.r;
  }
  return pairwise_sum(terms);
}

double integrate_scalar(const ScalarFn& f, const PointSet& nodes, std::span<const double> weights) {
  std::vector<double> terms(weights.size());
  for (std::size_t i = 0; i < terms.size(); ++i) terms[i] = weights[i] * f(nodes[i]);
  return pairwise_sum(terms);
}

}  // namespace halfmass
