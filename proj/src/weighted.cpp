#include <algorithm>
#include <cmath>

#include "halfmass/elliptic.hpp"
#include "halfmass/error.hpp"
#include "halfmass/quadrature.hpp"

namespace halfmass {

namespace {

double hessian_norm(const Jet2& j) {
  double s = 0.0;
  for (int a = 0; a < j.n; ++a)
    for (int b = 0; b < j.n; ++b) s += j.h(a, b) * j.h(a, b);
  return std::sqrt(s);
}

double gradient_norm(const Jet2& j) {
  double s = 0.0;
  for (int a = 0; a < j.n; ++a) s += j.grad[a] * j.grad[a];
  return std::sqrt(s);
}

// Least squares y = C + D / r.
AsymptoticFit fit_shells(std::span<const double> radii, std::span<const double> y) {
  if (radii.size() < 2) throw InvalidArgument("asymptotic fit needs at least two radii");
  double s1 = 0, sx = 0, sxx = 0, sy = 0, sxy = 0;
  for (std::size_t i = 0; i < radii.size(); ++i) {
    const double x = 1.0 / radii[i];
    s1 += 1;
    sx += x;
    sxx += x * x;
    sy += y[i];
    sxy += x * y[i];
  }
  const double det = s1 * sxx - sx * sx;
  if (!(det > 0.0)) throw InvalidArgument("asymptotic fit needs distinct radii");
  AsymptoticFit fit;
  fit.C = (sxx * sy - sx * sxy) / det;
  fit.correction = (s1 * sxy - sx * sy) / det;
  double res = 0.0, ref = 0.0;
  for (std::size_t i = 0; i < radii.size(); ++i) {
    const double e = y[i] - fit.C - fit.correction / radii[i];
    res += e * e;
    ref += y[i] * y[i];
  }
  fit.relative_residual = ref > 0.0 ? std::sqrt(res / ref) : 0.0;
  fit.flagged = fit.relative_residual > 0.05;
  return fit;
}

template <class Value>
AsymptoticFit shell_fit(int n, Value&& value, double u_infinity, std::span<const double> radii, int order) {
  std::vector<double> y;
  for (double r : radii) {
    const HemisphereRule rule = hemisphere_rule(n, r, order);
    double num = 0.0, area = 0.0;
    for (std::size_t i = 0; i < rule.nodes.size(); ++i) {
      num += rule.weights[i] * (value(rule.nodes[i]) - u_infinity);
      area += rule.weights[i];
    }
    y.push_back(num / area * std::pow(r, n - 2));
  }
  return fit_shells(radii, y);
}

}  // namespace

WeightedNormReport weighted_norm(const ScalarField& u, double gamma, int k, const WeightedNormSpec& spec) {
  if (k < 0 || k > 2) throw InvalidArgument("weighted_norm supports k = 0, 1, 2");
  if (spec.radii.size() < 2) throw InvalidArgument("weighted_norm needs at least two radii");
  for (double r : spec.radii)
    if (!(r >= 1.0)) throw InvalidArgument("weighted_norm sample radii must be >= 1");

  const int n = u.dimension();
  WeightedNormReport rep;
  rep.gamma = gamma;
  rep.k = k;
  std::vector<std::array<double, 3>> per_radius(spec.radii.size(), {0.0, 0.0, 0.0});
  std::vector<double> value_sup(spec.radii.size(), 0.0);
  for (std::size_t s = 0; s < spec.radii.size(); ++s) {
    const double r = spec.radii[s];
    const PointSet pts = sample_sphere(n, r, spec.points, SphereRegion::UpperHemisphere, spec.seed + s);
    for (std::size_t p = 0; p < pts.size(); ++p) {
      const Jet2 j = u.jet(pts[p]);
      const double d[3] = {std::abs(j.value), gradient_norm(j), hessian_norm(j)};
      value_sup[s] = std::max(value_sup[s], d[0]);
      for (int i = 0; i <= k; ++i) per_radius[s][i] = std::max(per_radius[s][i], std::pow(r, -gamma + i) * d[i]);
    }
  }
  rep.fitted_decay = fit_decay_rate(spec.radii, value_sup);
  for (int i = 0; i <= k; ++i) {
    std::vector<double> col;
    for (const auto& v : per_radius) {
      col.push_back(v[i]);
      rep.terms[i] = std::max(rep.terms[i], v[i]);
    }
    // A weighted sup that keeps growing with r means the norm is infinite.
    if (-fit_decay_rate(spec.radii, col) > spec.growth_slack) rep.finite = false;
    rep.estimated_norm += rep.terms[i];
  }
  if (!rep.finite) rep.estimated_norm = kInfinity;
  return rep;
}

double lq_norm(const ScalarField& u, double q, double beta, double r_min, double r_max, int order) {
  if (!(q >= 1.0)) throw InvalidArgument("lq_norm needs q >= 1");
  if (!(r_min > 0.0 && r_max > r_min)) throw InvalidArgument("lq_norm needs 0 < r_min < r_max");
  const int n = u.dimension();
  // In t = log r the measure r^{-n} dx is dt dOmega.
  const GaussRule radial = gauss_legendre(order);
  const double t0 = std::log(r_min), t1 = std::log(r_max);
  const HemisphereRule unit = hemisphere_rule(n, 1.0, order);
  double sum = 0.0;
  std::vector<double> x(static_cast<std::size_t>(n));
  for (std::size_t a = 0; a < radial.nodes.size(); ++a) {
    const double t = 0.5 * (t0 + t1) + 0.5 * (t1 - t0) * radial.nodes[a];
    const double r = std::exp(t);
    double shell = 0.0;
    for (std::size_t p = 0; p < unit.nodes.size(); ++p) {
      for (int d = 0; d < n; ++d) x[static_cast<std::size_t>(d)] = r * unit.nodes[p][static_cast<std::size_t>(d)];
      shell += unit.weights[p] * std::pow(std::abs(std::pow(r, -beta) * u.value(x)), q);
    }
    sum += 0.5 * (t1 - t0) * radial.weights[a] * shell;
  }
  return std::pow(sum, 1.0 / q);
}

AsymptoticFit asymptotic_coefficient(const ScalarField& u, double u_infinity, std::span<const double> radii,
                                     int order) {
  return shell_fit(u.dimension(), [&](std::span<const double> x) { return u.value(x); }, u_infinity, radii, order);
}

AsymptoticFit asymptotic_coefficient(const DiscreteSolution& u, double u_infinity, std::span<const double> radii,
                                     int order) {
  for (double r : radii)
    if (r < u.grid->r_in() || r > u.grid->r_out())
      throw InvalidArgument("asymptotic_coefficient radii must lie inside the grid annulus");
  return shell_fit(3, [&](std::span<const double> x) { return u.interpolate(x); }, u_infinity, radii, order);
}

double coefficient_factor(int n) {
  if (n < 3) throw InvalidArgument("coefficient_factor needs n >= 3");
  return 1.0 / (2.0 * (n - 1) * sphere_area(n - 1));
}

}  // namespace halfmass
