#include <algorithm>
#include <cmath>
#include <sstream>

#include "halfmass/error.hpp"
#include "halfmass/geometry.hpp"
#include "halfmass/mass.hpp"
#include "halfmass/parallel.hpp"
#include "halfmass/quadrature.hpp"

namespace halfmass {

namespace {

/// Jet of prod_i (1 - s_i^2)^4, s_i = (x_i - c_i) / rho; zero outside the cube.
Jet2 bump_jet(const CompactTensor& k, std::span<const double> x) {
  const int n = k.n;
  Jet2 out = Jet2::constant(n, 1.0);
  for (int i = 0; i < n; ++i) {
    const double s = (x[static_cast<std::size_t>(i)] - k.center[i]) / k.rho;
    if (std::abs(s) >= 1.0) return Jet2::constant(n, 0.0);
    const double q = 1.0 - s * s;
    const double f = q * q * q * q;
    const double df = -8.0 * s * q * q * q / k.rho;
    const double d2f = (-8.0 * q * q * q + 48.0 * s * s * q * q) / (k.rho * k.rho);
    Jet2 factor(n, f);
    factor.grad[i] = df;
    factor.h(i, i) = d2f;
    out = out * factor;
  }
  return out;
}

double bump_value(const CompactTensor& k, std::span<const double> x) {
  double v = 1.0;
  for (int i = 0; i < k.n; ++i) {
    const double s = (x[static_cast<std::size_t>(i)] - k.center[i]) / k.rho;
    if (std::abs(s) >= 1.0) return 0.0;
    const double q = 1.0 - s * s;
    v *= q * q * q * q;
  }
  return v;
}

/// Tensor Gauss-Legendre nodes over [lo_i, hi_i].
struct BoxRule {
  int dims = 0;
  std::vector<std::vector<double>> nodes, weights;
  std::size_t size() const {
    std::size_t s = 1;
    for (const auto& v : nodes) s *= v.size();
    return s;
  }
  /// Point and weight of flat index `idx`.
  double point(std::size_t idx, std::span<double> x) const {
    double w = 1.0;
    for (int d = dims - 1; d >= 0; --d) {
      const std::size_t m = nodes[static_cast<std::size_t>(d)].size();
      const std::size_t j = idx % m;
      idx /= m;
      x[static_cast<std::size_t>(d)] = nodes[static_cast<std::size_t>(d)][j];
      w *= weights[static_cast<std::size_t>(d)][j];
    }
    return w;
  }
};

BoxRule box_rule(std::span<const double> lo, std::span<const double> hi, int points) {
  const GaussRule gl = gauss_legendre(points);
  BoxRule b;
  b.dims = static_cast<int>(lo.size());
  for (std::size_t d = 0; d < lo.size(); ++d) {
    const double half = 0.5 * (hi[d] - lo[d]);
    const double mid = 0.5 * (hi[d] + lo[d]);
    std::vector<double> xs, ws;
    for (std::size_t i = 0; i < gl.nodes.size(); ++i) {
      xs.push_back(mid + half * gl.nodes[i]);
      ws.push_back(half * gl.weights[i]);
    }
    b.nodes.push_back(std::move(xs));
    b.weights.push_back(std::move(ws));
  }
  return b;
}

struct Region {
  BoxRule bulk;
  BoxRule face;  // dims = n - 1; empty when the support misses Sigma
  bool meets_boundary = false;
};

/// int R dM over the bulk rule plus 2 int H dSigma over the face rule.
double ghy_action(const MetricField& g, const Region& region) {
  const int n = g.n;
  std::vector<double> terms(region.bulk.size());
  parallel_for(terms.size(), [&](std::size_t i) {
    std::array<double, kMaxDim> x{};
    const std::span<double> xs(x.data(), static_cast<std::size_t>(n));
    const double w = region.bulk.point(i, xs);
    const CurvaturePoint c = curvature_at(g, xs);
    terms[i] = w * c.scalar * c.sqrt_det;
  });
  double total = pairwise_sum(terms);
  if (region.meets_boundary) {
    std::vector<double> bterms(region.face.size());
    parallel_for(bterms.size(), [&](std::size_t i) {
      std::array<double, kMaxDim> x{};
      const double w = region.face.point(i, std::span<double>(x.data(), static_cast<std::size_t>(n - 1)));
      x[static_cast<std::size_t>(n - 1)] = 0.0;
      const BoundaryPoint b = boundary_at(g, std::span<const double>(x.data(), static_cast<std::size_t>(n)));
      bterms[i] = 2.0 * w * b.H * b.sqrt_det_h;
    });
    total += pairwise_sum(bterms);
  }
  return total;
}

}  // namespace

std::vector<ScalarField> CompactTensor::fields() const {
  if (static_cast<int>(k.size()) != packed_size(n)) throw InvalidArgument("tensor needs n(n+1)/2 coefficients");
  std::vector<ScalarField> out(k.size());
  const CompactTensor self = *this;
  for (std::size_t p = 0; p < k.size(); ++p) {
    if (k[p] == 0.0) continue;
    const double c = k[p];
    out[p] = ScalarField::from_jet(n, [self, c](std::span<const double> x) { return c * bump_jet(self, x); });
  }
  return out;
}

VariationalReport variational_check(const MetricField& g, const CompactTensor& k, double dt, double r_v,
                                    const VariationalOptions& opts) {
  const int n = g.n;
  if (k.n != n) throw InvalidArgument("tensor dimension mismatch");
  if (!(dt > 0.0)) throw InvalidArgument("dt must be positive");
  double cnorm = 0.0;
  for (int i = 0; i < n; ++i) cnorm += k.center[i] * k.center[i];
  if (std::sqrt(cnorm) + k.rho * std::sqrt(static_cast<double>(n)) > 0.5 * r_v)
    throw InvalidArgument("support of k must lie in r <= R_V / 2");

  std::vector<double> lo(static_cast<std::size_t>(n)), hi(static_cast<std::size_t>(n));
  double near2 = 0.0;
  for (int i = 0; i < n; ++i) {
    lo[static_cast<std::size_t>(i)] = k.center[i] - k.rho;
    hi[static_cast<std::size_t>(i)] = k.center[i] + k.rho;
  }
  Region region;
  region.meets_boundary = lo.back() < 0.0;
  lo.back() = std::max(lo.back(), 0.0);
  if (!(hi.back() > 0.0)) throw InvalidArgument("support of k lies outside x_n >= 0");
  for (int i = 0; i < n; ++i) {
    const double c = std::clamp(0.0, lo[static_cast<std::size_t>(i)], hi[static_cast<std::size_t>(i)]);
    near2 += c * c;
  }
  if (std::sqrt(near2) < g.r0) throw InvalidArgument("support of k reaches inside r0");

  region.bulk = box_rule(lo, hi, opts.points_per_dim);
  if (region.meets_boundary)
    region.face = box_rule(std::span<const double>(lo.data(), lo.size() - 1),
                           std::span<const double>(hi.data(), hi.size() - 1), opts.points_per_dim);

  const std::vector<ScalarField> kf = k.fields();
  std::vector<double> kpacked = k.k;

  // First-variation integrals at t = 0.
  VariationalReport rep;
  rep.support_meets_boundary = region.meets_boundary;
  {
    std::vector<double> terms(region.bulk.size());
    parallel_for(terms.size(), [&](std::size_t i) {
      std::array<double, kMaxDim> x{};
      const std::span<double> xs(x.data(), static_cast<std::size_t>(n));
      const double w = region.bulk.point(i, xs);
      const double bump = bump_value(k, xs);
      if (bump == 0.0) {
        terms[i] = 0.0;
        return;
      }
      const CurvaturePoint c = curvature_at(g, xs);
      SmallMatrix kk(n, n);
      for (int b = 0; b < n; ++b)
        for (int a = 0; a < n; ++a) kk(a, b) = bump * kpacked[static_cast<std::size_t>(packed_index(a, b))];
      const SmallMatrix kup = c.inverse_metric * kk * c.inverse_metric;
      const SmallMatrix einstein = c.ricci - 0.5 * c.scalar * c.metric;
      terms[i] = -w * (einstein.cwiseProduct(kup)).sum() * c.sqrt_det;
    });
    rep.rhs_bulk = pairwise_sum(terms);
  }
  if (region.meets_boundary) {
    std::vector<double> terms(region.face.size());
    parallel_for(terms.size(), [&](std::size_t i) {
      std::array<double, kMaxDim> x{};
      const double w = region.face.point(i, std::span<double>(x.data(), static_cast<std::size_t>(n - 1)));
      const std::span<const double> xs(x.data(), static_cast<std::size_t>(n));
      const double bump = bump_value(k, xs);
      if (bump == 0.0) {
        terms[i] = 0.0;
        return;
      }
      const BoundaryPoint b = boundary_at(g, xs);
      const int t = n - 1;
      SmallMatrix kk(t, t);
      for (int be = 0; be < t; ++be)
        for (int al = 0; al < t; ++al) kk(al, be) = bump * kpacked[static_cast<std::size_t>(packed_index(al, be))];
      const SmallMatrix hi_inv = b.h.inverse();
      const SmallMatrix kup = hi_inv * kk * hi_inv;
      const SmallMatrix umb = b.A - b.H * b.h;
      terms[i] = -w * (umb.cwiseProduct(kup)).sum() * b.sqrt_det_h;
    });
    rep.rhs_boundary = pairwise_sum(terms);
  }
  rep.rhs = rep.rhs_bulk + rep.rhs_boundary;

  auto derivative = [&](double step, double& mass_diff) {
    const MetricField plus = add_tensor(g, kf, step);
    const MetricField minus = add_tensor(g, kf, -step);
    const double a_plus = ghy_action(plus, region);
    const double a_minus = ghy_action(minus, region);
    mass_diff = mass_at_radius(plus, r_v, opts.mass_order).total - mass_at_radius(minus, r_v, opts.mass_order).total;
    return ((a_plus - mass_diff * 0.5) - (a_minus + mass_diff * 0.5)) / (2.0 * step);
  };

  rep.lhs = derivative(dt, rep.mass_difference);
  rep.tail_estimate = std::abs(rep.mass_difference) / (2.0 * dt);
  rep.mismatch = std::abs(rep.lhs - rep.rhs);
  if (opts.richardson) {
    double md = 0.0;
    const double lhs_half = derivative(0.5 * dt, md);
    rep.mismatch_half = std::abs(lhs_half - rep.rhs);
    rep.richardson_ratio = rep.mismatch_half > 0.0 ? rep.mismatch / rep.mismatch_half : 0.0;
  }
  return rep;
}

}  // namespace halfmass
