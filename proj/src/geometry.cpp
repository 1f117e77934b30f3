#include "halfmass/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "halfmass/error.hpp"
#include "halfmass/quadrature.hpp"
#include "halfmass/sampling.hpp"

namespace halfmass {

namespace {

SmallMatrix invert(const SmallMatrix& g) {
  Eigen::LDLT<SmallMatrix> ldlt(g);
  if (ldlt.info() != Eigen::Success || !ldlt.isPositive() ||
      (ldlt.vectorD().array() <= 0.0).any())
    throw MetricError("metric is not positive definite");
  const int n = static_cast<int>(g.rows());
  SmallMatrix inv = ldlt.solve(SmallMatrix::Identity(n, n));
  return 0.5 * (inv + inv.transpose());
}

/// d_l g^{km} = -g^{ka} g_{ab,l} g^{bm}.
SmallMatrix inverse_derivative(const MetricJet& m, const SmallMatrix& ginv, int l) {
  const int n = m.n;
  SmallMatrix d(n, n);
  for (int j = 0; j < n; ++j)
    for (int i = 0; i < n; ++i) d(i, j) = m.dg(i, j, l);
  return -ginv * d * ginv;
}

constexpr double kEps = std::numeric_limits<double>::epsilon();

}  // namespace

CurvaturePoint curvature_from_jet(const MetricJet& m, std::span<const double> x) {
  const int n = m.n;
  CurvaturePoint c;
  c.n = n;
  for (int i = 0; i < n; ++i) c.x[i] = x[static_cast<std::size_t>(i)];
  c.metric = m.value();
  c.inverse_metric = invert(c.metric);
  c.sqrt_det = std::sqrt(c.metric.determinant());
  const SmallMatrix& gi = c.inverse_metric;

  // Lowered symbols Gamma_{m,ij} and their derivatives d_l Gamma_{m,ij}.
  std::array<double, kMaxDim * kMaxPacked> low{};
  std::array<double, kMaxDim * kMaxDim * kMaxPacked> dlow{};
  for (int a = 0; a < n; ++a)
    for (int j = 0; j < n; ++j)
      for (int i = 0; i <= j; ++i) {
        const int p = packed_index(i, j);
        low[a * kMaxPacked + p] = 0.5 * (m.dg(a, j, i) + m.dg(a, i, j) - m.dg(i, j, a));
        for (int l = 0; l < n; ++l)
          dlow[(l * kMaxDim + a) * kMaxPacked + p] =
              0.5 * (m.ddg(a, j, i, l) + m.ddg(a, i, j, l) - m.ddg(i, j, a, l));
      }

  for (int k = 0; k < n; ++k)
    for (int p = 0; p < packed_size(n); ++p) {
      double s = 0.0;
      for (int a = 0; a < n; ++a) s += gi(k, a) * low[a * kMaxPacked + p];
      c.gamma[k * kMaxPacked + p] = s;
    }

  // dgamma[(l, k, ij)] = d_l Gamma^k_ij.
  std::array<double, kMaxDim * kMaxDim * kMaxPacked> dgamma{};
  for (int l = 0; l < n; ++l) {
    const SmallMatrix dgi = inverse_derivative(m, gi, l);
    for (int k = 0; k < n; ++k)
      for (int p = 0; p < packed_size(n); ++p) {
        double s = 0.0;
        for (int a = 0; a < n; ++a)
          s += dgi(k, a) * low[a * kMaxPacked + p] + gi(k, a) * dlow[(l * kMaxDim + a) * kMaxPacked + p];
        dgamma[(l * kMaxDim + k) * kMaxPacked + p] = s;
      }
  }
  auto dG = [&](int l, int k, int i, int j) { return dgamma[(l * kMaxDim + k) * kMaxPacked + packed_index(i, j)]; };

  // R_ik = d_j G^j_ik - d_k G^j_ij + G^j_jp G^p_ik - G^j_kp G^p_ij.
  c.ricci = SmallMatrix::Zero(n, n);
  for (int k = 0; k < n; ++k)
    for (int i = 0; i <= k; ++i) {
      double s = 0.0;
      for (int j = 0; j < n; ++j) {
        s += dG(j, j, i, k) - dG(k, j, i, j);
        for (int p = 0; p < n; ++p)
          s += c.christoffel(j, j, p) * c.christoffel(p, i, k) -
               c.christoffel(j, k, p) * c.christoffel(p, i, j);
      }
      c.ricci(i, k) = c.ricci(k, i) = s;
    }
  double r = 0.0;
  for (int k = 0; k < n; ++k)
    for (int i = 0; i < n; ++i) r += gi(i, k) * c.ricci(i, k);
  c.scalar = r;
  return c;
}

CurvaturePoint curvature_at(const MetricField& g, std::span<const double> x) {
  return curvature_from_jet(g.jet(x), x);
}

BoundaryPoint boundary_from_jet(const MetricJet& m, std::span<const double> x) {
  const int n = m.n;
  const int t = n - 1;  // index of the normal coordinate
  BoundaryPoint b;
  b.n = n;
  for (int i = 0; i < n; ++i) b.x[i] = x[static_cast<std::size_t>(i)];
  const SmallMatrix g = m.value();
  const SmallMatrix gi = invert(g);
  const double gnn = gi(t, t);
  const double s = 1.0 / std::sqrt(gnn);

  b.eta = SmallVector(n);
  for (int i = 0; i < n; ++i) b.eta(i) = -s * gi(t, i);

  b.h = g.topLeftCorner(t, t);
  const SmallMatrix hi = invert(b.h);
  b.sqrt_det_h = std::sqrt(b.h.determinant());

  // A_ab = (g^nn)^{-1/2} Gamma^n_ab.
  b.A = SmallMatrix(t, t);
  for (int be = 0; be < t; ++be)
    for (int al = 0; al <= be; ++al) {
      double gam = 0.0;
      for (int a = 0; a < n; ++a)
        gam += gi(t, a) * 0.5 * (m.dg(a, be, al) + m.dg(a, al, be) - m.dg(al, be, a));
      b.A(al, be) = b.A(be, al) = s * gam;
    }
  double H = 0.0;
  for (int be = 0; be < t; ++be)
    for (int al = 0; al < t; ++al) H += hi(al, be) * b.A(al, be);
  b.H = H;

  // div eta = d_i eta^i + Gamma^i_ik eta^k, with Gamma^i_ik = 1/2 g^ab g_ab,k.
  double div = 0.0;
  for (int i = 0; i < n; ++i) {
    const SmallMatrix dgi = inverse_derivative(m, gi, i);
    const double ds = -0.5 * s * s * s * dgi(t, t);
    div += -(ds * gi(t, i) + s * dgi(t, i));
  }
  for (int k = 0; k < n; ++k) {
    double tr = 0.0;
    for (int a = 0; a < n; ++a)
      for (int c = 0; c < n; ++c) tr += gi(a, c) * m.dg(a, c, k);
    div += 0.5 * tr * b.eta(k);
  }
  b.H_div = div;
  return b;
}

BoundaryPoint boundary_at(const MetricField& g, std::span<const double> x) {
  if (x[static_cast<std::size_t>(g.n - 1)] != 0.0) throw InvalidArgument("boundary point must have x_n = 0");
  return boundary_from_jet(g.jet(x), x);
}

double mean_curvature_adapted(const MetricJet& m) {
  const int n = m.n;
  const int t = n - 1;
  const SmallMatrix gi = invert(m.value());
  double s = 0.0;
  for (int a = 0; a < t; ++a) s += 2.0 * m.dg(t, a, a) - m.dg(a, a, t);
  return 0.5 * std::sqrt(gi(t, t)) * s;
}

SmallVector mass_density(const MetricJet& m) {
  const int n = m.n;
  SmallVector c(n);
  for (int i = 0; i < n; ++i) {
    double s = 0.0;
    for (int j = 0; j < n; ++j) s += m.dg(i, j, j) - m.dg(j, j, i);
    c(i) = s;
  }
  return c;
}

SmallVector mass_density(const MetricField& g, std::span<const double> x) { return mass_density(g.jet(x)); }

double mass_density_divergence(const MetricJet& m) {
  const int n = m.n;
  double s = 0.0;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) s += m.ddg(i, j, i, j) - m.ddg(j, j, i, i);
  return s;
}

ExpansionResiduals expansion_residuals(const MetricField& g, double r, int order) {
  if (r < 2.0 * g.r0) throw InvalidArgument("expansion residuals need r >= 2 r0");
  const HemisphereRule rule = hemisphere_rule(g.n, r, order);
  const int n = g.n;
  ExpansionResiduals out;
  double scale = 0.0;
  for (std::size_t i = 0; i < rule.weights.size(); ++i) {
    const auto x = rule.nodes[i];
    const MetricJet m = g.jet(x);
    const CurvaturePoint c = curvature_from_jet(m, x);
    const double div = mass_density_divergence(m);
    out.theta_sup = std::max(out.theta_sup, std::abs(c.scalar - div));
    double second = 0.0;
    for (int p = 0; p < packed_size(n); ++p)
      for (int q = 0; q < packed_size(n); ++q) second = std::max(second, std::abs(m.c[p].hess[q]));
    scale = std::max({scale, std::abs(c.scalar), std::abs(div), second});
  }
  out.theta_floor = 64.0 * kEps * scale;

  double bscale = 0.0;
  for (std::size_t i = 0; i < rule.equator_weights.size(); ++i) {
    const auto x = rule.equator_nodes[i];
    const MetricJet m = g.jet(x);
    const BoundaryPoint b = boundary_from_jet(m, x);
    const SmallVector c = mass_density(m);
    double tangential = 0.0;
    for (int a = 0; a < n - 1; ++a) tangential += m.dg(n - 1, a, a);
    const double model = 0.5 * (-c.dot(b.eta) + tangential);
    out.theta_prime_sup = std::max(out.theta_prime_sup, std::abs(b.H - model));
    double first = 0.0;
    for (int p = 0; p < packed_size(n); ++p)
      for (int k = 0; k < n; ++k) first = std::max(first, std::abs(m.c[p].grad[k]));
    bscale = std::max({bscale, std::abs(b.H), std::abs(model), first});
  }
  out.theta_prime_floor = 64.0 * kEps * bscale;
  return out;
}

ResidualDecay residual_decay(const MetricField& g, std::span<const double> radii, int order) {
  ResidualDecay d;
  d.radii.assign(radii.begin(), radii.end());
  for (double r : radii) {
    const ExpansionResiduals e = expansion_residuals(g, r, order);
    d.theta.push_back(e.theta_sup > e.theta_floor ? e.theta_sup : 0.0);
    d.theta_prime.push_back(e.theta_prime_sup > e.theta_prime_floor ? e.theta_prime_sup : 0.0);
  }
  d.theta_rate = fit_decay_rate(d.radii, d.theta);
  d.theta_prime_rate = fit_decay_rate(d.radii, d.theta_prime);
  return d;
}

}  // namespace halfmass
