#include "halfmass/mass.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "halfmass/error.hpp"
#include "halfmass/geometry.hpp"
#include "halfmass/parallel.hpp"
#include "halfmass/quadrature.hpp"
#include "halfmass/sampling.hpp"

namespace halfmass {

namespace {

constexpr double kEps = std::numeric_limits<double>::epsilon();

/// Least-squares fit of values ~ basis coefficients for a fixed exponent s;
/// returns the sum of squared residuals and the coefficients.
double fit_fixed_exponent(std::span<const double> radii, std::span<const double> values, double s,
                          bool two_term, Eigen::VectorXd& coef) {
  const int m = static_cast<int>(radii.size());
  const int p = two_term ? 3 : 2;
  Eigen::MatrixXd a(m, p);
  Eigen::VectorXd y(m);
  for (int i = 0; i < m; ++i) {
    const double q = std::pow(radii[static_cast<std::size_t>(i)], -s);
    a(i, 0) = 1.0;
    a(i, 1) = q;
    if (two_term) a(i, 2) = q * q;
    y(i) = values[static_cast<std::size_t>(i)];
  }
  coef = a.colPivHouseholderQr().solve(y);
  return (a * coef - y).squaredNorm();
}

void check_schedule(const MetricField& g, std::span<const double> schedule) {
  if (schedule.size() < 4) throw InvalidArgument("mass schedule needs at least 4 radii");
  for (std::size_t i = 0; i < schedule.size(); ++i) {
    if (schedule[i] < 2.0 * g.r0) {
      std::ostringstream os;
      os << "radius " << schedule[i] << " is below 2 r0 = " << 2.0 * g.r0;
      throw InvalidArgument(os.str());
    }
    if (i > 0 && std::abs(schedule[i] / schedule[i - 1] - 2.0) > 1e-9)
      throw InvalidArgument("mass schedule radii must double from one to the next");
  }
}

/// Hemisphere term, equator term.
std::pair<double, double> mass_terms(const MetricField& g, const HemisphereRule& rule) {
  const int n = g.n;
  std::vector<double> hemi(rule.weights.size());
  parallel_for(hemi.size(), [&](std::size_t i) {
    const auto x = rule.nodes[i];
    const SmallVector c = mass_density(g.jet(x));
    double dot = 0.0;
    for (int k = 0; k < n; ++k) dot += c(k) * x[static_cast<std::size_t>(k)];
    hemi[i] = rule.weights[i] * dot / rule.r;
  });
  std::vector<double> eq(rule.equator_weights.size());
  parallel_for(eq.size(), [&](std::size_t i) {
    const auto x = rule.equator_nodes[i];
    const SmallMatrix m = g.value(x);
    double dot = 0.0;
    for (int a = 0; a < n - 1; ++a) dot += m(a, n - 1) * x[static_cast<std::size_t>(a)];
    eq[i] = rule.equator_weights[i] * dot / rule.r;
  });
  return {pairwise_sum(hemi), pairwise_sum(eq)};
}

MassEstimate estimate_from_samples(std::vector<MassSample> samples, bool two_term) {
  std::vector<double> radii, totals;
  for (const auto& s : samples) {
    radii.push_back(s.r);
    totals.push_back(s.total);
  }
  MassEstimate e = extrapolate(radii, totals, two_term);
  e.samples = std::move(samples);
  return e;
}

}  // namespace

MassEstimate extrapolate(std::span<const double> radii, std::span<const double> values, bool two_term) {
  if (radii.size() != values.size() || radii.size() < 3)
    throw InvalidArgument("extrapolation needs at least 3 samples");
  MassEstimate e;
  e.radii.assign(radii.begin(), radii.end());
  const std::size_t m = values.size();
  double lo = values[0], hi = values[0], scale = 0.0;
  for (double v : values) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
    scale = std::max(scale, std::abs(v));
  }
  const double spread = hi - lo;
  const double noise = 64.0 * kEps * scale;
  if (spread <= noise) {  // also the all-zero case
    e.extrapolated = values[m - 1];
    e.fitted_exponent = -std::numeric_limits<double>::infinity();
    e.error_bound = spread + noise;
    e.note = "samples constant to round-off";
    return e;
  }

  // Coarse log-spaced scan of the exponent, then golden-section refinement.
  const int grid = 240;
  const double smin = 0.02, smax = 12.0;
  auto sse = [&](double s) {
    Eigen::VectorXd c;
    return fit_fixed_exponent(radii, values, s, two_term, c);
  };
  int best = 0;
  double best_sse = std::numeric_limits<double>::infinity();
  std::vector<double> grid_s(grid);
  for (int i = 0; i < grid; ++i) {
    grid_s[static_cast<std::size_t>(i)] = smin * std::pow(smax / smin, static_cast<double>(i) / (grid - 1));
    const double v = sse(grid_s[static_cast<std::size_t>(i)]);
    if (v < best_sse) {
      best_sse = v;
      best = i;
    }
  }
  double a = grid_s[static_cast<std::size_t>(std::max(best - 1, 0))];
  double b = grid_s[static_cast<std::size_t>(std::min(best + 1, grid - 1))];
  const double phi = 0.5 * (std::sqrt(5.0) - 1.0);
  double x1 = b - phi * (b - a), x2 = a + phi * (b - a);
  double f1 = sse(x1), f2 = sse(x2);
  for (int it = 0; it < 100 && b - a > 1e-12 * b; ++it) {
    if (f1 < f2) {
      b = x2;
      x2 = x1;
      f2 = f1;
      x1 = b - phi * (b - a);
      f1 = sse(x1);
    } else {
      a = x1;
      x1 = x2;
      f1 = f2;
      x2 = a + phi * (b - a);
      f2 = sse(x2);
    }
  }
  const double s = 0.5 * (a + b);
  Eigen::VectorXd coef;
  const double final_sse = fit_fixed_exponent(radii, values, s, two_term, coef);
  e.extrapolated = coef(0);
  e.fitted_exponent = -s;

  const int params = two_term ? 4 : 3;
  const double rms = std::sqrt(final_sse / static_cast<double>(m));
  const double dof = static_cast<double>(m) - params;
  const double residual_bound = dof > 0 ? rms * std::sqrt(static_cast<double>(m) / dof) : rms;

  // Aitken's delta-squared on the last three samples as an independent limit.
  double aitken = e.extrapolated;
  const double d1 = values[m - 2] - values[m - 3];
  const double d2 = values[m - 1] - values[m - 2];
  if (d2 != d1) aitken = values[m - 1] - d2 * d2 / (d2 - d1);
  e.error_bound = std::max({residual_bound, std::abs(aitken - e.extrapolated), noise});

  bool monotone = true;
  for (std::size_t i = m - 2; i < m; ++i)
    monotone = monotone && std::abs(values[i] - e.extrapolated) < std::abs(values[i - 1] - e.extrapolated);
  const bool small_residual = rms <= 0.01 * spread;
  if (!monotone || !small_residual) {
    e.converged = false;
    e.error_bound = std::numeric_limits<double>::infinity();
    e.note = !monotone ? "samples do not approach the fitted limit monotonically"
                       : "fit residual exceeds 1% of the sample spread";
  }
  return e;
}

MassSample mass_at_radius(const MetricField& g, double r, int order) {
  const HemisphereRule rule = hemisphere_rule(g.n, r, order);
  const auto [hemi, eq] = mass_terms(g, rule);
  return {r, hemi, eq, hemi + eq};
}

MassEstimate mass(const MetricField& g, std::span<const double> schedule, const MassOptions& opts) {
  if (!(g.tau > 0.5 * (g.n - 2))) {
    std::ostringstream os;
    os << "mass requires tau > (n-2)/2 = " << 0.5 * (g.n - 2) << ", got tau = " << g.tau;
    throw InvalidArgument(os.str());
  }
  check_schedule(g, schedule);
  std::vector<MassSample> samples(schedule.size());
  parallel_for(samples.size(), [&](std::size_t i) { samples[i] = mass_at_radius(g, schedule[i], opts.order); });
  return estimate_from_samples(std::move(samples), opts.two_term);
}

MetricJet DoubledMetric::jet(std::span<const double> x) const {
  return x[static_cast<std::size_t>(base.n - 1)] >= 0.0 ? base.jet(x) : sheet1.jet(x);
}

DoubledMetric double_of(const MetricField& g, double r_k, int corner_radii, std::size_t points_per_radius) {
  if (r_k < g.r0) throw InvalidArgument("corner radius R_K must be at least r0");
  const int n = g.n;
  SmallMatrix reflect = SmallMatrix::Identity(n, n);
  reflect(n - 1, n - 1) = -1.0;
  DoubledMetric d;
  d.base = g;
  d.sheet1 = pullback_orthogonal(g, reflect);
  d.sheet1.family = g.family + "+reflected";
  d.r_k = r_k;
  const int count = std::max(corner_radii, 1);
  for (int j = 0; j < count; ++j) {
    const double r = count == 1 ? r_k : g.r0 * std::pow(r_k / g.r0, static_cast<double>(j) / (count - 1));
    const PointSet pts = sample_sphere(n, r, points_per_radius, SphereRegion::Equator, 211 + static_cast<unsigned>(j));
    for (std::size_t p = 0; p < pts.size(); ++p) {
      CornerSample c;
      for (int i = 0; i < n; ++i) c.x[i] = pts[p][static_cast<std::size_t>(i)];
      const BoundaryPoint lower = boundary_from_jet(g.jet(pts[p]), pts[p]);
      const BoundaryPoint upper = boundary_from_jet(d.sheet1.jet(pts[p]), pts[p]);
      c.h_minus = lower.H;
      c.h_plus = upper.H;
      c.induced_mismatch = (lower.h - upper.h).cwiseAbs().maxCoeff();
      d.max_corner_jump = std::max(d.max_corner_jump, std::abs(c.h_plus + c.h_minus));
      d.max_induced_mismatch = std::max(d.max_induced_mismatch, c.induced_mismatch);
      d.corner.push_back(c);
    }
  }
  return d;
}

MassSample adm_at_radius(const DoubledMetric& d, double r, int order) {
  const SphereRule rule = sphere_rule(d.base.n, r, order);
  const int n = d.base.n;
  std::vector<double> terms(rule.weights.size());
  parallel_for(terms.size(), [&](std::size_t i) {
    const auto x = rule.nodes[i];
    const SmallVector c = mass_density(d.jet(x));
    double dot = 0.0;
    for (int k = 0; k < n; ++k) dot += c(k) * x[static_cast<std::size_t>(k)];
    terms[i] = rule.weights[i] * dot / r;
  });
  const double total = pairwise_sum(terms);
  return {r, total, 0.0, total};
}

MassEstimate adm_mass_double(const DoubledMetric& d, std::span<const double> schedule, const MassOptions& opts) {
  check_schedule(d.base, schedule);
  std::vector<MassSample> samples(schedule.size());
  parallel_for(samples.size(), [&](std::size_t i) { samples[i] = adm_at_radius(d, schedule[i], opts.order); });
  return estimate_from_samples(std::move(samples), opts.two_term);
}

}  // namespace halfmass
