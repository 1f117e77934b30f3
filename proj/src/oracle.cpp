#include <cmath>
#include <numbers>
#include <vector>
#include <algorithm>
#include <random>

#include "halfmass/elliptic.hpp"
#include "halfmass/error.hpp"
#include "halfmass/parallel.hpp"

namespace halfmass {

double image_kernel(std::span<const double> x, std::span<const double> y, int n) {
  if (n < 3 || x.size() != static_cast<std::size_t>(n) || y.size() != static_cast<std::size_t>(n))
    throw InvalidArgument("image_kernel needs two points of dimension n >= 3");
  double d1 = 0.0, d2 = 0.0;
  for (int i = 0; i < n; ++i) {
    const double a = x[static_cast<std::size_t>(i)] - y[static_cast<std::size_t>(i)];
    const double b = i == n - 1 ? x[static_cast<std::size_t>(i)] + y[static_cast<std::size_t>(i)] : a;
    d1 += a * a;
    d2 += b * b;
  }
  if (d1 == 0.0 || d2 == 0.0) throw DomainError("image_kernel: coincident points");
  return std::pow(d1, 0.5 * (2 - n)) + std::pow(d2, 0.5 * (2 - n));
}

std::vector<double> image_kernel_gradient(std::span<const double> x, std::span<const double> y, int n) {
  (void)image_kernel(x, y, n);
  double d1 = 0.0, d2 = 0.0;
  std::vector<double> a(static_cast<std::size_t>(n)), b(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    const std::size_t k = static_cast<std::size_t>(i);
    a[k] = x[k] - y[k];
    b[k] = i == n - 1 ? x[k] + y[k] : a[k];
    d1 += a[k] * a[k];
    d2 += b[k] * b[k];
  }
  const double c1 = (2.0 - n) * std::pow(d1, -0.5 * n), c2 = (2.0 - n) * std::pow(d2, -0.5 * n);
  std::vector<double> g(static_cast<std::size_t>(n));
  for (std::size_t k = 0; k < g.size(); ++k) g[k] = c1 * a[k] + c2 * b[k];
  return g;
}

namespace {

constexpr double kPi = std::numbers::pi;

// Weighted source points: u(y) = sum_k w_k (|y - x_k|^{-1} + |y - x~_k|^{-1}).
struct SourcePoints {
  std::vector<std::array<double, 3>> x;
  std::vector<double> w;
};

void add_jet(Jet2& out, const std::array<double, 3>& z, std::span<const double> y, double w) {
  const double v[3] = {y[0] - z[0], y[1] - z[1], y[2] - z[2]};
  const double d2 = v[0] * v[0] + v[1] * v[1] + v[2] * v[2];
  if (d2 == 0.0) throw DomainError("oracle evaluated on a quadrature node");
  const double d = std::sqrt(d2), id3 = 1.0 / (d2 * d), id5 = id3 / d2;
  out.value += w / d;
  for (int i = 0; i < 3; ++i) {
    out.grad[static_cast<std::size_t>(i)] -= w * v[i] * id3;
    for (int j = 0; j <= i; ++j) out.h(j, i) += w * (3.0 * v[i] * v[j] * id5 - (i == j ? id3 : 0.0));
  }
}

double add_value(const std::array<double, 3>& z, std::span<const double> y, double w) {
  const double a = y[0] - z[0], b = y[1] - z[1], c = y[2] - z[2];
  const double d2 = a * a + b * b + c * c;
  if (d2 == 0.0) throw DomainError("oracle evaluated on a quadrature node");
  return w / std::sqrt(d2);
}

}  // namespace

ScalarField harmonic_oracle(const ScalarField& f, const BallSupport& ball, const ScalarField& fbar,
                            const DiscSupport& disc, int n, const OracleOptions& opts) {
  if (n != 3) throw InvalidArgument("harmonic_oracle is implemented for n = 3");
  if (opts.radial_points < 2 || opts.angular_order < 2) throw InvalidArgument("oracle quadrature too coarse");
  auto pts = std::make_shared<SourcePoints>();
  const double norm = 1.0 / ((n - 2) * sphere_area(n - 1));
  const GaussRule radial = gauss_legendre(opts.radial_points);

  if (f.valid()) {
    if (!(ball.radius > 0.0) || !std::isfinite(ball.radius)) throw InvalidArgument("oracle: support not compact");
    const double pn = ball.center[2];
    double factor = 1.0;
    if (std::abs(pn) <= 1e-14 * (1.0 + ball.radius))
      factor = 0.5;  // even extension over the whole ball
    else if (pn < ball.radius)
      throw InvalidArgument("oracle: source ball must sit on Sigma or clear of it");
    const SphereRule sph = sphere_rule(3, 1.0, opts.angular_order);
    for (std::size_t i = 0; i < radial.nodes.size(); ++i) {
      const double s = 0.5 * ball.radius * (radial.nodes[i] + 1.0);
      const double ws = 0.5 * ball.radius * radial.weights[i] * s * s;
      for (std::size_t k = 0; k < sph.weights.size(); ++k) {
        const auto om = sph.nodes[k];
        std::array<double, 3> x{ball.center[0] + s * om[0], ball.center[1] + s * om[1], ball.center[2] + s * om[2]};
        const std::array<double, 3> xe{x[0], x[1], std::abs(x[2])};
        const double v = f.value(xe);
        if (v == 0.0) continue;
        pts->x.push_back(x);
        pts->w.push_back(norm * factor * ws * sph.weights[k] * v);
      }
    }
  }
  if (fbar.valid()) {
    if (!(disc.radius > 0.0) || !std::isfinite(disc.radius)) throw InvalidArgument("oracle: support not compact");
    const int m = 2 * opts.angular_order + 2;
    for (std::size_t i = 0; i < radial.nodes.size(); ++i) {
      const double s = 0.5 * disc.radius * (radial.nodes[i] + 1.0);
      const double ws = 0.5 * disc.radius * radial.weights[i] * s * (2.0 * kPi / m);
      for (int k = 0; k < m; ++k) {
        const double t = 2.0 * kPi * (k + 0.5) / m;
        std::array<double, 3> x{disc.center[0] + s * std::cos(t), disc.center[1] + s * std::sin(t), 0.0};
        const double v = fbar.value(x);
        if (v == 0.0) continue;
        pts->x.push_back(x);
        pts->w.push_back(norm * ws * v);  // phi(x, y) = 2 |x - y|^{-1} on Sigma, counted via x~ = x
      }
    }
  }
  auto jet = [pts](std::span<const double> y) {
    Jet2 out(3);
    for (std::size_t k = 0; k < pts->x.size(); ++k) {
      const auto& x = pts->x[k];
      add_jet(out, x, y, pts->w[k]);
      add_jet(out, {x[0], x[1], -x[2]}, y, pts->w[k]);
    }
    return out;
  };
  auto value = [pts](std::span<const double> y) {
    double s = 0.0;
    for (std::size_t k = 0; k < pts->x.size(); ++k) {
      const auto& x = pts->x[k];
      s += add_value(x, y, pts->w[k]) + add_value({x[0], x[1], -x[2]}, y, pts->w[k]);
    }
    return s;
  };
  return ScalarField::from_jet(3, jet, value);
}

// ---------------------------------------------------------------------------

double RadialBump::value(std::span<const double> x) const {
  double s2 = 0.0;
  for (int i = 0; i < 3; ++i) s2 += (x[static_cast<std::size_t>(i)] - center[static_cast<std::size_t>(i)]) *
                                    (x[static_cast<std::size_t>(i)] - center[static_cast<std::size_t>(i)]);
  const double w = 1.0 - s2 / (radius * radius);
  return w > 0.0 ? amplitude * std::pow(w, power) : 0.0;
}

double RadialBump::total() const {
  // int_0^1 (1 - t^2)^k t^2 dt = Gamma(3/2) Gamma(k+1) / (2 Gamma(k + 5/2))
  const double beta = std::exp(std::lgamma(1.5) + std::lgamma(power + 1.0) - std::lgamma(power + 2.5)) / 2.0;
  return amplitude * 4.0 * kPi * radius * radius * radius * beta;
}

std::array<double, 4> RadialBump::exterior_solution(std::span<const double> y) const {
  const bool on_sigma = std::abs(center[2]) <= 1e-14 * (1.0 + radius);
  if (!on_sigma && center[2] < radius) throw InvalidArgument("bump must sit on Sigma or clear of it");
  const double c = (on_sigma ? 0.5 : 1.0) * total() / (4.0 * kPi);
  std::array<double, 4> out{};
  for (int mirror = 0; mirror < 2; ++mirror) {
    const double v[3] = {y[0] - center[0], y[1] - center[1], y[2] - (mirror ? -center[2] : center[2])};
    const double d = std::sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2]);
    if (d < radius * (1.0 - 1e-12)) throw DomainError("closed form only holds outside the source");
    out[0] += c / d;
    for (int i = 0; i < 3; ++i) out[static_cast<std::size_t>(i) + 1] -= c * v[i] / (d * d * d);
  }
  return out;
}

ScalarField RadialBump::field() const {
  const RadialBump b = *this;
  auto jet = [b](std::span<const double> x) {
    Jet2 out(3);
    double v[3], s2 = 0.0;
    for (int i = 0; i < 3; ++i) {
      v[i] = x[static_cast<std::size_t>(i)] - b.center[static_cast<std::size_t>(i)];
      s2 += v[i] * v[i];
    }
    const double r2 = b.radius * b.radius;
    const double w = 1.0 - s2 / r2;
    if (w <= 0.0) return out;
    const int k = b.power;
    const double d1 = b.amplitude * k * std::pow(w, k - 1);
    const double d2 = k >= 2 ? b.amplitude * k * (k - 1) * std::pow(w, k - 2) : 0.0;
    out.value = b.amplitude * std::pow(w, k);
    for (int i = 0; i < 3; ++i) {
      const double gi = -2.0 * v[i] / r2;
      out.grad[static_cast<std::size_t>(i)] = d1 * gi;
      for (int j = 0; j <= i; ++j)
        out.h(j, i) = d2 * gi * (-2.0 * v[j] / r2) + (i == j ? d1 * (-2.0 / r2) : 0.0);
    }
    return out;
  };
  return ScalarField::from_jet(3, jet, [b](std::span<const double> x) { return b.value(x); });
}

double DiscBump::value(std::span<const double> x) const {
  const double a = x[0] - center[0], c = x[1] - center[1];
  const double w = 1.0 - (a * a + c * c) / (radius * radius);
  return w > 0.0 ? amplitude * std::pow(w, power) : 0.0;
}

std::array<double, 4> DiscBump::exterior_solution(std::span<const double> y) const {
  const double v[3] = {y[0] - center[0], y[1] - center[1], y[2]};
  const double d = std::sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2]);
  if (!(d > radius * 1.05)) throw DomainError("multipole expansion needs distance > 1.05 disc radius");
  const double mu = v[2] / d;
  // u = (2 / 4 pi) sum_{l even} P_l(0) M_l P_l(mu) / d^{l+1}, M_l = 2 pi int sigma(s) s^{l+1} ds.
  const double ratio = radius / d;
  const int lmax = std::min(1000, static_cast<int>(std::ceil(std::log(1e-17) / std::log(ratio))) + 2);
  std::array<double, 4> out{};
  double p_prev = 0.0, p = 1.0;    // P_{m-1}, P_m
  double dp_prev = 0.0, dp = 0.0;  // derivatives
  double p0 = 1.0;                 // P_m(0) for even m
  double scale = 1.0 / d;          // a^m / d^{m+1}
  // J_m = int_0^1 (1 - t^2)^k t^{m+1} dt = B((m+2)/2, k+1) / 2, advanced by ratio.
  double beta = 0.5 / (power + 1.0);
  for (int m = 0; m <= lmax; ++m) {
    if (m % 2 == 0) {
      const double c = p0 * amplitude * radius * radius * beta * scale;  // (2 / 4 pi) * 2 pi = 1
      out[0] += c * p;
      for (int i = 0; i < 3; ++i) {
        const double gmu = ((i == 2 ? 1.0 : 0.0) - mu * v[i] / d) / d;
        out[static_cast<std::size_t>(i) + 1] += c * (dp * gmu - (m + 1) * p * v[i] / (d * d));
      }
      p0 *= -(m + 1.0) / (m + 2.0);
      scale *= ratio * ratio;
      const double a = 0.5 * (m + 2);
      beta *= a / (a + power + 1.0);
    }
    const double p_next = m == 0 ? mu : ((2.0 * m + 1.0) * mu * p - m * p_prev) / (m + 1.0);
    const double dp_next = m == 0 ? 1.0 : dp_prev + (2.0 * m + 1.0) * p;
    p_prev = p;
    p = p_next;
    dp_prev = dp;
    dp = dp_next;
  }
  return out;
}

ScalarField DiscBump::field() const {
  const DiscBump b = *this;
  return ScalarField::from_jet(
      3, [b](std::span<const double> x) { return Jet2(3, b.value(x)); },
      [b](std::span<const double> x) { return b.value(x); });
}

}  // namespace halfmass

namespace halfmass {

std::array<double, 4> OracleProblem::exact(std::span<const double> y) const {
  std::array<double, 4> out{};
  auto add = [&](const std::array<double, 4>& e) {
    for (std::size_t i = 0; i < 4; ++i) out[i] += e[i];
  };
  for (const auto& b : balls) add(b.exterior_solution(y));
  for (const auto& d : discs) add(d.exterior_solution(y));
  return out;
}

double OracleProblem::oracle(std::span<const double> y, const OracleOptions& opts) const {
  return oracle_field(opts).value(y);
}

ScalarField OracleProblem::oracle_field(const OracleOptions& opts) const {
  std::vector<ScalarField> parts;
  for (const auto& b : balls) parts.push_back(harmonic_oracle(b.field(), b.support(), {}, {}, 3, opts));
  for (const auto& d : discs) parts.push_back(harmonic_oracle({}, {}, d.field(), d.support(), 3, opts));
  return ScalarField::from_jet(
      3,
      [parts](std::span<const double> y) {
        Jet2 out(3);
        for (const auto& p : parts) out += p.jet(y);
        return out;
      },
      [parts](std::span<const double> y) {
        double s = 0.0;
        for (const auto& p : parts) s += p.value(y);
        return s;
      });
}

double OracleProblem::clearance(std::span<const double> y) const {
  double best = kInfinity;
  auto dist = [&](double a, double b, double c) {
    return std::sqrt((y[0] - a) * (y[0] - a) + (y[1] - b) * (y[1] - b) + (y[2] - c) * (y[2] - c));
  };
  for (const auto& b : balls) best = std::min(best, dist(b.center[0], b.center[1], b.center[2]) / b.radius);
  for (const auto& d : discs) best = std::min(best, dist(d.center[0], d.center[1], 0.0) / d.radius);
  return best;
}

LoadData OracleProblem::load() const {
  const OracleProblem p = *this;
  LoadData ld;
  ld.f = [p](std::span<const double> x) {
    double s = 0.0;
    for (const auto& b : p.balls) s += b.value(x);
    return s;
  };
  if (!discs.empty())
    ld.fbar = [p](std::span<const double> x) {
      double s = 0.0;
      for (const auto& d : p.discs) s += d.value(x);
      return s;
    };
  auto radial = [p](std::span<const double> x) {
    const auto e = p.exact(x);
    const double r = std::sqrt(x[0] * x[0] + x[1] * x[1] + x[2] * x[2]);
    return std::array<double, 2>{e[0], (e[1] * x[0] + e[2] * x[1] + e[3] * x[2]) / r};
  };
  ld.q_inner = [radial](std::span<const double> x) { return -radial(x)[1]; };
  ld.q_outer = [radial](std::span<const double> x) {
    const auto v = radial(x);
    const double r = std::sqrt(x[0] * x[0] + x[1] * x[1] + x[2] * x[2]);
    return v[1] + v[0] / r;
  };
  if (balls.size() == 1) ld.f_support = balls.front().support();
  return ld;
}

OracleProblem random_oracle_problem(std::uint64_t seed, double r_in, double r_out) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  OracleProblem p;
  p.r_in = r_in;
  p.r_out = r_out;
  const double margin = 0.3 * r_in;
  auto centre_radius = [&](double rho) {
    const double lo = r_in + rho + margin, hi = r_out - rho - margin;
    return lo + (hi - lo) * unit(rng);
  };
  RadialBump b;
  b.radius = r_in * (0.85 + 0.15 * unit(rng));
  b.amplitude = 0.5 + unit(rng);
  b.power = 2;
  const double t = 2.0 * kPi * unit(rng);
  if (seed % 3 == 0) {
    const double c = centre_radius(b.radius);
    b.center = {c * std::cos(t), c * std::sin(t), 0.0};
  } else {
    const double c = centre_radius(b.radius);
    // polar angle keeps the ball clear of Sigma: c cos(theta) >= rho
    const double max_theta = std::acos(std::min(1.0, b.radius / c));
    const double th = max_theta * unit(rng);
    b.center = {c * std::sin(th) * std::cos(t), c * std::sin(th) * std::sin(t), c * std::cos(th)};
    b.center[2] = std::max(b.center[2], b.radius);  // rounding
  }
  p.balls.push_back(b);
  if (seed % 2 == 1) {
    DiscBump d;
    d.radius = r_in * (0.8 + 0.2 * unit(rng));
    d.amplitude = 0.5 + unit(rng);
    d.power = 2;
    const double c = centre_radius(d.radius);
    const double s = t + kPi * (0.5 + unit(rng));
    d.center = {c * std::cos(s), c * std::sin(s)};
    p.discs.push_back(d);
  }
  return p;
}

OracleStudy oracle_study(const OracleStudyOptions& opts) {
  if (opts.count < 1) throw InvalidArgument("oracle_study needs at least one problem");
  std::vector<OracleProblem> problems;
  for (int k = 0; k < opts.count; ++k)
    problems.push_back(random_oracle_problem(opts.first_seed + static_cast<std::uint64_t>(k), opts.r_in, opts.r_out));

  const double h = opts.r_in / opts.coarse_ratio;
  std::vector<std::vector<DiscreteSolution>> solutions;
  std::vector<std::shared_ptr<const DiscreteHalfAnnulus>> grids;
  for (int level = 0; level < 2; ++level) {
    auto grid = std::make_shared<DiscreteHalfAnnulus>(opts.r_in, opts.r_out, h / (1 << level), 4);
    AssemblyOptions ao;
    ao.execution = opts.execution;
    const auto op = assemble_operator(grid, flat_half_space(3), {}, {}, ao);
    std::vector<std::vector<double>> loads;
    for (const auto& p : problems) loads.push_back(assemble_load(op, p.load(), ao));
    SolveOptions so;
    so.execution = opts.execution;
    solutions.push_back(solve_loads(op, loads, so));
    grids.push_back(grid);
  }

  // Points of the 2h lattice inside the closed annulus; ids on both grids.
  struct Point {
    std::array<double, 3> x;
    int coarse, fine;
  };
  std::vector<Point> points;
  const int m = static_cast<int>(std::ceil(opts.r_out / (2.0 * h)));
  for (int k = 0; k <= m; ++k)
    for (int j = -m; j <= m; ++j)
      for (int i = -m; i <= m; ++i) {
        const std::array<double, 3> x{2 * h * i, 2 * h * j, 2 * h * k};
        const double r = std::sqrt(x[0] * x[0] + x[1] * x[1] + x[2] * x[2]);
        if (r < opts.r_in || r > opts.r_out) continue;
        const int c = grids[0]->node_at(2 * i, 2 * j, 2 * k), f = grids[1]->node_at(4 * i, 4 * j, 4 * k);
        if (c < 0 || f < 0) throw DomainError("annulus point missing from the lattice");
        points.push_back({x, c, f});
      }

  OracleStudy study;
  study.compared_points = points.size();
  study.cases.resize(problems.size());
  for (std::size_t p = 0; p < problems.size(); ++p) {
    const auto& prob = problems[p];
    const ScalarField field = prob.oracle_field(opts.oracle);
    std::vector<double> oracle(points.size()), closed(points.size());
    auto body = [&](std::size_t i) {
      oracle[i] = field.value(points[i].x);
      closed[i] = prob.clearance(points[i].x) >= opts.clearance ? prob.exact(points[i].x)[0] : oracle[i];
    };
    if (opts.execution == Execution::Parallel)
      parallel_for(points.size(), body);
    else
      for (std::size_t i = 0; i < points.size(); ++i) body(i);

    double e0 = 0, e1 = 0, ref = 0, ref_all = 0, quad = 0;
    for (std::size_t i = 0; i < points.size(); ++i) {
      ref_all = std::max(ref_all, std::abs(oracle[i]));
      if (prob.clearance(points[i].x) < opts.clearance) continue;
      ref = std::max(ref, std::abs(oracle[i]));
      e0 = std::max(e0, std::abs(solutions[0][p].u[static_cast<std::size_t>(points[i].coarse)] - oracle[i]));
      e1 = std::max(e1, std::abs(solutions[1][p].u[static_cast<std::size_t>(points[i].fine)] - oracle[i]));
      quad = std::max(quad, std::abs(oracle[i] - closed[i]));
    }
    if (!(ref > 0.0)) throw DomainError("no comparison points clear of the sources");
    OracleCase& c = study.cases[p];
    c.seed = opts.first_seed + p;
    c.error_coarse = e0 / ref;
    c.error_fine = e1 / ref;
    c.order = std::log2(e0 / e1);
    c.error_coarse_global = e0 / ref_all;
    c.oracle_vs_closed = quad / ref;
    c.iterations_coarse = solutions[0][p].iterations;
    c.iterations_fine = solutions[1][p].iterations;
    study.max_error = std::max(study.max_error, c.error_coarse);
    study.min_order = std::min(study.min_order, c.order);
    study.max_order = std::max(study.max_order, c.order);
  }
  return study;
}

}  // namespace halfmass
