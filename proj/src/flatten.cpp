#include <algorithm>
#include <cmath>
#include <sstream>

#include <Eigen/Dense>

#include "halfmass/elliptic.hpp"
#include "halfmass/error.hpp"
#include "halfmass/geometry.hpp"
#include "halfmass/parallel.hpp"
#include "halfmass/sampling.hpp"

namespace halfmass {

namespace {

// exp(-1/s) and its first two derivatives; all vanish for s <= 0.
std::array<double, 3> seed(double s) {
  if (s <= 0.0) return {0.0, 0.0, 0.0};
  const double p = std::exp(-1.0 / s);
  const double i = 1.0 / s;
  return {p, p * i * i, p * (i * i * i * i - 2.0 * i * i * i)};
}

double conformal_a(int n) { return 4.0 * (n - 1) / (n - 2); }
double conformal_b(int n) { return 2.0 * (n - 1) / (n - 2); }

double norm3(std::span<const double> x) { return std::sqrt(x[0] * x[0] + x[1] * x[1] + x[2] * x[2]); }

}  // namespace

RadialValue cutoff(double t) {
  if (t <= 1.0) return {1.0, 0.0, 0.0};
  if (t >= 2.0) return {0.0, 0.0, 0.0};
  const auto a = seed(2.0 - t);
  const auto b = seed(t - 1.0);
  const double s = a[0] + b[0];
  const double da = -a[1], db = b[1];
  const double num = da * b[0] - a[0] * db;
  const double dnum = a[2] * b[0] - a[0] * b[2];
  return {a[0] / s, num / (s * s), dnum / (s * s) - 2.0 * num * (da + db) / (s * s * s)};
}

Jet2 discrete_jet(const DiscreteSolution& s, std::span<const double> x) {
  const auto& grid = *s.grid;
  const double h = grid.h();
  std::array<int, 3> lo{};
  for (int d = 0; d < 3; ++d) lo[d] = static_cast<int>(std::floor(x[d] / h)) - 1;
  lo[2] = std::max(lo[2], 0);

  Eigen::Matrix<double, 64, 10> a;
  Eigen::Matrix<double, 64, 1> b;
  int m = 0;
  for (int k = lo[2]; k < lo[2] + 4; ++k)
    for (int j = lo[1]; j < lo[1] + 4; ++j)
      for (int i = lo[0]; i < lo[0] + 4; ++i) {
        const int id = grid.node_at(i, j, k);
        if (id < 0) continue;
        const double p[3] = {i - x[0] / h, j - x[1] / h, k - x[2] / h};
        a.row(m) << 1.0, p[0], p[1], p[2], 0.5 * p[0] * p[0], 0.5 * p[1] * p[1], 0.5 * p[2] * p[2],
            p[0] * p[1], p[0] * p[2], p[1] * p[2];
        b(m) = s.u[static_cast<std::size_t>(id)];
        ++m;
      }
  if (m < 14) throw DomainError("too few active lattice nodes near the evaluation point");
  const Eigen::Matrix<double, 10, 1> c = a.topRows(m).colPivHouseholderQr().solve(b.topRows(m));

  Jet2 out(3, c(0));
  for (int d = 0; d < 3; ++d) {
    out.grad[d] = c(1 + d) / h;
    out.h(d, d) = c(4 + d) / (h * h);
  }
  out.h(0, 1) = c(7) / (h * h);
  out.h(0, 2) = c(8) / (h * h);
  out.h(1, 2) = c(9) / (h * h);
  return out;
}

FlatteningResult conformal_flatten(const MetricField& g, double R_cut, double epsilon,
                                   const FlattenOptions& opts) {
  const int n = g.n;
  if (n != 3) throw InvalidArgument("conformal_flatten is implemented for n = 3 only");
  if (!(g.tau > 0.5 * (n - 2))) throw InvalidArgument("conformal_flatten needs tau > (n-2)/2");
  if (!(R_cut >= 4.0 * g.r0)) throw InvalidArgument("R_cut must be at least 4 r0");

  FlatteningResult res;
  res.R_cut = R_cut;

  // Hypotheses R_g >= 0, H_g >= 0, sampled on dyadic spheres out to 4 R_cut.
  for (double r = 2.0 * g.r0; r <= 4.0 * R_cut; r *= 2.0) {
    const PointSet hemi = sample_sphere(n, r, opts.samples, SphereRegion::UpperHemisphere, 101);
    const PointSet eq = sample_sphere(n, r, opts.samples, SphereRegion::Equator, 103);
    double r_min = kInfinity, h_min = kInfinity;
    for (std::size_t i = 0; i < hemi.size(); ++i) r_min = std::min(r_min, curvature_at(g, hemi[i]).scalar);
    for (std::size_t i = 0; i < eq.size(); ++i) h_min = std::min(h_min, boundary_at(g, eq[i]).H);
    if (r_min < -1e-9 || h_min < -1e-9) {
      res.hypotheses_hold = false;
      std::ostringstream os;
      os << "R_g >= 0, H_g >= 0 fails at radius " << r << " (min R " << r_min << ", min H " << h_min << ")";
      res.warnings.push_back(os.str());
    }
  }

  const ScalarField chi = ScalarField::radial(n, [R_cut](double r) {
    const RadialValue c = cutoff(r / R_cut);
    return RadialValue{c.f, c.df / R_cut, c.d2f / (R_cut * R_cut)};
  });
  res.g_R = blend_with_flat(g, chi);

  auto grid = std::make_shared<DiscreteHalfAnnulus>(opts.inner_factor * R_cut, opts.outer_factor * R_cut,
                                                    opts.spacing, 4);
  const double h = grid->h();
  const double a_n = conformal_a(n), b_n = conformal_b(n);

  // gamma_R and its boundary analogue at the nodes; both vanish outside R <= r <= 2R.
  std::vector<double> gamma(grid->node_count(), 0.0), gamma_bar(grid->node_count(), 0.0);
  parallel_for(grid->node_count(), [&](std::size_t i) {
    const auto x = grid->node_point(i);
    const double r = norm3(x);
    if (r <= R_cut || r >= 2.0 * R_cut) return;
    const double c = cutoff(r / R_cut).f;
    gamma[i] = curvature_at(res.g_R, x).scalar - c * curvature_at(g, x).scalar;
    if (grid->node_ijk(i)[2] == 0) gamma_bar[i] = boundary_at(res.g_R, x).H - c * boundary_at(g, x).H;
  });
  auto at_node = [&grid, h](const std::vector<double>& v) {
    return [&grid, &v, h](std::span<const double> x) {
      const int id = grid->node_at(static_cast<int>(std::lround(x[0] / h)), static_cast<int>(std::lround(x[1] / h)),
                                   static_cast<int>(std::lround(x[2] / h)));
      return id < 0 ? 0.0 : v[static_cast<std::size_t>(id)];
    };
  };
  const auto gamma_fn = at_node(gamma), gamma_bar_fn = at_node(gamma_bar);

  // u_R = 1 + v:  -Lap v + (gamma/a_n) v = -gamma/a_n,  dv/deta + (gamma_bar/b_n) v = -gamma_bar/b_n.
  const auto op = assemble_operator(
      grid, res.g_R, [&](std::span<const double> x) { return gamma_fn(x) / a_n; },
      [&](std::span<const double> x) { return gamma_bar_fn(x) / b_n; });
  LoadData data;
  data.f = [&](std::span<const double> x) { return -gamma_fn(x) / a_n; };
  data.fbar = [&](std::span<const double> x) { return -gamma_bar_fn(x) / b_n; };
  data.lumped = true;
  const auto load = assemble_load(op, data);
  DiscreteSolution v = solve_loads(op, {load}, opts.solve).front();

  auto sol = std::make_shared<DiscreteSolution>(v);
  for (double& u : sol->u) u += 1.0;
  res.discrete = sol;

  res.min_u = kInfinity;
  for (std::size_t i = 0; i < grid->node_count(); ++i) {
    const double r = norm3(grid->node_point(i));
    if (r >= grid->r_in() && r <= grid->r_out()) res.min_u = std::min(res.min_u, sol->u[i]);
  }
  if (!(res.min_u > 0.0)) {
    std::ostringstream os;
    os << "flattening rejected: min u_R = " << res.min_u;
    throw PositivityError(os.str());
  }

  // Discrete curvature of g_bar where g_R is flat and the load vanishes:
  // R = a_n u^{-5} r_i / m_i at interior nodes, H = b_n u^{-3} r_i / s_i on Sigma.
  double load_density = 0.0;
  for (std::size_t i = 0; i < grid->node_count(); ++i)
    if (op.volume_mass[i] > 0.0) load_density = std::max(load_density, std::abs(load[i]) / op.volume_mass[i]);
  res.residual_scale = a_n * opts.solve.tolerance * load_density;
  const double cut_margin = grid->r_out() - std::sqrt(3.0) * h;
  for (std::size_t i = 0; i < grid->node_count(); ++i) {
    const double r = norm3(grid->node_point(i));
    if (r < 2.0 * R_cut) continue;
    const double u = sol->u[i];
    const double ri = std::abs(v.residual[i]);
    const auto cls = grid->node_class(i);
    if (cls == NodeClass::Interior)
      res.scalar_residual = std::max(res.scalar_residual, a_n * std::pow(u, -5.0) * ri / op.volume_mass[i]);
    else if (cls == NodeClass::Sigma && r <= cut_margin && op.sigma_mass[i] > 0.0)
      res.mean_residual = std::max(res.mean_residual, b_n * std::pow(u, -3.0) * ri / op.sigma_mass[i]);
  }

  // Far-field continuation u = 1 + C/r + D/r^2 from shell averages near r_out.
  std::vector<double> shells;
  for (int k = 0; k < 5; ++k) shells.push_back(2.0 * R_cut + k * (cut_margin - 2.0 * R_cut) / 4.0);
  const AsymptoticFit fit = asymptotic_coefficient(*sol, 1.0, shells);
  res.C = fit.C;
  res.D = fit.correction;
  if (fit.flagged) res.warnings.push_back("far-field fit of u_R has residual above 5 %");

  const double r_in = grid->r_in(), r_out = grid->r_out();
  const double C = res.C, D = res.D;
  auto jet = [sol, r_in, r_out, C, D](std::span<const double> x) {
    const double r = norm3(x);
    if (r >= r_out) {
      const double f = 1.0 + C / r + D / (r * r);
      return radial_jet(x, f, -C / (r * r) - 2.0 * D / (r * r * r), 2.0 * C / (r * r * r) + 6.0 * D / (r * r * r * r));
    }
    if (r >= r_in) return discrete_jet(*sol, x);
    // Radially constant inside r_in; the Hessian is not carried.
    if (r == 0.0) throw DomainError("r = 0");
    const double s = r_in / r;
    const double p[3] = {x[0] * s, x[1] * s, x[2] * s};
    const Jet2 b = discrete_jet(*sol, p);
    Jet2 out(3, b.value);
    double radial = 0.0;
    for (int d = 0; d < 3; ++d) radial += b.grad[d] * x[d] / r;
    for (int d = 0; d < 3; ++d) out.grad[d] = s * (b.grad[d] - radial * x[d] / r);
    return out;
  };
  res.u_R = ScalarField::from_jet(3, jet, [jet](std::span<const double> x) { return jet(x).value; });
  res.g_bar = conformal(res.g_R, res.u_R);
  res.g_bar.tau = n - 2;

  // Sampled curvature of g_bar in the flat zone (from the interpolated factor).
  for (double r : {2.0 * R_cut + h, 0.5 * (2.0 * R_cut + cut_margin)}) {
    const PointSet hemi = sample_sphere(n, r, opts.samples, SphereRegion::UpperHemisphere, 107);
    const PointSet eq = sample_sphere(n, r, opts.samples, SphereRegion::Equator, 109);
    for (std::size_t i = 0; i < hemi.size(); ++i)
      res.scalar_sampled = std::max(res.scalar_sampled, std::abs(curvature_at(res.g_bar, hemi[i]).scalar));
    for (std::size_t i = 0; i < eq.size(); ++i)
      res.mean_sampled = std::max(res.mean_sampled, std::abs(boundary_at(res.g_bar, eq[i]).H));
  }

  const std::vector<double> schedule{2 * r_out, 4 * r_out, 8 * r_out, 16 * r_out};
  MassOptions mo;
  mo.order = opts.mass_order;
  res.mass_g = mass(g, schedule, mo);
  res.mass_g_bar = mass(res.g_bar, schedule, mo);
  res.mass_delta = std::abs(res.mass_g_bar.extrapolated - res.mass_g.extrapolated);
  res.within_epsilon = res.mass_delta <= epsilon;
  return res;
}

}  // namespace halfmass
