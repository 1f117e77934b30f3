#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "halfmass/elliptic.hpp"
#include "halfmass/error.hpp"
#include "halfmass/parallel.hpp"

namespace halfmass {

namespace {

// l_0 = 1 - xi, l_1 = xi as coefficient pairs.
constexpr double kL[2][2] = {{1.0, -1.0}, {0.0, 1.0}};

int bit(int a, int d) { return (a >> d) & 1; }

double shape(int a, const std::array<double, 3>& xi) {
  double v = 1.0;
  for (int d = 0; d < 3; ++d) v *= bit(a, d) ? xi[static_cast<std::size_t>(d)] : 1.0 - xi[static_cast<std::size_t>(d)];
  return v;
}

// Gradient in local coordinates (divide by h for physical).
std::array<double, 3> shape_grad(int a, const std::array<double, 3>& xi) {
  std::array<double, 3> g{};
  for (int d = 0; d < 3; ++d) {
    double v = bit(a, d) ? 1.0 : -1.0;
    for (int e = 0; e < 3; ++e)
      if (e != d) v *= bit(a, e) ? xi[static_cast<std::size_t>(e)] : 1.0 - xi[static_cast<std::size_t>(e)];
    g[static_cast<std::size_t>(d)] = v;
  }
  return g;
}

// Moments int xi_1^p xi_2^q xi_3^r (p, q, r <= 2) in units of the cell volume.
using Moments = std::array<double, 27>;
int midx(int p, int q, int r) { return p + 3 * q + 9 * r; }

struct Element {
  std::array<double, 64> k{};
  std::array<double, 8> mass{};
};

void element_from_moments(const Moments& m, double h, Element& e) {
  double prod[2][2][3];
  for (int a = 0; a < 2; ++a)
    for (int b = 0; b < 2; ++b) {
      prod[a][b][0] = kL[a][0] * kL[b][0];
      prod[a][b][1] = kL[a][0] * kL[b][1] + kL[a][1] * kL[b][0];
      prod[a][b][2] = kL[a][1] * kL[b][1];
    }
  for (int a = 0; a < 8; ++a)
    for (int b = 0; b < 8; ++b) {
      double s = 0.0;
      for (int d = 0; d < 3; ++d) {
        const double sign = (bit(a, d) ? 1.0 : -1.0) * (bit(b, d) ? 1.0 : -1.0);
        const int e1 = (d + 1) % 3, e2 = (d + 2) % 3;
        const double* c1 = prod[bit(a, e1)][bit(b, e1)];
        const double* c2 = prod[bit(a, e2)][bit(b, e2)];
        for (int p = 0; p < 3; ++p)
          for (int q = 0; q < 3; ++q) {
            int e[3] = {0, 0, 0};
            e[e1] = p;
            e[e2] = q;
            s += sign * c1[p] * c2[q] * m[static_cast<std::size_t>(midx(e[0], e[1], e[2]))];
          }
      }
      e.k[static_cast<std::size_t>(a * 8 + b)] = h * s;
    }
  for (int a = 0; a < 8; ++a) {
    double s = 0.0;
    for (int p = 0; p < 2; ++p)
      for (int q = 0; q < 2; ++q)
        for (int r = 0; r < 2; ++r)
          s += kL[bit(a, 0)][p] * kL[bit(a, 1)][q] * kL[bit(a, 2)][r] * m[static_cast<std::size_t>(midx(p, q, r))];
    e.mass[static_cast<std::size_t>(a)] = h * h * h * s;
  }
}

struct MetricAt {
  Eigen::Matrix3d a;  // sqrt(g) g^{-1}
  double sqrt_g;
};

MetricAt metric_at(const MetricField& g, const std::array<double, 3>& x) {
  const SmallMatrix m = g.value(x);
  Eigen::Matrix3d gm = m.topLeftCorner(3, 3);
  const double det = gm.determinant();
  if (!(det > 0.0)) throw MetricError("metric not positive definite at a quadrature point");
  MetricAt out;
  out.sqrt_g = std::sqrt(det);
  out.a = out.sqrt_g * gm.inverse();
  return out;
}

double sqrt_det_sigma(const MetricField& g, const std::array<double, 3>& x) {
  const SmallMatrix m = g.value(x);
  const double d = m(0, 0) * m(1, 1) - m(0, 1) * m(1, 0);
  if (!(d > 0.0)) throw MetricError("induced boundary metric not positive definite");
  return std::sqrt(d);
}

std::array<double, 3> local_coords(const DiscreteHalfAnnulus& grid, const DiscreteHalfAnnulus::Cell& c,
                                   const std::array<double, 3>& x) {
  std::array<double, 3> xi{};
  for (int d = 0; d < 3; ++d)
    xi[static_cast<std::size_t>(d)] = x[static_cast<std::size_t>(d)] / grid.h() - c.ijk[static_cast<std::size_t>(d)];
  return xi;
}

const GaussRule& cell_rule(int q) {
  static const GaussRule r2 = gauss_legendre(2), r3 = gauss_legendre(3);
  return q == 2 ? r2 : r3;
}

// Tensor Gauss points of a full cell.
template <class Sink>
void full_cell_points(const DiscreteHalfAnnulus& grid, const DiscreteHalfAnnulus::Cell& c, int q, Sink&& sink) {
  const GaussRule& r = cell_rule(q);
  const double h = grid.h();
  std::array<double, 3> x{};
  for (int k = 0; k < q; ++k)
    for (int j = 0; j < q; ++j)
      for (int i = 0; i < q; ++i) {
        const int idx[3] = {i, j, k};
        double w = h * h * h;
        for (int d = 0; d < 3; ++d) {
          const std::size_t t = static_cast<std::size_t>(idx[d]);
          x[static_cast<std::size_t>(d)] = (c.ijk[static_cast<std::size_t>(d)] + 0.5 * (r.nodes[t] + 1.0)) * h;
          w *= 0.5 * r.weights[t];
        }
        sink(x, w);
      }
}

bool is_flat(const MetricField& g) { return g.family == "flat"; }

// Cells grouped by lattice parity: cells of one group share no node.
std::array<std::vector<std::size_t>, 8> colour_cells(const DiscreteHalfAnnulus& grid) {
  std::array<std::vector<std::size_t>, 8> out;
  const auto& cells = grid.cells();
  for (std::size_t i = 0; i < cells.size(); ++i) {
    const auto& c = cells[i].ijk;
    out[static_cast<std::size_t>((c[0] & 1) | ((c[1] & 1) << 1) | ((c[2] & 1) << 2))].push_back(i);
  }
  return out;
}

template <class Body>
void for_cells(const std::array<std::vector<std::size_t>, 8>& groups, Execution exec, Body&& body) {
  for (const auto& group : groups) {
    if (exec == Execution::Parallel)
      parallel_for(group.size(), [&](std::size_t k) { body(group[k]); });
    else
      for (std::size_t k : group) body(k);
  }
}

bool cell_meets_ball(const DiscreteHalfAnnulus& grid, const DiscreteHalfAnnulus::Cell& c, const BallSupport& b) {
  double d2 = 0.0;
  for (int d = 0; d < 3; ++d) {
    const double lo = c.ijk[static_cast<std::size_t>(d)] * grid.h(), hi = lo + grid.h();
    const double p = b.center[static_cast<std::size_t>(d)];
    const double q = std::clamp(p, lo, hi);
    d2 += (p - q) * (p - q);
  }
  return d2 <= b.radius * b.radius;
}

}  // namespace

DiscreteOperator assemble_operator(std::shared_ptr<const DiscreteHalfAnnulus> grid_ptr, const MetricField& g,
                                   const ScalarFn& h_fn, const ScalarFn& hbar_fn, const AssemblyOptions& opts) {
  if (!grid_ptr) throw InvalidArgument("missing grid");
  if (g.n != 3) throw InvalidArgument("grids are three-dimensional");
  const DiscreteHalfAnnulus& grid = *grid_ptr;
  const std::size_t nn = grid.node_count();
  const double h = grid.h();
  const bool flat = is_flat(g);

  // 27-point pattern; node ids follow lattice order, so columns come out sorted.
  std::vector<int> outer(nn + 1, 0);
  std::vector<int> inner;
  inner.reserve(nn * 27);
  for (std::size_t i = 0; i < nn; ++i) {
    const auto& c = grid.node_ijk(i);
    for (int dk = -1; dk <= 1; ++dk)
      for (int dj = -1; dj <= 1; ++dj)
        for (int di = -1; di <= 1; ++di) {
          const int j = grid.node_at(c[0] + di, c[1] + dj, c[2] + dk);
          if (j >= 0) inner.push_back(j);
        }
    outer[i + 1] = static_cast<int>(inner.size());
  }
  std::vector<double> values(inner.size(), 0.0);
  auto slot = [&](int row, int col) -> double& {
    const auto b = inner.begin() + outer[static_cast<std::size_t>(row)];
    const auto e = inner.begin() + outer[static_cast<std::size_t>(row) + 1];
    const auto it = std::lower_bound(b, e, col);
    return values[static_cast<std::size_t>(it - inner.begin())];
  };

  DiscreteOperator op;
  op.grid = grid_ptr;
  op.metric = g;
  op.volume_mass.assign(nn, 0.0);
  op.sigma_mass.assign(nn, 0.0);
  op.inner_mass.assign(nn, 0.0);
  op.outer_mass.assign(nn, 0.0);

  Moments full{};
  for (int p = 0; p < 3; ++p)
    for (int q = 0; q < 3; ++q)
      for (int r = 0; r < 3; ++r) full[static_cast<std::size_t>(midx(p, q, r))] = 1.0 / ((p + 1.0) * (q + 1.0) * (r + 1.0));
  Element reference;
  element_from_moments(full, h, reference);

  const auto groups = colour_cells(grid);
  const int q = opts.cut_order;
  for_cells(groups, opts.execution, [&](std::size_t ci) {
    const auto& cell = grid.cells()[ci];
    const auto nodes = grid.cell_nodes(cell);
    Element e;
    if (flat && cell.kind == CellKind::Full) {
      e = reference;
    } else if (flat) {
      Moments m{};
      const double inv_vol = 1.0 / (h * h * h);
      cut_cell_volume(grid, cell, q, 2, [&](const std::array<double, 3>& x, double w) {
        const auto xi = local_coords(grid, cell, x);
        double px[3][3];
        for (int d = 0; d < 3; ++d) {
          px[d][0] = 1.0;
          px[d][1] = xi[static_cast<std::size_t>(d)];
          px[d][2] = px[d][1] * px[d][1];
        }
        const double ww = w * inv_vol;
        for (int r = 0; r < 3; ++r)
          for (int qq = 0; qq < 3; ++qq) {
            const double s = ww * px[2][r] * px[1][qq];
            for (int p = 0; p < 3; ++p) m[static_cast<std::size_t>(midx(p, qq, r))] += s * px[0][p];
          }
      });
      element_from_moments(m, h, e);
    } else {
      auto accumulate = [&](const std::array<double, 3>& x, double w) {
        const MetricAt ma = metric_at(g, x);
        const auto xi = local_coords(grid, cell, x);
        std::array<Eigen::Vector3d, 8> grads;
        std::array<double, 8> phi{};
        for (int a = 0; a < 8; ++a) {
          const auto gr = shape_grad(a, xi);
          grads[static_cast<std::size_t>(a)] = Eigen::Vector3d(gr[0], gr[1], gr[2]) / h;
          phi[static_cast<std::size_t>(a)] = shape(a, xi);
        }
        for (int a = 0; a < 8; ++a) {
          const Eigen::Vector3d ag = ma.a * grads[static_cast<std::size_t>(a)];
          for (int b = 0; b < 8; ++b) e.k[static_cast<std::size_t>(a * 8 + b)] += w * ag.dot(grads[static_cast<std::size_t>(b)]);
          e.mass[static_cast<std::size_t>(a)] += w * ma.sqrt_g * phi[static_cast<std::size_t>(a)];
        }
      };
      if (cell.kind == CellKind::Full)
        full_cell_points(grid, cell, 2, accumulate);
      else
        cut_cell_volume(grid, cell, q, 3, accumulate);
    }
    for (int a = 0; a < 8; ++a) {
      const int ra = nodes[static_cast<std::size_t>(a)];
      op.volume_mass[static_cast<std::size_t>(ra)] += e.mass[static_cast<std::size_t>(a)];
      for (int b = 0; b < 8; ++b) slot(ra, nodes[static_cast<std::size_t>(b)]) += e.k[static_cast<std::size_t>(a * 8 + b)];
    }
    auto surface = [&](std::vector<double>& target, bool metric_area) {
      return [&, tp = &target, metric_area](const std::array<double, 3>& x, double w) {
        const auto xi = local_coords(grid, cell, x);
        const double s = metric_area && !flat ? sqrt_det_sigma(g, x) : 1.0;
        for (int a = 0; a < 8; ++a)
          (*tp)[static_cast<std::size_t>(nodes[static_cast<std::size_t>(a)])] += w * s * shape(a, xi);
      };
    };
    if (cell.ijk[2] == 0) cut_cell_sigma(grid, cell, q, surface(op.sigma_mass, true));
    if (cell.meets_inner) cut_cell_sphere(grid, cell, grid.r_in(), q, surface(op.inner_mass, false));
    if (cell.meets_outer) cut_cell_sphere(grid, cell, grid.r_out(), q, surface(op.outer_mass, false));
  });

  const double robin = (g.n - 2) / grid.r_out();
  for (std::size_t i = 0; i < nn; ++i) {
    const auto x = grid.node_point(i);
    double d = robin * op.outer_mass[i];
    if (h_fn) d += h_fn(x) * op.volume_mass[i];
    if (hbar_fn && op.sigma_mass[i] > 0.0) d += hbar_fn(x) * op.sigma_mass[i];
    slot(static_cast<int>(i), static_cast<int>(i)) += d;
  }

  const Eigen::Map<const SparseMatrix> view(static_cast<Eigen::Index>(nn), static_cast<Eigen::Index>(nn),
                                             static_cast<Eigen::Index>(inner.size()), outer.data(), inner.data(),
                                             values.data());
  op.matrix = view;
  std::vector<std::array<int, 3>> lattice(nn);
  for (std::size_t i = 0; i < nn; ++i) lattice[i] = grid.node_ijk(i);
  op.preconditioner = std::make_shared<Multigrid>(op.matrix, lattice);
  return op;
}

std::vector<double> assemble_load(const DiscreteOperator& op, const LoadData& data, const AssemblyOptions& opts) {
  const DiscreteHalfAnnulus& grid = *op.grid;
  const MetricField& g = op.metric;
  const bool flat = is_flat(g);
  const std::size_t nn = grid.node_count();
  std::vector<double> b(nn, 0.0);
  const double robin = (g.n - 2) / grid.r_out();
  for (std::size_t i = 0; i < nn; ++i) {
    const auto x = grid.node_point(i);
    b[i] += robin * data.u_infinity * op.outer_mass[i];
    if (data.lumped) {
      if (data.f) b[i] += data.f(x) * op.volume_mass[i];
      if (data.fbar && op.sigma_mass[i] > 0.0) b[i] += data.fbar(x) * op.sigma_mass[i];
    }
  }
  const bool consistent_f = data.f && !data.lumped;
  const bool consistent_fbar = data.fbar && !data.lumped;
  if (!consistent_f && !consistent_fbar && !data.q_inner && !data.q_outer) return b;

  const auto groups = colour_cells(grid);
  const int q = opts.cut_order;
  for_cells(groups, opts.execution, [&](std::size_t ci) {
    const auto& cell = grid.cells()[ci];
    const auto nodes = grid.cell_nodes(cell);
    auto deposit = [&](const std::array<double, 3>& x, double w) {
      const auto xi = local_coords(grid, cell, x);
      for (int a = 0; a < 8; ++a) b[static_cast<std::size_t>(nodes[static_cast<std::size_t>(a)])] += w * shape(a, xi);
    };
    if (consistent_f && (!data.f_support || cell_meets_ball(grid, cell, *data.f_support))) {
      auto sink = [&](const std::array<double, 3>& x, double w) {
        const double fx = data.f(x);
        if (fx == 0.0) return;
        deposit(x, w * fx * (flat ? 1.0 : metric_at(g, x).sqrt_g));
      };
      if (cell.kind == CellKind::Full)
        full_cell_points(grid, cell, 3, sink);
      else
        cut_cell_volume(grid, cell, q, 3, sink);
    }
    if (consistent_fbar && cell.ijk[2] == 0)
      cut_cell_sigma(grid, cell, q, [&](const std::array<double, 3>& x, double w) {
        const double v = data.fbar(x);
        if (v != 0.0) deposit(x, w * v * (flat ? 1.0 : sqrt_det_sigma(g, x)));
      });
    if (data.q_inner && cell.meets_inner)
      cut_cell_sphere(grid, cell, grid.r_in(), opts.surface_order,
                      [&](const std::array<double, 3>& x, double w) { deposit(x, w * data.q_inner(x)); });
    if (data.q_outer && cell.meets_outer)
      cut_cell_sphere(grid, cell, grid.r_out(), opts.surface_order,
                      [&](const std::array<double, 3>& x, double w) { deposit(x, w * data.q_outer(x)); });
  });
  return b;
}

double DiscreteSolution::interpolate(std::span<const double> x) const {
  const DiscreteHalfAnnulus& gr = *grid;
  int ijk[3];
  double xi[3];
  for (int d = 0; d < 3; ++d) {
    const double s = x[static_cast<std::size_t>(d)] / gr.h();
    const double lo = d == 2 ? 0.0 : -gr.extent();
    if (!(s >= lo - 1e-12 && s <= gr.extent() + 1e-12))
      throw DomainError("interpolation point outside the discretised region");
    ijk[d] = std::clamp(static_cast<int>(std::floor(s)), -gr.extent(), gr.extent() - 1);
    if (d == 2) ijk[d] = std::max(ijk[d], 0);
    xi[d] = s - ijk[d];
  }
  double v = 0.0;
  for (int a = 0; a < 8; ++a) {
    const int id = gr.node_at(ijk[0] + bit(a, 0), ijk[1] + bit(a, 1), ijk[2] + bit(a, 2));
    if (id < 0) throw DomainError("interpolation point outside the discretised region");
    v += u[static_cast<std::size_t>(id)] * shape(a, {xi[0], xi[1], xi[2]});
  }
  return v;
}

std::vector<DiscreteSolution> solve_loads(const DiscreteOperator& op, const std::vector<std::vector<double>>& loads,
                                          const SolveOptions& opts) {
  const std::size_t nn = op.grid->node_count();
  std::vector<DiscreteSolution> out;
  constexpr std::size_t kBatch = 32;
  for (std::size_t start = 0; start < loads.size(); start += kBatch) {
    const std::size_t w = std::min(kBatch, loads.size() - start);
    std::vector<double> b(nn * w), x(nn * w, 0.0);
    for (std::size_t c = 0; c < w; ++c) {
      if (loads[start + c].size() != nn) throw InvalidArgument("load vector has the wrong length");
      for (std::size_t i = 0; i < nn; ++i) b[i * w + c] = loads[start + c][i];
    }
    const CgResult res = pcg(op.matrix, *op.preconditioner, b.data(), x.data(), static_cast<int>(w), opts.tolerance,
                             opts.max_iterations, opts.execution);
    if (!res.converged) {
      std::ostringstream os;
      os << "solver did not converge in " << opts.max_iterations << " iterations (relative residual "
         << *std::max_element(res.relative_residual.begin(), res.relative_residual.end()) << ")";
      throw SolverError(os.str());
    }
    std::vector<double> r(nn * w);
    residual(op.matrix, b.data(), x.data(), r.data(), static_cast<int>(w), opts.execution);
    for (std::size_t c = 0; c < w; ++c) {
      DiscreteSolution s;
      s.grid = op.grid;
      s.u.resize(nn);
      s.residual.resize(nn);
      for (std::size_t i = 0; i < nn; ++i) {
        s.u[i] = x[i * w + c];
        s.residual[i] = r[i * w + c];
      }
      s.load = loads[start + c];
      s.iterations = res.iterations;
      s.relative_residual = res.relative_residual[c];
      out.push_back(std::move(s));
    }
  }
  return out;
}

DiscreteSolution solve_bvp(std::shared_ptr<const DiscreteHalfAnnulus> grid, const BvpProblem& problem,
                           const SolveOptions& solve, const AssemblyOptions& assembly) {
  AssemblyOptions a = assembly;
  a.execution = solve.execution;
  const DiscreteOperator op = assemble_operator(std::move(grid), problem.metric, problem.h, problem.hbar, a);
  auto sols = solve_loads(op, {assemble_load(op, problem.data, a)}, solve);
  return std::move(sols.front());
}

void write_grid_csv(const DiscreteSolution& s, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw InvalidArgument("cannot open " + path + " for writing");
  const auto& g = *s.grid;
  out << std::setprecision(17);
  out << "n,h,r_in,r_out\n" << g.n() << ',' << g.h() << ',' << g.r_in() << ',' << g.r_out() << '\n';
  out << "x1,x2,x3,u\n";
  for (std::size_t i = 0; i < g.node_count(); ++i) {
    const auto x = g.node_point(i);
    out << x[0] << ',' << x[1] << ',' << x[2] << ',' << s.u[i] << '\n';
  }
  if (!out) throw InvalidArgument("write to " + path + " failed");
}

}  // namespace halfmass
