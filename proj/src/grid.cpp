#include "halfmass/grid.hpp"

#include <algorithm>
#include <cmath>

#include "halfmass/error.hpp"
#include "halfmass/quadrature.hpp"

namespace halfmass {

namespace {

// Gauss-Legendre nodes and weights mapped to [0, 1].
struct UnitRule {
  std::vector<double> s, w;
};

const UnitRule& unit_rule(int q) {
  // Fixed-size storage: returned references stay valid across calls.
  static thread_local std::array<UnitRule, 65> cache;
  if (q < 1 || q > 64) throw InvalidArgument("quadrature order out of range");
  UnitRule& r = cache[static_cast<std::size_t>(q)];
  if (r.s.empty()) {
    const GaussRule g = gauss_legendre(q);
    for (int i = 0; i < q; ++i) {
      r.s.push_back(0.5 * (g.nodes[static_cast<std::size_t>(i)] + 1.0));
      r.w.push_back(0.5 * g.weights[static_cast<std::size_t>(i)]);
    }
  }
  return r;
}

void sorted_unique(std::vector<double>& v) {
  std::sort(v.begin(), v.end());
  v.erase(std::unique(v.begin(), v.end(), [](double a, double b) { return std::abs(a - b) <= 1e-14 * (1.0 + std::abs(a)); }),
          v.end());
}

}  // namespace

CellKind DiscreteHalfAnnulus::classify(std::array<int, 3> ijk, double h, double r_in, double r_out) {
  double dmin2 = 0.0, dmax2 = 0.0;
  for (int d = 0; d < 3; ++d) {
    const double lo = ijk[static_cast<std::size_t>(d)] * h, hi = lo + h;
    const double near = lo > 0.0 ? lo : (hi < 0.0 ? hi : 0.0);
    const double far = std::max(std::abs(lo), std::abs(hi));
    dmin2 += near * near;
    dmax2 += far * far;
  }
  if (dmax2 <= r_in * r_in || dmin2 >= r_out * r_out) return CellKind::Empty;
  if (dmin2 >= r_in * r_in && dmax2 <= r_out * r_out) return CellKind::Full;
  return CellKind::Cut;
}

DiscreteHalfAnnulus::DiscreteHalfAnnulus(double r_in, double r_out, double h, int coarsening_levels)
    : r_in_(r_in), r_out_(r_out), h_(h) {
  if (!(r_in > 0.0) || !(h > 0.0) || !(r_out >= 4.0 * r_in))
    throw InvalidArgument("grid needs r_in > 0, h > 0 and r_out >= 4 r_in");
  if (r_in < 4.0 * h) throw InvalidArgument("grid needs r_in >= 4 h");
  if (coarsening_levels < 0 || coarsening_levels > 12) throw InvalidArgument("coarsening levels out of range");
  const int unit = 1 << coarsening_levels;
  extent_ = static_cast<int>(std::ceil(r_out / h - 1e-12));
  extent_ = (extent_ + unit - 1) / unit * unit;

  const int N = extent_;
  const std::size_t wc = static_cast<std::size_t>(2 * N);
  auto cell_index = [&](int i, int j, int k) {
    return (static_cast<std::size_t>(k) * wc + static_cast<std::size_t>(j + N)) * wc + static_cast<std::size_t>(i + N);
  };
  std::vector<CellKind> kinds(wc * wc * static_cast<std::size_t>(N), CellKind::Empty);
  std::vector<std::uint8_t> meets(kinds.size(), 0);
  lattice_to_node_.assign(static_cast<std::size_t>(2 * N + 1) * static_cast<std::size_t>(2 * N + 1) *
                              static_cast<std::size_t>(N + 1),
                          -1);
  const double ri2 = r_in * r_in, ro2 = r_out * r_out;
  for (int k = 0; k < N; ++k)
    for (int j = -N; j < N; ++j)
      for (int i = -N; i < N; ++i) {
        const CellKind kind = classify({i, j, k}, h, r_in, r_out);
        if (kind == CellKind::Empty) continue;
        Cell c{{i, j, k}, kind, false, false};
        if (kind == CellKind::Cut) {
          double dmin2 = 0.0, dmax2 = 0.0;
          for (int d = 0; d < 3; ++d) {
            const double lo = c.ijk[static_cast<std::size_t>(d)] * h, hi = lo + h;
            const double near = lo > 0.0 ? lo : (hi < 0.0 ? hi : 0.0);
            dmin2 += near * near;
            dmax2 += std::max(lo * lo, hi * hi);
          }
          c.meets_inner = dmin2 < ri2 && ri2 < dmax2;
          c.meets_outer = dmin2 < ro2 && ro2 < dmax2;
        }
        kinds[cell_index(i, j, k)] = kind;
        meets[cell_index(i, j, k)] = static_cast<std::uint8_t>((c.meets_inner ? 1 : 0) | (c.meets_outer ? 2 : 0));
        cells_.push_back(c);
        for (int corner = 0; corner < 8; ++corner) {
          const std::size_t li = lattice_index(i + (corner & 1), j + ((corner >> 1) & 1), k + ((corner >> 2) & 1));
          lattice_to_node_[li] = 0;
        }
      }

  // Number nodes in lattice order so the numbering is deterministic.
  for (int k = 0; k <= N; ++k)
    for (int j = -N; j <= N; ++j)
      for (int i = -N; i <= N; ++i) {
        int& id = lattice_to_node_[lattice_index(i, j, k)];
        if (id < 0) continue;
        id = static_cast<int>(node_ijk_.size());
        node_ijk_.push_back({i, j, k});
        NodeClass cls = NodeClass::Interior;
        if (k == 0) {
          cls = NodeClass::Sigma;
        } else {
          bool all_full = true;
          std::uint8_t flags = 0;
          for (int dk = -1; dk <= 0; ++dk)
            for (int dj = -1; dj <= 0; ++dj)
              for (int di = -1; di <= 0; ++di) {
                const int ci = i + di, cj = j + dj, ck = k + dk;
                if (ci < -N || ci >= N || cj < -N || cj >= N || ck < 0 || ck >= N) {
                  all_full = false;
                  continue;
                }
                const std::size_t idx = cell_index(ci, cj, ck);
                if (kinds[idx] != CellKind::Full) all_full = false;
                flags |= meets[idx];
              }
          if (!all_full) {
            if (flags & 1)
              cls = NodeClass::InnerCut;
            else if (flags & 2)
              cls = NodeClass::OuterCut;
            else {
              const double r = h * std::sqrt(double(i) * i + double(j) * j + double(k) * k);
              cls = r * r < r_in * r_out ? NodeClass::InnerCut : NodeClass::OuterCut;
            }
          }
        }
        node_class_.push_back(cls);
      }
}

int DiscreteHalfAnnulus::node_at(int i, int j, int k) const {
  if (i < -extent_ || i > extent_ || j < -extent_ || j > extent_ || k < 0 || k > extent_) return -1;
  return lattice_to_node_[lattice_index(i, j, k)];
}

std::array<int, 8> DiscreteHalfAnnulus::cell_nodes(const Cell& c) const {
  std::array<int, 8> out{};
  for (int corner = 0; corner < 8; ++corner)
    out[static_cast<std::size_t>(corner)] =
        node_at(c.ijk[0] + (corner & 1), c.ijk[1] + ((corner >> 1) & 1), c.ijk[2] + ((corner >> 2) & 1));
  return out;
}

void integrate_rect_annuli(double a0, double a1, double b0, double b1, std::span<const double> circles, int q,
                           const std::function<void(double, double, double)>& sink) {
  const UnitRule& rule = unit_rule(q);
  std::vector<double> breaks;
  for (std::size_t c = 0; c + 1 < circles.size(); ++c) {
    const double p1 = circles[c], p2 = circles[c + 1];
    if (!(p2 > p1)) continue;
    breaks.assign({a0, a1});
    for (double p : {p1, p2}) {
      for (double v : {p, -p}) breaks.push_back(v);
      for (double b : {b0, b1}) {
        const double s = p * p - b * b;
        if (s > 0.0) {
          breaks.push_back(std::sqrt(s));
          breaks.push_back(-std::sqrt(s));
        }
      }
    }
    breaks.erase(std::remove_if(breaks.begin(), breaks.end(), [&](double v) { return v < a0 || v > a1; }),
                 breaks.end());
    sorted_unique(breaks);
    for (std::size_t s = 0; s + 1 < breaks.size(); ++s) {
      const double lo = breaks[s], len = breaks[s + 1] - breaks[s];
      if (!(len > 0.0)) continue;
      for (int ia = 0; ia < q; ++ia) {
        // Smoothstep map: regularises square-root behaviour at both ends.
        const double t = rule.s[static_cast<std::size_t>(ia)];
        const double a = lo + len * t * t * (3.0 - 2.0 * t);
        const double wa = rule.w[static_cast<std::size_t>(ia)] * len * 6.0 * t * (1.0 - t);
        const double outer2 = p2 * p2 - a * a;
        if (!(outer2 > 0.0)) continue;
        const double B2 = std::sqrt(outer2);
        const double inner2 = p1 * p1 - a * a;
        double ranges[2][2];
        int nr = 0;
        if (inner2 > 0.0) {
          const double B1 = std::sqrt(inner2);
          ranges[nr][0] = B1;
          ranges[nr++][1] = B2;
          ranges[nr][0] = -B2;
          ranges[nr++][1] = -B1;
        } else {
          ranges[nr][0] = -B2;
          ranges[nr++][1] = B2;
        }
        for (int r = 0; r < nr; ++r) {
          const double lb = std::max(ranges[r][0], b0), ub = std::min(ranges[r][1], b1);
          if (!(ub > lb)) continue;
          for (int ib = 0; ib < q; ++ib) {
            const double b = lb + (ub - lb) * rule.s[static_cast<std::size_t>(ib)];
            sink(a, b, wa * (ub - lb) * rule.w[static_cast<std::size_t>(ib)]);
          }
        }
      }
    }
  }
}

namespace {

// Axis along which the cell is farthest from the origin; the remaining two
// axes (in increasing order) parametrise the cross-section.
struct CellFrame {
  int d, a, b;
  double lo, hi;  // |x_d| range over the cell
  double sign;
  double a0, a1, b0, b1;
};

CellFrame frame_of(const DiscreteHalfAnnulus& grid, const DiscreteHalfAnnulus::Cell& cell) {
  const double h = grid.h();
  std::array<double, 3> center{};
  for (int k = 0; k < 3; ++k) center[static_cast<std::size_t>(k)] = (cell.ijk[static_cast<std::size_t>(k)] + 0.5) * h;
  int d = 0;
  for (int k = 1; k < 3; ++k)
    if (std::abs(center[static_cast<std::size_t>(k)]) > std::abs(center[static_cast<std::size_t>(d)])) d = k;
  CellFrame f{};
  f.d = d;
  f.a = d == 0 ? 1 : 0;
  f.b = d == 2 ? 1 : 2;
  const double lo = cell.ijk[static_cast<std::size_t>(d)] * h, hi = lo + h;
  if (lo < 0.0 && hi > 0.0) throw InvalidArgument("cut cell straddles a coordinate plane along its dominant axis");
  f.sign = hi <= 0.0 ? -1.0 : 1.0;
  f.lo = std::min(std::abs(lo), std::abs(hi));
  f.hi = std::max(std::abs(lo), std::abs(hi));
  f.a0 = cell.ijk[static_cast<std::size_t>(f.a)] * h;
  f.a1 = f.a0 + h;
  f.b0 = cell.ijk[static_cast<std::size_t>(f.b)] * h;
  f.b1 = f.b0 + h;
  return f;
}

double rect_max_radius(const CellFrame& f) {
  const double a = std::max(std::abs(f.a0), std::abs(f.a1)), b = std::max(std::abs(f.b0), std::abs(f.b1));
  return std::sqrt(a * a + b * b);
}

}  // namespace

void cut_cell_volume(const DiscreteHalfAnnulus& grid, const DiscreteHalfAnnulus::Cell& cell, int q, int qt,
                     const PointSink& sink) {
  const CellFrame f = frame_of(grid, cell);
  const double ri = grid.r_in(), ro = grid.r_out();
  std::vector<double> circles{0.0, rect_max_radius(f) * 1.001 + 1e-12};
  for (double r : {ri, ro})
    for (double t : {f.lo, f.hi})
      if (r > t) circles.push_back(std::sqrt(r * r - t * t));
  sorted_unique(circles);
  const UnitRule& rt = unit_rule(qt);
  std::array<double, 3> x{};
  integrate_rect_annuli(f.a0, f.a1, f.b0, f.b1, circles, q, [&](double a, double b, double w) {
    const double rho2 = a * a + b * b;
    const double t0 = std::max(f.lo, std::sqrt(std::max(ri * ri - rho2, 0.0)));
    const double t1 = std::min(f.hi, std::sqrt(std::max(ro * ro - rho2, 0.0)));
    if (!(t1 > t0)) return;
    x[static_cast<std::size_t>(f.a)] = a;
    x[static_cast<std::size_t>(f.b)] = b;
    for (std::size_t it = 0; it < rt.s.size(); ++it) {
      x[static_cast<std::size_t>(f.d)] = f.sign * (t0 + (t1 - t0) * rt.s[it]);
      sink(x, w * (t1 - t0) * rt.w[it]);
    }
  });
}

void cut_cell_sphere(const DiscreteHalfAnnulus& grid, const DiscreteHalfAnnulus::Cell& cell, double radius, int q,
                     const PointSink& sink) {
  const CellFrame f = frame_of(grid, cell);
  if (!(radius > f.lo)) return;
  const double r2 = radius * radius;
  std::vector<double> circles{std::sqrt(std::max(r2 - f.hi * f.hi, 0.0)), std::sqrt(r2 - f.lo * f.lo)};
  std::array<double, 3> x{};
  integrate_rect_annuli(f.a0, f.a1, f.b0, f.b1, circles, q, [&](double a, double b, double w) {
    const double t = std::sqrt(std::max(r2 - a * a - b * b, 0.0));
    if (!(t > 0.0)) return;
    x[static_cast<std::size_t>(f.a)] = a;
    x[static_cast<std::size_t>(f.b)] = b;
    x[static_cast<std::size_t>(f.d)] = f.sign * t;
    sink(x, w * radius / t);
  });
}

void cut_cell_sigma(const DiscreteHalfAnnulus& grid, const DiscreteHalfAnnulus::Cell& cell, int q,
                    const PointSink& sink) {
  if (cell.ijk[2] != 0) return;
  const double h = grid.h();
  const double a0 = cell.ijk[0] * h, b0 = cell.ijk[1] * h;
  const double circles[2] = {grid.r_in(), grid.r_out()};
  std::array<double, 3> x{0.0, 0.0, 0.0};
  integrate_rect_annuli(a0, a0 + h, b0, b0 + h, circles, q, [&](double a, double b, double w) {
    x[0] = a;
    x[1] = b;
    sink(x, w);
  });
}

}  // namespace halfmass
