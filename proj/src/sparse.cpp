#include "halfmass/sparse.hpp"

#include <cmath>
#include <limits>
#include <sstream>
#include <unordered_map>

#include "halfmass/error.hpp"

namespace halfmass {

namespace {

template <class Body>
void for_rows(std::size_t count, Execution exec, Body&& body) {
  const long long n = static_cast<long long>(count);
  if (exec == Execution::Parallel) {
#pragma omp parallel for schedule(static)
    for (long long i = 0; i < n; ++i) body(static_cast<std::size_t>(i));
  } else {
    for (long long i = 0; i < n; ++i) body(static_cast<std::size_t>(i));
  }
}

constexpr int kMaxBlock = 64;

}  // namespace

void spmv(const SparseMatrix& a, const double* x, double* y, int nrhs, Execution exec) {
  const int* outer = a.outerIndexPtr();
  const int* inner = a.innerIndexPtr();
  const double* val = a.valuePtr();
  const std::size_t w = static_cast<std::size_t>(nrhs);
  for_rows(static_cast<std::size_t>(a.rows()), exec, [&](std::size_t i) {
    double acc[kMaxBlock];
    for (std::size_t c = 0; c < w; ++c) acc[c] = 0.0;
    for (int p = outer[i]; p < outer[i + 1]; ++p) {
      const double v = val[p];
      const double* xj = x + static_cast<std::size_t>(inner[p]) * w;
      for (std::size_t c = 0; c < w; ++c) acc[c] += v * xj[c];
    }
    for (std::size_t c = 0; c < w; ++c) y[i * w + c] = acc[c];
  });
}

void residual(const SparseMatrix& a, const double* b, const double* x, double* r, int nrhs, Execution exec) {
  const int* outer = a.outerIndexPtr();
  const int* inner = a.innerIndexPtr();
  const double* val = a.valuePtr();
  const std::size_t w = static_cast<std::size_t>(nrhs);
  for_rows(static_cast<std::size_t>(a.rows()), exec, [&](std::size_t i) {
    double acc[kMaxBlock];
    for (std::size_t c = 0; c < w; ++c) acc[c] = b[i * w + c];
    for (int p = outer[i]; p < outer[i + 1]; ++p) {
      const double v = val[p];
      const double* xj = x + static_cast<std::size_t>(inner[p]) * w;
      for (std::size_t c = 0; c < w; ++c) acc[c] -= v * xj[c];
    }
    for (std::size_t c = 0; c < w; ++c) r[i * w + c] = acc[c];
  });
}

RowColouring colour_by_parity(const std::vector<std::array<int, 3>>& lattice) {
  RowColouring out;
  for (std::size_t i = 0; i < lattice.size(); ++i) {
    const auto& c = lattice[i];
    const int colour = (c[0] & 1) | ((c[1] & 1) << 1) | ((c[2] & 1) << 2);
    out.rows[static_cast<std::size_t>(colour)].push_back(static_cast<int>(i));
  }
  return out;
}

void gauss_seidel(const SparseMatrix& a, const std::vector<double>& inv_diag, const RowColouring& colours,
                  const double* b, double* x, int nrhs, bool forward, Execution exec) {
  const int* outer = a.outerIndexPtr();
  const int* inner = a.innerIndexPtr();
  const double* val = a.valuePtr();
  const std::size_t w = static_cast<std::size_t>(nrhs);
  for (int s = 0; s < 8; ++s) {
    const auto& rows = colours.rows[static_cast<std::size_t>(forward ? s : 7 - s)];
    for_rows(rows.size(), exec, [&](std::size_t k) {
      const std::size_t i = static_cast<std::size_t>(rows[k]);
      double acc[kMaxBlock];
      for (std::size_t c = 0; c < w; ++c) acc[c] = b[i * w + c];
      for (int p = outer[i]; p < outer[i + 1]; ++p) {
        const std::size_t j = static_cast<std::size_t>(inner[p]);
        if (j == i) continue;
        const double v = val[p];
        for (std::size_t c = 0; c < w; ++c) acc[c] -= v * x[j * w + c];
      }
      for (std::size_t c = 0; c < w; ++c) x[i * w + c] = acc[c] * inv_diag[i];
    });
  }
}

namespace {

std::vector<double> inverse_diagonal(const SparseMatrix& a) {
  std::vector<double> d(static_cast<std::size_t>(a.rows()), 0.0);
  for (int i = 0; i < a.outerSize(); ++i)
    for (SparseMatrix::InnerIterator it(a, i); it; ++it)
      if (it.col() == i) d[static_cast<std::size_t>(i)] = it.value();
  for (std::size_t i = 0; i < d.size(); ++i) {
    if (!(d[i] > 0.0)) {
      std::ostringstream os;
      os << "indefinite discrete operator: diagonal entry " << d[i] << " at row " << i;
      throw SolverError(os.str());
    }
    d[i] = 1.0 / d[i];
  }
  return d;
}

std::int64_t pack(int i, int j, int k) {
  return ((static_cast<std::int64_t>(i) + (1 << 20)) << 42) | ((static_cast<std::int64_t>(j) + (1 << 20)) << 21) |
         (static_cast<std::int64_t>(k) + (1 << 20));
}

// Trilinear prolongation from the lattice of even points; returns the
// coarse lattice coordinates in *coarse.
SparseMatrix trilinear_prolongation(const std::vector<std::array<int, 3>>& fine,
                                    std::vector<std::array<int, 3>>* coarse) {
  std::unordered_map<std::int64_t, int> index;
  std::vector<Eigen::Triplet<double, int>> trips;
  coarse->clear();
  for (std::size_t r = 0; r < fine.size(); ++r) {
    int lo[3], hi[3];
    for (int d = 0; d < 3; ++d) {
      const int c = fine[r][static_cast<std::size_t>(d)];
      if (c % 2 == 0) {
        lo[d] = hi[d] = c / 2;
      } else {
        lo[d] = (c - 1) / 2;
        hi[d] = (c + 1) / 2;
      }
    }
    for (int k = lo[2]; k <= hi[2]; ++k)
      for (int j = lo[1]; j <= hi[1]; ++j)
        for (int i = lo[0]; i <= hi[0]; ++i) {
          const double w = (lo[0] == hi[0] ? 1.0 : 0.5) * (lo[1] == hi[1] ? 1.0 : 0.5) * (lo[2] == hi[2] ? 1.0 : 0.5);
          auto [it, fresh] = index.try_emplace(pack(i, j, k), static_cast<int>(coarse->size()));
          if (fresh) coarse->push_back({i, j, k});
          trips.emplace_back(static_cast<int>(r), it->second, w);
        }
  }
  SparseMatrix p(static_cast<int>(fine.size()), static_cast<int>(coarse->size()));
  p.setFromTriplets(trips.begin(), trips.end());
  return p;
}

}  // namespace

Multigrid::Multigrid(SparseMatrix a, const std::vector<std::array<int, 3>>& lattice, int max_levels,
                     std::size_t coarsest_size, int smoothing)
    : smoothing_(smoothing) {
  if (a.rows() != static_cast<int>(lattice.size())) throw InvalidArgument("multigrid lattice size mismatch");
  std::vector<std::array<int, 3>> coords = lattice;
  levels_.push_back(Level{std::move(a), {}, {}, {}, {}});
  while (static_cast<int>(levels_.size()) < max_levels &&
         static_cast<std::size_t>(levels_.back().a.rows()) > coarsest_size) {
    Level& fine = levels_.back();
    fine.inv_diag = inverse_diagonal(fine.a);
    fine.colours = colour_by_parity(coords);
    std::vector<std::array<int, 3>> coarse;
    fine.prolong = trilinear_prolongation(coords, &coarse);
    fine.restrict_ = fine.prolong.transpose();
    SparseMatrix ap = fine.a * fine.prolong;
    SparseMatrix ac = fine.restrict_ * ap;
    ac.prune(0.0);
    coords = std::move(coarse);
    levels_.push_back(Level{std::move(ac), {}, {}, {}, {}});
  }
  Level& last = levels_.back();
  last.inv_diag = inverse_diagonal(last.a);
  last.colours = colour_by_parity(coords);
  // A small shift keeps the direct coarse solve defined if the Galerkin
  // product is only semidefinite (coarse points with dependent columns).
  Eigen::SparseMatrix<double> col = last.a;
  double dmax = 0.0;
  for (double v : last.inv_diag) dmax = std::max(dmax, 1.0 / v);
  for (int i = 0; i < col.rows(); ++i) col.coeffRef(i, i) += 1e-13 * dmax;
  coarse_ = std::make_shared<Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>>>(col);
  if (coarse_->info() != Eigen::Success) throw SolverError("coarse-level factorisation failed");
}

Multigrid::Workspace Multigrid::workspace(int nrhs) const {
  if (nrhs < 1 || nrhs > kMaxBlock) throw InvalidArgument("right-hand-side block size out of range");
  Workspace ws;
  ws.nrhs = nrhs;
  for (const Level& lv : levels_) {
    const std::size_t n = static_cast<std::size_t>(lv.a.rows()) * static_cast<std::size_t>(nrhs);
    ws.residual.emplace_back(n);
    ws.rhs.emplace_back(n);
    ws.sol.emplace_back(n);
  }
  return ws;
}

void Multigrid::cycle(std::size_t l, const double* b, double* x, Workspace& ws, Execution exec) const {
  const Level& lv = levels_[l];
  const int nrhs = ws.nrhs;
  const std::size_t n = static_cast<std::size_t>(lv.a.rows());
  const std::size_t w = static_cast<std::size_t>(nrhs);
  if (l + 1 == levels_.size()) {
    Eigen::VectorXd rhs(static_cast<Eigen::Index>(n));
    for (std::size_t c = 0; c < w; ++c) {
      for (std::size_t i = 0; i < n; ++i) rhs[static_cast<Eigen::Index>(i)] = b[i * w + c];
      const Eigen::VectorXd sol = coarse_->solve(rhs);
      for (std::size_t i = 0; i < n; ++i) x[i * w + c] = sol[static_cast<Eigen::Index>(i)];
    }
    return;
  }
  std::fill(x, x + n * w, 0.0);
  for (int s = 0; s < smoothing_; ++s) gauss_seidel(lv.a, lv.inv_diag, lv.colours, b, x, nrhs, true, exec);
  double* r = ws.residual[l].data();
  residual(lv.a, b, x, r, nrhs, exec);
  double* bc = ws.rhs[l + 1].data();
  double* xc = ws.sol[l + 1].data();
  spmv(lv.restrict_, r, bc, nrhs, exec);
  cycle(l + 1, bc, xc, ws, exec);
  spmv(lv.prolong, xc, r, nrhs, exec);
  for_rows(n, exec, [&](std::size_t i) {
    for (std::size_t c = 0; c < w; ++c) x[i * w + c] += r[i * w + c];
  });
  for (int s = 0; s < smoothing_; ++s) gauss_seidel(lv.a, lv.inv_diag, lv.colours, b, x, nrhs, false, exec);
}

void Multigrid::apply(const double* r, double* z, int nrhs, Execution exec) const {
  Workspace ws = workspace(nrhs);
  cycle(0, r, z, ws, exec);
}

void Multigrid::apply(const double* r, double* z, Workspace& ws, Execution exec) const {
  cycle(0, r, z, ws, exec);
}

CgResult pcg(const SparseMatrix& a, const Multigrid& m, const double* b, double* x, int nrhs, double tol,
             int max_iter, Execution exec) {
  const std::size_t n = static_cast<std::size_t>(a.rows());
  const std::size_t w = static_cast<std::size_t>(nrhs);
  std::vector<double> r(n * w), z(n * w), p(n * w), q(n * w);
  auto column_dots = [&](const std::vector<double>& u, const std::vector<double>& v) {
    std::vector<double> out(w, 0.0);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t c = 0; c < w; ++c) out[c] += u[i * w + c] * v[i * w + c];
    return out;
  };
  std::vector<double> bnorm(w, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t c = 0; c < w; ++c) bnorm[c] += b[i * w + c] * b[i * w + c];
  for (auto& v : bnorm) v = std::sqrt(v);

  residual(a, b, x, r.data(), nrhs, exec);
  CgResult out;
  out.relative_residual.assign(w, 0.0);
  std::vector<bool> active(w, true);
  Multigrid::Workspace ws = m.workspace(nrhs);
  auto update_status = [&]() {
    const auto rr = column_dots(r, r);
    bool any = false;
    for (std::size_t c = 0; c < w; ++c) {
      out.relative_residual[c] = bnorm[c] > 0.0 ? std::sqrt(rr[c]) / bnorm[c] : std::sqrt(rr[c]);
      active[c] = out.relative_residual[c] > tol;
      any = any || active[c];
    }
    return any;
  };
  if (!update_status()) {
    out.converged = true;
    return out;
  }
  m.apply(r.data(), z.data(), ws, exec);
  p = z;
  auto rz = column_dots(r, z);
  for (int it = 1; it <= max_iter; ++it) {
    spmv(a, p.data(), q.data(), nrhs, exec);
    const auto pq = column_dots(p, q);
    std::vector<double> alpha(w, 0.0);
    for (std::size_t c = 0; c < w; ++c) {
      if (!active[c]) continue;
      if (!(pq[c] > 0.0)) {
        double worst = std::numeric_limits<double>::infinity();
        for (int i = 0; i < a.outerSize(); ++i) {
          double s = 0.0;
          for (SparseMatrix::InnerIterator e(a, i); e; ++e) s += e.value();
          worst = std::min(worst, s);
        }
        std::ostringstream os;
        os << "indefinite discrete operator (p.Ap = " << pq[c] << "); most negative row sum " << worst;
        throw SolverError(os.str());
      }
      alpha[c] = rz[c] / pq[c];
    }
    for_rows(n, exec, [&](std::size_t i) {
      for (std::size_t c = 0; c < w; ++c) {
        x[i * w + c] += alpha[c] * p[i * w + c];
        r[i * w + c] -= alpha[c] * q[i * w + c];
      }
    });
    out.iterations = it;
    if (!update_status()) {
      out.converged = true;
      return out;
    }
    m.apply(r.data(), z.data(), ws, exec);
    const auto rz_new = column_dots(r, z);
    std::vector<double> beta(w, 0.0);
    for (std::size_t c = 0; c < w; ++c)
      if (active[c]) beta[c] = rz_new[c] / rz[c];
    rz = rz_new;
    for_rows(n, exec, [&](std::size_t i) {
      for (std::size_t c = 0; c < w; ++c)
        if (active[c]) p[i * w + c] = z[i * w + c] + beta[c] * p[i * w + c];
    });
  }
  return out;
}

}  // namespace halfmass
