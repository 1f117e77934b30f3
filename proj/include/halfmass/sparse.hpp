#pragma once

#include <Eigen/SparseCholesky>
#include <Eigen/SparseCore>
#include <array>
#include <memory>
#include <vector>

namespace halfmass {

/// Compressed sparse rows.
using SparseMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor, int>;

/// Every kernel has an OpenMP path and a serial reference; both visit rows
/// in the same order per row, so results agree bit for bit.
enum class Execution { Parallel, Serial };

/// Blocks of `nrhs` vectors are stored node-major: v[i * nrhs + c].
void spmv(const SparseMatrix& a, const double* x, double* y, int nrhs, Execution exec);
/// r = b - A x
void residual(const SparseMatrix& a, const double* b, const double* x, double* r, int nrhs, Execution exec);

/// Rows grouped by lattice parity. For a 27-point stencil rows of one colour
/// are mutually uncoupled, so a colour can be relaxed in parallel.
struct RowColouring {
  std::array<std::vector<int>, 8> rows;
};
RowColouring colour_by_parity(const std::vector<std::array<int, 3>>& lattice);

/// One multicolour Gauss-Seidel sweep, colours ascending (forward) or
/// descending (backward).
void gauss_seidel(const SparseMatrix& a, const std::vector<double>& inv_diag, const RowColouring& colours,
                  const double* b, double* x, int nrhs, bool forward, Execution exec);

/// Galerkin geometric multigrid on nested Cartesian lattices with trilinear
/// prolongation; a V-cycle with symmetric Gauss-Seidel is an SPD preconditioner.
class Multigrid {
 public:
  struct Level {
    SparseMatrix a;
    std::vector<double> inv_diag;
    RowColouring colours;
    SparseMatrix prolong;   // to this level from the next coarser one
    SparseMatrix restrict_;  // transpose of prolong
  };

  Multigrid(SparseMatrix a, const std::vector<std::array<int, 3>>& lattice, int max_levels = 8,
            std::size_t coarsest_size = 2000, int smoothing = 1);

  /// Per-level scratch vectors for one block width; not shareable across
  /// concurrent applications.
  struct Workspace {
    int nrhs = 0;
    std::vector<std::vector<double>> residual, rhs, sol;
  };
  Workspace workspace(int nrhs) const;

  /// z = M^{-1} r for a block of nrhs vectors.
  void apply(const double* r, double* z, int nrhs, Execution exec) const;
  void apply(const double* r, double* z, Workspace& ws, Execution exec) const;

  std::size_t level_count() const noexcept { return levels_.size(); }
  const Level& level(std::size_t l) const { return levels_[l]; }
  const SparseMatrix& matrix() const { return levels_.front().a; }

 private:
  void cycle(std::size_t l, const double* b, double* x, Workspace& ws, Execution exec) const;

  std::vector<Level> levels_;
  int smoothing_;
  std::shared_ptr<Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>>> coarse_;
};

struct CgResult {
  int iterations = 0;
  bool converged = false;
  std::vector<double> relative_residual;  // per right-hand side
};

/// Preconditioned conjugate gradients run in lockstep over nrhs columns.
/// Throws SolverError when a search direction has nonpositive energy.
CgResult pcg(const SparseMatrix& a, const Multigrid& m, const double* b, double* x, int nrhs, double tol,
             int max_iter, Execution exec);

}  // namespace halfmass
