#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

namespace halfmass {

enum class NodeClass : std::uint8_t { Interior, Sigma, InnerCut, OuterCut };
enum class CellKind : std::uint8_t { Empty, Full, Cut };

/// Uniform Cartesian lattice over {r_in <= |x| <= r_out, x_3 >= 0} (n = 3).
/// Lattice points are (i h, j h, k h) with |i|, |j| <= N and 0 <= k <= N; cell
/// (i, j, k) spans [i, i+1] x [j, j+1] x [k, k+1] in lattice units.
class DiscreteHalfAnnulus {
 public:
  struct Cell {
    std::array<int, 3> ijk;
    CellKind kind;
    bool meets_inner;  // intersects the sphere |x| = r_in
    bool meets_outer;
  };

  /// `coarsening_levels` makes N a multiple of 2^levels so that the
  /// lattice nests. Requires r_out >= 4 r_in and r_in >= 4 h.
  DiscreteHalfAnnulus(double r_in, double r_out, double h, int coarsening_levels = 0);

  int n() const noexcept { return 3; }
  double r_in() const noexcept { return r_in_; }
  double r_out() const noexcept { return r_out_; }
  double h() const noexcept { return h_; }
  int extent() const noexcept { return extent_; }

  std::size_t node_count() const noexcept { return node_ijk_.size(); }
  const std::array<int, 3>& node_ijk(std::size_t i) const { return node_ijk_[i]; }
  NodeClass node_class(std::size_t i) const { return node_class_[i]; }
  std::array<double, 3> node_point(std::size_t i) const {
    const auto& c = node_ijk_[i];
    return {c[0] * h_, c[1] * h_, c[2] * h_};
  }
  /// Node id of a lattice point, or -1 if the point is not active.
  int node_at(int i, int j, int k) const;

  const std::vector<Cell>& cells() const noexcept { return cells_; }
  /// Node ids of the 8 corners of a cell; corner c has offsets (c&1, c>>1&1, c>>2&1).
  std::array<int, 8> cell_nodes(const Cell& c) const;

  /// Classify a cell box by its distance range to the origin.
  static CellKind classify(std::array<int, 3> ijk, double h, double r_in, double r_out);

 private:
  std::size_t lattice_index(int i, int j, int k) const {
    const std::size_t w = static_cast<std::size_t>(2 * extent_ + 1);
    return (static_cast<std::size_t>(k) * w + static_cast<std::size_t>(j + extent_)) * w +
           static_cast<std::size_t>(i + extent_);
  }

  double r_in_, r_out_, h_;
  int extent_;
  std::vector<int> lattice_to_node_;
  std::vector<std::array<int, 3>> node_ijk_;
  std::vector<NodeClass> node_class_;
  std::vector<Cell> cells_;
};

/// Callback receiving a quadrature point and weight.
using PointSink = std::function<void(const std::array<double, 3>& x, double w)>;

/// Quadrature over {(a, b) in [a0, a1] x [b0, b1] : rho_k <= |(a, b)| <= rho_k+1}
/// for each consecutive pair in `circles` (sorted). Kinks of the integrand
/// are only allowed on those circles. The a-direction uses a smoothstep
/// substitution so square-root endpoint behaviour is integrated spectrally.
void integrate_rect_annuli(double a0, double a1, double b0, double b1, std::span<const double> circles,
                           int q, const std::function<void(double a, double b, double w)>& sink);

/// Exact-geometry volume quadrature of cell ∩ {r_in <= |x| <= r_out}.
void cut_cell_volume(const DiscreteHalfAnnulus& grid, const DiscreteHalfAnnulus::Cell& cell, int q,
                     int qt, const PointSink& sink);

/// Quadrature of the sphere |x| = radius inside the cell (coordinate area).
void cut_cell_sphere(const DiscreteHalfAnnulus& grid, const DiscreteHalfAnnulus::Cell& cell, double radius,
                     int q, const PointSink& sink);

/// Quadrature of the bottom face (x_3 = 0) of a k = 0 cell intersected with
/// the annulus r_in <= |x| <= r_out (coordinate area).
void cut_cell_sigma(const DiscreteHalfAnnulus& grid, const DiscreteHalfAnnulus::Cell& cell, int q,
                    const PointSink& sink);

}  // namespace halfmass
