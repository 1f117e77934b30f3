#pragma once

#include <array>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "halfmass/grid.hpp"
#include "halfmass/mass.hpp"
#include "halfmass/metric.hpp"
#include "halfmass/quadrature.hpp"
#include "halfmass/scalar_field.hpp"
#include "halfmass/sparse.hpp"

namespace halfmass {

// ---------------------------------------------------------------------------
// Image kernel and the half-space representation formula.

/// phi(x, y) = |x - y|^{2-n} + |x - y~|^{2-n}, y~ = (y_1, .., y_{n-1}, -y_n).
/// Throws DomainError when x = y or x = y~.
double image_kernel(std::span<const double> x, std::span<const double> y, int n);
/// Gradient of phi in x.
std::vector<double> image_kernel_gradient(std::span<const double> x, std::span<const double> y, int n);

struct BallSupport {
  std::array<double, 3> center{};
  double radius = 0.0;
};
/// Disc on Sigma (x_3 = 0).
struct DiscSupport {
  std::array<double, 2> center{};
  double radius = 0.0;
};

struct OracleOptions {
  int radial_points = 24;
  int angular_order = 30;
};

/// Solution of -Lap u = f in the half-space, du/deta = fbar on Sigma (eta the
/// outward normal), u -> 0, evaluated from
///   (n-2) w_{n-1} u(y) = int phi(x, y) f(x) dx + int_Sigma phi(x, y) fbar(x) dx.
/// The ball must sit on Sigma (center_3 = 0) or clear of it (center_3 >= radius);
/// f is taken even across Sigma. Invalid fields mean zero data.
ScalarField harmonic_oracle(const ScalarField& f, const BallSupport& ball, const ScalarField& fbar,
                            const DiscSupport& disc, int n = 3, const OracleOptions& opts = {});

/// A(1 - s^2/rho^2)^k with s the distance to the centre, zero outside.
struct RadialBump {
  std::array<double, 3> center{};
  double radius = 1.0;
  double amplitude = 1.0;
  int power = 3;

  double value(std::span<const double> x) const;
  /// Integral over all of R^3.
  double total() const;
  /// Closed-form half-space solution (value, gradient) outside the ball.
  std::array<double, 4> exterior_solution(std::span<const double> y) const;
  ScalarField field() const;
  BallSupport support() const { return {center, radius}; }
};

/// A(1 - s^2/a^2)^k on Sigma with s the distance to a point of Sigma.
struct DiscBump {
  std::array<double, 2> center{};
  double radius = 1.0;
  double amplitude = 1.0;
  int power = 3;

  double value(std::span<const double> x) const;
  /// Half-space solution (value, gradient) at distance > radius from the
  /// centre, summed from the axisymmetric multipole expansion.
  std::array<double, 4> exterior_solution(std::span<const double> y) const;
  ScalarField field() const;
  DiscSupport support() const { return {center, radius}; }
};

/// Sum of bump sources with a known half-space solution, restricted to the
/// truncated annulus: the cut data are the exact Neumann / Robin traces.
struct OracleProblem {
  double r_in = 1.0, r_out = 4.0;
  std::vector<RadialBump> balls;
  std::vector<DiscBump> discs;

  /// Closed-form solution (value, gradient).
  std::array<double, 4> exact(std::span<const double> y) const;
  /// Representation-formula quadrature (sum over sources). Builds the
  /// source rule on every call; use oracle_field for many points.
  double oracle(std::span<const double> y, const OracleOptions& opts = {}) const;
  ScalarField oracle_field(const OracleOptions& opts = {}) const;
  /// Distance from y to the nearest source centre divided by that source's radius.
  double clearance(std::span<const double> y) const;
  /// Loads for the truncated problem (u_inf = 0).
  struct LoadData load() const;
};

/// Random problem: one ball (on Sigma or clear of it) and, for odd draws,
/// one disc on Sigma; supports stay 0.3 r_in inside the annulus.
OracleProblem random_oracle_problem(std::uint64_t seed, double r_in, double r_out);

// ---------------------------------------------------------------------------
// Discrete boundary-value problem
//   -Lap_g u + h u = f in Omega,   du/deta + hbar u = fbar on Sigma,
//   du/dnu = q_inner on |x| = r_in,
//   d_r(u - u_inf) + (n-2)(u - u_inf)/r = q_outer on |x| = r_out,
// with Omega = {r_in <= |x| <= r_out, x_3 >= 0} and nu the outward normal of Omega.

/// Assembled trilinear finite-element operator. The potentials h and hbar
/// enter through lumped (nodal) masses; the outer Robin term likewise.
struct DiscreteOperator {
  std::shared_ptr<const DiscreteHalfAnnulus> grid;
  MetricField metric;
  SparseMatrix matrix;
  std::vector<double> volume_mass;  // int phi_i dV_g
  std::vector<double> sigma_mass;   // int_Sigma phi_i dA_g
  std::vector<double> inner_mass;   // coordinate area on |x| = r_in
  std::vector<double> outer_mass;   // coordinate area on |x| = r_out
  std::shared_ptr<const Multigrid> preconditioner;
};

struct AssemblyOptions {
  int cut_order = 6;      // per-direction points of the cut-cell rules
  int surface_order = 4;  // for boundary data on the cut spheres
  Execution execution = Execution::Parallel;
};

/// Potentials are nodal callables; empty means zero.
DiscreteOperator assemble_operator(std::shared_ptr<const DiscreteHalfAnnulus> grid, const MetricField& g,
                                   const ScalarFn& h, const ScalarFn& hbar, const AssemblyOptions& opts = {});

struct LoadData {
  ScalarFn f, fbar, q_inner, q_outer;  // empty means zero
  double u_infinity = 0.0;
  std::optional<BallSupport> f_support;  // cells outside are skipped
  bool lumped = false;                   // f and fbar sampled at nodes
};

std::vector<double> assemble_load(const DiscreteOperator& op, const LoadData& data,
                                  const AssemblyOptions& opts = {});

struct SolveOptions {
  double tolerance = 1e-10;  // relative residual
  int max_iterations = 300;
  Execution execution = Execution::Parallel;
};

struct DiscreteSolution {
  std::shared_ptr<const DiscreteHalfAnnulus> grid;
  std::vector<double> u;
  std::vector<double> load;
  std::vector<double> residual;  // load - A u
  int iterations = 0;
  double relative_residual = 0.0;

  /// Trilinear interpolation; throws DomainError outside the active cells.
  double interpolate(std::span<const double> x) const;
};

/// Jets from a local quadratic least-squares fit over the 4x4x4 active nodes
/// around x. Throws DomainError where fewer than 14 nodes are active.
Jet2 discrete_jet(const DiscreteSolution& s, std::span<const double> x);

/// Solves several loads against one operator in a single batched CG run.
/// Throws SolverError on nonconvergence.
std::vector<DiscreteSolution> solve_loads(const DiscreteOperator& op, const std::vector<std::vector<double>>& loads,
                                          const SolveOptions& opts = {});

struct BvpProblem {
  MetricField metric = flat_half_space(3);
  ScalarFn h, hbar;
  LoadData data;
};

DiscreteSolution solve_bvp(std::shared_ptr<const DiscreteHalfAnnulus> grid, const BvpProblem& problem,
                           const SolveOptions& solve = {}, const AssemblyOptions& assembly = {});

/// CSV export: a header line "n,h,r_in,r_out", its values, then "x1,x2,x3,u" rows.
void write_grid_csv(const DiscreteSolution& s, const std::string& path);

// ---------------------------------------------------------------------------
// Solver against the half-space oracle on random problems.

struct OracleStudyOptions {
  int count = 20;
  std::uint64_t first_seed = 1000;
  double r_in = 1.0, r_out = 4.0;
  double coarse_ratio = 8.0;  // h = r_in / coarse_ratio, then h / 2
  double clearance = 2.5;     // compared where distance / source radius >= clearance
  OracleOptions oracle{12, 16};
  Execution execution = Execution::Parallel;
};

/// Errors are sup-norms over the 2h sub-lattice points of the annulus that
/// satisfy the clearance, divided by the oracle sup over the same points.
struct OracleCase {
  std::uint64_t seed = 0;
  double error_coarse = 0.0, error_fine = 0.0;
  double order = 0.0;
  double error_coarse_global = 0.0;  // denominator: oracle sup over every sub-lattice point
  double oracle_vs_closed = 0.0;     // quadrature against the closed form, same normalisation
  int iterations_coarse = 0, iterations_fine = 0;
};

struct OracleStudy {
  std::vector<OracleCase> cases;
  double max_error = 0.0;
  double min_order = kInfinity, max_order = -kInfinity;
  std::size_t compared_points = 0;
};

OracleStudy oracle_study(const OracleStudyOptions& opts = {});

// ---------------------------------------------------------------------------
// Conformal flattening.

/// Smooth cutoff: 1 for t <= 1, 0 for t >= 2, built from exp(-1/t).
RadialValue cutoff(double t);

struct FlattenOptions {
  double spacing = 2.0;        // lattice spacing h (absolute)
  double inner_factor = 0.5;   // r_in = inner_factor * R_cut
  double outer_factor = 2.5;   // r_out = outer_factor * R_cut
  int mass_order = 12;
  std::size_t samples = 64;    // hypothesis and residual samples per sphere
  SolveOptions solve;
};

struct FlatteningResult {
  double R_cut = 0.0;
  MetricField g_R;
  MetricField g_bar;
  ScalarField u_R;  // interpolated conformal factor, continued as 1 + C/r + D/r^2 past r_out
  std::shared_ptr<const DiscreteSolution> discrete;
  double min_u = 0.0;
  double C = 0.0, D = 0.0;
  MassEstimate mass_g, mass_g_bar;
  double mass_delta = 0.0;
  bool within_epsilon = false;
  // Discrete scalar / mean curvature of g_bar at nodes with r >= 2 R_cut.
  double scalar_residual = 0.0, mean_residual = 0.0;
  double residual_scale = 0.0;  // a_n * tolerance * max |b_i| / m_i
  // Same quantities from the interpolated field at sample points (informational).
  double scalar_sampled = 0.0, mean_sampled = 0.0;
  bool hypotheses_hold = true;
  std::vector<std::string> warnings;
};

/// Throws PositivityError (a DomainError) if u_R <= 0 somewhere, SolverError
/// on solver failure.
FlatteningResult conformal_flatten(const MetricField& g, double R_cut, double epsilon,
                                   const FlattenOptions& opts = {});

// ---------------------------------------------------------------------------
// Weighted norms and the asymptotic coefficient.

struct WeightedNormSpec {
  std::vector<double> radii{1, 2, 4, 8, 16, 32};  // all >= 1
  std::size_t points = 96;
  std::uint64_t seed = 0x5eed;
  double growth_slack = 0.25;
};

struct WeightedNormReport {
  double gamma = 0.0;
  int k = 0;
  double estimated_norm = 0.0;  // +infinity when the weighted sup grows with r
  std::array<double, 3> terms{};  // sup r^{-gamma+i} |grad^i u|
  double fitted_decay = kInfinity;  // d with |u| ~ r^{-d}
  bool finite = true;
};

WeightedNormReport weighted_norm(const ScalarField& u, double gamma, int k, const WeightedNormSpec& spec = {});

/// (int |r^{-beta} u|^q r^{-n} dM)^{1/q} over r_min <= |x| <= r_max.
double lq_norm(const ScalarField& u, double q, double beta, double r_min, double r_max, int order = 16);

struct AsymptoticFit {
  double C = 0.0;
  double correction = 0.0;  // coefficient of r^{1-n}
  double relative_residual = 0.0;
  bool flagged = false;  // fit residual above 5 %
};

/// Least-squares fit of (u - u_inf) r^{n-2} = C + D/r over hemispherical
/// shell averages at `radii`.
AsymptoticFit asymptotic_coefficient(const ScalarField& u, double u_infinity, std::span<const double> radii,
                                     int order = 12);
AsymptoticFit asymptotic_coefficient(const DiscreteSolution& u, double u_infinity, std::span<const double> radii,
                                     int order = 12);

/// c(n) = 1 / (2 (n-1) w_{n-1}), so that C = c(n) m.
double coefficient_factor(int n);

}  // namespace halfmass
