#pragma once

#include <array>
#include <cassert>
#include <cmath>
#include <span>

namespace halfmass {

inline constexpr int kMaxDim = 7;
inline constexpr int kMaxPacked = kMaxDim * (kMaxDim + 1) / 2;

/// Index of (i, j) in column-packed symmetric storage. Independent of the
/// dimension so that packed arrays can be sized for kMaxDim.
constexpr int packed_index(int i, int j) noexcept {
  return i <= j ? j * (j + 1) / 2 + i : i * (i + 1) / 2 + j;
}

constexpr int packed_size(int n) noexcept { return n * (n + 1) / 2; }

/// Value, gradient and Hessian of a scalar function at a point. The Hessian
/// is stored packed, so it is symmetric by construction.
struct Jet2 {
  int n = 0;
  double value = 0.0;
  std::array<double, kMaxDim> grad{};
  std::array<double, kMaxPacked> hess{};

  Jet2() = default;
  explicit Jet2(int dim, double v = 0.0) : n(dim), value(v) {}

  static Jet2 constant(int dim, double v) { return Jet2(dim, v); }

  /// The coordinate function x_i (0-based).
  static Jet2 coordinate(int dim, int i, double xi) {
    Jet2 j(dim, xi);
    j.grad[i] = 1.0;
    return j;
  }

  double h(int i, int j) const noexcept { return hess[packed_index(i, j)]; }
  double& h(int i, int j) noexcept { return hess[packed_index(i, j)]; }

  double laplacian() const noexcept {
    double s = 0.0;
    for (int i = 0; i < n; ++i) s += h(i, i);
    return s;
  }

  /// g(this) for a scalar function g with derivatives d1 = g', d2 = g''.
  Jet2 chain(double g, double d1, double d2) const {
    Jet2 out(n, g);
    for (int i = 0; i < n; ++i) out.grad[i] = d1 * grad[i];
    for (int j = 0; j < n; ++j)
      for (int i = 0; i <= j; ++i)
        out.h(i, j) = d2 * grad[i] * grad[j] + d1 * h(i, j);
    return out;
  }

  Jet2& operator+=(const Jet2& o) {
    value += o.value;
    const int p = packed_size(n);
    for (int i = 0; i < n; ++i) grad[i] += o.grad[i];
    for (int k = 0; k < p; ++k) hess[k] += o.hess[k];
    return *this;
  }
  Jet2& operator-=(const Jet2& o) {
    value -= o.value;
    const int p = packed_size(n);
    for (int i = 0; i < n; ++i) grad[i] -= o.grad[i];
    for (int k = 0; k < p; ++k) hess[k] -= o.hess[k];
    return *this;
  }
  Jet2& operator*=(double s) {
    value *= s;
    const int p = packed_size(n);
    for (int i = 0; i < n; ++i) grad[i] *= s;
    for (int k = 0; k < p; ++k) hess[k] *= s;
    return *this;
  }
  Jet2& operator+=(double s) {
    value += s;
    return *this;
  }
};

inline Jet2 operator+(Jet2 a, const Jet2& b) { return a += b; }
inline Jet2 operator-(Jet2 a, const Jet2& b) { return a -= b; }
inline Jet2 operator*(Jet2 a, double s) { return a *= s; }
inline Jet2 operator*(double s, Jet2 a) { return a *= s; }
inline Jet2 operator+(Jet2 a, double s) { return a += s; }
inline Jet2 operator-(const Jet2& a) { return a * -1.0; }

inline Jet2 operator*(const Jet2& a, const Jet2& b) {
  assert(a.n == b.n);
  const int n = a.n;
  Jet2 out(n, a.value * b.value);
  for (int i = 0; i < n; ++i) out.grad[i] = a.grad[i] * b.value + a.value * b.grad[i];
  for (int j = 0; j < n; ++j)
    for (int i = 0; i <= j; ++i)
      out.h(i, j) = a.h(i, j) * b.value + a.grad[i] * b.grad[j] +
                    a.grad[j] * b.grad[i] + a.value * b.h(i, j);
  return out;
}

/// 1/a; the caller checks a.value != 0.
inline Jet2 reciprocal(const Jet2& a) {
  const double inv = 1.0 / a.value;
  return a.chain(inv, -inv * inv, 2.0 * inv * inv * inv);
}

inline Jet2 operator/(const Jet2& a, const Jet2& b) { return a * reciprocal(b); }

/// Jet of r = |x|. Requires r > 0.
inline Jet2 radius_jet(std::span<const double> x) {
  const int n = static_cast<int>(x.size());
  double r2 = 0.0;
  for (double v : x) r2 += v * v;
  const double r = std::sqrt(r2);
  Jet2 out(n, r);
  for (int i = 0; i < n; ++i) out.grad[i] = x[i] / r;
  for (int j = 0; j < n; ++j)
    for (int i = 0; i <= j; ++i)
      out.h(i, j) = ((i == j ? 1.0 : 0.0) - x[i] * x[j] / r2) / r;
  return out;
}

/// Jet of f(|x|) from the radial profile and its first two derivatives.
inline Jet2 radial_jet(std::span<const double> x, double f, double df, double d2f) {
  return radius_jet(x).chain(f, df, d2f);
}

}  // namespace halfmass
