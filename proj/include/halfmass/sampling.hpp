#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <span>
#include <vector>

namespace halfmass {

/// Points stored contiguously, `n` coordinates per point.
struct PointSet {
  int n = 0;
  std::vector<double> coords;

  std::size_t size() const noexcept { return n ? coords.size() / static_cast<std::size_t>(n) : 0; }
  std::span<const double> operator[](std::size_t i) const {
    return {coords.data() + i * static_cast<std::size_t>(n), static_cast<std::size_t>(n)};
  }
};

enum class SphereRegion { UpperHemisphere, Equator, FullSphere };

/// Deterministic pseudo-random points on the coordinate sphere of radius r.
inline PointSet sample_sphere(int n, double r, std::size_t count, SphereRegion region,
                              std::uint64_t seed = 0x5eed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  PointSet out{n, {}};
  out.coords.reserve(count * static_cast<std::size_t>(n));
  std::vector<double> p(static_cast<std::size_t>(n));
  for (std::size_t k = 0; k < count; ++k) {
    double s2 = 0.0;
    do {
      s2 = 0.0;
      for (auto& v : p) {
        v = normal(rng);
        s2 += v * v;
      }
      if (region == SphereRegion::Equator) {
        s2 -= p.back() * p.back();
        p.back() = 0.0;
      }
    } while (s2 < 1e-12);
    if (region == SphereRegion::UpperHemisphere) p.back() = std::abs(p.back());
    const double scale = r / std::sqrt(s2);
    for (double v : p) out.coords.push_back(v * scale);
  }
  return out;
}

/// Decay rate d of a sampled quantity q(r) ~ r^{-d}, by least squares in
/// log-log coordinates. Samples at or below `floor` count as zero; with fewer
/// than two nonzero samples the rate is +infinity.
inline double fit_decay_rate(std::span<const double> radii, std::span<const double> values,
                             double floor = 0.0) {
  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  int m = 0;
  for (std::size_t i = 0; i < radii.size(); ++i) {
    if (!(values[i] > floor)) continue;
    const double lx = std::log(radii[i]);
    const double ly = std::log(values[i]);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
    ++m;
  }
  if (m < 2) return std::numeric_limits<double>::infinity();
  const double denom = m * sxx - sx * sx;
  if (denom <= 0.0) return std::numeric_limits<double>::infinity();
  return -(m * sxy - sx * sy) / denom;
}

}  // namespace halfmass
