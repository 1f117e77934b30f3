#pragma once

#include <cmath>
#include <functional>
#include <random>
#include <span>
#include <vector>

#include "halfmass/jet.hpp"

namespace test {

inline constexpr double kPi = 3.14159265358979323846;

// Fourth-order central difference of f along coordinate i.
inline double central_difference(const std::function<double(std::span<const double>)>& f,
                                 std::vector<double> x, int i, double h) {
  const double x0 = x[static_cast<std::size_t>(i)];
  auto at = [&](double t) {
    x[static_cast<std::size_t>(i)] = x0 + t;
    return f(x);
  };
  return (-at(2 * h) + 8 * at(h) - 8 * at(-h) + at(-2 * h)) / (12 * h);
}

inline bool close(double a, double b, double rel, double abs_floor = 0.0) {
  return std::abs(a - b) <= std::max(rel * std::max(std::abs(a), std::abs(b)), abs_floor);
}

}  // namespace test
