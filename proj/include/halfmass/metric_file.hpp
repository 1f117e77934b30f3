#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "halfmass/expr.hpp"
#include "halfmass/metric.hpp"

namespace halfmass {

/// Line-oriented metric description:
///
///     file    := { line }
///     line    := blank | '#' text | key '=' value
///     key     := 'dimension' | 'tau' | 'r0' | 'family' | 'm' | 'u' | 'a' DIGIT DIGIT
///              | 'flags' | 'schedule' | 'const' NAME | 'motion_seed' | 'motion_shift'
///
/// family is one of flat, half_schwarzschild (needs m), conformal (needs u,
/// the factor of the flat metric) and perturbation (g = delta + a, entries
/// a_ij with 1 <= i <= j <= n; missing entries are 0). An entry a_ji with
/// i < j may repeat a_ij but must be the same expression. flags lists
/// conformally_flat and boundary_orthogonal; schedule lists radii. A
/// motion_seed pulls the metric back by a random boundary-preserving rigid
/// motion with translation at most motion_shift (default 0).
struct MetricFile {
  int n = 0;
  std::optional<double> tau;
  std::optional<double> r0;
  std::string family;
  double m = 0.0;
  std::string u;
  std::vector<std::string> a;  // packed order, empty means 0
  std::vector<std::string> flags;
  std::vector<double> schedule;
  ConstantTable constants;
  std::optional<std::uint64_t> motion_seed;
  double motion_shift = 0.0;
};

/// Throws ParseError whose position is the 1-based line number.
MetricFile parse_metric_file(std::string_view text);
MetricFile load_metric_file(const std::string& path);

/// The declared tau, when present, replaces the family's own value.
MetricField build_metric(const MetricFile& f);

}  // namespace halfmass
