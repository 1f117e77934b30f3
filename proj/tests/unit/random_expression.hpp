#pragma once

#include <random>
#include <string>

namespace test {

// Random expression over x1..x3 and r whose every subexpression is finite
// for r in [1.5, 4]: arguments of sqrt, log, / and ^ are shifted to be >= 1.5.
inline std::string random_expression(std::mt19937_64& rng, int depth) {
  std::uniform_int_distribution<int> pick(0, 9);
  std::uniform_real_distribution<double> c(0.25, 2.0);
  auto leaf = [&]() -> std::string {
    switch (pick(rng) % 5) {
      case 0: return std::to_string(c(rng));
      case 1: return "x1";
      case 2: return "x2";
      case 3: return "x3";
      default: return "r";
    }
  };
  if (depth == 0) return leaf();
  const std::string a = random_expression(rng, depth - 1);
  const std::string b = random_expression(rng, depth - 1);
  const std::string pos = "(1.5 + (" + b + ")^2)";
  switch (pick(rng)) {
    case 0: return "(" + a + ") + (" + b + ")";
    case 1: return "(" + a + ") - (" + b + ")";
    case 2: return "(" + a + ") * (" + b + ")";
    case 3: return "(" + a + ") / " + pos;
    case 4: return "sqrt" + pos;
    case 5: return "log" + pos;
    case 6: return "exp(0.2*sin_free(" + a + "))";
    case 7: return pos + "^(-0.7)";
    case 8: return "-(" + a + ")";
    default: return leaf();
  }
}

inline std::string clean(std::string s) {
  // exp argument kept bounded: 0.2 * a / (1 + a^2) lies in [-0.1, 0.1].
  const std::string tag = "sin_free(";
  for (std::size_t p; (p = s.find(tag)) != std::string::npos;) {
    std::size_t depth = 1, q = p + tag.size();
    while (depth) {
      if (s[q] == '(') ++depth;
      if (s[q] == ')') --depth;
      ++q;
    }
    const std::string inner = s.substr(p + tag.size(), q - 1 - (p + tag.size()));
    s = s.substr(0, p) + "(" + inner + ")/(1 + (" + inner + ")^2)" + s.substr(q);
  }
  return s;
}

}  // namespace test
