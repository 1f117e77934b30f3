#pragma once

#include <map>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "halfmass/jet.hpp"

namespace halfmass {

/// Named constants substituted (and folded) at parse time.
using ConstantTable = std::map<std::string, double, std::less<>>;

/// Immutable arithmetic expression in the coordinates x1..xn and r = |x|.
///
/// Grammar (whitespace insensitive):
///
///     expr    := term (('+' | '-') term)*
///     term    := unary (('*' | '/') unary)*
///     unary   := ('+' | '-') unary | power
///     power   := primary ('^' unary)?          exponent must fold to a constant
///     primary := NUMBER | 'x' INDEX | 'r' | NAME | FUNC '(' expr ')' | '(' expr ')'
///     FUNC    := 'sqrt' | 'exp' | 'log'
///
/// NAME is looked up in the constant table; `pi` is always defined.
/// Subtrees whose operands are all constants are folded during parsing.
class Expression {
 public:
  enum class Op { Constant, Coordinate, Radius, Add, Sub, Mul, Div, Neg, Pow, Sqrt, Exp, Log };

  struct Node {
    Op op = Op::Constant;
    double constant = 0.0;  // Constant value, or the exponent of Pow
    int index = 0;          // Coordinate index (0-based)
    int lhs = -1;
    int rhs = -1;
  };

  /// Parses `source` for ambient dimension `n` (n >= 3). Throws ParseError.
  static Expression parse(std::string_view source, int n, const ConstantTable& constants = {});
  static Expression constant(int n, double value);

  int dimension() const noexcept;
  std::size_t node_count() const noexcept;
  const Node& node(int i) const { return nodes()[static_cast<std::size_t>(i)]; }
  int root() const noexcept;

  /// Length of the path from the root that always descends into the last
  /// operand of each node.
  int spine_length() const;

  bool is_constant() const { return node(root()).op == Op::Constant; }

  /// Canonical fully parenthesised text; parse(to_string()) reproduces the tree.
  std::string to_string() const;

  /// Exact value, gradient and Hessian at x. Throws DomainError.
  Jet2 eval_jet(std::span<const double> x) const;
  /// Value only. Throws DomainError.
  double eval(std::span<const double> x) const;

  /// Structural equality (constants compared exactly).
  friend bool operator==(const Expression& a, const Expression& b);

 private:
  struct Impl;
  explicit Expression(std::shared_ptr<const Impl> impl);
  const std::vector<Node>& nodes() const;
  std::shared_ptr<const Impl> impl_;
};

/// Free-function spelling used by the CLI and metric file loader.
inline Expression parse_scalar_field(std::string_view source, int n,
                                     const ConstantTable& constants = {}) {
  return Expression::parse(source, n, constants);
}

inline Jet2 eval_jet(const Expression& e, std::span<const double> x) { return e.eval_jet(x); }

}  // namespace halfmass
