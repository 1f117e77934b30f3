#include "halfmass/expr.hpp"

#include <bit>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <numbers>
#include <utility>

#include "halfmass/error.hpp"

namespace halfmass {

struct Expression::Impl {
  int n = 0;
  std::vector<Node> nodes;  // post-order: operands precede their operator
};

namespace {

using Op = Expression::Op;
using Node = Expression::Node;

constexpr int kMaxNesting = 200;

bool is_binary(Op op) { return op == Op::Add || op == Op::Sub || op == Op::Mul || op == Op::Div; }

/// Scalar function g and its derivatives for the unary ops.
struct Derivs {
  double g, d1, d2;
};

Derivs pow_derivs(double b, double c) {
  if (c == 0.0) return {1.0, 0.0, 0.0};
  if (c == 1.0) return {b, 1.0, 0.0};
  const bool integer = std::floor(c) == c;
  if (!integer && b < 0.0) throw DomainError("fractional power of a negative base");
  if (b == 0.0 && c < 0.0) throw DomainError("division by zero in negative power");
  const double g = std::pow(b, c);
  const double d1 = c * std::pow(b, c - 1.0);
  const double d2 = (c == 2.0) ? 2.0 : c * (c - 1.0) * std::pow(b, c - 2.0);
  if (!std::isfinite(g) || !std::isfinite(d1) || !std::isfinite(d2))
    throw DomainError("power is not twice differentiable at this point");
  return {g, d1, d2};
}

Derivs unary_derivs(const Node& node, double b) {
  switch (node.op) {
    case Op::Neg:
      return {-b, -1.0, 0.0};
    case Op::Sqrt: {
      if (b <= 0.0) throw DomainError("sqrt of a non-positive value");
      const double s = std::sqrt(b);
      return {s, 0.5 / s, -0.25 / (s * b)};
    }
    case Op::Exp: {
      const double e = std::exp(b);
      if (!std::isfinite(e)) throw DomainError("exp overflow");
      return {e, e, e};
    }
    case Op::Log:
      if (b <= 0.0) throw DomainError("log of a non-positive value");
      return {std::log(b), 1.0 / b, -1.0 / (b * b)};
    case Op::Pow:
      return pow_derivs(b, node.constant);
    default:
      break;
  }
  throw DomainError("internal: not a unary operator");
}

double binary_value(Op op, double a, double b) {
  switch (op) {
    case Op::Add:
      return a + b;
    case Op::Sub:
      return a - b;
    case Op::Mul:
      return a * b;
    case Op::Div:
      if (b == 0.0) throw DomainError("division by zero");
      return a / b;
    default:
      break;
  }
  throw DomainError("internal: not a binary operator");
}

Jet2 binary_jet(Op op, const Jet2& a, const Jet2& b) {
  switch (op) {
    case Op::Add:
      return a + b;
    case Op::Sub:
      return a - b;
    case Op::Mul:
      return a * b;
    case Op::Div:
      if (b.value == 0.0) throw DomainError("division by zero");
      return a / b;
    default:
      break;
  }
  throw DomainError("internal: not a binary operator");
}

class Parser {
 public:
  Parser(std::string_view src, int n, const ConstantTable& constants)
      : src_(src), n_(n), constants_(constants) {}

  std::vector<Node> run(int& root) {
    skip_ws();
    if (pos_ >= src_.size()) throw ParseError(pos_, "empty expression");
    root = expr();
    skip_ws();
    if (pos_ < src_.size())
      throw ParseError(pos_, std::string("unexpected character '") + src_[pos_] + "'");
    return std::move(nodes_);
  }

 private:
  void skip_ws() {
    while (pos_ < src_.size() && std::isspace(static_cast<unsigned char>(src_[pos_]))) ++pos_;
  }

  bool accept(char c) {
    skip_ws();
    if (pos_ < src_.size() && src_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  void expect(char c) {
    if (!accept(c)) {
      if (pos_ >= src_.size())
        throw ParseError(pos_, std::string("expected '") + c + "' before end of input");
      throw ParseError(pos_, std::string("expected '") + c + "'");
    }
  }

  struct DepthGuard {
    explicit DepthGuard(Parser& p) : p_(p) {
      if (++p_.depth_ > kMaxNesting) throw ParseError(p_.pos_, "expression nested too deeply");
    }
    ~DepthGuard() { --p_.depth_; }
    Parser& p_;
  };

  int push(Node node) {
    nodes_.push_back(node);
    return static_cast<int>(nodes_.size()) - 1;
  }

  bool is_const(int i) const { return nodes_[static_cast<std::size_t>(i)].op == Op::Constant; }
  double cval(int i) const { return nodes_[static_cast<std::size_t>(i)].constant; }

  int make_constant(double v, std::size_t at) {
    if (!std::isfinite(v)) throw ParseError(at, "constant folds to a non-finite value");
    Node c;
    c.op = Op::Constant;
    c.constant = v;
    return push(c);
  }

  int make_binary(Op op, int lhs, int rhs, std::size_t at) {
    if (is_const(lhs) && is_const(rhs)) {
      try {
        return make_constant(binary_value(op, cval(lhs), cval(rhs)), at);
      } catch (const DomainError& e) {
        throw ParseError(at, e.what());
      }
    }
    Node b;
    b.op = op;
    b.lhs = lhs;
    b.rhs = rhs;
    return push(b);
  }

  int make_unary(Op op, int arg, double exponent, std::size_t at) {
    Node u;
    u.op = op;
    u.lhs = arg;
    u.constant = exponent;
    if (is_const(arg)) {
      try {
        return make_constant(unary_derivs(u, cval(arg)).g, at);
      } catch (const DomainError& e) {
        throw ParseError(at, e.what());
      }
    }
    return push(u);
  }

  int expr() {
    DepthGuard guard(*this);
    int lhs = term();
    for (;;) {
      skip_ws();
      const std::size_t at = pos_;
      if (accept('+')) {
        lhs = make_binary(Op::Add, lhs, term(), at);
      } else if (accept('-')) {
        lhs = make_binary(Op::Sub, lhs, term(), at);
      } else {
        return lhs;
      }
    }
  }

  int term() {
    int lhs = unary();
    for (;;) {
      skip_ws();
      const std::size_t at = pos_;
      if (accept('*')) {
        lhs = make_binary(Op::Mul, lhs, unary(), at);
      } else if (accept('/')) {
        lhs = make_binary(Op::Div, lhs, unary(), at);
      } else {
        return lhs;
      }
    }
  }

  int unary() {
    DepthGuard guard(*this);
    skip_ws();
    const std::size_t at = pos_;
    if (accept('-')) return make_unary(Op::Neg, unary(), 0.0, at);
    if (accept('+')) return unary();
    return power();
  }

  int power() {
    const int base = primary();
    skip_ws();
    const std::size_t at = pos_;
    if (!accept('^')) return base;
    const int exponent = unary();
    if (!is_const(exponent)) throw ParseError(at, "exponent must be a constant");
    return make_unary(Op::Pow, base, cval(exponent), at);
  }

  int primary() {
    skip_ws();
    if (pos_ >= src_.size()) throw ParseError(pos_, "unexpected end of input");
    const std::size_t at = pos_;
    const char c = src_[pos_];
    if (c == '(') {
      ++pos_;
      const int inner = expr();
      expect(')');
      return inner;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return number();
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      std::size_t end = pos_;
      while (end < src_.size() &&
             (std::isalnum(static_cast<unsigned char>(src_[end])) || src_[end] == '_'))
        ++end;
      const std::string_view name = src_.substr(pos_, end - pos_);
      pos_ = end;
      return identifier(name, at);
    }
    throw ParseError(at, std::string("unexpected character '") + c + "'");
  }

  int number() {
    const std::size_t at = pos_;
    double v = 0.0;
    const char* first = src_.data() + pos_;
    const char* last = src_.data() + src_.size();
    auto [ptr, ec] = std::from_chars(first, last, v);
    if (ec != std::errc() || ptr == first) throw ParseError(at, "malformed number");
    pos_ += static_cast<std::size_t>(ptr - first);
    return make_constant(v, at);
  }

  int identifier(std::string_view name, std::size_t at) {
    if (name == "sqrt" || name == "exp" || name == "log") {
      const Op op = name == "sqrt" ? Op::Sqrt : (name == "exp" ? Op::Exp : Op::Log);
      expect('(');
      const int arg = expr();
      expect(')');
      return make_unary(op, arg, 0.0, at);
    }
    if (name == "r") {
      Node node;
      node.op = Op::Radius;
      return push(node);
    }
    if (name.size() >= 2 && name[0] == 'x' &&
        name.find_first_not_of("0123456789", 1) == std::string_view::npos) {
      int index = 0;
      auto [ptr, ec] = std::from_chars(name.data() + 1, name.data() + name.size(), index);
      if (ec != std::errc() || index < 1 || index > n_)
        throw ParseError(at, "coordinate index out of range: " + std::string(name) +
                                 " (dimension " + std::to_string(n_) + ")");
      Node node;
      node.op = Op::Coordinate;
      node.index = index - 1;
      return push(node);
    }
    if (auto it = constants_.find(name); it != constants_.end()) return make_constant(it->second, at);
    if (name == "pi") return make_constant(std::numbers::pi, at);
    throw ParseError(at, "unknown identifier '" + std::string(name) + "'");
  }

  std::string_view src_;
  int n_;
  const ConstantTable& constants_;
  std::vector<Node> nodes_;
  std::size_t pos_ = 0;
  int depth_ = 0;
};

/// Drops nodes orphaned by constant folding and renumbers in post-order.
std::vector<Node> compact(const std::vector<Node>& arena, int root) {
  std::vector<Node> out;
  out.reserve(arena.size());
  struct Frame {
    int id;
    int state;
    int lhs_new;
  };
  std::vector<Frame> stack{{root, 0, -1}};
  std::vector<int> results;
  while (!stack.empty()) {
    Frame& f = stack.back();
    const Node& node = arena[static_cast<std::size_t>(f.id)];
    if (f.state == 0 && node.lhs >= 0) {
      f.state = 1;
      stack.push_back({node.lhs, 0, -1});
      continue;
    }
    if (f.state <= 1 && node.rhs >= 0) {
      if (node.lhs >= 0) {
        f.lhs_new = results.back();
        results.pop_back();
      }
      f.state = 2;
      stack.push_back({node.rhs, 0, -1});
      continue;
    }
    Node copy = node;
    if (node.rhs >= 0) {
      copy.rhs = results.back();
      results.pop_back();
      copy.lhs = f.lhs_new;
    } else if (node.lhs >= 0) {
      copy.lhs = results.back();
      results.pop_back();
    }
    out.push_back(copy);
    results.push_back(static_cast<int>(out.size()) - 1);
    stack.pop_back();
  }
  return out;
}

std::string format_number(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

struct Scratch {
  std::vector<Jet2> jets;
  std::vector<double> values;
};

Scratch& scratch() {
  thread_local Scratch s;
  return s;
}

void check_finite(const Jet2& j) {
  bool ok = std::isfinite(j.value);
  for (int i = 0; i < j.n; ++i) ok = ok && std::isfinite(j.grad[i]);
  for (int k = 0; k < packed_size(j.n); ++k) ok = ok && std::isfinite(j.hess[k]);
  if (!ok) throw DomainError("expression is not finite at this point");
}

}  // namespace

Expression::Expression(std::shared_ptr<const Impl> impl) : impl_(std::move(impl)) {}

Expression Expression::parse(std::string_view source, int n, const ConstantTable& constants) {
  if (n < 3 || n > kMaxDim)
    throw InvalidArgument("expression dimension must be in [3, " + std::to_string(kMaxDim) + "]");
  Parser parser(source, n, constants);
  int root = -1;
  std::vector<Node> arena = parser.run(root);
  auto impl = std::make_shared<Impl>();
  impl->n = n;
  impl->nodes = compact(arena, root);
  return Expression(std::move(impl));
}

Expression Expression::constant(int n, double value) {
  auto impl = std::make_shared<Impl>();
  impl->n = n;
  Node c;
  c.op = Op::Constant;
  c.constant = value;
  impl->nodes.push_back(c);
  return Expression(std::move(impl));
}

int Expression::dimension() const noexcept { return impl_->n; }
std::size_t Expression::node_count() const noexcept { return impl_->nodes.size(); }
int Expression::root() const noexcept { return static_cast<int>(impl_->nodes.size()) - 1; }
const std::vector<Expression::Node>& Expression::nodes() const { return impl_->nodes; }

int Expression::spine_length() const {
  int len = 0;
  for (int id = root(); id >= 0;) {
    ++len;
    const Node& nd = node(id);
    id = nd.rhs >= 0 ? nd.rhs : nd.lhs;
  }
  return len;
}

std::string Expression::to_string() const {
  const auto& ns = nodes();
  std::vector<std::string> text(ns.size());
  for (std::size_t i = 0; i < ns.size(); ++i) {
    const Node& nd = ns[i];
    auto arg = [&](int k) -> const std::string& { return text[static_cast<std::size_t>(k)]; };
    switch (nd.op) {
      case Op::Constant:
        text[i] = format_number(nd.constant);
        break;
      case Op::Coordinate:
        text[i] = "x" + std::to_string(nd.index + 1);
        break;
      case Op::Radius:
        text[i] = "r";
        break;
      case Op::Add:
        text[i] = "(" + arg(nd.lhs) + " + " + arg(nd.rhs) + ")";
        break;
      case Op::Sub:
        text[i] = "(" + arg(nd.lhs) + " - " + arg(nd.rhs) + ")";
        break;
      case Op::Mul:
        text[i] = "(" + arg(nd.lhs) + " * " + arg(nd.rhs) + ")";
        break;
      case Op::Div:
        text[i] = "(" + arg(nd.lhs) + " / " + arg(nd.rhs) + ")";
        break;
      case Op::Neg:
        text[i] = "(-" + arg(nd.lhs) + ")";
        break;
      case Op::Pow:
        text[i] = "(" + arg(nd.lhs) + " ^ " + format_number(nd.constant) + ")";
        break;
      case Op::Sqrt:
        text[i] = "sqrt(" + arg(nd.lhs) + ")";
        break;
      case Op::Exp:
        text[i] = "exp(" + arg(nd.lhs) + ")";
        break;
      case Op::Log:
        text[i] = "log(" + arg(nd.lhs) + ")";
        break;
    }
  }
  return text.back();
}

Jet2 Expression::eval_jet(std::span<const double> x) const {
  const int n = dimension();
  if (static_cast<int>(x.size()) != n) throw InvalidArgument("point dimension mismatch");
  const auto& ns = nodes();
  auto& jets = scratch().jets;
  jets.resize(ns.size());
  for (std::size_t i = 0; i < ns.size(); ++i) {
    const Node& nd = ns[i];
    auto arg = [&](int k) -> const Jet2& { return jets[static_cast<std::size_t>(k)]; };
    switch (nd.op) {
      case Op::Constant:
        jets[i] = Jet2::constant(n, nd.constant);
        break;
      case Op::Coordinate:
        jets[i] = Jet2::coordinate(n, nd.index, x[static_cast<std::size_t>(nd.index)]);
        break;
      case Op::Radius: {
        double r2 = 0.0;
        for (double v : x) r2 += v * v;
        if (r2 == 0.0) throw DomainError("r = 0");
        jets[i] = radius_jet(x);
        break;
      }
      default:
        if (is_binary(nd.op)) {
          jets[i] = binary_jet(nd.op, arg(nd.lhs), arg(nd.rhs));
        } else {
          const Jet2& a = arg(nd.lhs);
          const Derivs d = unary_derivs(nd, a.value);
          jets[i] = a.chain(d.g, d.d1, d.d2);
        }
        break;
    }
  }
  Jet2 out = jets.back();
  check_finite(out);
  return out;
}

double Expression::eval(std::span<const double> x) const {
  const int n = dimension();
  if (static_cast<int>(x.size()) != n) throw InvalidArgument("point dimension mismatch");
  const auto& ns = nodes();
  auto& vals = scratch().values;
  vals.resize(ns.size());
  for (std::size_t i = 0; i < ns.size(); ++i) {
    const Node& nd = ns[i];
    switch (nd.op) {
      case Op::Constant:
        vals[i] = nd.constant;
        break;
      case Op::Coordinate:
        vals[i] = x[static_cast<std::size_t>(nd.index)];
        break;
      case Op::Radius: {
        double r2 = 0.0;
        for (double v : x) r2 += v * v;
        if (r2 == 0.0) throw DomainError("r = 0");
        vals[i] = std::sqrt(r2);
        break;
      }
      default:
        if (is_binary(nd.op)) {
          vals[i] = binary_value(nd.op, vals[static_cast<std::size_t>(nd.lhs)],
                                 vals[static_cast<std::size_t>(nd.rhs)]);
        } else {
          vals[i] = unary_derivs(nd, vals[static_cast<std::size_t>(nd.lhs)]).g;
        }
        break;
    }
  }
  if (!std::isfinite(vals.back())) throw DomainError("expression is not finite at this point");
  return vals.back();
}

bool operator==(const Expression& a, const Expression& b) {
  if (a.dimension() != b.dimension() || a.node_count() != b.node_count()) return false;
  for (std::size_t i = 0; i < a.node_count(); ++i) {
    const auto& x = a.nodes()[i];
    const auto& y = b.nodes()[i];
    if (x.op != y.op || x.lhs != y.lhs || x.rhs != y.rhs) return false;
    if (x.op == Expression::Op::Coordinate && x.index != y.index) return false;
    if ((x.op == Expression::Op::Constant || x.op == Expression::Op::Pow) &&
        std::bit_cast<std::uint64_t>(x.constant) != std::bit_cast<std::uint64_t>(y.constant))
      return false;
  }
  return true;
}

}  // namespace halfmass
