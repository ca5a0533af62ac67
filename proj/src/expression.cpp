#include "magloop/expression.hpp"

#include <cctype>
#include <cmath>
#include <numbers>
#include <vector>

#include "magloop/errors.hpp"

namespace magloop {

struct Expression::Node {
  enum class Op { Const, X, Y, Add, Sub, Mul, Div, Pow, Neg, Call };
  Op op = Op::Const;
  double value = 0.0;
  std::string fn;
  std::vector<std::shared_ptr<const Node>> args;
};

namespace {

using NodePtr = std::shared_ptr<const Expression::Node>;
using Op = Expression::Node::Op;

NodePtr make(Op op, std::vector<NodePtr> args = {}, double value = 0.0, std::string fn = {}) {
  auto n = std::make_shared<Expression::Node>();
  n->op = op;
  n->args = std::move(args);
  n->value = value;
  n->fn = std::move(fn);
  return n;
}

class Parser {
 public:
  explicit Parser(const std::string& s) : s_(s) {}

  NodePtr parse() {
    NodePtr n = expr();
    skip_ws();
    if (pos_ != s_.size()) fail("unexpected trailing input");
    return n;
  }

 private:
  [[noreturn]] void fail(const std::string& msg) const {
    throw Error(ErrorKind::Config,
                "expression '" + s_ + "' column " + std::to_string(pos_ + 1) + ": " + msg);
  }

  void skip_ws() {
    while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
  }

  bool accept(char c) {
    skip_ws();
    if (pos_ < s_.size() && s_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  NodePtr expr() {
    NodePtr lhs = term();
    for (;;) {
      if (accept('+')) {
        lhs = make(Op::Add, {lhs, term()});
      } else if (accept('-')) {
        lhs = make(Op::Sub, {lhs, term()});
      } else {
        return lhs;
      }
    }
  }

  NodePtr term() {
    NodePtr lhs = unary();
    for (;;) {
      if (accept('*')) {
        lhs = make(Op::Mul, {lhs, unary()});
      } else if (accept('/')) {
        lhs = make(Op::Div, {lhs, unary()});
      } else {
        return lhs;
      }
    }
  }

  NodePtr unary() {
    if (accept('-')) return make(Op::Neg, {unary()});
    if (accept('+')) return unary();
    return power();
  }

  // right associative; the exponent may carry its own sign
  NodePtr power() {
    NodePtr base = primary();
    if (accept('^')) return make(Op::Pow, {base, unary()});
    return base;
  }

  NodePtr primary() {
    skip_ws();
    if (pos_ >= s_.size()) fail("unexpected end of expression");
    const char c = s_[pos_];
    if (c == '(') {
      ++pos_;
      NodePtr n = expr();
      if (!accept(')')) fail("expected ')'");
      return n;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
      const char* begin = s_.c_str() + pos_;
      char* end = nullptr;
      const double v = std::strtod(begin, &end);
      if (end == begin) fail("bad number");
      pos_ += static_cast<std::size_t>(end - begin);
      return make(Op::Const, {}, v);
    }
    if (std::isalpha(static_cast<unsigned char>(c))) {
      const std::size_t start = pos_;
      while (pos_ < s_.size() && (std::isalnum(static_cast<unsigned char>(s_[pos_])) || s_[pos_] == '_')) ++pos_;
      const std::string name = s_.substr(start, pos_ - start);
      if (name == "x") return make(Op::X);
      if (name == "y") return make(Op::Y);
      if (name == "pi") return make(Op::Const, {}, std::numbers::pi);
      static const char* kFunctions[] = {"exp", "log", "sin", "cos", "sqrt", "tanh", "sinh", "cosh"};
      for (const char* f : kFunctions) {
        if (name == f) {
          if (!accept('(')) fail("expected '(' after " + name);
          NodePtr arg = expr();
          if (!accept(')')) fail("expected ')'");
          return make(Op::Call, {arg}, 0.0, name);
        }
      }
      pos_ = start;
      fail("unknown identifier '" + name + "'");
    }
    fail(std::string("unexpected character '") + c + "'");
  }

  const std::string& s_;
  std::size_t pos_ = 0;
};

Jet eval_node(const Expression::Node& n, const Jet& x, const Jet& y) {
  switch (n.op) {
    case Op::Const:
      return Jet::constant(n.value);
    case Op::X:
      return x;
    case Op::Y:
      return y;
    case Op::Add:
      return eval_node(*n.args[0], x, y) + eval_node(*n.args[1], x, y);
    case Op::Sub:
      return eval_node(*n.args[0], x, y) - eval_node(*n.args[1], x, y);
    case Op::Mul:
      return eval_node(*n.args[0], x, y) * eval_node(*n.args[1], x, y);
    case Op::Div:
      return eval_node(*n.args[0], x, y) / eval_node(*n.args[1], x, y);
    case Op::Neg:
      return -eval_node(*n.args[0], x, y);
    case Op::Pow: {
      const Jet base = eval_node(*n.args[0], x, y);
      const Jet e = eval_node(*n.args[1], x, y);
      const bool const_exponent = e.dx == 0 && e.dy == 0 && e.dxx == 0 && e.dxy == 0 && e.dyy == 0;
      if (const_exponent) return pow(base, e.v);
      return exp(e * log(base));
    }
    case Op::Call: {
      const Jet a = eval_node(*n.args[0], x, y);
      if (n.fn == "exp") return exp(a);
      if (n.fn == "log") return log(a);
      if (n.fn == "sin") return sin(a);
      if (n.fn == "cos") return cos(a);
      if (n.fn == "sqrt") return sqrt(a);
      if (n.fn == "tanh") return tanh(a);
      if (n.fn == "sinh") return sinh(a);
      return cosh(a);
    }
  }
  return Jet{};
}

bool mentions_y(const Expression::Node& n) {
  if (n.op == Op::Y) return true;
  for (const auto& a : n.args)
    if (mentions_y(*a)) return true;
  return false;
}

}  // namespace

Expression Expression::parse(const std::string& text) {
  Expression e;
  e.root_ = Parser(text).parse();
  e.text_ = text;
  return e;
}

Jet Expression::operator()(const Jet& x, const Jet& y) const { return eval_node(*root_, x, y); }

bool Expression::depends_on_y() const { return mentions_y(*root_); }

}  // namespace magloop
