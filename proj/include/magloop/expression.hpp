#pragma once

#include <memory>
#include <string>

#include "magloop/jet.hpp"

namespace magloop {

/// Arithmetic expression over the chart coordinates x, y.
///
/// Grammar: numbers, `x`, `y`, `pi`, binary `+ - * / ^`, unary minus,
/// parentheses and the functions exp, log, sin, cos, sqrt, tanh, sinh, cosh.
/// Evaluation returns a Jet, so the parsed expression is differentiated
/// exactly up to second order.
class Expression {
 public:
  /// Throws Error(Config) with the column of the offending token.
  static Expression parse(const std::string& text);

  Jet operator()(const Jet& x, const Jet& y) const;
  Jet eval(double x, double y) const { return (*this)(Jet::var_x(x), Jet::var_y(y)); }

  bool depends_on_y() const;
  const std::string& text() const { return text_; }

  struct Node;

 private:
  std::shared_ptr<const Node> root_;
  std::string text_;
};

}  // namespace magloop
