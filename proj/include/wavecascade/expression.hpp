#pragma once

#include <map>
#include <memory>
#include <string>

#include "wavecascade/errors.hpp"

namespace wavecascade {

/// A real function of x parsed from text such as "x*(1 - x)" or "sin(pi*x)^2".
///
/// Grammar: sums and differences of products; '^' binds tighter than unary
/// minus and is right-associative; functions sin, cos, sinh, cosh, exp, sqrt;
/// the variable x, the constant pi and any named constant passed to parse().
/// Numbers are decimal with optional exponent. Throws ConfigError on bad input.
class Expression {
 public:
  struct Node;

  static Expression parse(const std::string& text,
                          const std::map<std::string, double>& constants = {});

  double operator()(double x) const;
  const std::string& text() const { return text_; }

 private:
  std::shared_ptr<const Node> root_;
  std::string text_;
};

}  // namespace wavecascade
