#include "wavecascade/expression.hpp"

#include <cctype>
#include <charconv>
#include <cmath>
#include <numbers>
#include <vector>

namespace wavecascade {

struct Expression::Node {
  enum class Op { Const, Var, Neg, Add, Sub, Mul, Div, Pow, Call };
  Op op = Op::Const;
  double value = 0.0;
  double (*fn)(double) = nullptr;
  std::shared_ptr<const Node> lhs, rhs;

  double eval(double x) const {
    switch (op) {
      case Op::Const: return value;
      case Op::Var: return x;
      case Op::Neg: return -lhs->eval(x);
      case Op::Add: return lhs->eval(x) + rhs->eval(x);
      case Op::Sub: return lhs->eval(x) - rhs->eval(x);
      case Op::Mul: return lhs->eval(x) * rhs->eval(x);
      case Op::Div: return lhs->eval(x) / rhs->eval(x);
      case Op::Pow: return std::pow(lhs->eval(x), rhs->eval(x));
      case Op::Call: return fn(lhs->eval(x));
    }
    return 0.0;
  }
};

namespace {

using NodePtr = std::shared_ptr<const Expression::Node>;
using Op = Expression::Node::Op;

NodePtr make(Op op, NodePtr l = {}, NodePtr r = {}) {
  auto n = std::make_shared<Expression::Node>();
  n->op = op;
  n->lhs = std::move(l);
  n->rhs = std::move(r);
  return n;
}

NodePtr constant(double v) {
  auto n = std::make_shared<Expression::Node>();
  n->value = v;
  return n;
}

double f_sin(double v) { return std::sin(v); }
double f_cos(double v) { return std::cos(v); }
double f_sinh(double v) { return std::sinh(v); }
double f_cosh(double v) { return std::cosh(v); }
double f_exp(double v) { return std::exp(v); }
double f_sqrt(double v) { return std::sqrt(v); }

class Parser {
 public:
  Parser(const std::string& s, const std::map<std::string, double>& consts)
      : s_(s), consts_(consts) {}

  NodePtr run() {
    NodePtr e = sum();
    skip();
    if (pos_ != s_.size()) fail("unexpected '" + std::string(1, s_[pos_]) + "'");
    return e;
  }

 private:
  const std::string& s_;
  const std::map<std::string, double>& consts_;
  std::size_t pos_ = 0;

  [[noreturn]] void fail(const std::string& why) const {
    throw ConfigError("expression \"" + s_ + "\": " + why + " at position " + std::to_string(pos_));
  }

  void skip() {
    while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
  }

  bool eat(char c) {
    skip();
    if (pos_ < s_.size() && s_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  NodePtr sum() {
    NodePtr l = product();
    for (;;) {
      if (eat('+')) l = make(Op::Add, l, product());
      else if (eat('-')) l = make(Op::Sub, l, product());
      else return l;
    }
  }

  NodePtr product() {
    NodePtr l = unary();
    for (;;) {
      if (eat('*')) l = make(Op::Mul, l, unary());
      else if (eat('/')) l = make(Op::Div, l, unary());
      else return l;
    }
  }

  NodePtr unary() {
    if (eat('-')) return make(Op::Neg, unary());
    if (eat('+')) return unary();
    return power();
  }

  NodePtr power() {
    NodePtr base = primary();
    if (eat('^')) return make(Op::Pow, base, unary());
    return base;
  }

  NodePtr primary() {
    skip();
    if (pos_ >= s_.size()) fail("unexpected end");
    const char c = s_[pos_];
    if (c == '(') {
      ++pos_;
      NodePtr e = sum();
      if (!eat(')')) fail("missing ')'");
      return e;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return number();
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') return word();
    fail("unexpected '" + std::string(1, c) + "'");
  }

  NodePtr number() {
    double v = 0.0;
    const char* first = s_.data() + pos_;
    const auto [ptr, ec] = std::from_chars(first, s_.data() + s_.size(), v);
    if (ec != std::errc()) fail("bad number");
    pos_ += static_cast<std::size_t>(ptr - first);
    return constant(v);
  }

  NodePtr word() {
    const std::size_t start = pos_;
    while (pos_ < s_.size() &&
           (std::isalnum(static_cast<unsigned char>(s_[pos_])) || s_[pos_] == '_')) {
      ++pos_;
    }
    const std::string name = s_.substr(start, pos_ - start);
    static const std::map<std::string, double (*)(double)> fns = {
        {"sin", f_sin}, {"cos", f_cos}, {"sinh", f_sinh},
        {"cosh", f_cosh}, {"exp", f_exp}, {"sqrt", f_sqrt}};
    if (auto it = fns.find(name); it != fns.end()) {
      if (!eat('(')) fail("'" + name + "' needs an argument in parentheses");
      NodePtr arg = sum();
      if (!eat(')')) fail("missing ')'");
      auto n = std::make_shared<Expression::Node>();
      n->op = Op::Call;
      n->fn = it->second;
      n->lhs = arg;
      return n;
    }
    if (name == "x") return make(Op::Var);
    if (name == "pi") return constant(std::numbers::pi);
    if (auto it = consts_.find(name); it != consts_.end()) return constant(it->second);
    fail("unknown name '" + name + "'");
  }
};

}  // namespace

Expression Expression::parse(const std::string& text, const std::map<std::string, double>& constants) {
  Expression e;
  e.text_ = text;
  e.root_ = Parser(e.text_, constants).run();
  return e;
}

double Expression::operator()(double x) const { return root_->eval(x); }

}  // namespace wavecascade
