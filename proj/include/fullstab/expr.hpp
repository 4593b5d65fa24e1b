#pragma once

// Scalar expression trees over decision variables x1..xn and parameters
// p1..pd. Only field operations and integer powers are representable, so every
// expression is a rational function and derivatives stay exact.

#include "fullstab/errors.hpp"
#include "fullstab/scalar.hpp"

#include <cctype>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

namespace fullstab {

enum class Op { constant, var_x, var_p, add, sub, mul, div, pow, neg };

enum class VarKind { x, p };

struct Variable {
  VarKind kind;
  int index;  // 0-based

  friend bool operator==(const Variable&, const Variable&) = default;
};

class Expr {
 public:
  struct Node {
    Op op;
    Rational value;  // constant
    int index = 0;   // variable index
    int exponent = 0;
    std::shared_ptr<const Node> lhs;
    std::shared_ptr<const Node> rhs;
  };

  Expr() : Expr(constant(Rational(0))) {}

  static Expr constant(const Rational& value) {
    auto n = std::make_shared<Node>();
    n->op = Op::constant;
    n->value = value;
    return Expr(std::move(n));
  }
  static Expr variable(Variable v) {
    auto n = std::make_shared<Node>();
    n->op = v.kind == VarKind::x ? Op::var_x : Op::var_p;
    n->index = v.index;
    return Expr(std::move(n));
  }
  static Expr x(int index) { return variable({VarKind::x, index}); }
  static Expr p(int index) { return variable({VarKind::p, index}); }

  Op op() const { return node_->op; }
  const Rational& value() const { return node_->value; }
  int index() const { return node_->index; }
  int exponent() const { return node_->exponent; }
  Expr lhs() const { return Expr(node_->lhs); }
  Expr rhs() const { return Expr(node_->rhs); }

  bool is_constant() const { return op() == Op::constant; }
  bool is_constant(const Rational& c) const { return is_constant() && value() == c; }
  bool is_zero() const { return is_constant(Rational(0)); }

  friend Expr operator+(const Expr& a, const Expr& b) {
    if (a.is_zero()) return b;
    if (b.is_zero()) return a;
    if (a.is_constant() && b.is_constant()) return constant(a.value() + b.value());
    return binary(Op::add, a, b);
  }
  friend Expr operator-(const Expr& a, const Expr& b) {
    if (b.is_zero()) return a;
    if (a.is_zero()) return -b;
    if (a.is_constant() && b.is_constant()) return constant(a.value() - b.value());
    return binary(Op::sub, a, b);
  }
  friend Expr operator*(const Expr& a, const Expr& b) {
    if (a.is_zero() || b.is_zero()) return constant(Rational(0));
    if (a.is_constant(Rational(1))) return b;
    if (b.is_constant(Rational(1))) return a;
    if (a.is_constant(Rational(-1))) return -b;
    if (b.is_constant(Rational(-1))) return -a;
    if (a.is_constant() && b.is_constant()) return constant(a.value() * b.value());
    return binary(Op::mul, a, b);
  }
  // A division node survives unless the denominator is a nonzero constant, so
  // a vanishing denominator is always caught at evaluation time.
  friend Expr operator/(const Expr& a, const Expr& b) {
    if (b.is_constant() && b.value() != 0) {
      if (a.is_constant()) return constant(a.value() / b.value());
      if (b.value() == 1) return a;
    }
    return binary(Op::div, a, b);
  }
  friend Expr operator-(const Expr& a) {
    if (a.is_constant()) return constant(Rational(-a.value()));
    if (a.op() == Op::neg) return a.lhs();
    auto n = std::make_shared<Node>();
    n->op = Op::neg;
    n->lhs = a.node_;
    return Expr(std::move(n));
  }
  Expr pow(int k) const {
    if (k == 1) return *this;
    if (k == 0) return constant(Rational(1));
    if (is_constant() && (k > 0 || value() != 0)) {
      Rational base = k > 0 ? value() : Rational(1) / value();
      Rational r(1);
      for (int i = 0; i < (k > 0 ? k : -k); ++i) r *= base;
      return constant(r);
    }
    auto n = std::make_shared<Node>();
    n->op = Op::pow;
    n->lhs = node_;
    n->exponent = k;
    return Expr(std::move(n));
  }

  /// Structural identity (shared subtrees compare equal fast).
  friend bool same_tree(const Expr& a, const Expr& b) {
    if (a.node_ == b.node_) return true;
    if (a.op() != b.op()) return false;
    switch (a.op()) {
      case Op::constant: return a.value() == b.value();
      case Op::var_x:
      case Op::var_p: return a.index() == b.index();
      case Op::neg: return same_tree(a.lhs(), b.lhs());
      case Op::pow: return a.exponent() == b.exponent() && same_tree(a.lhs(), b.lhs());
      default: return same_tree(a.lhs(), b.lhs()) && same_tree(a.rhs(), b.rhs());
    }
  }

 private:
  explicit Expr(std::shared_ptr<const Node> node) : node_(std::move(node)) {}

  static Expr binary(Op op, const Expr& a, const Expr& b) {
    auto n = std::make_shared<Node>();
    n->op = op;
    n->lhs = a.node_;
    n->rhs = b.node_;
    return Expr(std::move(n));
  }

  std::shared_ptr<const Node> node_;
};

/// Rebuilds the tree through the simplifying constructors. Idempotent.
inline Expr simplify(const Expr& e) {
  switch (e.op()) {
    case Op::constant:
    case Op::var_x:
    case Op::var_p: return e;
    case Op::add: return simplify(e.lhs()) + simplify(e.rhs());
    case Op::sub: return simplify(e.lhs()) - simplify(e.rhs());
    case Op::mul: return simplify(e.lhs()) * simplify(e.rhs());
    case Op::div: return simplify(e.lhs()) / simplify(e.rhs());
    case Op::neg: return -simplify(e.lhs());
    case Op::pow: return simplify(e.lhs()).pow(e.exponent());
  }
  return e;
}

/// Exact symbolic partial derivative.
inline Expr differentiate(const Expr& e, Variable var) {
  switch (e.op()) {
    case Op::constant: return Expr::constant(Rational(0));
    case Op::var_x:
      return Expr::constant(Rational(var.kind == VarKind::x && var.index == e.index() ? 1 : 0));
    case Op::var_p:
      return Expr::constant(Rational(var.kind == VarKind::p && var.index == e.index() ? 1 : 0));
    case Op::add: return differentiate(e.lhs(), var) + differentiate(e.rhs(), var);
    case Op::sub: return differentiate(e.lhs(), var) - differentiate(e.rhs(), var);
    case Op::mul: {
      Expr a = e.lhs(), b = e.rhs();
      return differentiate(a, var) * b + a * differentiate(b, var);
    }
    case Op::div: {
      Expr a = e.lhs(), b = e.rhs();
      Expr da = differentiate(a, var), db = differentiate(b, var);
      if (db.is_zero()) return da / b;
      return (da * b - a * db) / b.pow(2);
    }
    case Op::neg: return -differentiate(e.lhs(), var);
    case Op::pow: {
      Expr a = e.lhs();
      int k = e.exponent();
      return Expr::constant(Rational(k)) * a.pow(k - 1) * differentiate(a, var);
    }
  }
  return Expr::constant(Rational(0));
}

inline bool depends_on(const Expr& e, VarKind kind) {
  switch (e.op()) {
    case Op::constant: return false;
    case Op::var_x: return kind == VarKind::x;
    case Op::var_p: return kind == VarKind::p;
    case Op::neg:
    case Op::pow: return depends_on(e.lhs(), kind);
    default: return depends_on(e.lhs(), kind) || depends_on(e.rhs(), kind);
  }
}

inline std::string to_string(const Expr& e);

template <class T>
T evaluate(const Expr& e, std::span<const T> x, std::span<const T> p) {
  switch (e.op()) {
    case Op::constant: return from_rational<T>(e.value());
    case Op::var_x: return x[static_cast<std::size_t>(e.index())];
    case Op::var_p: return p[static_cast<std::size_t>(e.index())];
    case Op::add: return evaluate<T>(e.lhs(), x, p) + evaluate<T>(e.rhs(), x, p);
    case Op::sub: return evaluate<T>(e.lhs(), x, p) - evaluate<T>(e.rhs(), x, p);
    case Op::mul: return evaluate<T>(e.lhs(), x, p) * evaluate<T>(e.rhs(), x, p);
    case Op::div: {
      T den = evaluate<T>(e.rhs(), x, p);
      if (den == T(0)) {
        throw Error(ErrorCode::evaluation, "division by zero in " + to_string(e.rhs()));
      }
      return evaluate<T>(e.lhs(), x, p) / den;
    }
    case Op::neg: return -evaluate<T>(e.lhs(), x, p);
    case Op::pow: {
      T base = evaluate<T>(e.lhs(), x, p);
      int k = e.exponent();
      if (k < 0 && base == T(0)) {
        throw Error(ErrorCode::evaluation, "negative power of zero in " + to_string(e.lhs()));
      }
      T r(1);
      for (int i = 0; i < (k > 0 ? k : -k); ++i) r *= base;
      return k >= 0 ? r : T(1) / r;
    }
  }
  return T(0);
}

/// Double evaluation that also rejects overflow to non-finite values.
inline double evaluate(const Expr& e, std::span<const double> x, std::span<const double> p) {
  double value = evaluate<double>(e, x, p);
  if (!std::isfinite(value)) {
    throw Error(ErrorCode::evaluation, "non-finite value of " + to_string(e));
  }
  return value;
}

namespace detail {

inline int precedence(const Expr& e) {
  switch (e.op()) {
    case Op::add:
    case Op::sub: return 1;
    case Op::mul:
    case Op::div: return 2;
    case Op::neg: return 3;
    case Op::pow: return 4;
    case Op::constant:
      if (e.value() < 0) return 3;
      if (denominator(e.value()) != 1) return 2;
      return 5;
    default: return 5;
  }
}

inline void print(std::ostream& os, const Expr& e);

inline void print_child(std::ostream& os, const Expr& child, bool wrap) {
  if (wrap) os << '(';
  print(os, child);
  if (wrap) os << ')';
}

inline void print(std::ostream& os, const Expr& e) {
  int prec = precedence(e);
  switch (e.op()) {
    case Op::constant: os << e.value().str(); return;
    case Op::var_x: os << 'x' << e.index() + 1; return;
    case Op::var_p: os << 'p' << e.index() + 1; return;
    case Op::add:
    case Op::sub:
    case Op::mul:
    case Op::div: {
      const char* sym = e.op() == Op::add   ? " + "
                        : e.op() == Op::sub ? " - "
                        : e.op() == Op::mul ? "*"
                                            : "/";
      print_child(os, e.lhs(), precedence(e.lhs()) < prec);
      os << sym;
      bool strict = e.op() == Op::sub || e.op() == Op::div;
      int rp = precedence(e.rhs());
      print_child(os, e.rhs(), strict ? rp <= prec : rp < prec);
      return;
    }
    case Op::neg:
      os << '-';
      print_child(os, e.lhs(), precedence(e.lhs()) <= prec);
      return;
    case Op::pow:
      print_child(os, e.lhs(), precedence(e.lhs()) <= prec);
      os << '^' << e.exponent();
      return;
  }
}

}  // namespace detail

inline std::string to_string(const Expr& e) {
  std::ostringstream os;
  detail::print(os, e);
  return os.str();
}

/// Recursive-descent parser for one expression. Positions reported to the
/// caller are 1-based columns offset by `column_offset` on line `line`.
class ExprParser {
 public:
  ExprParser(std::string_view text, int n, int d, int line = 1, int column_offset = 0)
      : text_(text), n_(n), d_(d), line_(line), column_offset_(column_offset) {}

  Expr parse_full() {
    Expr e = parse_expr();
    skip_space();
    if (pos_ != text_.size()) fail(ErrorCode::syntax, "unexpected '" + std::string(1, text_[pos_]) + "'");
    return e;
  }

  Expr parse_expr() {
    Expr e = parse_term();
    for (;;) {
      skip_space();
      if (accept('+')) {
        e = combine(Op::add, e, parse_term());
      } else if (accept_minus()) {
        e = combine(Op::sub, e, parse_term());
      } else {
        return e;
      }
    }
  }

  std::size_t position() const { return pos_; }
  void skip_space() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
  }
  bool at_end() {
    skip_space();
    return pos_ >= text_.size();
  }
  bool accept(char c) {
    skip_space();
    if (pos_ < text_.size() && text_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }
  [[noreturn]] void fail(ErrorCode code, const std::string& msg) const {
    throw ParseError(code, msg, line_, column_offset_ + static_cast<int>(pos_) + 1);
  }

 private:
  // Parsing keeps literal arithmetic unfolded except for constants, so that
  // "1/4" becomes the exact rational 1/4 while "x1/x1" stays a division.
  static Expr combine(Op op, const Expr& a, const Expr& b) {
    switch (op) {
      case Op::add: return a + b;
      case Op::sub: return a - b;
      case Op::mul: return a * b;
      default: return a / b;
    }
  }

  bool accept_minus() {
    skip_space();
    if (pos_ < text_.size() && text_[pos_] == '-') {
      ++pos_;
      return true;
    }
    // U+2212 MINUS SIGN
    if (text_.substr(pos_, 3) == "\xE2\x88\x92") {
      pos_ += 3;
      return true;
    }
    return false;
  }

  Expr parse_term() {
    Expr e = parse_unary();
    for (;;) {
      skip_space();
      if (accept('*')) {
        e = combine(Op::mul, e, parse_unary());
      } else if (accept('/')) {
        e = combine(Op::div, e, parse_unary());
      } else {
        return e;
      }
    }
  }

  Expr parse_unary() {
    if (accept_minus()) return -parse_unary();
    if (accept('+')) return parse_unary();
    return parse_power();
  }

  Expr parse_power() {
    Expr base = parse_primary();
    if (!accept('^')) return base;
    skip_space();
    bool negative = false;
    bool paren = accept('(');
    if (accept_minus()) negative = true;
    skip_space();
    std::size_t start = pos_;
    while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) ++pos_;
    if (start == pos_) fail(ErrorCode::syntax, "expected integer exponent");
    if (pos_ - start > 6) fail(ErrorCode::syntax, "exponent too large");
    int k = std::stoi(std::string(text_.substr(start, pos_ - start)));
    if (paren && !accept(')')) fail(ErrorCode::syntax, "expected ')'");
    return base.pow(negative ? -k : k);
  }

  Expr parse_primary() {
    skip_space();
    if (pos_ >= text_.size()) fail(ErrorCode::syntax, "unexpected end of expression");
    char c = text_[pos_];
    if (c == '(') {
      ++pos_;
      Expr e = parse_expr();
      if (!accept(')')) fail(ErrorCode::syntax, "expected ')'");
      return e;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return Expr::constant(parse_number());
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      std::size_t start = pos_;
      while (pos_ < text_.size() &&
             (std::isalnum(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '_')) {
        ++pos_;
      }
      std::string name(text_.substr(start, pos_ - start));
      auto var = resolve(name);
      if (!var) {
        pos_ = start;
        fail(ErrorCode::unknown_identifier, "unknown identifier '" + name + "'");
      }
      return Expr::variable(*var);
    }
    fail(ErrorCode::syntax, "unexpected '" + std::string(1, c) + "'");
  }

  std::optional<Variable> resolve(const std::string& name) const {
    if (name.size() < 2 || (name[0] != 'x' && name[0] != 'p')) return std::nullopt;
    for (std::size_t i = 1; i < name.size(); ++i) {
      if (!std::isdigit(static_cast<unsigned char>(name[i]))) return std::nullopt;
    }
    if (name[1] == '0' || name.size() > 6) return std::nullopt;
    int k = std::stoi(name.substr(1));
    int limit = name[0] == 'x' ? n_ : d_;
    if (k < 1 || k > limit) return std::nullopt;
    return Variable{name[0] == 'x' ? VarKind::x : VarKind::p, k - 1};
  }

  // Decimal literals (with optional exponent) are converted exactly.
  Rational parse_number() {
    std::size_t start = pos_;
    Rational value(0);
    bool digits = false;
    while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) {
      value = value * 10 + (text_[pos_] - '0');
      ++pos_;
      digits = true;
    }
    if (pos_ < text_.size() && text_[pos_] == '.') {
      ++pos_;
      Rational scale(1);
      while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) {
        scale /= 10;
        value += scale * (text_[pos_] - '0');
        ++pos_;
        digits = true;
      }
    }
    if (!digits) {
      pos_ = start;
      fail(ErrorCode::syntax, "malformed number");
    }
    if (pos_ < text_.size() && (text_[pos_] == 'e' || text_[pos_] == 'E')) {
      std::size_t mark = pos_++;
      bool negative = false;
      if (pos_ < text_.size() && (text_[pos_] == '+' || text_[pos_] == '-')) negative = text_[pos_++] == '-';
      std::size_t exp_start = pos_;
      while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) ++pos_;
      if (exp_start == pos_ || pos_ - exp_start > 3) {
        pos_ = mark;
        fail(ErrorCode::syntax, "malformed exponent");
      }
      int k = std::stoi(std::string(text_.substr(exp_start, pos_ - exp_start)));
      for (int i = 0; i < k; ++i) value = negative ? value / 10 : value * 10;
    }
    return value;
  }

  std::string_view text_;
  std::size_t pos_ = 0;
  int n_;
  int d_;
  int line_;
  int column_offset_;
};

inline Expr parse_expr(std::string_view text, int n, int d) {
  return ExprParser(text, n, d).parse_full();
}

}  // namespace fullstab
