#pragma once

// Parametric variational conditions  v ∈ f(x,p) + N_{C(p)}(x)  with
// C(p) = { x : phi_i(x,p) <= 0 }, read from a small line-oriented text format:
//
//   dims n=3 d=2
//   potential = x3 + (1/4 + p2)*x1 + x3^2        # or: f = (e1, ..., en)
//   constraint x1 - x3 - p1 <= 0
//   reference x=(0,0,0) p=(0,0) v=(0,0,0)

#include "fullstab/errors.hpp"
#include "fullstab/expr.hpp"
#include "fullstab/scalar.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <cstdio>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

namespace fullstab {

/// Absolute slack allowed when checking that a reference point is feasible.
inline constexpr double kReferenceFeasibilityTol = 1e-9;

template <class T>
using Grid2 = std::vector<std::vector<T>>;

inline Eigen::VectorXd to_eigen(const std::vector<double>& v) {
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}
inline Eigen::VectorXd to_eigen(const std::vector<Rational>& v) { return to_eigen(to_double(v)); }
inline std::vector<double> to_std(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

struct ReferenceTriple {
  std::vector<Rational> x;
  std::vector<Rational> p;
  std::vector<Rational> v;
  std::vector<Rational> v_hat;  // v - f(x,p), always recomputed from the model

  Eigen::VectorXd xd() const { return to_eigen(x); }
  Eigen::VectorXd pd() const { return to_eigen(p); }
  Eigen::VectorXd vd() const { return to_eigen(v); }
  Eigen::VectorXd v_hat_d() const { return to_eigen(v_hat); }
};

/// Values and exact derivatives of the model at one point.
struct EvalBundle {
  Eigen::VectorXd f;                     // n
  Eigen::MatrixXd jac_f;                 // n x n, d f_i / d x_j
  Eigen::VectorXd phi;                   // m
  Eigen::MatrixXd grad_phi;              // m x n, row i = grad_x phi_i
  std::vector<Eigen::MatrixXd> hess_phi; // m of n x n
};

class ParametricModel {
 public:
  static ParametricModel from_map(int n, int d, std::vector<Expr> f, std::vector<Expr> constraints) {
    if (static_cast<int>(f.size()) != n) {
      throw Error(ErrorCode::dimension_mismatch,
                  "f has " + std::to_string(f.size()) + " components, expected n=" + std::to_string(n));
    }
    ParametricModel model(n, d);
    model.f_ = std::move(f);
    model.constraints_ = std::move(constraints);
    model.derive();
    return model;
  }

  static ParametricModel from_potential(int n, int d, Expr potential, std::vector<Expr> constraints) {
    ParametricModel model(n, d);
    for (int i = 0; i < n; ++i) model.f_.push_back(differentiate(potential, {VarKind::x, i}));
    model.potential_ = std::move(potential);
    model.constraints_ = std::move(constraints);
    model.derive();
    return model;
  }

  int n() const { return n_; }
  int d() const { return d_; }
  int m() const { return static_cast<int>(constraints_.size()); }

  const std::optional<Expr>& potential() const { return potential_; }
  const std::vector<Expr>& f() const { return f_; }
  const std::vector<Expr>& constraints() const { return constraints_; }
  const Grid2<Expr>& jacobian() const { return jac_f_; }
  const Grid2<Expr>& constraint_gradients() const { return grad_x_; }
  const std::vector<Grid2<Expr>>& constraint_hessians() const { return hess_xx_; }

  /// phi_i is affine in x for every fixed p (its x-Hessian is identically zero).
  bool affine_in_x(int i) const { return affine_x_[static_cast<std::size_t>(i)]; }
  bool all_affine_in_x() const {
    for (bool b : affine_x_) if (!b) return false;
    return true;
  }
  /// grad_x phi_i does not depend on (x,p).
  bool constant_gradient(int i) const { return constant_grad_[static_cast<std::size_t>(i)]; }
  bool all_constant_gradients() const {
    for (bool b : constant_grad_) if (!b) return false;
    return true;
  }
  bool parameter_free_constraints() const {
    for (const auto& c : constraints_) if (depends_on(c, VarKind::p)) return false;
    return true;
  }
  bool f_affine_in_x() const { return f_affine_; }

  const std::optional<ReferenceTriple>& reference() const { return reference_; }
  void set_reference(ReferenceTriple ref) { reference_ = std::move(ref); }

  template <class T>
  std::vector<T> eval_f(std::span<const T> x, std::span<const T> p) const {
    return eval_list<T>(f_, x, p);
  }
  template <class T>
  std::vector<T> eval_constraints(std::span<const T> x, std::span<const T> p) const {
    return eval_list<T>(constraints_, x, p);
  }
  template <class T>
  Grid2<T> eval_gradients(std::span<const T> x, std::span<const T> p) const {
    Grid2<T> out;
    for (const auto& row : grad_x_) out.push_back(eval_list<T>(row, x, p));
    return out;
  }
  template <class T>
  Grid2<T> eval_jacobian(std::span<const T> x, std::span<const T> p) const {
    Grid2<T> out;
    for (const auto& row : jac_f_) out.push_back(eval_list<T>(row, x, p));
    return out;
  }

 private:
  ParametricModel(int n, int d) : n_(n), d_(d) {
    if (n < 1) throw Error(ErrorCode::dimension_mismatch, "n must be positive");
    if (d < 0) throw Error(ErrorCode::dimension_mismatch, "d must be nonnegative");
  }

  template <class T>
  static std::vector<T> eval_list(const std::vector<Expr>& list, std::span<const T> x, std::span<const T> p) {
    std::vector<T> out;
    out.reserve(list.size());
    for (const auto& e : list) {
      if constexpr (std::is_same_v<T, double>) {
        out.push_back(evaluate(e, x, p));
      } else {
        out.push_back(evaluate<T>(e, x, p));
      }
    }
    return out;
  }

  void derive() {
    jac_f_.assign(static_cast<std::size_t>(n_), {});
    f_affine_ = true;
    for (int i = 0; i < n_; ++i) {
      for (int j = 0; j < n_; ++j) {
        Expr dij = differentiate(f_[static_cast<std::size_t>(i)], {VarKind::x, j});
        jac_f_[static_cast<std::size_t>(i)].push_back(dij);
        for (int k = 0; k < n_ && f_affine_; ++k) {
          if (!differentiate(dij, {VarKind::x, k}).is_zero()) f_affine_ = false;
        }
      }
    }
    for (const auto& c : constraints_) {
      std::vector<Expr> grad;
      Grid2<Expr> hess(static_cast<std::size_t>(n_), std::vector<Expr>(static_cast<std::size_t>(n_)));
      bool affine = true;
      bool constant = true;
      for (int j = 0; j < n_; ++j) grad.push_back(differentiate(c, {VarKind::x, j}));
      // Only the upper triangle is differentiated; the lower one mirrors it so
      // evaluated Hessians are exactly symmetric.
      for (int j = 0; j < n_; ++j) {
        for (int k = j; k < n_; ++k) {
          Expr h = differentiate(grad[static_cast<std::size_t>(j)], {VarKind::x, k});
          hess[static_cast<std::size_t>(j)][static_cast<std::size_t>(k)] = h;
          hess[static_cast<std::size_t>(k)][static_cast<std::size_t>(j)] = h;
          if (!h.is_zero()) affine = false;
        }
      }
      for (const auto& g : grad) {
        for (int k = 0; k < d_ && constant; ++k) {
          if (!differentiate(g, {VarKind::p, k}).is_zero()) constant = false;
        }
      }
      grad_x_.push_back(std::move(grad));
      hess_xx_.push_back(std::move(hess));
      affine_x_.push_back(affine);
      constant_grad_.push_back(constant && affine);
    }
  }

  int n_;
  int d_;
  std::optional<Expr> potential_;
  std::vector<Expr> f_;
  std::vector<Expr> constraints_;
  Grid2<Expr> jac_f_;
  Grid2<Expr> grad_x_;
  std::vector<Grid2<Expr>> hess_xx_;
  std::vector<bool> affine_x_;
  std::vector<bool> constant_grad_;
  bool f_affine_ = true;
  std::optional<ReferenceTriple> reference_;
};

inline EvalBundle eval_bundle(const ParametricModel& model, const Eigen::VectorXd& x, const Eigen::VectorXd& p) {
  if (x.size() != model.n() || p.size() != model.d()) {
    throw Error(ErrorCode::dimension_mismatch, "point dimensions do not match the model");
  }
  std::span<const double> xs(x.data(), static_cast<std::size_t>(x.size()));
  std::span<const double> ps(p.data(), static_cast<std::size_t>(p.size()));
  const int n = model.n(), m = model.m();
  EvalBundle b;
  b.f = to_eigen(model.eval_f<double>(xs, ps));
  b.phi = to_eigen(model.eval_constraints<double>(xs, ps));
  b.jac_f.resize(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) b.jac_f(i, j) = evaluate(model.jacobian()[i][j], xs, ps);
  }
  b.grad_phi.resize(m, n);
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < n; ++j) b.grad_phi(i, j) = evaluate(model.constraint_gradients()[i][j], xs, ps);
    Eigen::MatrixXd h(n, n);
    for (int j = 0; j < n; ++j) {
      for (int k = 0; k < n; ++k) {
        const Expr& e = model.constraint_hessians()[i][j][k];
        h(j, k) = e.is_zero() ? 0.0 : evaluate(e, xs, ps);
      }
    }
    b.hess_phi.push_back(std::move(h));
  }
  return b;
}

/// Builds a reference triple, recomputing v_hat and checking feasibility.
inline ReferenceTriple make_reference(const ParametricModel& model, std::vector<Rational> x,
                                      std::vector<Rational> p, std::vector<Rational> v) {
  if (static_cast<int>(x.size()) != model.n() || static_cast<int>(p.size()) != model.d() ||
      static_cast<int>(v.size()) != model.n()) {
    throw Error(ErrorCode::dimension_mismatch, "reference dimensions do not match dims line");
  }
  ReferenceTriple ref{std::move(x), std::move(p), std::move(v), {}};
  auto phi = model.eval_constraints<Rational>(ref.x, ref.p);
  for (std::size_t i = 0; i < phi.size(); ++i) {
    if (phi[i] > Rational(kReferenceFeasibilityTol)) {
      throw Error(ErrorCode::infeasible_point, "reference violates constraint " + std::to_string(i + 1) +
                                                   " (value " + phi[i].str() + ")");
    }
  }
  auto fx = model.eval_f<Rational>(ref.x, ref.p);
  for (std::size_t i = 0; i < fx.size(); ++i) ref.v_hat.push_back(ref.v[i] - fx[i]);
  return ref;
}

namespace detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

// Parses "(e1, e2, ...)" starting at the parser's current position.
inline std::vector<Expr> parse_tuple(ExprParser& parser) {
  std::vector<Expr> out;
  if (!parser.accept('(')) parser.fail(ErrorCode::syntax, "expected '('");
  if (parser.accept(')')) return out;
  for (;;) {
    out.push_back(parser.parse_expr());
    if (parser.accept(')')) return out;
    if (!parser.accept(',')) parser.fail(ErrorCode::syntax, "expected ',' or ')'");
  }
}

inline std::vector<Rational> parse_constant_tuple(std::string_view text, int line, int column_offset,
                                                  std::size_t& consumed) {
  ExprParser parser(text, 0, 0, line, column_offset);
  auto exprs = parse_tuple(parser);
  consumed = parser.position();
  std::vector<Rational> out;
  for (const auto& e : exprs) {
    out.push_back(evaluate<Rational>(e, std::span<const Rational>{}, std::span<const Rational>{}));
  }
  return out;
}

}  // namespace detail

/// Parses a model file. Throws ParseError with line/column on bad input.
inline ParametricModel parse_model(std::string_view text) {
  std::optional<std::pair<int, int>> dims;
  std::optional<Expr> potential;
  std::optional<std::vector<Expr>> fmap;
  std::vector<Expr> constraints;
  struct RefText { std::string_view body; int line; int offset; };
  std::optional<RefText> ref_text;
  int f_line = 0;

  int line_no = 0;
  std::size_t start = 0;
  while (start <= text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    std::string_view raw = text.substr(start, end - start);
    ++line_no;
    start = end + 1;
    if (auto hash = raw.find('#'); hash != std::string_view::npos) raw = raw.substr(0, hash);
    std::string_view line = detail::trim(raw);
    if (line.empty()) {
      if (end == text.size()) break;
      continue;
    }
    const int indent = static_cast<int>(line.data() - raw.data());
    auto keyword_end = line.find_first_of(" \t=");
    std::string_view keyword = line.substr(0, keyword_end);
    auto column_of = [&](std::string_view sub) { return indent + static_cast<int>(sub.data() - line.data()); };

    if (keyword != "dims" && !dims) {
      throw ParseError(ErrorCode::syntax, "'dims' line must come first", line_no, indent + 1);
    }
    if (keyword == "dims") {
      if (dims) throw ParseError(ErrorCode::syntax, "duplicate 'dims' line", line_no, indent + 1);
      int n = -1, d = 0;
      std::istringstream is{std::string(line.substr(4))};
      std::string item;
      while (is >> item) {
        auto eq = item.find('=');
        std::string key = item.substr(0, eq);
        if (eq == std::string::npos || (key != "n" && key != "d")) {
          throw ParseError(ErrorCode::syntax, "expected n=<int> d=<int>", line_no, indent + 1);
        }
        try {
          std::size_t used = 0;
          int value = std::stoi(item.substr(eq + 1), &used);
          if (used != item.size() - eq - 1) throw std::invalid_argument("trailing");
          (key == "n" ? n : d) = value;
        } catch (const std::exception&) {
          throw ParseError(ErrorCode::syntax, "bad integer in '" + item + "'", line_no, indent + 1);
        }
      }
      if (n < 1 || d < 0 || n > 64 || d > 64) {
        throw ParseError(ErrorCode::dimension_mismatch, "dims out of range", line_no, indent + 1);
      }
      dims = {n, d};
    } else if (keyword == "potential" || keyword == "f") {
      if (potential || fmap) throw ParseError(ErrorCode::syntax, "base map given twice", line_no, indent + 1);
      std::string_view rest = line.substr(keyword.size());
      auto eq = rest.find('=');
      if (eq == std::string_view::npos || !detail::trim(rest.substr(0, eq)).empty()) {
        throw ParseError(ErrorCode::syntax, "expected '='", line_no, column_of(rest) + 1);
      }
      std::string_view body = rest.substr(eq + 1);
      ExprParser parser(body, dims->first, dims->second, line_no, column_of(body));
      if (keyword == "potential") {
        potential = parser.parse_full();
      } else {
        fmap = detail::parse_tuple(parser);
        if (!parser.at_end()) parser.fail(ErrorCode::syntax, "trailing input after tuple");
        f_line = line_no;
      }
    } else if (keyword == "constraint") {
      std::string_view body = line.substr(keyword.size());
      auto le = body.rfind("<=");
      if (le == std::string_view::npos) {
        throw ParseError(ErrorCode::syntax, "constraint needs '<='", line_no, column_of(body) + 1);
      }
      std::string_view lhs = body.substr(0, le), rhs = body.substr(le + 2);
      Expr a = ExprParser(lhs, dims->first, dims->second, line_no, column_of(lhs)).parse_full();
      Expr b = ExprParser(rhs, dims->first, dims->second, line_no, column_of(rhs)).parse_full();
      constraints.push_back(a - b);
    } else if (keyword == "reference") {
      if (ref_text) throw ParseError(ErrorCode::syntax, "duplicate 'reference' line", line_no, indent + 1);
      std::string_view body = line.substr(keyword.size());
      ref_text = RefText{body, line_no, column_of(body)};
    } else {
      throw ParseError(ErrorCode::syntax, "unknown statement '" + std::string(keyword) + "'", line_no,
                       indent + 1);
    }
    if (end == text.size()) break;
  }

  if (!dims) throw ParseError(ErrorCode::syntax, "missing 'dims' line", line_no, 1);
  if (!potential && !fmap) throw ParseError(ErrorCode::syntax, "missing 'potential' or 'f'", line_no, 1);
  const auto [n, d] = *dims;
  if (fmap && static_cast<int>(fmap->size()) != n) {
    throw ParseError(ErrorCode::dimension_mismatch,
                     "f has " + std::to_string(fmap->size()) + " components, expected " + std::to_string(n),
                     f_line, 1);
  }
  ParametricModel model = potential ? ParametricModel::from_potential(n, d, *potential, std::move(constraints))
                                    : ParametricModel::from_map(n, d, std::move(*fmap), std::move(constraints));

  if (ref_text) {
    std::optional<std::vector<Rational>> xs, ps, vs;
    std::string_view body = ref_text->body;
    std::size_t pos = 0;
    while (true) {
      while (pos < body.size() && std::isspace(static_cast<unsigned char>(body[pos]))) ++pos;
      if (pos >= body.size()) break;
      char key = body[pos];
      int col = ref_text->offset + static_cast<int>(pos) + 1;
      if ((key != 'x' && key != 'p' && key != 'v') || pos + 1 >= body.size() || body[pos + 1] != '=') {
        throw ParseError(ErrorCode::syntax, "expected x=(...), p=(...) or v=(...)", ref_text->line, col);
      }
      pos += 2;
      std::size_t used = 0;
      auto values = detail::parse_constant_tuple(body.substr(pos), ref_text->line,
                                                 ref_text->offset + static_cast<int>(pos), used);
      pos += used;
      auto& slot = key == 'x' ? xs : key == 'p' ? ps : vs;
      if (slot) throw ParseError(ErrorCode::syntax, "duplicate reference component", ref_text->line, col);
      slot = std::move(values);
    }
    if (!xs || !vs || (!ps && d > 0)) {
      throw ParseError(ErrorCode::syntax, "reference needs x=(...), v=(...) and p=(...) when d>0",
                       ref_text->line, ref_text->offset + 1);
    }
    if (!ps) ps = std::vector<Rational>{};
    try {
      model.set_reference(make_reference(model, std::move(*xs), std::move(*ps), std::move(*vs)));
    } catch (const Error& e) {
      throw ParseError(e.code(), e.what(), ref_text->line, ref_text->offset + 1);
    }
  }
  return model;
}

namespace detail {
inline std::string join(const std::vector<Rational>& values) {
  std::string out = "(";
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) out += ", ";
    out += values[i].str();
  }
  return out + ")";
}
}  // namespace detail

/// Canonical text form; parse_model(print_model(m)) is pointwise identical.
inline std::string print_model(const ParametricModel& model) {
  std::ostringstream os;
  os << "dims n=" << model.n() << " d=" << model.d() << "\n";
  if (model.potential()) {
    os << "potential = " << to_string(*model.potential()) << "\n";
  } else {
    os << "f = (";
    for (int i = 0; i < model.n(); ++i) os << (i ? ", " : "") << to_string(model.f()[i]);
    os << ")\n";
  }
  for (const auto& c : model.constraints()) os << "constraint " << to_string(c) << " <= 0\n";
  if (const auto& ref = model.reference()) {
    os << "reference x=" << detail::join(ref->x);
    if (model.d() > 0) os << " p=" << detail::join(ref->p);
    os << " v=" << detail::join(ref->v) << "\n";
  }
  return os.str();
}

/// FNV-1a over the canonical text; stable across platforms and runs.
inline std::string model_hash(const ParametricModel& model) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : print_model(model)) {
    h ^= c;
    h *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace fullstab
