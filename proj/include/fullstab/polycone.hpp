#pragma once

// Polyhedral cone geometry for constraint sets that are affine in x:
// tangent/critical cones, polars, spans, generators and Euclidean projection.
// Cones are kept in facet form { w : E w = 0, G w <= 0 }; generators are
// enumerated on demand (desk scale: n <= 8, at most 16 rows).

#include "fullstab/errors.hpp"
#include "fullstab/linalg.hpp"
#include "fullstab/model.hpp"
#include "fullstab/simplex.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

namespace fullstab {

inline constexpr double kConeTol = 1e-9;
inline constexpr double kActiveTol = 1e-7;
inline constexpr int kMaxConeDim = 8;
inline constexpr int kMaxConeRows = 16;

struct ConeDesc {
  Eigen::Index n = 0;
  Eigen::MatrixXd eq;    // a . w = 0
  Eigen::MatrixXd ineq;  // a . w <= 0
  bool exact = true;     // false: linearization of curved constraints

  static ConeDesc whole_space(Eigen::Index n) { return {n, Eigen::MatrixXd(0, n), Eigen::MatrixXd(0, n), true}; }

  /// Row-scaled membership test: |a.w| <= tol |a||w| on equalities, a.w <= tol |a||w| on inequalities.
  bool contains(const Eigen::VectorXd& w, double tol = kConeTol) const {
    const double wn = w.norm();
    for (Eigen::Index i = 0; i < eq.rows(); ++i)
      if (std::abs(eq.row(i).dot(w)) > tol * std::max(1.0, eq.row(i).norm() * wn)) return false;
    for (Eigen::Index i = 0; i < ineq.rows(); ++i)
      if (ineq.row(i).dot(w) > tol * std::max(1.0, ineq.row(i).norm() * wn)) return false;
    return true;
  }
};

struct SubspaceBasis {
  Eigen::MatrixXd basis;  // n x k, orthonormal columns

  Eigen::Index dim() const { return basis.cols(); }
  Eigen::Index ambient() const { return basis.rows(); }
};

/// V-representation: K = span(lineality) + cone(rays).
struct ConeGenerators {
  Eigen::MatrixXd lineality;  // n x l, orthonormal
  Eigen::MatrixXd rays;       // n x r, unit columns
};

/// I(x,p) = { i : |phi_i(x,p)| <= tol }. Throws if some phi_i > tol.
inline std::vector<int> active_set(const ParametricModel& model, const Eigen::VectorXd& x, const Eigen::VectorXd& p,
                                   double tol = kActiveTol) {
  EvalBundle b = eval_bundle(model, x, p);
  std::vector<int> active;
  for (int i = 0; i < model.m(); ++i) {
    if (b.phi(i) > tol) {
      throw Error(ErrorCode::infeasible_point,
                  "constraint " + std::to_string(i + 1) + " violated (" + std::to_string(b.phi(i)) + ")");
    }
    if (std::abs(b.phi(i)) <= tol) active.push_back(i);
  }
  return active;
}

/// Linearized tangent cone { w : grad phi_i . w <= 0, i in I }. Exact when the
/// active constraints are affine in x; under MFCQ it is the tangent cone.
inline ConeDesc tangent_cone(const ParametricModel& model, const Eigen::VectorXd& x, const Eigen::VectorXd& p,
                             const std::vector<int>& active) {
  EvalBundle b = eval_bundle(model, x, p);
  ConeDesc t = ConeDesc::whole_space(model.n());
  t.ineq = select_rows(b.grad_phi, active);
  for (int i : active) t.exact = t.exact && model.affine_in_x(i);
  return t;
}

namespace detail {

inline void for_each_combination(int n, int k, const std::function<void(const std::vector<int>&)>& visit) {
  if (k < 0 || k > n) return;
  std::vector<int> idx(static_cast<std::size_t>(k));
  for (int i = 0; i < k; ++i) idx[static_cast<std::size_t>(i)] = i;
  for (;;) {
    visit(idx);
    int i = k - 1;
    while (i >= 0 && idx[static_cast<std::size_t>(i)] == n - k + i) --i;
    if (i < 0) return;
    ++idx[static_cast<std::size_t>(i)];
    for (int j = i + 1; j < k; ++j) idx[static_cast<std::size_t>(j)] = idx[static_cast<std::size_t>(j - 1)] + 1;
  }
}

inline void push_unique_ray(std::vector<Eigen::VectorXd>& rays, const Eigen::VectorXd& r) {
  for (const auto& q : rays)
    if (q.dot(r) > 1.0 - 1e-9) return;
  rays.push_back(r);
}

}  // namespace detail

/// Extreme-ray enumeration. The lineality space is split off first; the
/// remaining pointed cone has a ray for every tight row set of rank s-1.
inline ConeGenerators generators(const ConeDesc& k) {
  const Eigen::Index n = k.n;
  if (n > kMaxConeDim || k.ineq.rows() > kMaxConeRows) {
    throw Error(ErrorCode::too_large, "cone too large for generator enumeration");
  }
  ConeGenerators g;
  g.lineality = null_space(vstack(k.eq, k.ineq), n);
  Eigen::MatrixXd b = null_space(vstack(k.eq, g.lineality.transpose()), n);
  const Eigen::Index s = b.cols();
  std::vector<Eigen::VectorXd> rays;
  if (s > 0) {
    Eigen::MatrixXd gr = k.ineq * b;  // rows in reduced coordinates
    Eigen::VectorXd row_norm(gr.rows());
    for (Eigen::Index i = 0; i < gr.rows(); ++i) row_norm(i) = k.ineq.row(i).norm();
    auto feasible = [&](const Eigen::VectorXd& y) {
      for (Eigen::Index i = 0; i < gr.rows(); ++i)
        if (gr.row(i).dot(y) > kConeTol * std::max(1.0, row_norm(i))) return false;
      return true;
    };
    detail::for_each_combination(static_cast<int>(gr.rows()), static_cast<int>(s - 1), [&](const std::vector<int>& rows) {
      Eigen::MatrixXd sub = select_rows(gr, rows);
      Eigen::MatrixXd ns = null_space(sub, s);
      if (ns.cols() != 1) return;
      Eigen::VectorXd y = ns.col(0);
      for (double sign : {1.0, -1.0}) {
        if (feasible(sign * y)) {
          Eigen::VectorXd w = b * (sign * y);
          detail::push_unique_ray(rays, w.normalized());
        }
      }
    });
  }
  g.rays.resize(n, static_cast<Eigen::Index>(rays.size()));
  for (std::size_t i = 0; i < rays.size(); ++i) g.rays.col(static_cast<Eigen::Index>(i)) = rays[i];
  return g;
}

/// K = T ∩ {v_hat}^⊥. Requires v_hat in the polar of T (a normal vector).
inline ConeDesc critical_cone(const ConeDesc& t, const Eigen::VectorXd& v_hat) {
  const double scale = std::max(1.0, v_hat.norm());
  if (v_hat.norm() > kConeTol) {
    ConeGenerators g = generators(t);
    for (Eigen::Index j = 0; j < g.rays.cols(); ++j) {
      if (v_hat.dot(g.rays.col(j)) > kConeTol * scale) {
        throw Error(ErrorCode::not_a_normal, "v_hat is not a normal vector at the reference point");
      }
    }
    for (Eigen::Index j = 0; j < g.lineality.cols(); ++j) {
      if (std::abs(v_hat.dot(g.lineality.col(j))) > kConeTol * scale) {
        throw Error(ErrorCode::not_a_normal, "v_hat is not a normal vector at the reference point");
      }
    }
  }
  ConeDesc k = t;
  if (v_hat.norm() > kConeTol) k.eq = vstack(t.eq, v_hat.transpose());
  return k;
}

/// Orthonormal basis of K - K = span(K).
inline SubspaceBasis span_difference(const ConeDesc& k) {
  ConeGenerators g = generators(k);
  Eigen::MatrixXd all(k.n, g.lineality.cols() + g.rays.cols());
  all << g.lineality, g.rays;
  return {column_span(all)};
}

/// Polar cone { z : <z,w> <= 0 for all w in K } in facet form.
inline ConeDesc polar_cone(const ConeDesc& k) {
  ConeGenerators g = generators(k);
  return {k.n, g.lineality.transpose(), g.rays.transpose(), k.exact};
}

/// Subspace { w in span(basis) : a.w = 0 }.
inline SubspaceBasis restrict_orthogonal(const SubspaceBasis& v, const Eigen::VectorXd& a) {
  if (v.dim() == 0 || a.norm() <= kConeTol) return v;
  Eigen::MatrixXd row = (v.basis.transpose() * a).transpose();
  Eigen::MatrixXd ns = null_space(row, v.dim());
  return {v.basis * ns};
}

inline std::string cone_to_csv(const ConeDesc& k) {
  std::ostringstream os;
  os.precision(17);
  os << "kind";
  for (Eigen::Index j = 0; j < k.n; ++j) os << ",a" << j + 1;
  os << "\n";
  auto emit = [&](const char* kind, const Eigen::MatrixXd& rows) {
    for (Eigen::Index i = 0; i < rows.rows(); ++i) {
      os << kind;
      for (Eigen::Index j = 0; j < rows.cols(); ++j) os << "," << rows(i, j);
      os << "\n";
    }
  };
  emit("eq", k.eq);
  emit("le", k.ineq);
  return os.str();
}

inline std::string generators_to_csv(const ConeGenerators& g) {
  std::ostringstream os;
  os.precision(17);
  const Eigen::Index n = g.rays.rows() ? g.rays.rows() : g.lineality.rows();
  os << "kind";
  for (Eigen::Index j = 0; j < n; ++j) os << ",w" << j + 1;
  os << "\n";
  auto emit = [&](const char* kind, const Eigen::MatrixXd& cols) {
    for (Eigen::Index c = 0; c < cols.cols(); ++c) {
      os << kind;
      for (Eigen::Index j = 0; j < cols.rows(); ++j) os << "," << cols(j, c);
      os << "\n";
    }
  };
  emit("line", g.lineality);
  emit("ray", g.rays);
  return os.str();
}

// ---------------------------------------------------------------------------
// Projection onto { x : A x <= b }

/// Euclidean projection by active-set enumeration, remembering the last
/// optimal active set so repeated nearby projections usually cost one solve.
class PolyhedronProjector {
 public:
  PolyhedronProjector(Eigen::MatrixXd a, Eigen::VectorXd b) : a_(std::move(a)), b_(std::move(b)) {
    if (a_.rows() > 20) throw Error(ErrorCode::too_large, "too many constraints for active-set projection");
    row_norm_.resize(a_.rows());
    for (Eigen::Index i = 0; i < a_.rows(); ++i) row_norm_(i) = std::max(1e-300, a_.row(i).norm());
  }

  const Eigen::MatrixXd& a() const { return a_; }
  const Eigen::VectorXd& b() const { return b_; }

  bool feasible(const Eigen::VectorXd& x, double tol = 1e-9) const {
    for (Eigen::Index i = 0; i < a_.rows(); ++i)
      if (a_.row(i).dot(x) - b_(i) > tol * std::max(1.0, std::abs(b_(i)))) return false;
    return true;
  }

  Eigen::VectorXd project(const Eigen::VectorXd& z) {
    const int m = static_cast<int>(a_.rows());
    const Eigen::Index n = z.size();
    if (m == 0 || feasible(z, 0.0)) return z;
    Eigen::VectorXd x;
    if (try_set(last_, z, x)) return x;
    for (int size = 1; size <= std::min<int>(m, static_cast<int>(n)); ++size) {
      bool found = false;
      detail::for_each_combination(m, size, [&](const std::vector<int>& set) {
        if (found) return;
        if (try_set(set, z, x)) {
          found = true;
          last_ = set;
        }
      });
      if (found) return x;
    }
    if (!feasible_lp()) throw Error(ErrorCode::infeasible_point, "constraint set is empty");
    throw Error(ErrorCode::infeasible_point, "projection failed: no active set satisfies KKT");
  }

  /// KKT residual of a claimed projection x of z: stationarity with the
  /// nonnegative least-squares multipliers on the active rows, plus violation.
  double kkt_residual(const Eigen::VectorXd& z, const Eigen::VectorXd& x) const {
    double viol = 0.0;
    std::vector<int> act;
    for (Eigen::Index i = 0; i < a_.rows(); ++i) {
      double s = (a_.row(i).dot(x) - b_(i)) / row_norm_(i);
      viol = std::max(viol, s);
      if (s > -1e-9) act.push_back(static_cast<int>(i));
    }
    Eigen::VectorXd r = z - x;
    if (act.empty()) return std::max(viol, r.norm());
    Eigen::MatrixXd at = select_rows(a_, act).transpose();
    Eigen::VectorXd mu = at.completeOrthogonalDecomposition().solve(r);
    double neg = std::max(0.0, -mu.minCoeff());
    return std::max({viol, (at * mu - r).norm(), neg});
  }

 private:
  bool try_set(const std::vector<int>& set, const Eigen::VectorXd& z, Eigen::VectorXd& x) const {
    if (set.empty()) return false;
    Eigen::MatrixXd as = select_rows(a_, set);
    Eigen::VectorXd bs(static_cast<Eigen::Index>(set.size()));
    for (std::size_t i = 0; i < set.size(); ++i) bs(static_cast<Eigen::Index>(i)) = b_(set[i]);
    Eigen::MatrixXd gram = as * as.transpose();
    Eigen::LDLT<Eigen::MatrixXd> ldlt(gram);
    if (ldlt.info() != Eigen::Success) return false;
    // Reject dependent row sets.
    Eigen::VectorXd diag = ldlt.vectorD();
    if (diag.minCoeff() <= 1e-12 * std::max(1.0, diag.maxCoeff())) return false;
    Eigen::VectorXd mu = ldlt.solve(as * z - bs);
    for (Eigen::Index i = 0; i < mu.size(); ++i)
      if (mu(i) < -1e-12 * std::max(1.0, row_norm_(set[static_cast<std::size_t>(i)]))) return false;
    x = z - as.transpose() * mu;
    return feasible(x, 1e-10);
  }

  bool feasible_lp() const {
    // Feasibility of A x <= b with free x = u - w, u,w >= 0.
    const Eigen::Index n = a_.cols();
    LinearProgram<double> lp;
    lp.num_vars = static_cast<int>(2 * n);
    lp.objective.assign(static_cast<std::size_t>(2 * n), 0.0);
    for (Eigen::Index i = 0; i < a_.rows(); ++i) {
      std::vector<double> row;
      for (Eigen::Index j = 0; j < n; ++j) row.push_back(a_(i, j));
      for (Eigen::Index j = 0; j < n; ++j) row.push_back(-a_(i, j));
      lp.add_le(row, b_(i));
    }
    return solve_lp(lp, 1e-12).status != LpStatus::infeasible;
  }

  Eigen::MatrixXd a_;
  Eigen::VectorXd b_;
  Eigen::VectorXd row_norm_;
  std::vector<int> last_;
};

/// C(p) = { x : A(p) x <= b(p) } for constraints affine in x.
inline PolyhedronProjector polyhedron_at(const ParametricModel& model, const Eigen::VectorXd& p,
                                         const Eigen::VectorXd& x_hint) {
  if (!model.all_affine_in_x()) {
    throw Error(ErrorCode::not_applicable, "projection needs constraints affine in x");
  }
  EvalBundle b = eval_bundle(model, x_hint, p);
  Eigen::VectorXd c = b.phi - b.grad_phi * x_hint;
  return PolyhedronProjector(b.grad_phi, -c);
}

inline Eigen::VectorXd project_polyhedron(const ParametricModel& model, const Eigen::VectorXd& p,
                                          const Eigen::VectorXd& z) {
  PolyhedronProjector proj = polyhedron_at(model, p, z);
  return proj.project(z);
}

}  // namespace fullstab
