#pragma once

// Constraint qualifications (MFCQ, LICQ, sampled CRCQ) and the multiplier set
//   Lambda(x,p,v) = { lambda >= 0 : sum_i lambda_i grad phi_i = v - f(x,p),
//                     lambda_i = 0 for inactive i }.

#include "fullstab/errors.hpp"
#include "fullstab/linalg.hpp"
#include "fullstab/model.hpp"
#include "fullstab/polycone.hpp"
#include "fullstab/random.hpp"
#include "fullstab/simplex.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <optional>
#include <string>
#include <vector>

namespace fullstab {

inline constexpr double kCqTol = 1e-8;
inline constexpr int kMaxCrcqActive = 12;
inline constexpr int kMaxMultiplierActive = 16;

enum class CQKind { mfcq, licq, crcq };
enum class CQVerdict { holds, fails, corroborated };

inline const char* to_string(CQKind k) {
  switch (k) {
    case CQKind::mfcq: return "MFCQ";
    case CQKind::licq: return "LICQ";
    case CQKind::crcq: return "CRCQ";
  }
  return "?";
}

inline const char* to_string(CQVerdict v) {
  switch (v) {
    case CQVerdict::holds: return "holds";
    case CQVerdict::fails: return "fails";
    case CQVerdict::corroborated: return "corroborated";
  }
  return "?";
}

struct CQReport {
  CQKind kind = CQKind::mfcq;
  CQVerdict verdict = CQVerdict::fails;
  std::vector<int> active;
  // MFCQ: LP margin t* (+inf when nothing is active) and direction d.
  double margin = 0.0;
  Eigen::VectorXd direction;
  // LICQ: rank of the active gradients.
  int rank = 0;
  // CRCQ failure witness: subset J, its rank at the reference and at a sample.
  std::vector<int> witness_subset;
  int rank_at_reference = 0;
  int rank_at_witness = 0;
  Eigen::VectorXd witness_x;
  Eigen::VectorXd witness_p;
  int samples = 0;

  bool ok() const { return verdict != CQVerdict::fails; }
};

namespace detail {

/// max t s.t. g_i.d + t <= 0, |d|_inf <= 1, written with d = d+ - d-.
template <class T>
LpResult<T> mfcq_lp(const std::vector<std::vector<T>>& grads, int n) {
  LinearProgram<T> lp;
  lp.num_vars = 2 * n + 1;
  lp.objective.assign(static_cast<std::size_t>(2 * n + 1), T(0));
  lp.objective.back() = T(1);
  for (const auto& g : grads) {
    std::vector<T> row(static_cast<std::size_t>(2 * n + 1), T(0));
    for (int j = 0; j < n; ++j) {
      row[static_cast<std::size_t>(j)] = g[static_cast<std::size_t>(j)];
      row[static_cast<std::size_t>(n + j)] = -g[static_cast<std::size_t>(j)];
    }
    row.back() = T(1);
    lp.add_le(row, T(0));
  }
  for (int j = 0; j < 2 * n; ++j) {
    std::vector<T> row(static_cast<std::size_t>(2 * n + 1), T(0));
    row[static_cast<std::size_t>(j)] = T(1);
    lp.add_le(row, T(1));
  }
  return solve_lp(lp, zero_tolerance<T>(1e-12));
}

template <class T>
CQReport mfcq_report(const std::vector<std::vector<T>>& grads, std::vector<int> active, int n) {
  CQReport r;
  r.kind = CQKind::mfcq;
  r.active = std::move(active);
  r.direction = Eigen::VectorXd::Zero(n);
  if (grads.empty()) {
    r.verdict = CQVerdict::holds;
    r.margin = kInfinity;
    return r;
  }
  auto res = mfcq_lp(grads, n);
  r.margin = to_double(res.value);
  for (int j = 0; j < n; ++j)
    r.direction(j) = to_double(res.x[static_cast<std::size_t>(j)] - res.x[static_cast<std::size_t>(n + j)]);
  r.verdict = res.value > T(kCqTol) ? CQVerdict::holds : CQVerdict::fails;
  return r;
}

inline int rank_with_floor(const Eigen::MatrixXd& a) {
  if (a.rows() == 0 || a.isZero(0.0)) return 0;
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(a);
  const auto& s = svd.singularValues();
  int r = 0;
  for (Eigen::Index i = 0; i < s.size(); ++i)
    if (s(i) > std::max(kRankRelTol * s(0), 1e-12)) ++r;
  return r;
}

}  // namespace detail

/// MFCQ at a floating-point point through the margin LP.
inline CQReport check_mfcq(const ParametricModel& model, const Eigen::VectorXd& x, const Eigen::VectorXd& p,
                           double tol_act = kActiveTol) {
  auto active = active_set(model, x, p, tol_act);
  EvalBundle b = eval_bundle(model, x, p);
  std::vector<std::vector<double>> grads;
  for (int i : active) {
    std::vector<double> g(static_cast<std::size_t>(model.n()));
    for (int j = 0; j < model.n(); ++j) g[static_cast<std::size_t>(j)] = b.grad_phi(i, j);
    grads.push_back(std::move(g));
  }
  return detail::mfcq_report(grads, std::move(active), model.n());
}

/// Exact active set at the reference (|phi_i| <= tol compared in rationals).
inline std::vector<int> exact_active_set(const ParametricModel& model, const ReferenceTriple& ref,
                                         double tol_act = kActiveTol) {
  auto phi = model.eval_constraints<Rational>(ref.x, ref.p);
  std::vector<int> active;
  for (std::size_t i = 0; i < phi.size(); ++i)
    if (abs_value(phi[i]) <= Rational(tol_act)) active.push_back(static_cast<int>(i));
  return active;
}

/// MFCQ at the reference with exact rational pivoting.
inline CQReport check_mfcq_exact(const ParametricModel& model, const ReferenceTriple& ref,
                                 double tol_act = kActiveTol) {
  auto active = exact_active_set(model, ref, tol_act);
  auto all = model.eval_gradients<Rational>(ref.x, ref.p);
  std::vector<std::vector<Rational>> grads;
  for (int i : active) grads.push_back(all[static_cast<std::size_t>(i)]);
  return detail::mfcq_report(grads, std::move(active), model.n());
}

inline CQReport check_licq(const ParametricModel& model, const Eigen::VectorXd& x, const Eigen::VectorXd& p,
                           double tol_act = kActiveTol) {
  CQReport r;
  r.kind = CQKind::licq;
  r.active = active_set(model, x, p, tol_act);
  EvalBundle b = eval_bundle(model, x, p);
  r.rank = numerical_rank(select_rows(b.grad_phi, r.active));
  r.verdict = r.rank == static_cast<int>(r.active.size()) ? CQVerdict::holds : CQVerdict::fails;
  return r;
}

/// Constant-rank probe: every subset of the active gradients keeps its rank
/// at N points sampled in the (x,p)-ball of radius eta.
inline CQReport probe_crcq(const ParametricModel& model, const Eigen::VectorXd& x, const Eigen::VectorXd& p,
                           double eta, int samples, std::uint64_t seed, double tol_act = kActiveTol) {
  if (eta <= 0.0 || samples < 1) throw Error(ErrorCode::invalid_argument, "CRCQ probe needs eta > 0 and N >= 1");
  CQReport r;
  r.kind = CQKind::crcq;
  r.active = active_set(model, x, p, tol_act);
  const int k = static_cast<int>(r.active.size());
  if (k > kMaxCrcqActive) throw Error(ErrorCode::too_large, "too many active constraints for the CRCQ probe");
  bool constant = true;
  for (int i : r.active) constant = constant && model.constant_gradient(i);
  if (constant) {
    r.verdict = CQVerdict::holds;
    return r;
  }
  const unsigned subsets = 1u << k;
  EvalBundle b0 = eval_bundle(model, x, p);
  std::vector<int> ref_rank(subsets, 0);
  for (unsigned mask = 1; mask < subsets; ++mask)
    ref_rank[mask] = detail::rank_with_floor(select_rows(b0.grad_phi, mask_to_indices(mask, r.active)));
  Rng rng(seed);
  const Eigen::Index n = x.size(), d = p.size();
  for (int s = 0; s < samples; ++s) {
    Eigen::VectorXd dz = rng.in_ball(n + d, eta);
    Eigen::VectorXd xs = x + dz.head(n);
    Eigen::VectorXd ps = p + dz.tail(d);
    EvalBundle b = eval_bundle(model, xs, ps);
    ++r.samples;
    for (unsigned mask = 1; mask < subsets; ++mask) {
      auto subset = mask_to_indices(mask, r.active);
      int rk = detail::rank_with_floor(select_rows(b.grad_phi, subset));
      if (rk != ref_rank[mask]) {
        r.verdict = CQVerdict::fails;
        r.witness_subset = subset;
        r.rank_at_reference = ref_rank[mask];
        r.rank_at_witness = rk;
        r.witness_x = xs;
        r.witness_p = ps;
        return r;
      }
    }
  }
  r.verdict = CQVerdict::corroborated;
  return r;
}

// ---------------------------------------------------------------------------
// Multiplier polytope

struct MultiplierSet {
  int m = 0;
  std::vector<int> active;
  Eigen::MatrixXd gradients;  // m x n, all constraints
  Eigen::VectorXd rhs;        // v - f(x,p)
  std::vector<Eigen::VectorXd> vertices;          // length m, zero off the active set
  std::vector<std::vector<Rational>> exact_vertices;  // filled by the exact builder
  int dimension = 0;
  bool bounded = true;
  Eigen::VectorXd recession;  // nonzero direction when unbounded

  /// Stationarity residual and sign check of a candidate multiplier.
  double residual(const Eigen::VectorXd& lambda) const {
    return (gradients.transpose() * lambda - rhs).norm();
  }
  bool contains(const Eigen::VectorXd& lambda, double tol = 1e-9) const {
    if (lambda.size() != m) return false;
    for (int i = 0; i < m; ++i) {
      bool is_active = std::find(active.begin(), active.end(), i) != active.end();
      if (lambda(i) < -1e-12 || (!is_active && lambda(i) != 0.0)) return false;
    }
    return residual(lambda) <= tol * std::max(1.0, rhs.norm());
  }
};

namespace detail {

inline int affine_dimension(const std::vector<Eigen::VectorXd>& pts) {
  if (pts.size() < 2) return 0;
  Eigen::MatrixXd diffs(pts[0].size(), static_cast<Eigen::Index>(pts.size() - 1));
  for (std::size_t i = 1; i < pts.size(); ++i) diffs.col(static_cast<Eigen::Index>(i - 1)) = pts[i] - pts[0];
  return numerical_rank(diffs);
}

/// Recession cone { mu >= 0 : G_I^T mu = 0 } is trivial iff max sum(mu) = 0
/// over that cone intersected with sum(mu) <= 1.
template <class T>
std::optional<std::vector<T>> recession_direction(const std::vector<std::vector<T>>& cols, int n) {
  const int k = static_cast<int>(cols.size());
  if (k == 0) return std::nullopt;
  LinearProgram<T> lp;
  lp.num_vars = k;
  lp.objective.assign(static_cast<std::size_t>(k), T(1));
  for (int j = 0; j < n; ++j) {
    std::vector<T> row(static_cast<std::size_t>(k));
    for (int i = 0; i < k; ++i) row[static_cast<std::size_t>(i)] = cols[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
    lp.add_eq(row, T(0));
  }
  lp.add_le(std::vector<T>(static_cast<std::size_t>(k), T(1)), T(1));
  auto res = solve_lp(lp, zero_tolerance<T>(1e-12));
  if (res.status == LpStatus::optimal && res.value > T(kCqTol)) return res.x;
  return std::nullopt;
}

}  // namespace detail

/// Exact vertex enumeration: every subset S of active columns with
/// independent gradients whose solution of G_S^T lambda_S = v_hat is >= 0.
inline MultiplierSet multiplier_polytope_exact(const ParametricModel& model, const std::vector<Rational>& x,
                                               const std::vector<Rational>& p, const std::vector<Rational>& v,
                                               const std::vector<int>& active) {
  const int n = model.n(), m = model.m();
  const int k = static_cast<int>(active.size());
  if (k > kMaxMultiplierActive) throw Error(ErrorCode::too_large, "too many active constraints for vertex enumeration");
  auto grads = model.eval_gradients<Rational>(x, p);
  auto fx = model.eval_f<Rational>(x, p);
  std::vector<Rational> rhs(static_cast<std::size_t>(n));
  for (int j = 0; j < n; ++j) rhs[static_cast<std::size_t>(j)] = v[static_cast<std::size_t>(j)] - fx[static_cast<std::size_t>(j)];

  MultiplierSet set;
  set.m = m;
  set.active = active;
  set.gradients.resize(m, n);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j) set.gradients(i, j) = to_double(grads[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)]);
  set.rhs = to_eigen(rhs);

  for (unsigned mask = 0; mask < (1u << k); ++mask) {
    auto cols = mask_to_indices(mask, active);
    const int s = static_cast<int>(cols.size());
    if (s > n) continue;
    bool ok = true;
    std::vector<Rational> lam(static_cast<std::size_t>(m), Rational(0));
    if (s == 0) {
      for (const auto& r : rhs) ok = ok && r == 0;
    } else {
      DenseMatrix<Rational> a(n, s);
      for (int j = 0; j < n; ++j)
        for (int c = 0; c < s; ++c) a(j, c) = grads[static_cast<std::size_t>(cols[static_cast<std::size_t>(c)])][static_cast<std::size_t>(j)];
      auto sol = solve_full_column_rank(a, rhs, Rational(0));
      if (!sol) continue;
      for (int c = 0; c < s; ++c) {
        const Rational& val = (*sol)[static_cast<std::size_t>(c)];
        if (val < 0) ok = false;
        lam[static_cast<std::size_t>(cols[static_cast<std::size_t>(c)])] = val;
      }
    }
    if (!ok) continue;
    if (std::find(set.exact_vertices.begin(), set.exact_vertices.end(), lam) != set.exact_vertices.end()) continue;
    set.exact_vertices.push_back(lam);
    set.vertices.push_back(to_eigen(lam));
  }
  if (set.vertices.empty()) throw Error(ErrorCode::no_multiplier, "v - f(x,p) is not a normal vector: no multiplier exists");
  std::vector<std::vector<Rational>> active_cols;
  for (int i : active) active_cols.push_back(grads[static_cast<std::size_t>(i)]);
  if (auto dir = detail::recession_direction(active_cols, n)) {
    set.bounded = false;
    set.recession = Eigen::VectorXd::Zero(m);
    for (int c = 0; c < k; ++c) set.recession(active[static_cast<std::size_t>(c)]) = to_double((*dir)[static_cast<std::size_t>(c)]);
  }
  set.dimension = set.bounded ? detail::affine_dimension(set.vertices) : -1;
  return set;
}

inline MultiplierSet multiplier_polytope_exact(const ParametricModel& model, const ReferenceTriple& ref,
                                               double tol_act = kActiveTol) {
  return multiplier_polytope_exact(model, ref.x, ref.p, ref.v, exact_active_set(model, ref, tol_act));
}

/// Floating-point vertex enumeration for perturbed points.
inline MultiplierSet multiplier_polytope(const ParametricModel& model, const Eigen::VectorXd& x,
                                         const Eigen::VectorXd& p, const Eigen::VectorXd& v,
                                         const std::vector<int>& active) {
  const int n = model.n(), m = model.m();
  const int k = static_cast<int>(active.size());
  if (k > kMaxMultiplierActive) throw Error(ErrorCode::too_large, "too many active constraints for vertex enumeration");
  EvalBundle b = eval_bundle(model, x, p);
  MultiplierSet set;
  set.m = m;
  set.active = active;
  set.gradients = b.grad_phi;
  set.rhs = v - b.f;
  const double scale = std::max(1.0, set.rhs.norm());
  for (unsigned mask = 0; mask < (1u << k); ++mask) {
    auto cols = mask_to_indices(mask, active);
    const int s = static_cast<int>(cols.size());
    if (s > n) continue;
    Eigen::VectorXd lam = Eigen::VectorXd::Zero(m);
    if (s > 0) {
      Eigen::MatrixXd a = select_rows(b.grad_phi, cols).transpose();
      if (numerical_rank(a) < s) continue;
      Eigen::VectorXd sol = a.colPivHouseholderQr().solve(set.rhs);
      if ((a * sol - set.rhs).norm() > 1e-9 * scale) continue;
      bool ok = true;
      for (int c = 0; c < s; ++c) {
        if (sol(c) < -1e-10 * scale) ok = false;
        lam(cols[static_cast<std::size_t>(c)]) = std::max(0.0, sol(c));
      }
      if (!ok) continue;
    } else if (set.rhs.norm() > 1e-9 * scale) {
      continue;
    }
    bool dup = false;
    for (const auto& w : set.vertices) dup = dup || (w - lam).norm() <= 1e-8 * std::max(1.0, lam.norm());
    if (!dup) set.vertices.push_back(lam);
  }
  if (set.vertices.empty()) throw Error(ErrorCode::no_multiplier, "v - f(x,p) is not a normal vector: no multiplier exists");
  std::vector<std::vector<double>> active_cols;
  for (int i : active) {
    std::vector<double> g(static_cast<std::size_t>(n));
    for (int j = 0; j < n; ++j) g[static_cast<std::size_t>(j)] = b.grad_phi(i, j);
    active_cols.push_back(std::move(g));
  }
  if (auto dir = detail::recession_direction(active_cols, n)) {
    set.bounded = false;
    set.recession = Eigen::VectorXd::Zero(m);
    for (int c = 0; c < k; ++c) set.recession(active[static_cast<std::size_t>(c)]) = (*dir)[static_cast<std::size_t>(c)];
  }
  set.dimension = set.bounded ? detail::affine_dimension(set.vertices) : -1;
  return set;
}

inline MultiplierSet multiplier_polytope(const ParametricModel& model, const Eigen::VectorXd& x,
                                         const Eigen::VectorXd& p, const Eigen::VectorXd& v,
                                         double tol_act = kActiveTol) {
  return multiplier_polytope(model, x, p, v, active_set(model, x, p, tol_act));
}

/// I_+ = { i in I : lambda_i > tol }.
inline std::vector<int> strict_complement(const Eigen::VectorXd& lambda, const std::vector<int>& active,
                                          double tol = kCqTol) {
  std::vector<int> out;
  for (int i : active)
    if (lambda(i) > tol) out.push_back(i);
  return out;
}

}  // namespace fullstab
