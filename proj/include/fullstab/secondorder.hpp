#pragma once

// Second-order tests: quadratic forms on subspaces and polyhedral cones,
// GSSOSC at the reference, sampled GUSOSC on the solution graph, the
// pointwise conditions for parameter-free polyhedral sets, positive
// definiteness for unconstrained maps and the bordered-determinant probe.

#include "fullstab/errors.hpp"
#include "fullstab/kkt.hpp"
#include "fullstab/linalg.hpp"
#include "fullstab/model.hpp"
#include "fullstab/polycone.hpp"
#include "fullstab/random.hpp"
#include "fullstab/simplex.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

namespace fullstab {

inline constexpr double kPdTol = 1e-9;
inline constexpr int kMaxConeFaceRows = 12;
inline constexpr int kGssoscRandomPoints = 64;

struct QuadForm {
  Eigen::MatrixXd h;
  Eigen::MatrixXd hs;

  QuadForm() = default;
  explicit QuadForm(const Eigen::MatrixXd& m) : h(m), hs(symmetric_part(m)) {}

  double value(const Eigen::VectorXd& w) const { return w.dot(hs * w); }
};

struct FormMinimum {
  double value = kInfinity;  // +inf on the trivial set {0}
  Eigen::VectorXd direction;  // unit minimizer, empty when value is +inf
};

namespace detail {

/// Sign convention for reported directions: largest entry positive.
inline Eigen::VectorXd canonical_direction(Eigen::VectorXd w) {
  if (w.size() == 0) return w;
  Eigen::Index idx = 0;
  w.cwiseAbs().maxCoeff(&idx);
  if (w(idx) < 0) w = -w;
  return w.normalized();
}

}  // namespace detail

/// min <H w, w> over unit w in span(V): smallest eigenvalue of V^T H_s V.
inline FormMinimum min_on_subspace(const QuadForm& q, const SubspaceBasis& v) {
  FormMinimum out;
  if (v.dim() == 0) return out;
  Eigen::MatrixXd reduced = symmetric_part(v.basis.transpose() * q.hs * v.basis);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(reduced);
  out.value = es.eigenvalues()(0);
  out.direction = detail::canonical_direction(v.basis * es.eigenvectors().col(0));
  return out;
}

namespace detail {

/// Does span(W) contain a w with G w < 0 (strictly, row-normalized)?
/// Solves max t s.t. G W y + t <= 0, |y|_inf <= 1, t <= 1.
inline std::optional<Eigen::VectorXd> strict_point(const Eigen::MatrixXd& g, const Eigen::MatrixXd& w) {
  const Eigen::Index k = w.cols();
  if (g.rows() == 0) return Eigen::VectorXd(w.col(0));
  Eigen::MatrixXd gw = g * w;
  for (Eigen::Index i = 0; i < gw.rows(); ++i) {
    double s = g.row(i).norm();
    if (s > 0) gw.row(i) /= s;
  }
  LinearProgram<double> lp;
  lp.num_vars = static_cast<int>(2 * k + 1);
  lp.objective.assign(static_cast<std::size_t>(2 * k + 1), 0.0);
  lp.objective.back() = 1.0;
  for (Eigen::Index i = 0; i < gw.rows(); ++i) {
    std::vector<double> row;
    for (Eigen::Index j = 0; j < k; ++j) row.push_back(gw(i, j));
    for (Eigen::Index j = 0; j < k; ++j) row.push_back(-gw(i, j));
    row.push_back(1.0);
    lp.add_le(row, 0.0);
  }
  for (Eigen::Index j = 0; j < 2 * k + 1; ++j) {
    std::vector<double> row(static_cast<std::size_t>(2 * k + 1), 0.0);
    row[static_cast<std::size_t>(j)] = 1.0;
    lp.add_le(row, 1.0);
  }
  auto res = solve_lp(lp, 1e-13);
  if (res.status != LpStatus::optimal || res.value <= 1e-10) return std::nullopt;
  Eigen::VectorXd y(k);
  for (Eigen::Index j = 0; j < k; ++j)
    y(j) = res.x[static_cast<std::size_t>(j)] - res.x[static_cast<std::size_t>(k + j)];
  return Eigen::VectorXd(w * y);
}

}  // namespace detail

/// Exact min of <H w, w> over K ∩ unit sphere. The minimizer lies in the
/// relative interior of some face { E w = 0, G_S w = 0, G_rest w < 0 } and is
/// an eigenvector of H_s compressed to that face's span; each eigenspace is
/// kept when it meets the open face.
inline FormMinimum min_on_cone(const QuadForm& q, const ConeDesc& k) {
  const Eigen::Index n = k.n;
  const int r = static_cast<int>(k.ineq.rows());
  if (r > kMaxConeFaceRows) throw Error(ErrorCode::too_large, "too many inequality rows for face enumeration");
  FormMinimum best;
  std::vector<int> all(static_cast<std::size_t>(r));
  for (int i = 0; i < r; ++i) all[static_cast<std::size_t>(i)] = i;
  for (unsigned mask = 0; mask < (1u << r); ++mask) {
    std::vector<int> tight = mask_to_indices(mask, all);
    std::vector<int> loose;
    for (int i = 0; i < r; ++i)
      if (!(mask & (1u << i))) loose.push_back(i);
    Eigen::MatrixXd u = null_space(vstack(k.eq, select_rows(k.ineq, tight)), n);
    if (u.cols() == 0) continue;
    Eigen::MatrixXd reduced = symmetric_part(u.transpose() * q.hs * u);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(reduced);
    const auto& ev = es.eigenvalues();
    const double scale = std::max(1.0, ev.cwiseAbs().maxCoeff());
    Eigen::MatrixXd g_loose = select_rows(k.ineq, loose);
    for (Eigen::Index start = 0; start < ev.size();) {
      Eigen::Index end = start + 1;
      while (end < ev.size() && ev(end) - ev(start) <= 1e-9 * scale) ++end;
      if (ev(start) < best.value) {
        Eigen::MatrixXd w = u * es.eigenvectors().middleCols(start, end - start);
        if (auto pt = detail::strict_point(g_loose, w)) {
          best.value = ev(start);
          best.direction = pt->normalized();
        }
      }
      start = end;
    }
  }
  return best;
}

// ---------------------------------------------------------------------------
// Reports

enum class Condition { gssosc, gusosc, pvi_closure, pvi_critical, smooth_psd, scoc_probe };
enum class SOVerdict { holds, fails, corroborated };

inline const char* to_string(Condition c) {
  switch (c) {
    case Condition::gssosc: return "GSSOSC";
    case Condition::gusosc: return "GUSOSC";
    case Condition::pvi_closure: return "PVI-closure";
    case Condition::pvi_critical: return "PVI-critical";
    case Condition::smooth_psd: return "SMOOTH-PSD";
    case Condition::scoc_probe: return "SCOC-probe";
  }
  return "?";
}

inline const char* to_string(SOVerdict v) {
  switch (v) {
    case SOVerdict::holds: return "holds";
    case SOVerdict::fails: return "fails";
    case SOVerdict::corroborated: return "corroborated";
  }
  return "?";
}

struct SecondOrderReport {
  Condition condition = Condition::gssosc;
  SOVerdict verdict = SOVerdict::fails;
  double modulus = kInfinity;  // min of the form on the test set; +inf if vacuous
  Eigen::VectorXd witness;     // failure direction (unit)
  Eigen::VectorXd witness_lambda;
  Eigen::VectorXd witness_x, witness_p, witness_v;
  // The cone or subspace the witness belongs to.
  ConeDesc witness_cone;
  Eigen::MatrixXd witness_form;
  int tested = 0;   // multipliers or samples examined
  int rejected = 0; // GUSOSC: candidate samples outside the ball or infeasible
  double closure_modulus = kInfinity;   // pointwise test on cl[T - T] ∩ {v_hat}^⊥
  double critical_modulus = kInfinity;  // pointwise test on K - K
  std::vector<std::string> notes;

  bool vacuous() const { return std::isinf(modulus) && modulus > 0; }
};

/// grad_x L(x,p,lambda) = grad_x f + sum_i lambda_i hess_xx phi_i.
inline Eigen::MatrixXd lagrangian_jacobian(const EvalBundle& b, const Eigen::VectorXd& lambda) {
  Eigen::MatrixXd h = b.jac_f;
  for (Eigen::Index i = 0; i < lambda.size(); ++i)
    if (lambda(i) != 0.0) h += lambda(i) * b.hess_phi[static_cast<std::size_t>(i)];
  return h;
}

namespace detail {

/// Test points of Lambda: vertices, vertex-pair midpoints, random convex combinations.
inline std::vector<Eigen::VectorXd> multiplier_test_points(const MultiplierSet& set, std::uint64_t seed) {
  std::vector<Eigen::VectorXd> pts = set.vertices;
  const std::size_t nv = set.vertices.size();
  for (std::size_t i = 0; i < nv; ++i)
    for (std::size_t j = i + 1; j < nv; ++j) pts.push_back(0.5 * (set.vertices[i] + set.vertices[j]));
  if (nv > 1) {
    Rng rng(seed);
    for (int s = 0; s < kGssoscRandomPoints; ++s) {
      Eigen::VectorXd wts(static_cast<Eigen::Index>(nv));
      for (std::size_t i = 0; i < nv; ++i) wts(static_cast<Eigen::Index>(i)) = -std::log(1.0 - rng.uniform());
      wts /= wts.sum();
      Eigen::VectorXd lam = Eigen::VectorXd::Zero(set.m);
      for (std::size_t i = 0; i < nv; ++i) lam += wts(static_cast<Eigen::Index>(i)) * set.vertices[i];
      pts.push_back(lam);
    }
  }
  return pts;
}

}  // namespace detail

/// GSSOSC: for all lambda in Lambda(x,p,v), grad_x L is positive definite on
/// null{ grad phi_i : i in I_+(lambda) }.
inline SecondOrderReport check_gssosc(const ParametricModel& model, const ReferenceTriple& ref,
                                      double tol_pd = kPdTol, std::uint64_t seed = 1,
                                      double tol_act = kActiveTol) {
  SecondOrderReport rep;
  rep.condition = Condition::gssosc;
  MultiplierSet set = multiplier_polytope_exact(model, ref, tol_act);
  if (!set.bounded) {
    throw Error(ErrorCode::not_applicable, "multiplier set is unbounded (MFCQ fails); second-order test refused");
  }
  if (set.dimension >= 2) rep.notes.push_back("multiplier set has dimension >= 2: vertex/midpoint/random scan is heuristic");
  EvalBundle b = eval_bundle(model, ref.xd(), ref.pd());
  for (const auto& lam : detail::multiplier_test_points(set, seed)) {
    ++rep.tested;
    auto plus = strict_complement(lam, set.active);
    SubspaceBasis v{null_space(select_rows(b.grad_phi, plus), model.n())};
    QuadForm q(lagrangian_jacobian(b, lam));
    FormMinimum fm = min_on_subspace(q, v);
    if (fm.value < rep.modulus) {
      rep.modulus = fm.value;
      rep.witness = fm.direction;
      rep.witness_lambda = lam;
      rep.witness_cone = ConeDesc::whole_space(model.n());
      rep.witness_cone.eq = select_rows(b.grad_phi, plus);
      rep.witness_form = q.h;
    }
  }
  rep.witness_x = ref.xd();
  rep.witness_p = ref.pd();
  rep.witness_v = ref.vd();
  rep.verdict = rep.modulus > tol_pd ? SOVerdict::holds : SOVerdict::fails;
  return rep;
}

/// GUSOSC cone: = 0 on I_+, >= 0 on I \ I_+.
inline ConeDesc gusosc_cone(const Eigen::MatrixXd& grad_phi, const std::vector<int>& active,
                            const std::vector<int>& plus) {
  ConeDesc k = ConeDesc::whole_space(grad_phi.cols());
  k.eq = select_rows(grad_phi, plus);
  std::vector<int> rest;
  for (int i : active)
    if (std::find(plus.begin(), plus.end(), i) == plus.end()) rest.push_back(i);
  k.ineq = -select_rows(grad_phi, rest);
  return k;
}

struct GusoscOptions {
  double eta = 1e-2;
  int samples = 500;
  std::uint64_t seed = 1;
  double tol_pd = kPdTol;
  double tol_act = kActiveTol;
};

namespace detail {

/// Gauss-Newton projection of x onto { phi_J(., p) = 0 }.
inline bool project_to_face(const ParametricModel& model, Eigen::VectorXd& x, const Eigen::VectorXd& p,
                            const std::vector<int>& face) {
  if (face.empty()) return true;
  for (int it = 0; it < 50; ++it) {
    EvalBundle b = eval_bundle(model, x, p);
    Eigen::VectorXd r(static_cast<Eigen::Index>(face.size()));
    for (std::size_t i = 0; i < face.size(); ++i) r(static_cast<Eigen::Index>(i)) = b.phi(face[i]);
    if (r.norm() <= 1e-14) return true;
    Eigen::MatrixXd g = select_rows(b.grad_phi, face);
    x -= g.completeOrthogonalDecomposition().solve(r);
  }
  EvalBundle b = eval_bundle(model, x, p);
  double res = 0.0;
  for (int i : face) res = std::max(res, std::abs(b.phi(i)));
  return res <= 1e-12;
}

}  // namespace detail

/// Sampled GUSOSC. Graph points (x,p,v) near the reference are built by
/// perturbing (x,p), projecting onto a face of the reference active set,
/// drawing multipliers near the reference vertices and setting v = L(x,p,lambda).
/// At each point every vertex of Lambda(x,p,v) is tested: the GUSOSC cone
/// shrinks as I_+ grows, so vertices give the minimum over Lambda.
inline SecondOrderReport check_gusosc(const ParametricModel& model, const ReferenceTriple& ref,
                                      const GusoscOptions& opt = {}) {
  if (opt.eta <= 0.0 || opt.samples < 1) throw Error(ErrorCode::invalid_argument, "GUSOSC needs eta > 0 and N >= 1");
  SecondOrderReport rep;
  rep.condition = Condition::gusosc;
  const int n = model.n(), d = model.d(), m = model.m();
  const Eigen::VectorXd xb = ref.xd(), pb = ref.pd(), vb = ref.vd();
  MultiplierSet ref_set = multiplier_polytope_exact(model, ref, opt.tol_act);
  if (!ref_set.bounded) {
    throw Error(ErrorCode::not_applicable, "multiplier set is unbounded (MFCQ fails); second-order test refused");
  }
  const std::vector<int>& ref_active = ref_set.active;
  Rng rng(opt.seed);
  int mfcq_failures = 0;

  auto test_point = [&](const Eigen::VectorXd& x, const Eigen::VectorXd& p, const Eigen::VectorXd& v,
                        const std::vector<int>& active) {
    MultiplierSet set = multiplier_polytope(model, x, p, v, active);
    if (!set.bounded) {
      ++mfcq_failures;
      return;
    }
    EvalBundle b = eval_bundle(model, x, p);
    for (const auto& lam : set.vertices) {
      auto plus = strict_complement(lam, active);
      ConeDesc k = gusosc_cone(b.grad_phi, active, plus);
      QuadForm q(lagrangian_jacobian(b, lam));
      FormMinimum fm = min_on_cone(q, k);
      if (fm.value < rep.modulus) {
        rep.modulus = fm.value;
        rep.witness = fm.direction;
        rep.witness_lambda = lam;
        rep.witness_x = x;
        rep.witness_p = p;
        rep.witness_v = v;
        rep.witness_cone = k;
        rep.witness_form = q.h;
      }
    }
    ++rep.tested;
  };

  // The reference itself is a graph point.
  test_point(xb, pb, vb, active_set(model, xb, pb, opt.tol_act));

  const int max_attempts = 50 * opt.samples;
  for (int attempt = 0; attempt < max_attempts && rep.tested < opt.samples; ++attempt) {
    const double radius = opt.eta * rng.uniform();
    Eigen::VectorXd dz = rng.in_ball(n + d, radius / 2.0);
    Eigen::VectorXd x = xb + dz.head(n);
    Eigen::VectorXd p = pb + dz.tail(d);
    std::vector<int> face;
    if (rng.uniform() < 0.5) {
      face = ref_active;
    } else {
      for (int i : ref_active)
        if (rng.uniform() < 0.5) face.push_back(i);
    }
    std::vector<int> active;
    try {
      if (!detail::project_to_face(model, x, p, face)) {
        ++rep.rejected;
        continue;
      }
      EvalBundle b = eval_bundle(model, x, p);
      if (m > 0 && b.phi.maxCoeff() > 1e-10) {
        ++rep.rejected;
        continue;
      }
      active = active_set(model, x, p, opt.tol_act);
      // Multipliers near a reference vertex, restricted to I(x,p).
      const Eigen::VectorXd& base = ref_set.vertices[rng.below(ref_set.vertices.size())];
      Eigen::VectorXd lam = Eigen::VectorXd::Zero(m);
      const double sigma = radius / (4.0 * std::max(1.0, b.grad_phi.norm()));
      for (int i : active) {
        double val = base(i) + sigma * rng.normal();
        if (rng.uniform() < 0.25) val = 0.0;
        lam(i) = std::max(0.0, val);
      }
      Eigen::VectorXd v = b.f + b.grad_phi.transpose() * lam;
      Eigen::VectorXd gap(2 * n + d);
      gap << x - xb, p - pb, v - vb;
      if (gap.norm() > opt.eta) {
        ++rep.rejected;
        continue;
      }
      test_point(x, p, v, active);
    } catch (const Error&) {
      ++rep.rejected;
    }
  }
  if (rep.tested <= 1 && opt.samples > 1) {
    throw Error(ErrorCode::no_samples, "no graph points found near the reference (degenerate geometry)");
  }
  if (mfcq_failures > 0) {
    rep.notes.push_back(std::to_string(mfcq_failures) + " sampled points had unbounded multiplier sets (skipped)");
  }
  if (rep.vacuous()) rep.notes.push_back("every sampled cone is {0}: the condition holds vacuously");
  rep.verdict = rep.modulus > opt.tol_pd ? SOVerdict::corroborated : SOVerdict::fails;
  return rep;
}

/// Pointwise conditions for constraints affine in x and free of p:
/// closure modulus on cl[T - T] ∩ {v_hat}^⊥ and critical modulus on K - K.
/// The verdict follows the critical modulus.
inline SecondOrderReport check_pvi_pointwise(const ParametricModel& model, const ReferenceTriple& ref,
                                             double tol_pd = kPdTol, double tol_act = kActiveTol) {
  if (!model.all_affine_in_x() || !model.parameter_free_constraints()) {
    throw Error(ErrorCode::not_applicable, "pointwise test needs constraints affine in x and independent of p");
  }
  SecondOrderReport rep;
  rep.condition = Condition::pvi_critical;
  const Eigen::VectorXd x = ref.xd(), p = ref.pd(), v_hat = ref.v_hat_d();
  ConeDesc t = tangent_cone(model, x, p, active_set(model, x, p, tol_act));
  ConeDesc k = critical_cone(t, v_hat);
  EvalBundle b = eval_bundle(model, x, p);
  QuadForm q(b.jac_f);
  SubspaceBasis closure = restrict_orthogonal(span_difference(t), v_hat);
  SubspaceBasis crit = span_difference(k);
  FormMinimum a = min_on_subspace(q, closure);
  FormMinimum c = min_on_subspace(q, crit);
  rep.closure_modulus = a.value;
  rep.critical_modulus = c.value;
  rep.modulus = c.value;
  rep.witness = c.value <= tol_pd ? c.direction : Eigen::VectorXd();
  rep.witness_cone = ConeDesc::whole_space(model.n());
  rep.witness_cone.eq = null_space(crit.basis.transpose(), model.n()).transpose();
  rep.witness_form = q.h;
  rep.witness_x = x;
  rep.witness_p = p;
  rep.witness_v = ref.vd();
  rep.tested = 1;
  rep.verdict = c.value > tol_pd ? SOVerdict::holds : SOVerdict::fails;
  if ((a.value > tol_pd) != (c.value > tol_pd)) {
    rep.notes.push_back("closure-type condition disagrees with the critical-cone condition; verdict follows the critical cone");
  }
  return rep;
}

/// Unconstrained maps: positive definiteness of the symmetric part of grad_x f.
inline SecondOrderReport check_smooth_psd(const ParametricModel& model, const ReferenceTriple& ref,
                                          double tol_pd = kPdTol) {
  if (model.m() != 0) throw Error(ErrorCode::not_applicable, "smooth test needs a model without constraints");
  SecondOrderReport rep;
  rep.condition = Condition::smooth_psd;
  EvalBundle b = eval_bundle(model, ref.xd(), ref.pd());
  QuadForm q(b.jac_f);
  FormMinimum fm = min_on_subspace(q, {Eigen::MatrixXd::Identity(model.n(), model.n())});
  rep.modulus = fm.value;
  rep.witness = fm.direction;
  rep.witness_cone = ConeDesc::whole_space(model.n());
  rep.witness_form = q.h;
  rep.tested = 1;
  rep.verdict = fm.value > tol_pd ? SOVerdict::holds : SOVerdict::fails;
  return rep;
}

// ---------------------------------------------------------------------------
// Bordered determinant probe

struct ScocDeterminant {
  std::vector<int> basis;
  double det = 0.0;          // row-scaled floating value
  std::string exact;         // exact rational value
  bool zero = false;
};

/// det [[grad_x L, G_J^T], [-G_J, 0]] at the reference, in exact arithmetic.
inline ScocDeterminant scoc_probe(const ParametricModel& model, const ReferenceTriple& ref,
                                  const std::vector<Rational>& lambda, const std::vector<int>& basis) {
  const int n = model.n();
  const int k = static_cast<int>(basis.size());
  auto grads = model.eval_gradients<Rational>(ref.x, ref.p);
  DenseMatrix<Rational> g(k, n);
  for (int i = 0; i < k; ++i)
    for (int j = 0; j < n; ++j) g(i, j) = grads[static_cast<std::size_t>(basis[static_cast<std::size_t>(i)])][static_cast<std::size_t>(j)];
  if (rank(g, Rational(0)) < k) throw Error(ErrorCode::dependent_rows, "basis gradients are linearly dependent");
  // grad_x L exactly: Jacobian of f plus multiplier-weighted Hessians.
  auto jac = model.eval_jacobian<Rational>(ref.x, ref.p);
  DenseMatrix<Rational> big(n + k, n + k);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) big(i, j) = jac[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
  for (int c = 0; c < model.m(); ++c) {
    const Rational& lam = lambda[static_cast<std::size_t>(c)];
    if (lam == 0) continue;
    const auto& hess = model.constraint_hessians()[static_cast<std::size_t>(c)];
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        const Expr& e = hess[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
        if (!e.is_zero()) big(i, j) += lam * evaluate<Rational>(e, ref.x, ref.p);
      }
  }
  for (int i = 0; i < k; ++i)
    for (int j = 0; j < n; ++j) {
      big(j, n + i) = g(i, j);
      big(n + i, j) = -g(i, j);
    }
  ScocDeterminant out;
  out.basis = basis;
  Rational det = determinant(big);
  out.exact = det.str();
  // Row-norm scaling for the floating report.
  double scaled = to_double(det);
  for (int i = 0; i < n + k; ++i) {
    double norm = 0.0;
    for (int j = 0; j < n + k; ++j) norm += to_double(big(i, j)) * to_double(big(i, j));
    if (norm > 0) scaled /= std::sqrt(norm);
  }
  out.det = scaled;
  out.zero = det == 0;
  return out;
}

/// All bases J with I_+(lambda) ⊆ J ⊆ I and independent gradients.
inline std::vector<ScocDeterminant> scoc_scan(const ParametricModel& model, const ReferenceTriple& ref,
                                              const std::vector<Rational>& lambda, double tol_act = kActiveTol) {
  auto active = exact_active_set(model, ref, tol_act);
  if (active.size() > 16) throw Error(ErrorCode::too_large, "too many active constraints for the basis scan");
  std::vector<int> plus, optional;
  for (int i : active) (lambda[static_cast<std::size_t>(i)] > 0 ? plus : optional).push_back(i);
  std::vector<ScocDeterminant> out;
  for (unsigned mask = 0; mask < (1u << optional.size()); ++mask) {
    std::vector<int> basis = plus;
    for (int i : mask_to_indices(mask, optional)) basis.push_back(i);
    std::sort(basis.begin(), basis.end());
    if (static_cast<int>(basis.size()) > model.n()) continue;
    try {
      out.push_back(scoc_probe(model, ref, lambda, basis));
    } catch (const Error& e) {
      if (e.code() != ErrorCode::dependent_rows) throw;
    }
  }
  return out;
}

}  // namespace fullstab
