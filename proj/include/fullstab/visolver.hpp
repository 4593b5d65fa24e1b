#pragma once

// Solvers for the parametric variational condition v in f(x,p) + N_C(p)(x):
// a projected fixed-point iteration for constraints affine in x, and an
// exhaustive KKT face enumeration that also decides uniqueness in a box.
// build_localization tabulates the localization theta(v,p) on a grid.

#include "fullstab/errors.hpp"
#include "fullstab/linalg.hpp"
#include "fullstab/model.hpp"
#include "fullstab/polycone.hpp"
#include "fullstab/random.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace fullstab {

inline constexpr double kSolveTol = 1e-9;
inline constexpr double kDedupeTol = 1e-7;
inline constexpr double kDefaultStep = 1e-2;
inline constexpr int kMaxProjectedIterations = 200000;
inline constexpr int kMaxFaceConstraints = 12;
inline constexpr double kDefaultRho = 0.05;
inline constexpr int kDefaultGrid = 5;
inline constexpr int kDefaultRandomPoints = 200;
inline constexpr double kUniquenessRadiusFactor = 4.0;
inline constexpr int kMaxHalvings = 6;
inline constexpr long kMaxGridNodes = 4000;

enum class SolveMethod { projected_iteration, face_enumeration };
enum class Multiplicity { not_checked, unique_in_box, multiple_found };

inline const char* to_string(SolveMethod m) {
  return m == SolveMethod::projected_iteration ? "projected-iteration" : "face-enumeration";
}

inline const char* to_string(Multiplicity m) {
  switch (m) {
    case Multiplicity::not_checked: return "not-checked";
    case Multiplicity::unique_in_box: return "unique-in-box";
    case Multiplicity::multiple_found: return "multiple-found";
  }
  return "?";
}

struct SolveOutcome {
  Eigen::VectorXd x;
  Eigen::VectorXd lambda;   // m; face multipliers (face enumeration only)
  double residual = kInfinity;
  int iterations = 0;
  SolveMethod method = SolveMethod::projected_iteration;
  Multiplicity multiplicity = Multiplicity::not_checked;
  bool converged = false;
  double step = 0.0;        // gamma actually used (projected iteration)
  std::vector<int> face;    // J (face enumeration)
};

/// Natural residual |x - Proj_C(p)(x - (f(x,p) - v))| for constraints affine in x.
inline double natural_residual(const ParametricModel& model, PolyhedronProjector& proj, const Eigen::VectorXd& v,
                               const Eigen::VectorXd& p, const Eigen::VectorXd& x) {
  EvalBundle b = eval_bundle(model, x, p);
  return (x - proj.project(x - (b.f - v))).norm();
}

/// KKT residual max(|f + G^T lambda - v|, max phi_+, max (-lambda)_+).
inline double kkt_residual(const ParametricModel& model, const Eigen::VectorXd& v, const Eigen::VectorXd& p,
                           const Eigen::VectorXd& x, const Eigen::VectorXd& lambda) {
  EvalBundle b = eval_bundle(model, x, p);
  double r = (b.f + b.grad_phi.transpose() * lambda - v).norm();
  if (b.phi.size() > 0) r = std::max(r, b.phi.maxCoeff());
  if (lambda.size() > 0) r = std::max(r, -lambda.minCoeff());
  return r;
}

struct ProjectedOptions {
  std::optional<double> step;  // gamma; default 0.9 kappa/L^2 when moduli are given, else kDefaultStep
  std::optional<double> kappa;
  std::optional<double> lipschitz;
  int max_iterations = kMaxProjectedIterations;
  double tol = 1e-11;          // on |x_{k+1} - x_k| / gamma
};

/// x <- Proj_C(p)(x - gamma (f(x,p) - v)). Non-convergence is returned as a
/// status with the last iterate; divergence halves gamma (up to 10 times)
/// unless the step was given explicitly.
inline SolveOutcome solve_projected(const ParametricModel& model, const Eigen::VectorXd& v, const Eigen::VectorXd& p,
                                    const Eigen::VectorXd& x0, const ProjectedOptions& opt = {}) {
  PolyhedronProjector proj = polyhedron_at(model, p, x0);
  double gamma = kDefaultStep;
  if (opt.step) {
    gamma = *opt.step;
  } else if (opt.kappa && opt.lipschitz && *opt.kappa > 0.0 && *opt.lipschitz > 0.0) {
    gamma = 0.9 * *opt.kappa / (*opt.lipschitz * *opt.lipschitz);
  }
  if (!(gamma > 0.0)) throw Error(ErrorCode::invalid_argument, "step gamma must be positive");
  const int halvings = opt.step ? 0 : 10;
  SolveOutcome out;
  out.method = SolveMethod::projected_iteration;
  for (int attempt = 0; attempt <= halvings; ++attempt) {
    Eigen::VectorXd x = proj.project(x0);
    bool diverged = false;
    int it = 0;
    for (; it < opt.max_iterations; ++it) {
      EvalBundle b = eval_bundle(model, x, p);
      Eigen::VectorXd next = proj.project(x - gamma * (b.f - v));
      double move = (next - x).norm();
      x = std::move(next);
      if (!std::isfinite(move) || x.norm() > 1e8) {
        diverged = true;
        break;
      }
      if (move / gamma <= opt.tol) {
        ++it;
        break;
      }
    }
    out.x = x;
    out.iterations = it;
    out.step = gamma;
    if (!diverged) {
      out.residual = natural_residual(model, proj, v, p, x);
      out.converged = out.residual < kSolveTol;
      return out;
    }
    if (attempt < halvings) gamma /= 2.0;
  }
  out.residual = kInfinity;
  out.converged = false;
  return out;
}

/// Axis-aligned box |x - center|_inf <= radius.
struct SearchBox {
  Eigen::VectorXd center;
  double radius = 0.0;

  bool contains(const Eigen::VectorXd& x, double tol = 1e-9) const {
    return (x - center).cwiseAbs().maxCoeff() <= radius + tol;
  }
};

struct FaceOptions {
  int newton_iterations = 50;
  int random_starts = 4;  // extra Newton starts for nonlinear face systems
  std::uint64_t seed = 1;
};

struct FaceSolveResult {
  std::vector<SolveOutcome> solutions;  // distinct, inside the box
  int faces_tried = 0;
  int singular_faces = 0;
  int outside_box = 0;
};

namespace detail {

/// Newton on f(x,p) + G_J(x)^T lambda_J = v, phi_J(x,p) = 0. Returns false on a
/// singular Jacobian or no convergence.
inline bool newton_face(const ParametricModel& model, const Eigen::VectorXd& v, const Eigen::VectorXd& p,
                        const std::vector<int>& face, Eigen::VectorXd& x, Eigen::VectorXd& lam_j, int max_it,
                        bool& singular) {
  const Eigen::Index n = x.size(), k = static_cast<Eigen::Index>(face.size());
  singular = false;
  lam_j = Eigen::VectorXd::Zero(k);
  const double scale = std::max(1.0, v.cwiseAbs().maxCoeff());
  for (int it = 0; it <= max_it; ++it) {
    EvalBundle b = eval_bundle(model, x, p);
    Eigen::MatrixXd g = select_rows(b.grad_phi, face);
    Eigen::VectorXd r(n + k);
    r.head(n) = b.f + g.transpose() * lam_j - v;
    for (Eigen::Index i = 0; i < k; ++i) r(n + i) = b.phi(face[static_cast<std::size_t>(i)]);
    if (!r.allFinite()) return false;
    if (r.cwiseAbs().maxCoeff() <= 1e-13 * scale && it > 0) return true;
    if (it == max_it) break;
    Eigen::MatrixXd jac = Eigen::MatrixXd::Zero(n + k, n + k);
    jac.topLeftCorner(n, n) = b.jac_f;
    for (Eigen::Index i = 0; i < k; ++i)
      jac.topLeftCorner(n, n) += lam_j(i) * b.hess_phi[static_cast<std::size_t>(face[static_cast<std::size_t>(i)])];
    jac.topRightCorner(n, k) = g.transpose();
    jac.bottomLeftCorner(k, n) = g;
    Eigen::FullPivLU<Eigen::MatrixXd> lu(jac);
    lu.setThreshold(1e-11);
    if (!lu.isInvertible()) {
      singular = true;
      return false;
    }
    Eigen::VectorXd step = lu.solve(-r);
    x += step.head(n);
    lam_j += step.tail(k);
    if (step.norm() <= 1e-15 * std::max(1.0, x.norm())) {
      EvalBundle c = eval_bundle(model, x, p);
      Eigen::VectorXd rc = c.f + select_rows(c.grad_phi, face).transpose() * lam_j - v;
      double res = rc.cwiseAbs().maxCoeff();
      for (int i : face) res = std::max(res, std::abs(c.phi(i)));
      return res <= 1e-10 * scale;
    }
  }
  EvalBundle b = eval_bundle(model, x, p);
  Eigen::VectorXd rc = b.f + select_rows(b.grad_phi, face).transpose() * lam_j - v;
  double res = rc.cwiseAbs().maxCoeff();
  for (int i : face) res = std::max(res, std::abs(b.phi(i)));
  return res <= 1e-10 * scale;
}

}  // namespace detail

/// Enumerates every face J with |J| <= min(n, m), solves its KKT system and
/// keeps feasible solutions with lambda_J >= 0 inside the box, deduplicated.
inline FaceSolveResult solve_faces(const ParametricModel& model, const Eigen::VectorXd& v, const Eigen::VectorXd& p,
                                   const SearchBox& box, const FaceOptions& opt = {}) {
  const int n = model.n(), m = model.m();
  if (m > kMaxFaceConstraints) {
    throw Error(ErrorCode::too_large, "face enumeration supports at most " + std::to_string(kMaxFaceConstraints) +
                                          " constraints, got " + std::to_string(m));
  }
  if (box.center.size() != n || v.size() != n || p.size() != model.d()) {
    throw Error(ErrorCode::dimension_mismatch, "solve_faces: point dimensions do not match the model");
  }
  const bool linear = model.f_affine_in_x() && model.all_affine_in_x();
  std::vector<Eigen::VectorXd> starts{box.center};
  if (!linear) {
    Rng rng(opt.seed);
    for (int s = 0; s < opt.random_starts; ++s) {
      Eigen::VectorXd x = box.center;
      for (int j = 0; j < n; ++j) x(j) += box.radius * rng.uniform(-1.0, 1.0);
      starts.push_back(x);
    }
  }
  std::optional<PolyhedronProjector> proj;
  if (model.all_affine_in_x()) proj.emplace(polyhedron_at(model, p, box.center));

  FaceSolveResult out;
  auto consider = [&](const std::vector<int>& face) {
    ++out.faces_tried;
    bool any_singular = false;
    for (const auto& start : starts) {
      Eigen::VectorXd x = start, lam_j;
      bool singular = false;
      bool ok = false;
      try {
        ok = detail::newton_face(model, v, p, face, x, lam_j, opt.newton_iterations, singular);
      } catch (const Error&) {
        ok = false;
      }
      any_singular = any_singular || singular;
      if (!ok) continue;
      if (lam_j.size() > 0 && lam_j.minCoeff() < -1e-10) continue;
      EvalBundle b = eval_bundle(model, x, p);
      if (m > 0 && b.phi.maxCoeff() > 1e-10) continue;
      if (!box.contains(x)) {
        ++out.outside_box;
        continue;
      }
      bool duplicate = false;
      for (const auto& s : out.solutions)
        if ((s.x - x).norm() <= kDedupeTol * std::max(1.0, x.norm())) duplicate = true;
      if (duplicate) continue;
      SolveOutcome sol;
      sol.method = SolveMethod::face_enumeration;
      sol.x = x;
      sol.lambda = Eigen::VectorXd::Zero(m);
      for (std::size_t i = 0; i < face.size(); ++i)
        sol.lambda(face[i]) = std::max(0.0, lam_j(static_cast<Eigen::Index>(i)));
      sol.face = face;
      sol.iterations = 1;
      sol.residual = proj ? natural_residual(model, *proj, v, p, x) : kkt_residual(model, v, p, x, sol.lambda);
      sol.converged = sol.residual < kSolveTol;
      out.solutions.push_back(std::move(sol));
    }
    if (any_singular) ++out.singular_faces;
  };
  for (int size = 0; size <= std::min(n, m); ++size) {
    if (size == 0) {
      consider({});
      continue;
    }
    detail::for_each_combination(m, size, consider);
  }
  const Multiplicity mult = out.solutions.size() == 1 ? Multiplicity::unique_in_box : Multiplicity::multiple_found;
  for (auto& s : out.solutions) s.multiplicity = mult;
  return out;
}

struct LocalizationEntry {
  Eigen::VectorXd v;
  Eigen::VectorXd p;
  Eigen::VectorXd x;
  double residual = 0.0;
  SolveMethod method = SolveMethod::face_enumeration;
  int v_index = -1;  // tensor-grid node in v, -1 for random points
  int p_index = -1;  // tensor-grid node in p, -1 for random points
};

struct LocalizationOptions {
  double rho_v = kDefaultRho;
  double rho_p = kDefaultRho;
  int grid_v = kDefaultGrid;
  int grid_p = kDefaultGrid;
  int random_points = kDefaultRandomPoints;
  std::uint64_t seed = 1;
  int max_halvings = kMaxHalvings;
  double radius_factor = kUniquenessRadiusFactor;
};

struct LocalizationTable {
  int n = 0;
  int d = 0;
  Eigen::VectorXd v_bar, p_bar, x_bar;
  double rho_v = 0.0;
  double rho_p = 0.0;
  double radius_u = 0.0;  // uniqueness box half-width around x_bar
  int grid_v = 0;
  int grid_p = 0;
  int halvings = 0;
  int singular_faces = 0;  // summed over nodes
  int center_v_index = -1;
  std::vector<LocalizationEntry> entries;

  /// CSV with columns v1..vn, p1..pd, x1..xn, residual, method.
  std::string to_csv() const {
    std::ostringstream os;
    os.precision(17);
    for (int j = 0; j < n; ++j) os << (j ? "," : "") << "v" << j + 1;
    for (int j = 0; j < d; ++j) os << ",p" << j + 1;
    for (int j = 0; j < n; ++j) os << ",x" << j + 1;
    os << ",residual,method\n";
    for (const auto& e : entries) {
      for (int j = 0; j < n; ++j) os << (j ? "," : "") << e.v(j);
      for (int j = 0; j < d; ++j) os << "," << e.p(j);
      for (int j = 0; j < n; ++j) os << "," << e.x(j);
      os << "," << e.residual << "," << to_string(e.method) << "\n";
    }
    return os.str();
  }
};

namespace detail {

/// Points of the tensor grid center + rho * {-1, .., 1}^dim with g nodes per axis.
inline std::vector<Eigen::VectorXd> tensor_grid(const Eigen::VectorXd& center, double rho, int g) {
  const Eigen::Index dim = center.size();
  std::vector<Eigen::VectorXd> out;
  long total = 1;
  for (Eigen::Index k = 0; k < dim; ++k) total *= g;
  for (long idx = 0; idx < total; ++idx) {
    Eigen::VectorXd pt = center;
    long rest = idx;
    for (Eigen::Index k = 0; k < dim; ++k) {
      int node = static_cast<int>(rest % g);
      rest /= g;
      double t = g == 1 ? 0.0 : -1.0 + 2.0 * node / static_cast<double>(g - 1);
      pt(k) += rho * t;
    }
    out.push_back(pt);
  }
  return out;
}

inline long ipow(long base, long e) {
  long r = 1;
  for (long i = 0; i < e; ++i) r *= base;
  return r;
}

}  // namespace detail

/// Grid sizes are reduced (odd counts, at least 3) until the tensor grid has
/// at most kMaxGridNodes nodes.
inline std::pair<int, int> fit_grid_sizes(int n, int d, int grid_v, int grid_p) {
  while (detail::ipow(grid_v, n) * detail::ipow(grid_p, d) > kMaxGridNodes && (grid_v > 3 || grid_p > 3)) {
    if (grid_v >= grid_p && grid_v > 3) grid_v -= 2;
    else grid_p -= 2;
  }
  return {grid_v, grid_p};
}

/// theta(v,p) on a tensor grid in V x Q plus random interior points, with
/// uniqueness decided by face enumeration in the box U around x_bar. Radii
/// are halved (up to max_halvings) while some node has no or several solutions.
inline LocalizationTable build_localization(const ParametricModel& model, const ReferenceTriple& ref,
                                            const LocalizationOptions& opt = {}) {
  if (opt.rho_v <= 0.0 || opt.rho_p <= 0.0 || opt.grid_v < 1 || opt.grid_p < 1 || opt.random_points < 0) {
    throw Error(ErrorCode::invalid_argument, "localization needs positive radii and grid sizes");
  }
  const int n = model.n(), d = model.d();
  auto [gv, gp] = fit_grid_sizes(n, d, opt.grid_v, opt.grid_p);
  std::string last_failure;
  for (int halving = 0; halving <= opt.max_halvings; ++halving) {
    const double scale = std::ldexp(1.0, -halving);
    LocalizationTable t;
    t.n = n;
    t.d = d;
    t.v_bar = ref.vd();
    t.p_bar = ref.pd();
    t.x_bar = ref.xd();
    t.rho_v = opt.rho_v * scale;
    t.rho_p = opt.rho_p * scale;
    t.radius_u = opt.radius_factor * std::max(t.rho_v, t.rho_p);
    t.grid_v = gv;
    t.grid_p = gp;
    t.halvings = halving;
    SearchBox box{t.x_bar, t.radius_u};

    auto vs = detail::tensor_grid(t.v_bar, t.rho_v, gv);
    auto ps = detail::tensor_grid(t.p_bar, t.rho_p, gp);
    t.center_v_index = static_cast<int>(vs.size() / 2);
    if (gv % 2 == 0) t.center_v_index = -1;

    std::vector<LocalizationEntry> nodes;
    for (std::size_t pi = 0; pi < ps.size(); ++pi)
      for (std::size_t vi = 0; vi < vs.size(); ++vi)
        nodes.push_back({vs[vi], ps[pi], {}, 0.0, SolveMethod::face_enumeration, static_cast<int>(vi),
                         static_cast<int>(pi)});
    Rng rng(opt.seed);
    for (int r = 0; r < opt.random_points; ++r) {
      Eigen::VectorXd v = t.v_bar, p = t.p_bar;
      for (int j = 0; j < n; ++j) v(j) += t.rho_v * rng.uniform(-1.0, 1.0);
      for (int j = 0; j < d; ++j) p(j) += t.rho_p * rng.uniform(-1.0, 1.0);
      nodes.push_back({v, p, {}, 0.0, SolveMethod::face_enumeration, -1, -1});
    }

    bool ok = true;
    for (auto& node : nodes) {
      FaceSolveResult res = solve_faces(model, node.v, node.p, box);
      t.singular_faces += res.singular_faces;
      if (res.solutions.size() != 1) {
        std::ostringstream os;
        os.precision(6);
        os << (res.solutions.empty() ? "no solution" : std::to_string(res.solutions.size()) + " solutions")
           << " in U (radius " << t.radius_u << ") at v=(" << node.v.transpose() << ") p=(" << node.p.transpose()
           << ")";
        last_failure = os.str();
        ok = false;
        break;
      }
      const SolveOutcome& s = res.solutions.front();
      if (!(s.residual < kSolveTol)) {
        std::ostringstream os;
        os << "solution residual " << s.residual << " at a grid node";
        last_failure = os.str();
        ok = false;
        break;
      }
      node.x = s.x;
      node.residual = s.residual;
      node.method = s.method;
    }
    if (ok) {
      t.entries = std::move(nodes);
      return t;
    }
  }
  throw Error(ErrorCode::no_localization,
              "no single-valued localization at this radius after " + std::to_string(opt.max_halvings) +
                  " halvings: " + last_failure);
}

}  // namespace fullstab
