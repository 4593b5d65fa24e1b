// Acceptance runner: one PASS/FAIL line per criterion, nonzero exit on any
// failure.

#include "test_support.hpp"

#include "fullstab/cli.hpp"
#include "fullstab/monotone.hpp"
#include "fullstab/stabharness.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

using namespace fullstab;
using fullstab::testing::model_path;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;

  void require(bool ok, const std::string& what) {
    if (ok) return;
    if (pass) detail = what;
    pass = false;
  }
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(double x) {
  std::ostringstream os;
  os.precision(4);
  os << x;
  return os.str();
}

struct CliRun {
  int code;
  std::string out;
};

CliRun run_cli(std::vector<std::string> args) {
  args.insert(args.begin(), "fullstab");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str()};
}

std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / ("fullstab_acceptance_" + name)).string();
}

bool same_rationals(const std::vector<Rational>& a, const std::vector<Rational>& b) { return a == b; }

// 1. Pyramid example end to end.
Outcome criterion_pyramid() {
  Outcome o;
  auto t0 = std::chrono::steady_clock::now();
  ParametricModel model = fullstab::testing::load_model("ex64.model");
  StabilityReport rep = certify(model, *model.reference());
  double elapsed = seconds_since(t0);

  o.require(rep.mfcq && rep.mfcq->verdict == CQVerdict::holds, "MFCQ does not hold");
  if (rep.mfcq) o.require(rep.mfcq->direction.normalized().isApprox(Eigen::Vector3d(0, 0, 1), 1e-9), "MFCQ direction is not (0,0,1)");
  o.require(rep.licq && rep.licq->verdict == CQVerdict::fails, "LICQ does not fail");
  o.require(rep.crcq && rep.crcq->verdict == CQVerdict::holds, "CRCQ does not hold");

  const std::vector<Rational> v1{Rational(3, 8), Rational(5, 8), Rational(0), Rational(0)};
  const std::vector<Rational> v2{Rational(0), Rational(1, 4), Rational(3, 8), Rational(3, 8)};
  bool vertices_ok = false;
  if (rep.multipliers && rep.multipliers->exact_vertices.size() == 2) {
    const auto& ev = rep.multipliers->exact_vertices;
    vertices_ok = (same_rationals(ev[0], v1) && same_rationals(ev[1], v2)) ||
                  (same_rationals(ev[0], v2) && same_rationals(ev[1], v1));
  }
  o.require(vertices_ok, "multiplier vertices differ from {(3/8,5/8,0,0), (0,1/4,3/8,3/8)}");

  bool gssosc_ok = rep.gssosc && rep.gssosc->verdict == SOVerdict::fails &&
                   rep.gssosc->witness_lambda.isApprox(Eigen::Vector4d(0.375, 0.625, 0, 0), 1e-12) &&
                   std::abs(std::abs(rep.gssosc->witness.normalized()(1)) - 1.0) < 1e-9;
  o.require(gssosc_ok, "GSSOSC does not fail at (3/8,5/8,0,0) along e2");

  bool scoc_ok = false;
  for (const auto& entry : rep.scoc)
    for (const auto& b : entry.bases)
      if (b.basis == std::vector<int>{0, 1} && b.zero && std::abs(b.det) < 1e-9) scoc_ok = true;
  o.require(scoc_ok, "no vanishing 5x5 SCOC determinant");

  bool gusosc_ok = rep.gusosc && rep.gusosc->verdict == SOVerdict::corroborated && rep.gusosc->modulus > 0.0 &&
                   rep.options.eta == 1e-2 && rep.options.samples == 500;
  o.require(gusosc_ok, "GUSOSC not corroborated at eta=1e-2, N=500");

  bool harness_ok = rep.table && rep.table->grid_v == 5 && rep.table->grid_p == 5 && rep.moduli && rep.check &&
                    rep.check->violations == 0 && (rep.moduli->kappa_unbounded || rep.moduli->kappa > 0.0);
  o.require(harness_ok, "harness not clean on the 5^3 x 5^2 grid");
  o.require(rep.verdict == Verdict::fully_stable, "verdict is not fully_stable");
  o.require(elapsed < 30.0, "runtime " + fmt(elapsed) + " s exceeds 30 s");
  if (o.pass) {
    o.detail = "fully_stable via " + rep.decided_by + ", " + std::to_string(rep.check->pairs) + " pairs, 0 violations, " +
               "GUSOSC tested " + std::to_string(rep.gusosc->tested) + ", " + fmt(elapsed) + " s";
  }
  return o;
}

// 2. Skew counterexample.
Outcome criterion_skew() {
  Outcome o;
  auto t0 = std::chrono::steady_clock::now();
  ParametricModel model = fullstab::testing::load_model("skew.model");
  const ReferenceTriple& ref = *model.reference();
  SecondOrderReport psd = check_smooth_psd(model, ref);
  o.require(psd.verdict == SOVerdict::fails && std::abs(psd.modulus + 1.0) <= 1e-12,
            "smooth PSD modulus " + fmt(psd.modulus) + " is not -1");
  FaceSolveResult faces = solve_faces(model, ref.vd(), ref.pd(), {ref.xd(), 1.0});
  o.require(faces.solutions.size() == 1, "face enumeration found " + std::to_string(faces.solutions.size()) + " solutions");
  LocalizationTable table = build_localization(model, ref);
  for (double kappa : {0.01, 0.1, 1.0, 10.0}) {
    InequalityCheck c = verify_inequality(table, kappa, 0.0, 1.0);
    o.require(c.violations > 0, "no violation at kappa " + fmt(kappa));
  }
  double elapsed = seconds_since(t0);
  o.require(elapsed < 5.0, "runtime " + fmt(elapsed) + " s exceeds 5 s");
  if (o.pass) o.detail = "modulus " + fmt(psd.modulus) + ", unique solution, violations for all kappa, " + fmt(elapsed) + " s";
  return o;
}

// Sampling oracle for min over K on the unit sphere: 1e5 unit directions in
// the span of K, kept when they satisfy the inequalities; the best samples
// are polished by projected gradient steps on the sphere.
struct ConeOracle {
  double raw = kInfinity;
  double refined = kInfinity;
  int hits = 0;
};

ConeOracle sampled_cone_min(const QuadForm& q, const ConeDesc& k, Rng& rng, int samples) {
  ConeOracle out;
  Eigen::MatrixXd z = null_space(k.eq, k.n);
  if (z.cols() == 0) return out;
  std::vector<std::pair<double, Eigen::VectorXd>> best;
  for (int s = 0; s < samples; ++s) {
    Eigen::VectorXd w = z * rng.normal_vector(z.cols());
    if (w.norm() < 1e-12) continue;
    w.normalize();
    if (k.ineq.rows() > 0 && (k.ineq * w).maxCoeff() > 0.0) continue;
    ++out.hits;
    double val = q.value(w);
    out.raw = std::min(out.raw, val);
    best.emplace_back(val, w);
    if (best.size() > 64) {
      std::nth_element(best.begin(), best.begin() + 16, best.end(),
                       [](const auto& l, const auto& r) { return l.first < r.first; });
      best.resize(16);
    }
  }
  Eigen::MatrixXd a = vstack(vstack(k.ineq, k.eq), -k.eq);
  PolyhedronProjector proj(a, Eigen::VectorXd::Zero(a.rows()));
  out.refined = out.raw;
  for (auto& [val, w] : best) {
    Eigen::VectorXd x = w;
    for (int it = 0; it < 2000; ++it) {
      Eigen::VectorXd y = proj.project(x - 0.05 * (2.0 * q.hs * x));
      if (y.norm() < 1e-12) break;
      y.normalize();
      bool done = (y - x).norm() < 1e-13;
      x = y;
      if (done) break;
    }
    out.refined = std::min(out.refined, q.value(x));
  }
  return out;
}

int sign_of(double x) { return x > 0 ? 1 : (x < 0 ? -1 : 0); }

// 3. Cone minimum against the sampling oracle.
Outcome criterion_cone_oracle() {
  Outcome o;
  Rng rng(2026);
  double worst_gap = 0.0, worst_raw_gap = 0.0;
  int sign_disagreements = 0, empty = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const Eigen::Index n = 2 + static_cast<Eigen::Index>(rng.below(4));
    ConeDesc k = ConeDesc::whole_space(n);
    k.ineq = rng.normal_matrix(1 + static_cast<Eigen::Index>(rng.below(static_cast<std::uint64_t>(n + 2))), n);
    if (rng.uniform() < 0.25) k.eq = rng.normal_matrix(1, n);
    QuadForm q(rng.normal_matrix(n, n));
    FormMinimum exact = min_on_cone(q, k);
    ConeOracle oracle = sampled_cone_min(q, k, rng, 100000);
    if (oracle.hits == 0) {
      ++empty;
      o.require(std::isinf(exact.value), "trial " + std::to_string(trial) + ": oracle found an empty cone, exact did not");
      continue;
    }
    o.require(exact.value <= oracle.raw + 1e-9, "trial " + std::to_string(trial) + ": exact exceeds a sampled value");
    double gap = std::abs(exact.value - oracle.refined);
    worst_gap = std::max(worst_gap, gap);
    worst_raw_gap = std::max(worst_raw_gap, std::abs(exact.value - oracle.raw));
    o.require(gap < 1e-4, "trial " + std::to_string(trial) + ": gap " + fmt(gap));
    if (std::abs(exact.value) > 1e-3 && sign_of(exact.value) != sign_of(oracle.refined)) ++sign_disagreements;
  }
  o.require(sign_disagreements == 0, std::to_string(sign_disagreements) + " sign disagreements");
  if (o.pass) {
    o.detail = "100 cones, max gap " + fmt(worst_gap) + " (unpolished samples " + fmt(worst_raw_gap) + "), " +
               std::to_string(empty) + " trivial cones, 0 sign disagreements";
  }
  return o;
}

// 4. Symbolic derivatives against central differences.
Outcome criterion_derivatives() {
  Outcome o;
  Rng rng(4242);
  const double h = 1e-5, tol = 1e-6;
  double worst = 0.0;
  long entries = 0;
  auto compare = [&](double fd, double sym) {
    double err = std::abs(fd - sym) / std::max(1.0, std::abs(sym));
    worst = std::max(worst, err);
    ++entries;
  };
  for (int trial = 0; trial < 100; ++trial) {
    const int n = 1 + static_cast<int>(rng.below(3)), d = static_cast<int>(rng.below(3));
    const int m = 1 + static_cast<int>(rng.below(3));
    std::vector<Expr> f, cons;
    for (int i = 0; i < n; ++i) f.push_back(fullstab::testing::random_expr(rng, n, d, 3));
    for (int i = 0; i < m; ++i) cons.push_back(fullstab::testing::random_expr(rng, n, d, 3));
    ParametricModel model = ParametricModel::from_map(n, d, f, cons);
    Eigen::VectorXd x = rng.normal_vector(n) * 0.6, p = rng.normal_vector(d) * 0.6;
    EvalBundle b = eval_bundle(model, x, p);
    for (int j = 0; j < n; ++j) {
      Eigen::VectorXd xp = x, xm = x;
      xp(j) += h;
      xm(j) -= h;
      EvalBundle bp = eval_bundle(model, xp, p), bm = eval_bundle(model, xm, p);
      for (int i = 0; i < n; ++i) compare((bp.f(i) - bm.f(i)) / (2 * h), b.jac_f(i, j));
      for (int i = 0; i < m; ++i) {
        compare((bp.phi(i) - bm.phi(i)) / (2 * h), b.grad_phi(i, j));
        for (int k = 0; k < n; ++k) compare((bp.grad_phi(i, k) - bm.grad_phi(i, k)) / (2 * h), b.hess_phi[static_cast<std::size_t>(i)](k, j));
      }
    }
  }
  o.require(worst < tol, "worst relative error " + fmt(worst));
  if (o.pass) o.detail = std::to_string(entries) + " entries on 100 models, worst relative error " + fmt(worst);
  return o;
}

// 5. Projected iteration against face enumeration on affine VIs.
Outcome criterion_solvers() {
  Outcome o;
  Rng rng(55);
  double worst = 0.0, worst_vi = -kInfinity;
  long tested_points = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const int n = 1 + static_cast<int>(rng.below(4));
    const int m = 1 + static_cast<int>(rng.below(8));
    auto vi = fullstab::testing::random_affine_vi(rng, n, m);
    auto model = parse_model(vi.text);
    Eigen::VectorXd v = Eigen::VectorXd::Zero(n);
    SolveOutcome pr = solve_projected(model, v, Eigen::VectorXd(0), Eigen::VectorXd::Zero(n),
                                      {.kappa = vi.kappa, .lipschitz = vi.lipschitz});
    FaceSolveResult fr = solve_faces(model, v, Eigen::VectorXd(0), {Eigen::VectorXd::Zero(n), 100.0});
    const std::string tag = "VI " + std::to_string(trial) + ": ";
    o.require(pr.converged, tag + "projected iteration did not converge");
    o.require(fr.solutions.size() == 1, tag + std::to_string(fr.solutions.size()) + " face solutions");
    if (!pr.converged || fr.solutions.size() != 1) continue;
    const Eigen::VectorXd& x = fr.solutions[0].x;
    worst = std::max(worst, (pr.x - x).norm());
    Eigen::VectorXd fx = vi.a * x + vi.b;
    auto points = fullstab::testing::feasible_points(rng, vi.g, vi.h, x, 1000);
    o.require(points.size() == 1000, tag + "only " + std::to_string(points.size()) + " feasible test points");
    for (const auto& u : points) {
      worst_vi = std::max(worst_vi, (v - fx).dot(u - x));
      ++tested_points;
    }
  }
  o.require(worst < 1e-7, "max solver gap " + fmt(worst));
  o.require(worst_vi <= 1e-8, "VI inequality violated by " + fmt(worst_vi));
  if (o.pass) {
    o.detail = "100 VIs, max gap " + fmt(worst) + ", " + std::to_string(tested_points) +
               " feasible points, max <v-f(x), u-x> = " + fmt(worst_vi);
  }
  return o;
}

// 6. Monotonicity estimators.
Outcome criterion_monotone() {
  Outcome o;
  Rng rng(66);
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const Eigen::Index n = 1 + static_cast<Eigen::Index>(rng.below(5));
    Eigen::MatrixXd h = rng.normal_matrix(n, n);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (h + h.transpose()));
    std::vector<Eigen::VectorXd> us, vs;
    const int spread = static_cast<int>(n * (n + 1) / 2) + 20;
    for (int i = 0; i < spread; ++i) us.push_back(rng.in_ball(n, 1.0));
    Eigen::VectorXd base = rng.in_ball(n, 0.5);
    us.push_back(base);
    us.push_back(base + 0.3 * es.eigenvectors().col(0));
    for (const auto& u : us) vs.push_back(h * u);
    double kappa = estimate_moduli(GraphSample::from_rows(us, vs)).kappa;
    worst = std::max(worst, std::abs(kappa - es.eigenvalues()(0)));
  }
  o.require(worst <= 1e-9, "linear maps: max eigenvalue gap " + fmt(worst));

  // Sample-level consistency on the p-frozen slices of each corpus localization.
  const std::vector<double> kappas{0.05, 0.1, 0.25, 0.5, 1.0, 2.0};
  int models = 0, skipped = 0, passing_checks = 0;
  for (const auto& entry : std::filesystem::directory_iterator(std::string(FULLSTAB_SOURCE_DIR) + "/models/corpus")) {
    ParametricModel model = parse_model(fullstab::testing::read_file(entry.path().string()));
    LocalizationTable table;
    try {
      table = build_localization(model, *model.reference());
    } catch (const Error&) {
      ++skipped;
      continue;
    }
    ++models;
    std::map<int, std::vector<const LocalizationEntry*>> slices;
    for (const auto& e : table.entries)
      if (e.p_index >= 0) slices[e.p_index].push_back(&e);
    for (const auto& [pi, rows] : slices) {
      std::vector<Eigen::VectorXd> vs, xs;
      for (const auto* e : rows) {
        vs.push_back(e->v);
        xs.push_back(e->x);
      }
      GraphSample candidate = GraphSample::from_rows(vs, xs);
      GraphSample inverse = GraphSample::from_rows(xs, vs);
      double kappa_hat = kInfinity;
      try {
        kappa_hat = estimate_moduli(inverse).kappa;
      } catch (const Error&) {
        // Constant localization: every pair is degenerate, the modulus is unbounded.
      }
      for (double kappa : kappas) {
        if (check_localization_estimate(candidate, kappa).violations > 0) continue;
        ++passing_checks;
        o.require(kappa_hat >= kappa - 1e-9, entry.path().filename().string() + ": kappa_hat " + fmt(kappa_hat) +
                                                 " below " + fmt(kappa));
      }
    }
  }
  if (o.pass) {
    o.detail = "linear max gap " + fmt(worst) + "; corpus " + std::to_string(models) + " localizations (" +
               std::to_string(skipped) + " without one), " + std::to_string(passing_checks) +
               " violation-free slices all satisfy kappa_hat >= kappa";
  }
  return o;
}

// 7. Implication chain on the corpus.
Outcome criterion_chain() {
  Outcome o;
  int count = 0, stable = 0, decided = 0;
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(std::string(FULLSTAB_SOURCE_DIR) + "/models/corpus"))
    files.push_back(entry.path());
  std::sort(files.begin(), files.end());
  const std::string out = temp_path("chain.json");
  for (const auto& f : files) {
    CliRun r = run_cli({"certify", f.string(), "--json", out});
    ++count;
    const std::string name = f.filename().string();
    o.require(r.code == 0, name + ": exit code " + std::to_string(r.code));
    if (r.code != 0) continue;
    Json j = Json::parse(fullstab::testing::read_file(out));
    o.require(j["chain"]["gssosc_implies_gusosc"] != false, name + ": GSSOSC holds but GUSOSC fails");
    o.require(j["chain"]["gusosc_implies_harness"] != false, name + ": GUSOSC holds but the harness is not clean");
    if (j["verdict"] == "fully_stable") ++stable;
    if (j["verdict"] == "fully_stable" || j["verdict"] == "not_fully_stable") ++decided;
  }
  std::remove(out.c_str());
  o.require(count == 20, "corpus has " + std::to_string(count) + " models");

  // A broken chain must surface as exit code 2.
  auto ex = fullstab::testing::load_model("ex64.model");
  Json broken = to_json(certify(ex, *ex.reference()));
  broken["verdict"] = "inconsistent";
  broken["chain"]["gusosc_implies_harness"] = false;
  const std::string report = temp_path("broken.json");
  fullstab::testing::write_file(report, broken.dump(2));
  o.require(run_cli({"report", report}).code == cli::kExitInconsistent, "inconsistent report does not exit with 2");
  std::remove(report.c_str());
  if (o.pass) {
    o.detail = std::to_string(count) + " models, chain intact, " + std::to_string(decided) + " decided (" +
               std::to_string(stable) + " fully stable), broken chain exits 2";
  }
  return o;
}

// 8. Determinism.
Outcome criterion_determinism() {
  Outcome o;
  for (const std::string name : {"ex64.model", "corpus/simplex_param.model"}) {
    const std::string a = temp_path("det_a.json"), b = temp_path("det_b.json");
    int ca = run_cli({"certify", model_path(name), "--seed", "11", "--json", a}).code;
    int cb = run_cli({"certify", model_path(name), "--seed", "11", "--json", b}).code;
    std::string ja = fullstab::testing::read_file(a), jb = fullstab::testing::read_file(b);
    o.require(ca == 0 && cb == 0, name + ": certify failed");
    o.require(!ja.empty() && ja == jb, name + ": JSON reports differ");
    std::remove(a.c_str());
    std::remove(b.c_str());
  }
  if (o.pass) o.detail = "byte-identical JSON for two models at seed 11";
  return o;
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"1 pyramid example end to end", criterion_pyramid},
      {"2 skew counterexample", criterion_skew},
      {"3 cone minimum vs sampling oracle", criterion_cone_oracle},
      {"4 symbolic vs finite-difference derivatives", criterion_derivatives},
      {"5 projected iteration vs face enumeration", criterion_solvers},
      {"6 monotonicity estimators", criterion_monotone},
      {"7 implication chain on the corpus", criterion_chain},
      {"8 deterministic JSON", criterion_determinism},
  };
  int failures = 0;
  for (const auto& [name, run] : criteria) {
    Outcome o;
    try {
      o = run();
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail = std::string("exception: ") + e.what();
    }
    if (!o.pass) ++failures;
    std::cout << (o.pass ? "PASS" : "FAIL") << "  criterion " << name << ": " << o.detail << std::endl;
  }
  return failures == 0 ? 0 : 1;
}
