#pragma once

// Empirical full-stability harness: pairwise verification of
//   | (v1 - v2) - 2 kappa [theta(v1,p1) - theta(v2,p2)] | <= |v1 - v2| + ell d(p1,p2)^gamma
// over a localization table, fitting of (kappa, ell, gamma), and the
// certification pipeline that combines the second-order conditions with it.

#include "fullstab/errors.hpp"
#include "fullstab/kkt.hpp"
#include "fullstab/linalg.hpp"
#include "fullstab/model.hpp"
#include "fullstab/monotone.hpp"
#include "fullstab/random.hpp"
#include "fullstab/secondorder.hpp"
#include "fullstab/visolver.hpp"

#include <Eigen/Dense>
#include <json.hpp>

#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace fullstab {

inline constexpr double kHarnessTol = 1e-9;
inline constexpr std::int64_t kMaxPairs = 20'000'000;
inline constexpr double kKappaFallback = 1.0;
inline constexpr int kDefaultCrcqSamples = 200;
inline constexpr std::size_t kListedViolations = 20;
inline constexpr int kReportSchema = 1;

struct InequalityViolation {
  std::size_t i = 0;
  std::size_t j = 0;
  double lhs = 0.0;     // |dv - 2 kappa dtheta|
  double rhs = 0.0;     // |dv| + ell d^gamma
  double excess = 0.0;  // lhs - rhs
};

struct InequalityCheck {
  double kappa = 0.0;
  double ell = 0.0;
  double exponent = 1.0;
  std::int64_t pairs = 0;
  std::int64_t violations = 0;
  double worst_excess = 0.0;
  bool subsampled = false;
  std::vector<InequalityViolation> listed;  // worst first

  bool clean() const { return violations == 0; }
};

namespace detail {

/// Calls f(i, j) for all unordered pairs, or for max_pairs deterministic
/// random pairs when there are more.
template <class F>
bool for_each_pair(std::size_t count, std::int64_t max_pairs, F&& f) {
  const std::int64_t total = static_cast<std::int64_t>(count) * static_cast<std::int64_t>(count - (count > 0)) / 2;
  if (total <= max_pairs) {
    for (std::size_t i = 0; i < count; ++i)
      for (std::size_t j = i + 1; j < count; ++j) f(i, j);
    return false;
  }
  Rng rng(0x5eed);
  for (std::int64_t k = 0; k < max_pairs; ++k) {
    std::size_t i = rng.below(count), j = rng.below(count - 1);
    if (j >= i) ++j;
    f(std::min(i, j), std::max(i, j));
  }
  return true;
}

inline double pair_lhs(const LocalizationEntry& a, const LocalizationEntry& b, double kappa) {
  return ((a.v - b.v) - 2.0 * kappa * (a.x - b.x)).norm();
}

}  // namespace detail

/// Checks every table pair; a pair violates when
/// lhs - (|dv| + ell d^gamma) > tol max(1, |dv|).
inline InequalityCheck verify_inequality(const LocalizationTable& table, double kappa, double ell, double exponent,
                                         double tol = kHarnessTol, std::int64_t max_pairs = kMaxPairs) {
  if (table.entries.empty()) throw Error(ErrorCode::insufficient_pairs, "localization table is empty");
  if (!(kappa > 0.0) || !(ell >= 0.0)) throw Error(ErrorCode::invalid_argument, "verification needs kappa > 0, ell >= 0");
  if (exponent != 0.5 && exponent != 1.0) throw Error(ErrorCode::invalid_argument, "exponent must be 1/2 or 1");
  InequalityCheck out;
  out.kappa = kappa;
  out.ell = ell;
  out.exponent = exponent;
  const auto& e = table.entries;
  std::vector<InequalityViolation> all;
  out.subsampled = detail::for_each_pair(e.size(), max_pairs, [&](std::size_t i, std::size_t j) {
    ++out.pairs;
    double dv = (e[i].v - e[j].v).norm();
    double dp = table.d > 0 ? (e[i].p - e[j].p).norm() : 0.0;
    double lhs = detail::pair_lhs(e[i], e[j], kappa);
    double rhs = dv + ell * std::pow(dp, exponent);
    double excess = lhs - rhs;
    if (excess > tol * std::max(1.0, dv)) {
      ++out.violations;
      out.worst_excess = std::max(out.worst_excess, excess);
      all.push_back({i, j, lhs, rhs, excess});
      if (all.size() > 4 * kListedViolations) {
        std::sort(all.begin(), all.end(), [](const auto& a, const auto& b) { return a.excess > b.excess; });
        all.resize(kListedViolations);
      }
    }
  });
  std::stable_sort(all.begin(), all.end(), [](const auto& a, const auto& b) { return a.excess > b.excess; });
  if (all.size() > kListedViolations) all.resize(kListedViolations);
  out.listed = std::move(all);
  return out;
}

struct StabilityModuli {
  double kappa = kInfinity;      // min over p-frozen pairs of <dv, dtheta>/|dtheta|^2
  bool kappa_unbounded = false;  // theta constant in v on every p-slice
  bool kappa_flagged = false;    // kappa <= tol: no positive modulus
  double kappa_used = kKappaFallback;
  std::int64_t kappa_pairs = 0;
  std::size_t kappa_i = 0, kappa_j = 0;

  double exponent_fit = std::numeric_limits<double>::quiet_NaN();  // log-log slope at v = v_bar
  bool parameter_independent = false;
  double exponent = 1.0;  // exponent_fit rounded to {1/2, 1}
  std::int64_t exponent_pairs = 0;

  double ell = 0.0;  // smallest ell with no violation at (kappa_used, exponent)
  std::int64_t ell_pairs = 0;
  std::size_t ell_i = 0, ell_j = 0;
};

/// kappa from p-frozen grid pairs, gamma from the v = v_bar slice, ell in
/// closed form as the largest per-pair requirement.
inline StabilityModuli fit_moduli(const LocalizationTable& table, double tol = kHarnessTol,
                                  std::int64_t max_pairs = kMaxPairs) {
  const auto& e = table.entries;
  StabilityModuli mod;
  // Group grid nodes by their p node.
  std::map<int, std::vector<std::size_t>> slices;
  for (std::size_t k = 0; k < e.size(); ++k)
    if (e[k].p_index >= 0) slices[e[k].p_index].push_back(k);
  std::int64_t frozen = 0;
  for (const auto& [pi, idx] : slices) {
    for (std::size_t a = 0; a < idx.size(); ++a) {
      for (std::size_t b = a + 1; b < idx.size(); ++b) {
        const auto& u = e[idx[a]];
        const auto& w = e[idx[b]];
        if ((u.v - w.v).norm() <= kPairGap) continue;
        ++frozen;
        Eigen::VectorXd dt = u.x - w.x;
        double dt2 = dt.squaredNorm();
        if (std::sqrt(dt2) <= kPairGap) continue;
        ++mod.kappa_pairs;
        double ratio = (u.v - w.v).dot(dt) / dt2;
        if (ratio < mod.kappa) {
          mod.kappa = ratio;
          mod.kappa_i = idx[a];
          mod.kappa_j = idx[b];
        }
      }
    }
  }
  if (frozen == 0) throw Error(ErrorCode::insufficient_pairs, "table has no p-frozen pairs with distinct v");
  mod.kappa_unbounded = mod.kappa_pairs == 0;
  mod.kappa_flagged = !mod.kappa_unbounded && mod.kappa <= tol;
  mod.kappa_used = (mod.kappa_unbounded || mod.kappa_flagged) ? kKappaFallback : mod.kappa;

  // Exponent from the v = v_bar slice.
  std::vector<std::size_t> centre;
  if (table.d > 0 && table.center_v_index >= 0)
    for (std::size_t k = 0; k < e.size(); ++k)
      if (e[k].v_index == table.center_v_index) centre.push_back(k);
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t a = 0; a < centre.size(); ++a) {
    for (std::size_t b = a + 1; b < centre.size(); ++b) {
      double dp = (e[centre[a]].p - e[centre[b]].p).norm();
      double dt = (e[centre[a]].x - e[centre[b]].x).norm();
      if (dp <= kPairGap || dt <= 1e-10 * std::max(1.0, dp)) continue;
      ++mod.exponent_pairs;
      double lx = std::log(dp), ly = std::log(dt);
      sx += lx;
      sy += ly;
      sxx += lx * lx;
      sxy += lx * ly;
    }
  }
  if (mod.exponent_pairs == 0) {
    mod.parameter_independent = true;
    mod.exponent = 1.0;
  } else {
    const double k = static_cast<double>(mod.exponent_pairs);
    double var = sxx - sx * sx / k;
    if (var > 1e-12) mod.exponent_fit = (sxy - sx * sy / k) / var;
    mod.exponent = std::isnan(mod.exponent_fit) || mod.exponent_fit >= 0.75 ? 1.0 : 0.5;
  }

  // ell: each pair with d > 0 needs ell >= (lhs - |dv|) / d^gamma.
  if (table.d > 0) {
    detail::for_each_pair(e.size(), max_pairs, [&](std::size_t i, std::size_t j) {
      double dp = (e[i].p - e[j].p).norm();
      if (dp <= 0.0) return;
      ++mod.ell_pairs;
      double dv = (e[i].v - e[j].v).norm();
      double excess = detail::pair_lhs(e[i], e[j], mod.kappa_used) - dv;
      if (excess <= tol * std::max(1.0, dv)) return;
      double need = excess / std::pow(dp, mod.exponent);
      if (need > mod.ell) {
        mod.ell = need;
        mod.ell_i = i;
        mod.ell_j = j;
      }
    });
  }
  return mod;
}

// ---------------------------------------------------------------------------
// Certification

struct CertifyOptions {
  double eta = GusoscOptions{}.eta;
  double rho_v = kDefaultRho;
  double rho_p = kDefaultRho;
  int samples = GusoscOptions{}.samples;
  std::uint64_t seed = GusoscOptions{}.seed;
  double tol_pd = kPdTol;
  double tol_act = kActiveTol;
  int crcq_samples = kDefaultCrcqSamples;
  int grid_v = kDefaultGrid;
  int grid_p = kDefaultGrid;
  int random_points = kDefaultRandomPoints;
  bool harness = true;
};

struct SectionError {
  ErrorCode code = ErrorCode::evaluation;
  std::string message;
};

struct ScocEntry {
  std::vector<Rational> lambda;
  std::vector<ScocDeterminant> bases;
};

enum class Verdict { fully_stable, not_fully_stable, undetermined, inconsistent };

inline const char* to_string(Verdict v) {
  switch (v) {
    case Verdict::fully_stable: return "fully_stable";
    case Verdict::not_fully_stable: return "not_fully_stable";
    case Verdict::undetermined: return "undetermined";
    case Verdict::inconsistent: return "inconsistent";
  }
  return "?";
}

struct StabilityReport {
  std::string model_hash;
  ReferenceTriple reference;
  CertifyOptions options;
  std::optional<CQReport> mfcq, licq, crcq;
  std::optional<MultiplierSet> multipliers;
  std::optional<SecondOrderReport> gssosc, gusosc, pvi, smooth;
  std::vector<ScocEntry> scoc;
  std::optional<LocalizationTable> table;
  std::optional<StabilityModuli> moduli;
  std::optional<InequalityCheck> check;
  std::map<std::string, SectionError> errors;  // section name -> failure
  Verdict verdict = Verdict::undetermined;
  std::string decided_by;  // condition behind the headline verdict
  std::optional<bool> chain_gssosc_gusosc;   // GSSOSC holds => GUSOSC corroborated
  std::optional<bool> chain_gusosc_harness;  // GUSOSC corroborated => harness clean
  bool input_error = false;                  // the reference is not a solution
  std::vector<std::string> notes;

  std::optional<bool> fully_stable() const {
    if (verdict == Verdict::fully_stable) return true;
    if (verdict == Verdict::not_fully_stable) return false;
    return std::nullopt;
  }

  /// Harness clean: unique localization, positive kappa, zero violations.
  bool harness_clean() const {
    return table && moduli && check && !moduli->kappa_flagged && check->clean();
  }
};

namespace detail {

template <class F>
void run_section(StabilityReport& rep, const std::string& name, F&& f) {
  try {
    f();
  } catch (const Error& e) {
    rep.errors[name] = {e.code(), e.what()};
  }
}

inline bool is_input_error(ErrorCode c) {
  return c == ErrorCode::no_multiplier || c == ErrorCode::not_a_normal || c == ErrorCode::infeasible_point ||
         c == ErrorCode::dimension_mismatch;
}

}  // namespace detail

/// CQ checks, multipliers, second-order conditions, bordered determinants,
/// localization table and inequality verification. Under LICQ the GSSOSC
/// decides; otherwise under MFCQ and CRCQ the GUSOSC decides. A broken
/// implication chain yields Verdict::inconsistent.
inline StabilityReport certify(const ParametricModel& model, const ReferenceTriple& ref,
                               const CertifyOptions& opt = {}) {
  if (opt.eta <= 0 || opt.rho_v <= 0 || opt.rho_p <= 0 || opt.tol_pd <= 0 || opt.tol_act <= 0 || opt.samples < 1) {
    throw Error(ErrorCode::invalid_argument, "radii, tolerances and sample counts must be positive");
  }
  StabilityReport rep;
  rep.model_hash = model_hash(model);
  rep.reference = ref;
  rep.options = opt;
  const Eigen::VectorXd x = ref.xd(), p = ref.pd();

  detail::run_section(rep, "mfcq", [&] { rep.mfcq = check_mfcq_exact(model, ref, opt.tol_act); });
  detail::run_section(rep, "licq", [&] { rep.licq = check_licq(model, x, p, opt.tol_act); });
  detail::run_section(rep, "crcq",
                      [&] { rep.crcq = probe_crcq(model, x, p, opt.eta, opt.crcq_samples, opt.seed, opt.tol_act); });
  detail::run_section(rep, "multipliers", [&] { rep.multipliers = multiplier_polytope_exact(model, ref, opt.tol_act); });
  if (auto it = rep.errors.find("multipliers"); it != rep.errors.end() && detail::is_input_error(it->second.code)) {
    rep.input_error = true;
    rep.notes.push_back("the reference is not a solution: v - f(x,p) is not a normal vector");
    return rep;
  }
  detail::run_section(rep, "gssosc", [&] { rep.gssosc = check_gssosc(model, ref, opt.tol_pd, opt.seed, opt.tol_act); });
  detail::run_section(rep, "gusosc", [&] {
    rep.gusosc = check_gusosc(model, ref, {opt.eta, opt.samples, opt.seed, opt.tol_pd, opt.tol_act});
  });
  detail::run_section(rep, "pvi_pointwise", [&] { rep.pvi = check_pvi_pointwise(model, ref, opt.tol_pd, opt.tol_act); });
  detail::run_section(rep, "smooth_psd", [&] { rep.smooth = check_smooth_psd(model, ref, opt.tol_pd); });
  detail::run_section(rep, "scoc_probe", [&] {
    if (!rep.multipliers || !rep.multipliers->bounded) return;
    const auto& verts = rep.multipliers->exact_vertices;
    for (std::size_t k = 0; k < std::min<std::size_t>(verts.size(), 8); ++k)
      rep.scoc.push_back({verts[k], scoc_scan(model, ref, verts[k], opt.tol_act)});
  });
  if (opt.harness) {
    detail::run_section(rep, "localization", [&] {
      rep.table = build_localization(model, ref,
                                     {opt.rho_v, opt.rho_p, opt.grid_v, opt.grid_p, opt.random_points, opt.seed});
    });
    if (rep.table) {
      detail::run_section(rep, "moduli", [&] {
        rep.moduli = fit_moduli(*rep.table);
        rep.check = verify_inequality(*rep.table, rep.moduli->kappa_used, rep.moduli->ell, rep.moduli->exponent);
      });
    }
  }

  // Headline verdict.
  const bool mfcq = rep.mfcq && rep.mfcq->ok();
  const bool licq = rep.licq && rep.licq->ok();
  const bool crcq = rep.crcq && rep.crcq->ok();
  const bool gss = rep.gssosc && rep.gssosc->verdict == SOVerdict::holds;
  const bool gus = rep.gusosc && rep.gusosc->verdict != SOVerdict::fails;
  if (!mfcq) {
    rep.notes.push_back("MFCQ fails or was not evaluated: the second-order characterization does not apply");
  } else if (licq && rep.gssosc) {
    rep.decided_by = "GSSOSC";
    rep.verdict = gss ? Verdict::fully_stable : Verdict::not_fully_stable;
  } else if (crcq && rep.gusosc) {
    rep.decided_by = "GUSOSC";
    rep.verdict = gus ? Verdict::fully_stable : Verdict::not_fully_stable;
  } else {
    rep.notes.push_back("CRCQ fails and LICQ fails: the second-order characterization does not apply");
  }

  if (rep.gssosc && rep.gusosc && gss) rep.chain_gssosc_gusosc = gus;
  if (rep.gusosc && gus && opt.harness) rep.chain_gusosc_harness = rep.harness_clean();
  bool broken = (rep.chain_gssosc_gusosc && !*rep.chain_gssosc_gusosc) ||
                (rep.chain_gusosc_harness && !*rep.chain_gusosc_harness);
  if (licq && rep.gssosc && rep.gusosc && gss != gus) {
    rep.notes.push_back("under LICQ the GSSOSC and the sampled GUSOSC disagree");
    broken = true;
  }
  if (rep.verdict == Verdict::fully_stable && opt.harness && !rep.harness_clean()) {
    rep.notes.push_back("conditions report full stability but the harness is not clean");
    broken = true;
  }
  if (rep.verdict == Verdict::not_fully_stable && opt.harness && rep.harness_clean()) {
    rep.notes.push_back("harness found no violation at this radius; sampled corroboration is one-sided");
  }
  if (broken) rep.verdict = Verdict::inconsistent;
  if (rep.gssosc && rep.gusosc && !gss && gus) {
    rep.notes.push_back("GSSOSC fails while GUSOSC holds: GSSOSC is only sufficient");
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Serialization

using Json = nlohmann::ordered_json;

namespace detail {

inline Json num(double x) { return std::isfinite(x) ? Json(x) : Json(nullptr); }

inline Json vec_json(const Eigen::VectorXd& v) {
  Json a = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(num(v(i)));
  return a;
}

inline Json rat_json(const std::vector<Rational>& v) {
  Json a = Json::array();
  for (const auto& r : v) a.push_back(to_string(r));
  return a;
}

inline Json cq_json(const CQReport& r) {
  Json j;
  j["verdict"] = to_string(r.verdict);
  j["active"] = r.active;
  switch (r.kind) {
    case CQKind::mfcq:
      j["margin"] = num(r.margin);
      j["direction"] = vec_json(r.direction);
      break;
    case CQKind::licq:
      j["rank"] = r.rank;
      break;
    case CQKind::crcq:
      j["samples"] = r.samples;
      if (r.verdict == CQVerdict::fails) {
        j["witness_subset"] = r.witness_subset;
        j["rank_at_reference"] = r.rank_at_reference;
        j["rank_at_witness"] = r.rank_at_witness;
        j["witness_x"] = vec_json(r.witness_x);
        j["witness_p"] = vec_json(r.witness_p);
      }
      break;
  }
  return j;
}

inline Json so_json(const SecondOrderReport& r) {
  Json j;
  j["condition"] = to_string(r.condition);
  j["verdict"] = to_string(r.verdict);
  j["modulus"] = num(r.modulus);
  j["vacuous"] = r.vacuous();
  if (r.witness.size() > 0) j["witness"] = vec_json(r.witness);
  if (r.witness_lambda.size() > 0) j["witness_lambda"] = vec_json(r.witness_lambda);
  if (r.condition == Condition::gusosc && r.witness_x.size() > 0) {
    j["witness_x"] = vec_json(r.witness_x);
    j["witness_p"] = vec_json(r.witness_p);
    j["witness_v"] = vec_json(r.witness_v);
  }
  if (r.condition == Condition::pvi_critical) {
    j["closure_modulus"] = num(r.closure_modulus);
    j["critical_modulus"] = num(r.critical_modulus);
  }
  j["tested"] = r.tested;
  if (r.condition == Condition::gusosc) j["rejected"] = r.rejected;
  j["notes"] = r.notes;
  return j;
}

inline Json error_json(const SectionError& e) {
  Json j;
  j["status"] = e.code == ErrorCode::not_applicable ? "not_applicable" : "error";
  j["code"] = to_string(e.code);
  j["message"] = e.message;
  return j;
}

}  // namespace detail

inline Json to_json(const StabilityReport& rep) {
  using detail::num;
  using detail::vec_json;
  auto section = [&](const std::string& name, const auto& value, auto&& make) -> Json {
    if (auto it = rep.errors.find(name); it != rep.errors.end()) return detail::error_json(it->second);
    if (!value) return Json(nullptr);
    return make(*value);
  };
  Json j;
  j["schema"] = kReportSchema;
  j["model_hash"] = rep.model_hash;
  j["verdict"] = to_string(rep.verdict);
  if (auto fs = rep.fully_stable()) j["fully_stable"] = *fs;
  else j["fully_stable"] = nullptr;
  j["decided_by"] = rep.decided_by.empty() ? Json(nullptr) : Json(rep.decided_by);
  j["status"] = rep.input_error ? "input_error" : "ok";

  Json r;
  r["x"] = detail::rat_json(rep.reference.x);
  r["p"] = detail::rat_json(rep.reference.p);
  r["v"] = detail::rat_json(rep.reference.v);
  r["v_hat"] = detail::rat_json(rep.reference.v_hat);
  j["reference"] = r;

  const auto& o = rep.options;
  j["options"] = Json{{"eta", o.eta},         {"rho_v", o.rho_v},     {"rho_p", o.rho_p},
                      {"samples", o.samples}, {"seed", o.seed},       {"tol_pd", o.tol_pd},
                      {"tol_act", o.tol_act}, {"crcq_samples", o.crcq_samples},
                      {"grid_v", o.grid_v},   {"grid_p", o.grid_p},   {"random_points", o.random_points}};

  Json cq;
  cq["mfcq"] = section("mfcq", rep.mfcq, detail::cq_json);
  cq["licq"] = section("licq", rep.licq, detail::cq_json);
  cq["crcq"] = section("crcq", rep.crcq, detail::cq_json);
  j["cq"] = cq;

  j["multipliers"] = section("multipliers", rep.multipliers, [](const MultiplierSet& s) {
    Json m;
    m["active"] = s.active;
    m["bounded"] = s.bounded;
    m["dimension"] = s.dimension;
    Json verts = Json::array();
    if (!s.exact_vertices.empty()) {
      for (const auto& v : s.exact_vertices) verts.push_back(detail::rat_json(v));
    } else {
      for (const auto& v : s.vertices) verts.push_back(vec_json(v));
    }
    m["vertices"] = verts;
    if (!s.bounded) m["recession"] = vec_json(s.recession);
    return m;
  });
  j["gssosc"] = section("gssosc", rep.gssosc, detail::so_json);
  j["gusosc"] = section("gusosc", rep.gusosc, detail::so_json);
  j["pvi_pointwise"] = section("pvi_pointwise", rep.pvi, detail::so_json);
  j["smooth_psd"] = section("smooth_psd", rep.smooth, detail::so_json);
  if (auto it = rep.errors.find("scoc_probe"); it != rep.errors.end()) {
    j["scoc_probe"] = detail::error_json(it->second);
  } else {
    Json sc = Json::array();
    for (const auto& entry : rep.scoc) {
      Json e;
      e["lambda"] = detail::rat_json(entry.lambda);
      Json bases = Json::array();
      for (const auto& b : entry.bases)
        bases.push_back(Json{{"basis", b.basis}, {"det", b.det}, {"exact", b.exact}, {"zero", b.zero}});
      e["bases"] = bases;
      sc.push_back(e);
    }
    j["scoc_probe"] = sc;
  }

  j["localization"] = section("localization", rep.table, [](const LocalizationTable& t) {
    double worst = 0.0;
    for (const auto& e : t.entries) worst = std::max(worst, e.residual);
    return Json{{"rho_v", t.rho_v},         {"rho_p", t.rho_p},       {"radius_u", t.radius_u},
                {"grid_v", t.grid_v},       {"grid_p", t.grid_p},     {"entries", t.entries.size()},
                {"halvings", t.halvings},   {"singular_faces", t.singular_faces},
                {"max_residual", worst}};
  });
  j["moduli"] = section("moduli", rep.moduli, [](const StabilityModuli& m) {
    Json o;
    o["kappa"] = num(m.kappa);
    o["kappa_unbounded"] = m.kappa_unbounded;
    o["kappa_flagged"] = m.kappa_flagged;
    o["kappa_used"] = m.kappa_used;
    o["kappa_pairs"] = m.kappa_pairs;
    o["ell"] = m.ell;
    o["ell_pairs"] = m.ell_pairs;
    o["exponent"] = m.exponent;
    o["exponent_fit"] = num(m.exponent_fit);
    o["parameter_independent"] = m.parameter_independent;
    o["exponent_pairs"] = m.exponent_pairs;
    return o;
  });
  Json viol = Json::array();
  if (rep.check && rep.table) {
    const auto& e = rep.table->entries;
    for (const auto& v : rep.check->listed) {
      viol.push_back(Json{{"v1", vec_json(e[v.i].v)}, {"p1", vec_json(e[v.i].p)}, {"x1", vec_json(e[v.i].x)},
                          {"v2", vec_json(e[v.j].v)}, {"p2", vec_json(e[v.j].p)}, {"x2", vec_json(e[v.j].x)},
                          {"lhs", v.lhs},             {"rhs", v.rhs},             {"excess", v.excess}});
    }
  }
  j["violations"] = viol;
  if (rep.check) {
    j["harness"] = Json{{"kappa", rep.check->kappa},       {"ell", rep.check->ell},
                        {"exponent", rep.check->exponent}, {"pairs", rep.check->pairs},
                        {"violation_count", rep.check->violations},
                        {"worst_excess", rep.check->worst_excess},
                        {"subsampled", rep.check->subsampled}, {"clean", rep.harness_clean()}};
  } else {
    j["harness"] = nullptr;
  }
  Json chain;
  chain["gssosc_implies_gusosc"] = rep.chain_gssosc_gusosc ? Json(*rep.chain_gssosc_gusosc) : Json(nullptr);
  chain["gusosc_implies_harness"] = rep.chain_gusosc_harness ? Json(*rep.chain_gusosc_harness) : Json(nullptr);
  j["chain"] = chain;
  j["notes"] = rep.notes;
  return j;
}

namespace detail {

inline std::string scalar_text(const Json& v) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_null()) return "-";
  return v.dump();
}

inline bool all_scalars(const Json& a) {
  for (const auto& x : a)
    if (x.is_object() || (x.is_array() && !all_scalars(x))) return false;
  return true;
}

inline std::string inline_text(const Json& a) {
  if (!a.is_array()) return scalar_text(a);
  std::string s = "(";
  for (std::size_t i = 0; i < a.size(); ++i) s += (i ? ", " : "") + inline_text(a[i]);
  return s + ")";
}

inline void render(std::ostringstream& os, const Json& j, int indent) {
  const std::string pad(static_cast<std::size_t>(indent), ' ');
  for (auto it = j.begin(); it != j.end(); ++it) {
    const Json& v = it.value();
    if (v.is_object()) {
      os << pad << it.key() << ":\n";
      render(os, v, indent + 2);
    } else if (v.is_array() && !all_scalars(v)) {
      os << pad << it.key() << ":\n";
      for (const auto& item : v) {
        if (item.is_object()) {
          os << pad << "  -\n";
          render(os, item, indent + 4);
        } else {
          os << pad << "  - " << inline_text(item) << "\n";
        }
      }
    } else if (v.is_array() && v.empty()) {
      os << pad << it.key() << ": (none)\n";
    } else {
      os << pad << it.key() << ": " << inline_text(v) << "\n";
    }
  }
}

}  // namespace detail

/// Text rendering that mirrors the JSON document key by key.
inline std::string render_text(const Json& report) {
  std::ostringstream os;
  detail::render(os, report, 0);
  return os.str();
}

}  // namespace fullstab
