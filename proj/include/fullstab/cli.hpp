#pragma once

// Command-line front end. Exit codes: 0 verdict computed, 1 input error,
// 2 internal inconsistency between conditions and harness.

#include "fullstab/config.hpp"
#include "fullstab/errors.hpp"
#include "fullstab/model.hpp"
#include "fullstab/monotone.hpp"
#include "fullstab/polycone.hpp"
#include "fullstab/stabharness.hpp"
#include "fullstab/visolver.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace fullstab::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitInput = 1;
inline constexpr int kExitInconsistent = 2;

struct RunConfig {
  std::string subcommand;
  std::string input;
  CertifyOptions opt;
  std::string json_path;
  std::string csv_path;
  std::string x_text, p_text, v_text;
};

inline std::string read_text(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::io, "cannot open '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::io, "cannot write '" + path + "'");
  out << text;
}

/// "(a, b, ...)" with rational constants, checked against the expected length.
inline Eigen::VectorXd parse_vector(const std::string& text, int expected, const std::string& what) {
  std::size_t consumed = 0;
  std::vector<Rational> vals;
  try {
    vals = detail::parse_constant_tuple(text, 1, 0, consumed);
  } catch (const Error& e) {
    throw Error(ErrorCode::syntax, what + ": " + e.what());
  }
  if (static_cast<int>(vals.size()) != expected) {
    throw Error(ErrorCode::dimension_mismatch,
                what + " has " + std::to_string(vals.size()) + " entries, expected " + std::to_string(expected));
  }
  return to_eigen(vals);
}

/// Point from flags, falling back to the model reference.
inline Eigen::VectorXd point_or_reference(const ParametricModel& model, const std::string& text, int size,
                                          const std::string& what,
                                          Eigen::VectorXd (ReferenceTriple::*field)() const) {
  if (!text.empty()) return parse_vector(text, size, what);
  if (size == 0) return Eigen::VectorXd(0);
  if (!model.reference()) throw Error(ErrorCode::invalid_argument, what + " not given and the model has no reference");
  return (*model.reference().*field)();
}

inline Json vec_json(const Eigen::VectorXd& v) { return detail::vec_json(v); }

inline void emit(const RunConfig& cfg, const Json& j, std::ostream& out) {
  if (cfg.json_path == "-") {
    out << j.dump(2) << "\n";
    return;
  }
  out << render_text(j);
  if (!cfg.json_path.empty()) write_text(cfg.json_path, j.dump(2) + "\n");
}

inline int cmd_certify(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  ParametricModel model = parse_model(read_text(cfg.input));
  if (!model.reference()) throw Error(ErrorCode::invalid_argument, "certify needs a reference line in the model");
  StabilityReport rep = certify(model, *model.reference(), cfg.opt);
  emit(cfg, to_json(rep), out);
  if (!cfg.csv_path.empty() && rep.table) write_text(cfg.csv_path, rep.table->to_csv());
  if (rep.input_error) {
    err << "error: the reference is not a solution of the variational condition\n";
    return kExitInput;
  }
  if (rep.verdict == Verdict::inconsistent) {
    err << "inconsistent: conditions and harness disagree, investigate\n";
    return kExitInconsistent;
  }
  return kExitOk;
}

inline Json outcome_json(const SolveOutcome& s) {
  Json j;
  j["x"] = vec_json(s.x);
  j["residual"] = detail::num(s.residual);
  j["iterations"] = s.iterations;
  j["method"] = to_string(s.method);
  j["multiplicity"] = to_string(s.multiplicity);
  j["converged"] = s.converged;
  if (s.method == SolveMethod::projected_iteration) j["step"] = s.step;
  if (s.method == SolveMethod::face_enumeration) {
    j["face"] = s.face;
    j["lambda"] = vec_json(s.lambda);
  }
  return j;
}

inline int cmd_solve(const RunConfig& cfg, std::ostream& out) {
  ParametricModel model = parse_model(read_text(cfg.input));
  const int n = model.n(), d = model.d();
  Eigen::VectorXd v = point_or_reference(model, cfg.v_text, n, "--v", &ReferenceTriple::vd);
  Eigen::VectorXd p = point_or_reference(model, cfg.p_text, d, "--p", &ReferenceTriple::pd);
  Eigen::VectorXd x0 = cfg.x_text.empty() && !model.reference() ? Eigen::VectorXd::Zero(n)
                                                                  : point_or_reference(model, cfg.x_text, n, "--x", &ReferenceTriple::xd);
  const double radius = kUniquenessRadiusFactor * std::max(cfg.opt.rho_v, cfg.opt.rho_p);
  Json j;
  j["schema"] = kReportSchema;
  j["v"] = vec_json(v);
  j["p"] = vec_json(p);
  j["box"] = Json{{"center", vec_json(x0)}, {"radius", radius}};
  FaceSolveResult faces = solve_faces(model, v, p, {x0, radius});
  Json sols = Json::array();
  for (const auto& s : faces.solutions) sols.push_back(outcome_json(s));
  j["face_enumeration"] = Json{{"solutions", sols},
                               {"faces_tried", faces.faces_tried},
                               {"singular_faces", faces.singular_faces},
                               {"outside_box", faces.outside_box}};
  if (model.all_affine_in_x()) {
    j["projected_iteration"] = outcome_json(solve_projected(model, v, p, x0));
  } else {
    j["projected_iteration"] = nullptr;
  }
  emit(cfg, j, out);
  return kExitOk;
}

inline int cmd_probe_monotone(const RunConfig& cfg, std::ostream& out) {
  Json j;
  j["schema"] = kReportSchema;
  if (cfg.input.size() >= 4 && cfg.input.substr(cfg.input.size() - 4) == ".csv") {
    GraphSample s = GraphSample::from_csv(read_text(cfg.input));
    MonotonicityEstimate e = estimate_moduli(s);
    j["source"] = "graph";
    j["pairs"] = e.pairs;
    j["kappa"] = detail::num(e.kappa);
    j["hypomonotonicity"] = e.r;
    j["monotone"] = e.monotone();
    j["strongly_monotone"] = e.strongly_monotone();
    j["witness"] = Json{{"i", e.witness_i}, {"j", e.witness_j}};
    emit(cfg, j, out);
    return kExitOk;
  }
  ParametricModel model = parse_model(read_text(cfg.input));
  if (!model.reference()) throw Error(ErrorCode::invalid_argument, "probe-monotone needs a reference line");
  const auto& o = cfg.opt;
  LocalizationTable t =
      build_localization(model, *model.reference(), {o.rho_v, o.rho_p, o.grid_v, o.grid_p, o.random_points, o.seed});
  StabilityModuli m = fit_moduli(t);
  InequalityCheck c = verify_inequality(t, m.kappa_used, m.ell, m.exponent);
  j["source"] = "localization";
  j["entries"] = t.entries.size();
  j["kappa"] = detail::num(m.kappa);
  j["kappa_unbounded"] = m.kappa_unbounded;
  j["kappa_flagged"] = m.kappa_flagged;
  j["kappa_used"] = m.kappa_used;
  j["ell"] = m.ell;
  j["exponent"] = m.exponent;
  j["exponent_fit"] = detail::num(m.exponent_fit);
  j["parameter_independent"] = m.parameter_independent;
  j["pairs"] = c.pairs;
  j["violation_count"] = c.violations;
  emit(cfg, j, out);
  if (!cfg.csv_path.empty()) write_text(cfg.csv_path, t.to_csv());
  return kExitOk;
}

inline Json csv_lines(const std::string& csv) {
  Json a = Json::array();
  std::istringstream in(csv);
  std::string line;
  while (std::getline(in, line)) a.push_back(line);
  return a;
}

inline int cmd_cones(const RunConfig& cfg, std::ostream& out) {
  ParametricModel model = parse_model(read_text(cfg.input));
  const int n = model.n(), d = model.d();
  Eigen::VectorXd x = point_or_reference(model, cfg.x_text, n, "--x", &ReferenceTriple::xd);
  Eigen::VectorXd p = point_or_reference(model, cfg.p_text, d, "--p", &ReferenceTriple::pd);
  std::vector<int> active = active_set(model, x, p, cfg.opt.tol_act);
  ConeDesc t = tangent_cone(model, x, p, active);
  Json j;
  j["schema"] = kReportSchema;
  j["x"] = vec_json(x);
  j["p"] = vec_json(p);
  j["active"] = active;
  j["tangent_exact"] = t.exact;
  j["tangent"] = csv_lines(cone_to_csv(t));
  j["tangent_generators"] = csv_lines(generators_to_csv(generators(t)));
  j["normal_cone"] = csv_lines(cone_to_csv(polar_cone(t)));
  j["tangent_span_dim"] = span_difference(t).dim();
  if (!cfg.v_text.empty() || model.reference()) {
    Eigen::VectorXd v = point_or_reference(model, cfg.v_text, n, "--v", &ReferenceTriple::vd);
    Eigen::VectorXd v_hat = v - eval_bundle(model, x, p).f;
    ConeDesc k = critical_cone(t, v_hat);
    j["v_hat"] = vec_json(v_hat);
    j["critical"] = csv_lines(cone_to_csv(k));
    j["critical_generators"] = csv_lines(generators_to_csv(generators(k)));
    j["critical_span_dim"] = span_difference(k).dim();
  }
  emit(cfg, j, out);
  return kExitOk;
}

inline int cmd_report(const RunConfig& cfg, std::ostream& out) {
  Json j;
  try {
    j = Json::parse(read_text(cfg.input));
  } catch (const Json::parse_error& e) {
    throw Error(ErrorCode::io, std::string("report is not valid JSON: ") + e.what());
  }
  if (!j.is_object() || !j.contains("schema") || j["schema"] != kReportSchema) {
    throw Error(ErrorCode::io, "unsupported report schema");
  }
  out << render_text(j);
  if (j.value("verdict", "") == "inconsistent") return kExitInconsistent;
  return kExitOk;
}

inline void add_common(CLI::App* sub, RunConfig& cfg, const std::string& input_help) {
  sub->add_option("input", cfg.input, input_help)->required();
  sub->add_option("--eta", cfg.opt.eta, "graph-ball radius for GUSOSC and the CRCQ probe")->capture_default_str();
  sub->add_option("--rho-v", cfg.opt.rho_v, "localization radius in v")->capture_default_str();
  sub->add_option("--rho-p", cfg.opt.rho_p, "localization radius in p")->capture_default_str();
  sub->add_option("--samples", cfg.opt.samples, "GUSOSC graph samples")->capture_default_str();
  sub->add_option("--seed", cfg.opt.seed, "random seed")->capture_default_str();
  sub->add_option("--tol-pd", cfg.opt.tol_pd, "positive-definiteness threshold")->capture_default_str();
  sub->add_option("--tol-act", cfg.opt.tol_act, "active-constraint tolerance")->capture_default_str();
  sub->add_option("--crcq-samples", cfg.opt.crcq_samples, "CRCQ probe samples")->capture_default_str();
  sub->add_option("--grid-v", cfg.opt.grid_v, "grid nodes per v axis")->capture_default_str();
  sub->add_option("--grid-p", cfg.opt.grid_p, "grid nodes per p axis")->capture_default_str();
  sub->add_option("--random-points", cfg.opt.random_points, "random localization points")->capture_default_str();
  sub->add_option("--json", cfg.json_path, "write the JSON report to this path ('-' for stdout)");
  sub->add_option("--csv-table", cfg.csv_path, "write the localization table as CSV");
}

/// Entry point; all diagnostics go to `err`.
inline int run(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  RunConfig cfg;
  CLI::App app{"fullstab: full stability of parametric variational conditions"};
  app.require_subcommand(1);
  auto* certify_cmd = app.add_subcommand("certify", "run the full certification pipeline");
  add_common(certify_cmd, cfg, "model file");
  auto* solve_cmd = app.add_subcommand("solve", "solve the variational condition at (v, p)");
  add_common(solve_cmd, cfg, "model file");
  auto* probe_cmd = app.add_subcommand("probe-monotone", "monotonicity moduli of a localization or a graph CSV");
  add_common(probe_cmd, cfg, "model file or graph CSV");
  auto* cones_cmd = app.add_subcommand("cones", "tangent, normal and critical cones");
  add_common(cones_cmd, cfg, "model file");
  auto* report_cmd = app.add_subcommand("report", "render a JSON report as text");
  report_cmd->add_option("input", cfg.input, "JSON report")->required();
  for (auto* sub : {solve_cmd, cones_cmd}) {
    sub->add_option("--x", cfg.x_text, "point x as (a, b, ...)");
    sub->add_option("--p", cfg.p_text, "parameter p as (a, b, ...)");
    sub->add_option("--v", cfg.v_text, "canonical parameter v as (a, b, ...)");
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kExitInput;
  }
  if (cfg.opt.eta <= 0 || cfg.opt.rho_v <= 0 || cfg.opt.rho_p <= 0 || cfg.opt.tol_pd <= 0 || cfg.opt.tol_act <= 0 ||
      cfg.opt.samples < 1 || cfg.opt.crcq_samples < 1 || cfg.opt.grid_v < 1 || cfg.opt.grid_p < 1 ||
      cfg.opt.random_points < 0) {
    err << "error: radii, tolerances and sample counts must be positive\n";
    return kExitInput;
  }
  try {
    if (certify_cmd->parsed()) return cmd_certify(cfg, out, err);
    if (solve_cmd->parsed()) return cmd_solve(cfg, out);
    if (probe_cmd->parsed()) return cmd_probe_monotone(cfg, out);
    if (cones_cmd->parsed()) return cmd_cones(cfg, out);
    if (report_cmd->parsed()) return cmd_report(cfg, out);
  } catch (const Error& e) {
    err << "error [" << to_string(e.code()) << "]: " << e.what() << "\n";
    return kExitInput;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitInput;
  }
  return kExitInput;
}

}  // namespace fullstab::cli
