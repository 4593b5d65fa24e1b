#pragma once

// Sample-based monotonicity moduli of operator graphs and the localization
// inequality || dv - 2 kappa dtheta || <= || dv || for candidate inverses.

#include "fullstab/errors.hpp"
#include "fullstab/linalg.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

namespace fullstab {

inline constexpr double kPairGap = 1e-12;
inline constexpr double kMonotoneTol = 1e-9;

/// Pairs (u_i, v_i) with v_i in T(u_i); row i of `u` and `v`.
struct GraphSample {
  Eigen::MatrixXd u;
  Eigen::MatrixXd v;

  Eigen::Index size() const { return u.rows(); }
  Eigen::Index dim_u() const { return u.cols(); }
  Eigen::Index dim_v() const { return v.cols(); }

  static GraphSample from_rows(const std::vector<Eigen::VectorXd>& us, const std::vector<Eigen::VectorXd>& vs) {
    if (us.size() != vs.size() || us.empty()) {
      throw Error(ErrorCode::insufficient_pairs, "graph sample needs matching nonempty u and v lists");
    }
    GraphSample s;
    s.u.resize(static_cast<Eigen::Index>(us.size()), us[0].size());
    s.v.resize(static_cast<Eigen::Index>(vs.size()), vs[0].size());
    for (std::size_t i = 0; i < us.size(); ++i) {
      s.u.row(static_cast<Eigen::Index>(i)) = us[i].transpose();
      s.v.row(static_cast<Eigen::Index>(i)) = vs[i].transpose();
    }
    return s;
  }

  /// Every u_i within eta of u_bar and v_i within eta of v_bar.
  bool inside_ball(const Eigen::VectorXd& u_bar, const Eigen::VectorXd& v_bar, double eta) const {
    for (Eigen::Index i = 0; i < size(); ++i) {
      Eigen::VectorXd gap(dim_u() + dim_v());
      gap << u.row(i).transpose() - u_bar, v.row(i).transpose() - v_bar;
      if (gap.norm() > eta) return false;
    }
    return true;
  }

  /// CSV with header u1..un,v1..vn.
  std::string to_csv() const {
    std::ostringstream os;
    os.precision(17);
    for (Eigen::Index j = 0; j < dim_u(); ++j) os << (j ? "," : "") << "u" << j + 1;
    for (Eigen::Index j = 0; j < dim_v(); ++j) os << ",v" << j + 1;
    os << "\n";
    for (Eigen::Index i = 0; i < size(); ++i) {
      for (Eigen::Index j = 0; j < dim_u(); ++j) os << (j ? "," : "") << u(i, j);
      for (Eigen::Index j = 0; j < dim_v(); ++j) os << "," << v(i, j);
      os << "\n";
    }
    return os.str();
  }

  static GraphSample from_csv(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line)) throw Error(ErrorCode::io, "empty graph CSV");
    std::vector<std::string> header = split(line);
    Eigen::Index nu = 0, nv = 0;
    for (const auto& h : header) {
      if (!h.empty() && h[0] == 'u') ++nu;
      else if (!h.empty() && h[0] == 'v') ++nv;
      else throw Error(ErrorCode::io, "graph CSV header must list u1..un,v1..vn, got '" + h + "'");
    }
    if (nu == 0 || nv == 0) throw Error(ErrorCode::io, "graph CSV needs u and v columns");
    std::vector<std::vector<double>> rows;
    int line_no = 1;
    while (std::getline(in, line)) {
      ++line_no;
      if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
      std::vector<std::string> cells = split(line);
      if (static_cast<Eigen::Index>(cells.size()) != nu + nv) {
        throw Error(ErrorCode::io, "graph CSV line " + std::to_string(line_no) + " has " +
                                       std::to_string(cells.size()) + " fields");
      }
      std::vector<double> row;
      for (const auto& c : cells) {
        try {
          row.push_back(std::stod(c));
        } catch (const std::exception&) {
          throw Error(ErrorCode::io, "graph CSV line " + std::to_string(line_no) + ": bad number '" + c + "'");
        }
      }
      rows.push_back(std::move(row));
    }
    GraphSample s;
    s.u.resize(static_cast<Eigen::Index>(rows.size()), nu);
    s.v.resize(static_cast<Eigen::Index>(rows.size()), nv);
    for (std::size_t i = 0; i < rows.size(); ++i) {
      for (Eigen::Index j = 0; j < nu; ++j) s.u(static_cast<Eigen::Index>(i), j) = rows[i][static_cast<std::size_t>(j)];
      for (Eigen::Index j = 0; j < nv; ++j) s.v(static_cast<Eigen::Index>(i), j) = rows[i][static_cast<std::size_t>(nu + j)];
    }
    return s;
  }

 private:
  static std::vector<std::string> split(const std::string& line) {
    std::vector<std::string> out;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      auto b = cell.find_first_not_of(" \t\r");
      auto e = cell.find_last_not_of(" \t\r");
      out.push_back(b == std::string::npos ? "" : cell.substr(b, e - b + 1));
    }
    return out;
  }
};

struct MonotonicityEstimate {
  double kappa = kInfinity;  // min pairwise <dv,du>/|du|^2
  double r = 0.0;            // hypomonotonicity constant max(0, -kappa)
  Eigen::Index witness_i = -1;
  Eigen::Index witness_j = -1;
  std::int64_t pairs = 0;    // nondegenerate pairs scanned

  bool monotone(double tol = kMonotoneTol) const { return kappa >= -tol; }
  bool strongly_monotone(double tol = kMonotoneTol) const { return kappa > tol; }
};

/// Ratio <v_i - v_j, u_i - u_j> / |u_i - u_j|^2 of one pair.
inline double pair_ratio(const GraphSample& s, Eigen::Index i, Eigen::Index j) {
  Eigen::VectorXd du = (s.u.row(i) - s.u.row(j)).transpose();
  Eigen::VectorXd dv = (s.v.row(i) - s.v.row(j)).transpose();
  return dv.dot(du) / du.squaredNorm();
}

/// Scans all unordered pairs; ties keep the lexicographically first pair.
inline MonotonicityEstimate estimate_moduli(const GraphSample& s) {
  if (s.dim_u() != s.dim_v()) throw Error(ErrorCode::dimension_mismatch, "u and v must have the same dimension");
  if (s.size() < 2) throw Error(ErrorCode::insufficient_pairs, "need at least two graph pairs");
  MonotonicityEstimate est;
  const Eigen::Index n = s.size();
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) {
      Eigen::VectorXd du = (s.u.row(i) - s.u.row(j)).transpose();
      double du2 = du.squaredNorm();
      if (std::sqrt(du2) <= kPairGap) continue;
      ++est.pairs;
      double ratio = (s.v.row(i) - s.v.row(j)).dot(du.transpose()) / du2;
      if (ratio < est.kappa) {
        est.kappa = ratio;
        est.witness_i = i;
        est.witness_j = j;
      }
    }
  }
  if (est.pairs == 0) throw Error(ErrorCode::insufficient_pairs, "all graph pairs are degenerate");
  est.r = std::max(0.0, -est.kappa);
  return est;
}

struct LocalizationViolation {
  Eigen::Index i = -1;
  Eigen::Index j = -1;
  double lhs = 0.0;  // |dv - 2 kappa dtheta|
  double rhs = 0.0;  // |dv|
};

struct LocalizationCheck {
  std::int64_t pairs = 0;
  std::int64_t violations = 0;
  double worst_excess = 0.0;  // max(lhs - rhs) over violating pairs
  std::vector<LocalizationViolation> listed;  // first violations in scan order
};

/// Pairs (v_i, theta_i) of a candidate localization. A pair violates the
/// estimate when |dv - 2 kappa dtheta| > |dv| + tol * max(1, |dv|).
inline LocalizationCheck check_localization_estimate(const GraphSample& s, double kappa, double tol = kMonotoneTol,
                                                     std::size_t max_listed = 1000) {
  if (!(kappa > 0.0)) throw Error(ErrorCode::invalid_argument, "localization estimate needs kappa > 0");
  LocalizationCheck out;
  const Eigen::Index n = s.size();
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) {
      Eigen::RowVectorXd dv = s.u.row(i) - s.u.row(j);
      Eigen::RowVectorXd dt = s.v.row(i) - s.v.row(j);
      double rhs = dv.norm();
      if (rhs <= kPairGap && dt.norm() <= kPairGap) continue;
      ++out.pairs;
      double lhs = (dv - 2.0 * kappa * dt).norm();
      double excess = lhs - rhs;
      if (excess > tol * std::max(1.0, rhs)) {
        ++out.violations;
        out.worst_excess = std::max(out.worst_excess, excess);
        if (out.listed.size() < max_listed) out.listed.push_back({i, j, lhs, rhs});
      }
    }
  }
  return out;
}

struct InverseEstimate {
  double lipschitz = 0.0;  // max |dtheta| / |dv|
  MonotonicityEstimate monotone;  // moduli of the inverse graph (theta_i, v_i)
  bool consistent = true;  // lipschitz <= 1/kappa + tol when kappa > 0
};

/// Lipschitz modulus of a sampled localization and its consistency with the
/// strong monotonicity modulus of the inverse graph.
inline InverseEstimate estimate_from_inverse(const GraphSample& s, double tol = kMonotoneTol) {
  InverseEstimate out;
  const Eigen::Index n = s.size();
  if (n < 2) throw Error(ErrorCode::insufficient_pairs, "need at least two graph pairs");
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) {
      double dv = (s.u.row(i) - s.u.row(j)).norm();
      if (dv <= kPairGap) continue;
      out.lipschitz = std::max(out.lipschitz, (s.v.row(i) - s.v.row(j)).norm() / dv);
    }
  }
  GraphSample inverse{s.v, s.u};
  out.monotone = estimate_moduli(inverse);
  if (out.monotone.kappa > 0.0) out.consistent = out.lipschitz <= 1.0 / out.monotone.kappa + tol;
  return out;
}

}  // namespace fullstab
