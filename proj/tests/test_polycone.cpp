#include "test_support.hpp"

#include "fullstab/polycone.hpp"

#include <catch_amalgamated.hpp>

using namespace fullstab;
using fullstab::testing::kEx64;

namespace {

Eigen::MatrixXd rows(std::initializer_list<std::initializer_list<double>> r) {
  Eigen::MatrixXd m(static_cast<Eigen::Index>(r.size()), static_cast<Eigen::Index>(r.begin()->size()));
  Eigen::Index i = 0;
  for (const auto& row : r) {
    Eigen::Index j = 0;
    for (double v : row) m(i, j++) = v;
    ++i;
  }
  return m;
}

ConeDesc random_cone(Rng& rng, Eigen::Index n) {
  ConeDesc k = ConeDesc::whole_space(n);
  k.ineq = rng.normal_matrix(1 + static_cast<Eigen::Index>(rng.below(5)), n);
  if (rng.uniform() < 0.3) k.eq = rng.normal_matrix(1, n);
  return k;
}

// Independent span oracle: maximizers of random linear objectives over
// K ∩ [-1,1]^n are vertices of that polytope and together span K.
int lp_span_dim(const ConeDesc& k, Rng& rng) {
  const Eigen::Index n = k.n;
  Eigen::MatrixXd maximizers(n, 0);
  for (int trial = 0; trial < 40; ++trial) {
    Eigen::VectorXd c = rng.normal_vector(n);
    LinearProgram<double> lp;
    lp.num_vars = static_cast<int>(2 * n);  // w = u - s
    for (Eigen::Index j = 0; j < n; ++j) lp.objective.push_back(c(j));
    for (Eigen::Index j = 0; j < n; ++j) lp.objective.push_back(-c(j));
    auto split = [&](const Eigen::RowVectorXd& a) {
      std::vector<double> row;
      for (Eigen::Index j = 0; j < n; ++j) row.push_back(a(j));
      for (Eigen::Index j = 0; j < n; ++j) row.push_back(-a(j));
      return row;
    };
    for (Eigen::Index i = 0; i < k.ineq.rows(); ++i) lp.add_le(split(k.ineq.row(i)), 0.0);
    for (Eigen::Index i = 0; i < k.eq.rows(); ++i) lp.add_eq(split(k.eq.row(i)), 0.0);
    for (Eigen::Index j = 0; j < n; ++j) {
      Eigen::RowVectorXd e = Eigen::RowVectorXd::Zero(n);
      e(j) = 1.0;
      lp.add_le(split(e), 1.0);
      lp.add_le(split(-e), 1.0);
    }
    auto res = solve_lp(lp, 1e-12);
    REQUIRE(res.status == LpStatus::optimal);
    Eigen::VectorXd w(n);
    for (Eigen::Index j = 0; j < n; ++j)
      w(j) = res.x[static_cast<std::size_t>(j)] - res.x[static_cast<std::size_t>(n + j)];
    maximizers.conservativeResize(n, maximizers.cols() + 1);
    maximizers.col(maximizers.cols() - 1) = w;
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(maximizers);
  int r = 0;
  for (Eigen::Index i = 0; i < svd.singularValues().size(); ++i)
    if (svd.singularValues()(i) > 1e-7) ++r;
  return r;
}

// Dykstra's alternating projections onto the halfspaces of { x : A x <= b }.
Eigen::VectorXd dykstra(const Eigen::MatrixXd& a, const Eigen::VectorXd& b, const Eigen::VectorXd& z) {
  const Eigen::Index m = a.rows();
  Eigen::VectorXd x = z;
  Eigen::MatrixXd inc = Eigen::MatrixXd::Zero(z.size(), m);
  for (int sweep = 0; sweep < 200000; ++sweep) {
    Eigen::VectorXd before = x;
    Eigen::MatrixXd inc_before = inc;
    for (Eigen::Index i = 0; i < m; ++i) {
      Eigen::VectorXd y = x + inc.col(i);
      double s = a.row(i).dot(y) - b(i);
      Eigen::VectorXd proj = s > 0 ? Eigen::VectorXd(y - s / a.row(i).squaredNorm() * a.row(i).transpose()) : y;
      inc.col(i) = y - proj;
      x = proj;
    }
    if ((x - before).norm() < 1e-15 && (inc - inc_before).norm() < 1e-15) break;
  }
  return x;
}

}  // namespace

TEST_CASE("active set of the pyramid example", "[polycone]") {
  auto model = parse_model(kEx64);
  Eigen::VectorXd p = Eigen::VectorXd::Zero(2);
  CHECK(active_set(model, Eigen::Vector3d::Zero(), p) == std::vector<int>{0, 1, 2, 3});
  CHECK(active_set(model, Eigen::Vector3d(0, 0, 1), p).empty());
  CHECK_THROWS_AS(active_set(model, Eigen::Vector3d(0, 0, -1), p), Error);
  auto id = parse_model(fullstab::testing::kIdentity);
  CHECK(active_set(id, Eigen::VectorXd::Constant(1, 2.0), Eigen::VectorXd(0)).empty());
}

TEST_CASE("tangent cones", "[polycone]") {
  auto model = parse_model(kEx64);
  Eigen::VectorXd p = Eigen::VectorXd::Zero(2);
  Eigen::VectorXd x = Eigen::VectorXd::Zero(3);
  ConeDesc t = tangent_cone(model, x, p, active_set(model, x, p));
  CHECK(t.eq.rows() == 0);
  CHECK(t.exact);
  CHECK(t.ineq.isApprox(rows({{1, 0, -1}, {-1, 0, -1}, {0, 1, -1}, {0, -1, -1}})));

  ConeDesc free = tangent_cone(model, Eigen::Vector3d(0, 0, 1), p, {});
  CHECK(free.ineq.rows() == 0);
  CHECK(free.contains(Eigen::Vector3d(1, -2, 3)));

  auto box = parse_model("dims n=1\nf = (x1)\nconstraint -x1 <= 0\nconstraint x1 <= 1\n");
  Eigen::VectorXd a = Eigen::VectorXd::Zero(1);
  ConeDesc tb = tangent_cone(box, a, Eigen::VectorXd(0), active_set(box, a, Eigen::VectorXd(0)));
  CHECK(tb.contains(Eigen::VectorXd::Constant(1, 1.0)));
  CHECK_FALSE(tb.contains(Eigen::VectorXd::Constant(1, -1.0)));

  auto curved = parse_model("dims n=2\nf = (x1, x2)\nconstraint x1^2 + x2^2 <= 1\n");
  Eigen::Vector2d e1(1, 0);
  CHECK_FALSE(tangent_cone(curved, e1, Eigen::VectorXd(0), active_set(curved, e1, Eigen::VectorXd(0))).exact);
}

TEST_CASE("critical cone of the pyramid example is trivial", "[polycone]") {
  auto model = parse_model(kEx64);
  const auto& ref = *model.reference();
  CHECK(ref.v_hat_d().isApprox(Eigen::Vector3d(-0.25, 0, -1)));
  ConeDesc t = tangent_cone(model, ref.xd(), ref.pd(), active_set(model, ref.xd(), ref.pd()));
  ConeDesc k = critical_cone(t, ref.v_hat_d());
  REQUIRE(k.eq.rows() == 1);
  CHECK(k.eq.row(0).transpose().isApprox(ref.v_hat_d()));
  // v_hat is interior to the normal cone, so K = {0}.
  CHECK(span_difference(k).dim() == 0);
  Rng rng(3);
  CHECK(lp_span_dim(k, rng) == 0);
  // A non-normal vector is rejected.
  CHECK_THROWS_AS(critical_cone(t, Eigen::Vector3d(0, 0, 1)), Error);
  // v_hat = 0 keeps T.
  CHECK(critical_cone(t, Eigen::Vector3d::Zero()).eq.rows() == 0);
  CHECK(critical_cone(ConeDesc::whole_space(3), Eigen::Vector3d::Zero()).contains(Eigen::Vector3d(1, 2, 3)));
}

TEST_CASE("span of small cones", "[polycone]") {
  ConeDesc half = ConeDesc::whole_space(2);
  half.ineq = rows({{-1, 0}});
  CHECK(span_difference(half).dim() == 2);

  ConeDesc ray = ConeDesc::whole_space(2);
  ray.eq = rows({{1, 0}});
  ray.ineq = rows({{0, -1}});
  auto s = span_difference(ray);
  REQUIRE(s.dim() == 1);
  CHECK(std::abs(s.basis(1, 0)) == Catch::Approx(1.0));

  Rng rng(11);
  for (int trial = 0; trial < 60; ++trial) {
    ConeDesc k = random_cone(rng, 2 + static_cast<Eigen::Index>(rng.below(3)));
    auto basis = span_difference(k);
    CHECK((basis.basis.transpose() * basis.basis - Eigen::MatrixXd::Identity(basis.dim(), basis.dim())).norm() < 1e-10);
    CHECK(basis.dim() == lp_span_dim(k, rng));
  }
}

TEST_CASE("polar cones and the bipolar identity", "[polycone][oracle]") {
  ConeDesc all = ConeDesc::whole_space(3);
  ConeDesc zero = polar_cone(all);
  CHECK(zero.contains(Eigen::Vector3d::Zero()));
  CHECK_FALSE(zero.contains(Eigen::Vector3d(0, 0, 1e-3)));

  ConeDesc half = ConeDesc::whole_space(1);
  half.ineq = rows({{-1}});
  ConeDesc hp = polar_cone(half);
  CHECK(hp.contains(Eigen::VectorXd::Constant(1, -2.0)));
  CHECK_FALSE(hp.contains(Eigen::VectorXd::Constant(1, 2.0)));

  Rng rng(5);
  for (int trial = 0; trial < 30; ++trial) {
    ConeDesc k = random_cone(rng, 3);
    ConeDesc kp = polar_cone(k);
    ConeDesc kpp = polar_cone(kp);
    ConeGenerators pg = generators(kp);
    ConeGenerators kg = generators(k);
    for (int s = 0; s < 1000; ++s) {
      Eigen::VectorXd w;
      if (s % 2 == 0 || kg.rays.cols() + kg.lineality.cols() == 0) {
        w = rng.unit_vector(3);
      } else {
        // Points of K from its generators.
        w = Eigen::VectorXd::Zero(3);
        for (Eigen::Index j = 0; j < kg.rays.cols(); ++j) w += rng.uniform() * kg.rays.col(j);
        for (Eigen::Index j = 0; j < kg.lineality.cols(); ++j) w += rng.normal() * kg.lineality.col(j);
        CHECK(k.contains(w, 1e-8));
      }
      const bool in_k = k.contains(w);
      CHECK(in_k == kpp.contains(w));
      bool by_polar = true;
      for (Eigen::Index j = 0; j < pg.rays.cols(); ++j) by_polar = by_polar && pg.rays.col(j).dot(w) <= kConeTol * std::max(1.0, w.norm());
      for (Eigen::Index j = 0; j < pg.lineality.cols(); ++j)
        by_polar = by_polar && std::abs(pg.lineality.col(j).dot(w)) <= kConeTol * std::max(1.0, w.norm());
      CHECK(in_k == by_polar);
    }
  }
}

TEST_CASE("critical cone sits in T and in the orthogonal complement of v_hat", "[polycone]") {
  Rng rng(8);
  for (int trial = 0; trial < 40; ++trial) {
    ConeDesc t = random_cone(rng, 3);
    t.eq.resize(0, 3);
    // Normal vector: nonnegative combination of a subset of the rows.
    Eigen::VectorXd v_hat = Eigen::VectorXd::Zero(3);
    for (Eigen::Index i = 0; i < t.ineq.rows(); ++i)
      if (rng.uniform() < 0.5) v_hat += rng.uniform() * t.ineq.row(i).transpose();
    ConeDesc k = critical_cone(t, v_hat);
    ConeGenerators g = generators(k);
    for (int s = 0; s < 50; ++s) {
      Eigen::VectorXd w = Eigen::VectorXd::Zero(3);
      for (Eigen::Index j = 0; j < g.rays.cols(); ++j) w += rng.uniform() * g.rays.col(j);
      for (Eigen::Index j = 0; j < g.lineality.cols(); ++j) w += rng.normal() * g.lineality.col(j);
      CHECK(t.contains(w, 1e-8));
      CHECK(std::abs(v_hat.dot(w)) <= 1e-9 * std::max(1.0, w.norm() * v_hat.norm()));
    }
  }
}

TEST_CASE("critical cones at nearby graph points reach K - K", "[polycone][lemma]") {
  // Polyhedral C = { x : A x <= b } with several rows active at 0. Moving to
  // u = t w1 with w1 in the relative interior of K keeps v_hat normal, and the
  // critical cone there is the whole span K - K.
  Rng rng(21);
  int nontrivial = 0;
  for (int trial = 0; trial < 40; ++trial) {
    const Eigen::Index n = 3;
    Eigen::MatrixXd a = rng.normal_matrix(3, n);
    Eigen::VectorXd b = Eigen::VectorXd::Zero(3);
    Eigen::VectorXd lambda(3);
    for (Eigen::Index i = 0; i < 3; ++i) lambda(i) = rng.uniform() < 0.5 ? 0.0 : rng.uniform(0.5, 1.5);
    Eigen::VectorXd v_hat = a.transpose() * lambda;
    ConeDesc t{n, Eigen::MatrixXd(0, n), a, true};
    ConeDesc k = critical_cone(t, v_hat);
    ConeGenerators g = generators(k);
    SubspaceBasis span = span_difference(k);
    if (span.dim() == 0) continue;
    ++nontrivial;
    Eigen::VectorXd w1 = Eigen::VectorXd::Zero(n);
    for (Eigen::Index j = 0; j < g.rays.cols(); ++j) w1 += g.rays.col(j);
    for (double step : {1e-2, 1e-4}) {
      Eigen::VectorXd u = step * w1;
      std::vector<int> active;
      for (Eigen::Index i = 0; i < 3; ++i)
        if (std::abs(a.row(i).dot(u) - b(i)) <= kActiveTol) active.push_back(static_cast<int>(i));
      ConeDesc tu{n, Eigen::MatrixXd(0, n), select_rows(a, active), true};
      ConeDesc ku = critical_cone(tu, v_hat);
      for (int s = 0; s < 100; ++s) {
        Eigen::VectorXd w = span.basis * rng.normal_vector(span.dim());
        CHECK(ku.contains(w, 1e-8));
      }
    }
  }
  CHECK(nontrivial > 10);
}

TEST_CASE("projection onto polyhedra", "[polycone][oracle]") {
  auto box = parse_model("dims n=1\nf = (x1)\nconstraint -x1 <= 0\nconstraint x1 <= 1\n");
  Eigen::VectorXd none(0);
  CHECK(project_polyhedron(box, none, Eigen::VectorXd::Constant(1, 2.0))(0) == Catch::Approx(1.0));
  CHECK(project_polyhedron(box, none, Eigen::VectorXd::Constant(1, 0.3))(0) == 0.3);

  auto empty = parse_model("dims n=1\nf = (x1)\nconstraint x1 + 1 <= 0\nconstraint -x1 <= 0\n");
  CHECK_THROWS_AS(project_polyhedron(empty, none, Eigen::VectorXd::Constant(1, 2.0)), Error);
  auto curved = parse_model("dims n=1\nf = (x1)\nconstraint x1^2 <= 1\n");
  CHECK_THROWS_AS(project_polyhedron(curved, none, Eigen::VectorXd::Constant(1, 2.0)), Error);

  Rng rng(13);
  for (int trial = 0; trial < 40; ++trial) {
    // Random polytope containing a random center.
    const int m = 4 + static_cast<int>(rng.below(5));
    Eigen::MatrixXd a = rng.normal_matrix(m, 3);
    Eigen::VectorXd c0 = rng.normal_vector(3);
    Eigen::VectorXd b = a * c0 + Eigen::VectorXd::Constant(m, 0.5) + 0.5 * rng.normal_vector(m).cwiseAbs();
    PolyhedronProjector proj(a, b);
    Eigen::VectorXd z = c0 + 3.0 * rng.normal_vector(3);
    Eigen::VectorXd x = proj.project(z);
    CHECK(proj.kkt_residual(z, x) < 1e-9);
    CHECK((x - dykstra(a, b, z)).norm() < 1e-6);
    for (int s = 0; s < 100; ++s) {
      Eigen::VectorXd c = c0 + rng.normal_vector(3);
      if (!proj.feasible(c, 0.0)) continue;
      CHECK((z - x).norm() <= (z - c).norm() + 1e-12);
    }
  }
}

TEST_CASE("cone CSV export", "[polycone]") {
  ConeDesc k = ConeDesc::whole_space(2);
  k.eq = rows({{1, 0}});
  k.ineq = rows({{0, -1}});
  CHECK(cone_to_csv(k) == "kind,a1,a2\neq,1,0\nle,0,-1\n");
  std::string g = generators_to_csv(generators(k));
  CHECK(g.rfind("kind,w1,w2\nray,", 0) == 0);
}
