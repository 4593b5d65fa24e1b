#include "test_support.hpp"

#include "fullstab/kkt.hpp"

#include <catch_amalgamated.hpp>

using namespace fullstab;
using fullstab::testing::kEx64;

namespace {

bool in_hull(const std::vector<Eigen::VectorXd>& vertices, const Eigen::VectorXd& point) {
  // Feasibility of sum_k c_k v_k = point, sum c_k = 1, c >= 0.
  const int k = static_cast<int>(vertices.size());
  LinearProgram<double> lp;
  lp.num_vars = k;
  lp.objective.assign(static_cast<std::size_t>(k), 0.0);
  for (Eigen::Index j = 0; j < point.size(); ++j) {
    std::vector<double> row;
    for (const auto& v : vertices) row.push_back(v(j));
    lp.add_eq(row, point(j));
  }
  lp.add_eq(std::vector<double>(static_cast<std::size_t>(k), 1.0), 1.0);
  return solve_lp(lp, 1e-10).status == LpStatus::optimal;
}

}  // namespace

TEST_CASE("MFCQ on the pyramid example", "[kkt]") {
  auto model = parse_model(kEx64);
  const auto& ref = *model.reference();
  CQReport exact = check_mfcq_exact(model, ref);
  CHECK(exact.verdict == CQVerdict::holds);
  CHECK(exact.margin == 1.0);
  CHECK(exact.direction.isApprox(Eigen::Vector3d(0, 0, 1)));
  CQReport fp = check_mfcq(model, ref.xd(), ref.pd());
  CHECK(fp.verdict == CQVerdict::holds);
  CHECK(fp.margin == Catch::Approx(1.0));
  // Witness re-verification.
  EvalBundle b = eval_bundle(model, ref.xd(), ref.pd());
  for (int i : exact.active) CHECK(b.grad_phi.row(i).dot(exact.direction) <= -exact.margin + 1e-10);
}

TEST_CASE("MFCQ trivial and failing cases", "[kkt]") {
  auto interior = parse_model("dims n=1\nf = (x1)\nconstraint x1 - 1 <= 0\nreference x=(0) v=(0)\n");
  CQReport r = check_mfcq_exact(interior, *interior.reference());
  CHECK(r.verdict == CQVerdict::holds);
  CHECK(r.margin == kInfinity);

  auto pinned = parse_model("dims n=1\nf = (x1)\nconstraint x1 <= 0\nconstraint -x1 <= 0\nreference x=(0) v=(0)\n");
  CQReport f = check_mfcq_exact(pinned, *pinned.reference());
  CHECK(f.verdict == CQVerdict::fails);
  CHECK(f.margin == 0.0);
}

TEST_CASE("LICQ", "[kkt]") {
  auto model = parse_model(kEx64);
  const auto& ref = *model.reference();
  CQReport r = check_licq(model, ref.xd(), ref.pd());
  CHECK(r.verdict == CQVerdict::fails);
  CHECK(r.rank == 3);
  auto single = parse_model("dims n=2\nf = (x1, x2)\nconstraint x1 <= 0\n");
  CHECK(check_licq(single, Eigen::Vector2d::Zero(), Eigen::VectorXd(0)).verdict == CQVerdict::holds);
  CHECK(check_licq(single, Eigen::Vector2d(-1, 0), Eigen::VectorXd(0)).verdict == CQVerdict::holds);
}

TEST_CASE("CRCQ probe", "[kkt]") {
  auto model = parse_model(kEx64);
  const auto& ref = *model.reference();
  CHECK(probe_crcq(model, ref.xd(), ref.pd(), 1e-2, 50, 1).verdict == CQVerdict::holds);

  auto bad = parse_model("dims n=1\nf = (x1)\nconstraint x1^2 <= 0\nconstraint x1 <= 0\n");
  CQReport r = probe_crcq(bad, Eigen::VectorXd::Zero(1), Eigen::VectorXd(0), 1e-2, 50, 1);
  CHECK(r.verdict == CQVerdict::fails);
  CHECK(r.witness_subset == std::vector<int>{0});
  CHECK(r.rank_at_reference == 0);
  CHECK(r.rank_at_witness == 1);

  auto ball = parse_model("dims n=2\nf = (x1, x2)\nconstraint x1^2 + x2^2 - 1 <= 0\n");
  CHECK(probe_crcq(ball, Eigen::Vector2d(1, 0), Eigen::VectorXd(0), 1e-2, 50, 1).verdict == CQVerdict::corroborated);
  CHECK_THROWS_AS(probe_crcq(ball, Eigen::Vector2d(1, 0), Eigen::VectorXd(0), 0.0, 50, 1), Error);
}

TEST_CASE("multiplier polytope of the pyramid example", "[kkt]") {
  auto model = parse_model(kEx64);
  const auto& ref = *model.reference();
  MultiplierSet set = multiplier_polytope_exact(model, ref);
  REQUIRE(set.exact_vertices.size() == 2);
  std::vector<std::vector<Rational>> expected{
      {Rational(3, 8), Rational(5, 8), Rational(0), Rational(0)},
      {Rational(0), Rational(1, 4), Rational(3, 8), Rational(3, 8)}};
  for (const auto& e : expected)
    CHECK(std::find(set.exact_vertices.begin(), set.exact_vertices.end(), e) != set.exact_vertices.end());
  CHECK(set.bounded);
  CHECK(set.dimension == 1);
  // The segment formula (3/8 - a, 5/8 - a, a, a).
  for (double a : {0.0, 0.1, 0.2, 0.375}) {
    Eigen::Vector4d lam(0.375 - a, 0.625 - a, a, a);
    CHECK(set.contains(lam));
  }
  CHECK_FALSE(set.contains(Eigen::Vector4d(0.5, 0.5, 0, 0)));

  MultiplierSet fp = multiplier_polytope(model, ref.xd(), ref.pd(), ref.vd());
  CHECK(fp.vertices.size() == 2);
  CHECK(fp.bounded);

  CHECK(strict_complement(Eigen::Vector4d(0.375, 0.625, 0, 0), {0, 1, 2, 3}) == std::vector<int>{0, 1});
  CHECK(strict_complement(Eigen::Vector4d::Zero(), {0, 1, 2, 3}).empty());
  CHECK(strict_complement(Eigen::Vector4d(0, 0.25, 0.375, 0.375), {0, 1, 2, 3}) == std::vector<int>{1, 2, 3});
}

TEST_CASE("multiplier polytope edge cases", "[kkt]") {
  auto interior = parse_model("dims n=1\nf = (x1)\nconstraint x1 - 1 <= 0\nreference x=(0) v=(0)\n");
  MultiplierSet set = multiplier_polytope_exact(interior, *interior.reference());
  REQUIRE(set.vertices.size() == 1);
  CHECK(set.vertices[0].isZero());

  auto model = parse_model(kEx64);
  // v - f not in the normal cone.
  CHECK_THROWS_AS(multiplier_polytope(model, Eigen::Vector3d::Zero(), Eigen::Vector2d::Zero(), Eigen::Vector3d(1, 0, 5)),
                  Error);

  auto pinned = parse_model("dims n=1\nf = (x1)\nconstraint x1 <= 0\nconstraint -x1 <= 0\nreference x=(0) v=(1)\n");
  MultiplierSet unb = multiplier_polytope_exact(pinned, *pinned.reference());
  CHECK_FALSE(unb.bounded);
  CHECK(unb.recession.minCoeff() >= 0.0);
  CHECK(unb.recession.norm() > 0.0);
}

TEST_CASE("multiplier vertices reproduce the description", "[kkt][oracle]") {
  Rng rng(17);
  int checked = 0;
  for (int trial = 0; trial < 30; ++trial) {
    // Random affine constraints active at 0 with a common MFCQ direction.
    const int n = 3, m = 3 + static_cast<int>(rng.below(3));
    Eigen::VectorXd dir = rng.unit_vector(n);
    std::string text = "dims n=3\nf = (x1, x2, x3)\n";
    Eigen::MatrixXd g(m, n);
    for (int i = 0; i < m; ++i) {
      Eigen::VectorXd row = rng.normal_vector(n);
      row -= (row.dot(dir) + 1.0) * dir;  // row . dir = -1
      g.row(i) = row.transpose();
      std::ostringstream c;
      c.precision(17);
      c << "constraint " << row(0) << "*x1 + " << row(1) << "*x2 + " << row(2) << "*x3 <= 0\n";
      text += c.str();
    }
    auto model = parse_model(text);
    Eigen::VectorXd weights = rng.normal_vector(m).cwiseAbs();
    Eigen::VectorXd v = g.transpose() * weights;  // f(0) = 0
    std::vector<int> active(static_cast<std::size_t>(m));
    std::iota(active.begin(), active.end(), 0);
    MultiplierSet set = multiplier_polytope(model, Eigen::VectorXd::Zero(n), Eigen::VectorXd(0), v, active);
    REQUIRE(set.bounded);
    for (const auto& vert : set.vertices) {
      CHECK(set.residual(vert) < 1e-9);
      CHECK(vert.minCoeff() >= -1e-12);
    }
    for (std::size_t i = 0; i < set.vertices.size(); ++i)
      for (std::size_t j = i + 1; j < set.vertices.size(); ++j) CHECK((set.vertices[i] - set.vertices[j]).norm() > 1e-8);
    // Random members of the description: weights plus null-space moves.
    Eigen::MatrixXd ns = null_space(g.transpose(), m);
    int members = 0;
    for (int s = 0; s < 1000 && ns.cols() > 0; ++s) {
      Eigen::VectorXd lam = weights + ns * rng.normal_vector(ns.cols()) * rng.uniform();
      if (lam.minCoeff() < 0) continue;
      ++members;
      CHECK(in_hull(set.vertices, lam));
    }
    checked += members;
  }
  CHECK(checked > 1000);
}
