#include "test_support.hpp"

#include "fullstab/linalg.hpp"
#include "fullstab/simplex.hpp"

#include <catch_amalgamated.hpp>

#include <algorithm>
#include <numeric>

using namespace fullstab;

namespace {

// Leibniz expansion: independent of elimination.
Rational leibniz_det(const DenseMatrix<Rational>& a) {
  const int n = a.rows();
  std::vector<int> perm(static_cast<std::size_t>(n));
  std::iota(perm.begin(), perm.end(), 0);
  Rational total(0);
  do {
    int inversions = 0;
    for (int i = 0; i < n; ++i)
      for (int j = i + 1; j < n; ++j)
        if (perm[static_cast<std::size_t>(i)] > perm[static_cast<std::size_t>(j)]) ++inversions;
    Rational term(inversions % 2 ? -1 : 1);
    for (int i = 0; i < n; ++i) term *= a(i, perm[static_cast<std::size_t>(i)]);
    total += term;
  } while (std::next_permutation(perm.begin(), perm.end()));
  return total;
}

}  // namespace

TEST_CASE("exact determinant agrees with Leibniz expansion", "[linalg][oracle]") {
  Rng rng(1);
  for (int trial = 0; trial < 50; ++trial) {
    const int n = 1 + static_cast<int>(rng.below(5));
    DenseMatrix<Rational> a(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) a(i, j) = Rational(static_cast<int>(rng.below(7)) - 3, 1 + static_cast<int>(rng.below(3)));
    CHECK(determinant(a) == leibniz_det(a));
  }
}

TEST_CASE("rank and null space", "[linalg]") {
  DenseMatrix<Rational> g = DenseMatrix<Rational>::from_rows(
      {{1, 0, -1}, {-1, 0, -1}, {0, 1, -1}, {0, -1, -1}}, 3);
  CHECK(rank(g, Rational(0)) == 3);
  Eigen::MatrixXd a(2, 3);
  a << 1, 0, -1, -1, 0, -1;
  Eigen::MatrixXd ns = null_space(a, 3);
  REQUIRE(ns.cols() == 1);
  CHECK(std::abs(std::abs(ns(1, 0)) - 1.0) < 1e-12);
  CHECK(null_space(Eigen::MatrixXd(0, 3), 3).cols() == 3);
  CHECK(column_span(Eigen::MatrixXd(3, 0)).cols() == 0);
}

TEST_CASE("full column rank solve detects inconsistency", "[linalg]") {
  auto a = DenseMatrix<Rational>::from_rows({{1, 0}, {0, 1}, {1, 1}}, 2);
  auto ok = solve_full_column_rank(a, std::vector<Rational>{1, 2, 3}, Rational(0));
  REQUIRE(ok);
  CHECK((*ok)[1] == 2);
  CHECK_FALSE(solve_full_column_rank(a, std::vector<Rational>{1, 2, 4}, Rational(0)));
}

TEST_CASE("simplex on small programs", "[simplex]") {
  // max x + y  s.t. x + 2y <= 4, 3x + y <= 6
  LinearProgram<Rational> lp;
  lp.num_vars = 2;
  lp.objective = {1, 1};
  lp.add_le({1, 2}, 4);
  lp.add_le({3, 1}, 6);
  auto r = solve_lp(lp, Rational(0));
  REQUIRE(r.status == LpStatus::optimal);
  CHECK(r.value == Rational(14, 5));

  // Needs phase one: x + y >= 2 written as -x - y <= -2, minimize x.
  LinearProgram<double> lp2;
  lp2.num_vars = 2;
  lp2.objective = {-1, 0};
  lp2.add_le({-1, -1}, -2);
  lp2.add_le({0, 1}, 1.5);
  auto r2 = solve_lp(lp2, 1e-12);
  REQUIRE(r2.status == LpStatus::optimal);
  CHECK(r2.x[0] == Catch::Approx(0.5));

  LinearProgram<Rational> infeasible;
  infeasible.num_vars = 1;
  infeasible.objective = {1};
  infeasible.add_le({1}, -1);
  CHECK(solve_lp(infeasible, Rational(0)).status == LpStatus::infeasible);

  LinearProgram<Rational> unbounded;
  unbounded.num_vars = 2;
  unbounded.objective = {1, 0};
  unbounded.add_eq({0, 1}, 1);
  CHECK(solve_lp(unbounded, Rational(0)).status == LpStatus::unbounded);
}

TEST_CASE("simplex handles redundant equalities and degeneracy", "[simplex]") {
  LinearProgram<Rational> lp;
  lp.num_vars = 3;
  lp.objective = {1, 2, 3};
  lp.add_eq({1, 1, 1}, 1);
  lp.add_eq({2, 2, 2}, 2);
  lp.add_le({0, 0, 1}, 0);
  auto r = solve_lp(lp, Rational(0));
  REQUIRE(r.status == LpStatus::optimal);
  CHECK(r.value == 2);
}

TEST_CASE("simplex matches brute-force vertex enumeration", "[simplex][oracle]") {
  Rng rng(3);
  for (int trial = 0; trial < 40; ++trial) {
    // max c'x over a random bounded polytope {A x <= b, 0 <= x <= 1} in R^2.
    LinearProgram<double> lp;
    lp.num_vars = 2;
    lp.objective = {rng.normal(), rng.normal()};
    std::vector<std::array<double, 3>> rows = {{1, 0, 1}, {0, 1, 1}, {-1, 0, 0}, {0, -1, 0}};
    for (int k = 0; k < 3; ++k) rows.push_back({rng.normal(), rng.normal(), rng.uniform(0.2, 1.0)});
    for (auto& r : rows) lp.add_le({r[0], r[1]}, r[2]);
    auto res = solve_lp(lp, 1e-12);
    REQUIRE(res.status == LpStatus::optimal);
    double best = -kInfinity;
    for (std::size_t i = 0; i < rows.size(); ++i) {
      for (std::size_t j = i + 1; j < rows.size(); ++j) {
        double det = rows[i][0] * rows[j][1] - rows[i][1] * rows[j][0];
        if (std::abs(det) < 1e-12) continue;
        double x = (rows[i][2] * rows[j][1] - rows[i][1] * rows[j][2]) / det;
        double y = (rows[i][0] * rows[j][2] - rows[i][2] * rows[j][0]) / det;
        bool feasible = true;
        for (auto& r : rows) feasible = feasible && r[0] * x + r[1] * y <= r[2] + 1e-9;
        if (feasible) best = std::max(best, lp.objective[0] * x + lp.objective[1] * y);
      }
    }
    CHECK(res.value == Catch::Approx(best).margin(1e-9));
  }
}
