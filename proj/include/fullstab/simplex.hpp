#pragma once

// Dense two-phase tableau simplex with Bland's anticycling rule.
//
//   maximize  c'x   subject to  A_le x <= b_le,  A_eq x = b_eq,  x >= 0.
//
// Templated on the scalar: instantiated with Rational it pivots exactly, which
// is what the certification paths use when a verdict hinges on the sign of an
// optimal value.

#include "fullstab/errors.hpp"
#include "fullstab/linalg.hpp"
#include "fullstab/scalar.hpp"

#include <vector>

namespace fullstab {

enum class LpStatus { optimal, infeasible, unbounded };

template <class T>
struct LinearProgram {
  int num_vars = 0;
  std::vector<T> objective;
  std::vector<std::vector<T>> le_rows;
  std::vector<T> le_rhs;
  std::vector<std::vector<T>> eq_rows;
  std::vector<T> eq_rhs;

  void add_le(std::vector<T> row, T rhs) {
    le_rows.push_back(std::move(row));
    le_rhs.push_back(std::move(rhs));
  }
  void add_eq(std::vector<T> row, T rhs) {
    eq_rows.push_back(std::move(row));
    eq_rhs.push_back(std::move(rhs));
  }
};

template <class T>
struct LpResult {
  LpStatus status = LpStatus::infeasible;
  std::vector<T> x;
  T value{};
};

namespace detail {

template <class T>
class Tableau {
 public:
  // Rows 0..m-1 are constraints, the last column is the right-hand side.
  Tableau(int m, int cols) : m_(m), cols_(cols), t_(m + 1, cols + 1), basis_(static_cast<std::size_t>(m), -1) {}

  T& at(int i, int j) { return t_(i, j); }
  T& rhs(int i) { return t_(i, cols_); }
  T& cost(int j) { return t_(m_, j); }
  T& objective_value() { return t_(m_, cols_); }
  std::vector<int>& basis() { return basis_; }
  int rows() const { return m_; }

  void pivot(int r, int c) {
    T piv = t_(r, c);
    for (int j = 0; j <= cols_; ++j) t_(r, j) /= piv;
    for (int i = 0; i <= m_; ++i) {
      if (i == r || t_(i, c) == T(0)) continue;
      T factor = t_(i, c);
      for (int j = 0; j <= cols_; ++j) t_(i, j) -= factor * t_(r, j);
    }
    basis_[static_cast<std::size_t>(r)] = c;
  }

  /// Sets the cost row to reduced costs of "maximize obj'x" for the basis.
  void price(const std::vector<T>& obj) {
    for (int j = 0; j <= cols_; ++j) t_(m_, j) = T(0);
    for (int j = 0; j < cols_; ++j) t_(m_, j) = -obj[static_cast<std::size_t>(j)];
    for (int i = 0; i < m_; ++i) {
      int b = basis_[static_cast<std::size_t>(i)];
      T cb = obj[static_cast<std::size_t>(b)];
      if (cb == T(0)) continue;
      for (int j = 0; j <= cols_; ++j) t_(m_, j) += cb * t_(i, j);
    }
  }

  /// Bland's rule iterations. `allowed[j]` masks columns that may enter.
  LpStatus iterate(const std::vector<bool>& allowed, const T& tol) {
    for (;;) {
      int enter = -1;
      for (int j = 0; j < cols_; ++j) {
        if (allowed[static_cast<std::size_t>(j)] && t_(m_, j) < -tol) {
          enter = j;
          break;
        }
      }
      if (enter < 0) return LpStatus::optimal;
      int leave = -1;
      T best{};
      for (int i = 0; i < m_; ++i) {
        if (t_(i, enter) > tol) {
          T ratio = t_(i, cols_) / t_(i, enter);
          if (leave < 0 || ratio < best ||
              (ratio == best && basis_[static_cast<std::size_t>(i)] < basis_[static_cast<std::size_t>(leave)])) {
            leave = i;
            best = ratio;
          }
        }
      }
      if (leave < 0) return LpStatus::unbounded;
      pivot(leave, enter);
    }
  }

  void drop_row(int r) {
    DenseMatrix<T> next(m_, cols_ + 1);
    for (int i = 0, k = 0; i <= m_; ++i) {
      if (i == r) continue;
      for (int j = 0; j <= cols_; ++j) next(k, j) = t_(i, j);
      ++k;
    }
    t_ = std::move(next);
    basis_.erase(basis_.begin() + r);
    --m_;
  }

 private:
  int m_;
  int cols_;
  DenseMatrix<T> t_;
  std::vector<int> basis_;
};

}  // namespace detail

template <class T>
LpResult<T> solve_lp(const LinearProgram<T>& lp, const T& tol) {
  const int nv = lp.num_vars;
  const int n_le = static_cast<int>(lp.le_rows.size());
  const int n_eq = static_cast<int>(lp.eq_rows.size());
  const int m = n_le + n_eq;

  // Columns: structural | slacks (one per <= row) | artificials (one per row
  // that needs one: flipped <= rows and every equality row).
  std::vector<int> artificial_row;
  for (int i = 0; i < n_le; ++i)
    if (lp.le_rhs[static_cast<std::size_t>(i)] < T(0)) artificial_row.push_back(i);
  for (int i = 0; i < n_eq; ++i) artificial_row.push_back(n_le + i);
  const int n_art = static_cast<int>(artificial_row.size());
  const int cols = nv + n_le + n_art;

  detail::Tableau<T> tab(m, cols);
  for (int i = 0; i < m; ++i) {
    const bool is_le = i < n_le;
    const auto& row = is_le ? lp.le_rows[static_cast<std::size_t>(i)] : lp.eq_rows[static_cast<std::size_t>(i - n_le)];
    T b = is_le ? lp.le_rhs[static_cast<std::size_t>(i)] : lp.eq_rhs[static_cast<std::size_t>(i - n_le)];
    const T sign = b < T(0) ? T(-1) : T(1);
    for (int j = 0; j < nv; ++j) tab.at(i, j) = sign * row[static_cast<std::size_t>(j)];
    if (is_le) tab.at(i, nv + i) = sign;
    tab.rhs(i) = sign * b;
    tab.basis()[static_cast<std::size_t>(i)] = is_le && sign > T(0) ? nv + i : -1;
  }
  for (int k = 0; k < n_art; ++k) {
    int r = artificial_row[static_cast<std::size_t>(k)];
    tab.at(r, nv + n_le + k) = T(1);
    tab.basis()[static_cast<std::size_t>(r)] = nv + n_le + k;
  }

  std::vector<bool> allowed(static_cast<std::size_t>(cols), true);
  if (n_art > 0) {
    std::vector<T> phase1(static_cast<std::size_t>(cols), T(0));
    for (int k = 0; k < n_art; ++k) phase1[static_cast<std::size_t>(nv + n_le + k)] = T(-1);
    tab.price(phase1);
    tab.iterate(allowed, tol);
    if (tab.objective_value() < -tol) return {LpStatus::infeasible, {}, T(0)};
    // Drive zero-level artificials out of the basis, dropping redundant rows.
    for (int i = tab.rows() - 1; i >= 0; --i) {
      if (tab.basis()[static_cast<std::size_t>(i)] < nv + n_le) continue;
      int enter = -1;
      for (int j = 0; j < nv + n_le; ++j) {
        if (abs_value(tab.at(i, j)) > tol) {
          enter = j;
          break;
        }
      }
      if (enter >= 0) {
        tab.pivot(i, enter);
      } else {
        tab.drop_row(i);
      }
    }
    for (int k = 0; k < n_art; ++k) allowed[static_cast<std::size_t>(nv + n_le + k)] = false;
  }

  std::vector<T> obj(static_cast<std::size_t>(cols), T(0));
  for (int j = 0; j < nv; ++j) obj[static_cast<std::size_t>(j)] = lp.objective[static_cast<std::size_t>(j)];
  tab.price(obj);
  LpStatus status = tab.iterate(allowed, tol);
  LpResult<T> result;
  result.status = status;
  result.x.assign(static_cast<std::size_t>(nv), T(0));
  for (int i = 0; i < tab.rows(); ++i) {
    int b = tab.basis()[static_cast<std::size_t>(i)];
    if (b >= 0 && b < nv) result.x[static_cast<std::size_t>(b)] = tab.rhs(i);
  }
  result.value = tab.objective_value();
  return result;
}

}  // namespace fullstab
