#pragma once

// Small dense linear algebra. Floating-point work goes through Eigen; the
// exact paths (multiplier vertices, bordered determinants) use a row-major
// matrix templated on the scalar so the same elimination code runs on
// Rational and double.

#include "fullstab/scalar.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <vector>

namespace fullstab {

inline constexpr double kInfinity = std::numeric_limits<double>::infinity();

template <class T>
class DenseMatrix {
 public:
  DenseMatrix() = default;
  DenseMatrix(int rows, int cols) : rows_(rows), cols_(cols), data_(static_cast<std::size_t>(rows * cols), T(0)) {}

  static DenseMatrix from_rows(const std::vector<std::vector<T>>& rows, int cols) {
    DenseMatrix m(static_cast<int>(rows.size()), cols);
    for (int i = 0; i < m.rows_; ++i)
      for (int j = 0; j < cols; ++j) m(i, j) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
    return m;
  }

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  T& operator()(int i, int j) { return data_[static_cast<std::size_t>(i * cols_ + j)]; }
  const T& operator()(int i, int j) const { return data_[static_cast<std::size_t>(i * cols_ + j)]; }

  void swap_rows(int a, int b) {
    if (a == b) return;
    for (int j = 0; j < cols_; ++j) std::swap((*this)(a, j), (*this)(b, j));
  }

  Eigen::MatrixXd to_eigen() const {
    Eigen::MatrixXd m(rows_, cols_);
    for (int i = 0; i < rows_; ++i)
      for (int j = 0; j < cols_; ++j) m(i, j) = to_double((*this)(i, j));
    return m;
  }

 private:
  int rows_ = 0;
  int cols_ = 0;
  std::vector<T> data_;
};

/// Reduces `m` in place to row echelon form; returns the pivot columns.
/// Entries with magnitude <= tol count as zero (tol = 0 for exact types).
template <class T>
std::vector<int> row_echelon(DenseMatrix<T>& m, const T& tol, int pivot_cols = -1) {
  if (pivot_cols < 0) pivot_cols = m.cols();
  std::vector<int> pivots;
  int row = 0;
  for (int col = 0; col < pivot_cols && row < m.rows(); ++col) {
    int best = -1;
    T best_abs = tol;
    for (int i = row; i < m.rows(); ++i) {
      T a = abs_value(m(i, col));
      if (a > best_abs) {
        best_abs = a;
        best = i;
        if constexpr (std::is_same_v<T, Rational>) break;  // any nonzero pivot is exact
      }
    }
    if (best < 0) continue;
    m.swap_rows(row, best);
    for (int i = row + 1; i < m.rows(); ++i) {
      if (m(i, col) == T(0)) continue;
      T factor = m(i, col) / m(row, col);
      for (int j = col; j < m.cols(); ++j) m(i, j) -= factor * m(row, j);
    }
    pivots.push_back(col);
    ++row;
  }
  return pivots;
}

template <class T>
int rank(DenseMatrix<T> m, const T& tol) {
  return static_cast<int>(row_echelon(m, tol).size());
}

template <class T>
T determinant(DenseMatrix<T> m) {
  const int n = m.rows();
  T det(1);
  for (int col = 0; col < n; ++col) {
    int best = -1;
    T best_abs(0);
    for (int i = col; i < n; ++i) {
      T a = abs_value(m(i, col));
      if (a > best_abs) {
        best_abs = a;
        best = i;
      }
    }
    if (best < 0) return T(0);
    if (best != col) {
      m.swap_rows(col, best);
      det = -det;
    }
    det *= m(col, col);
    for (int i = col + 1; i < n; ++i) {
      T factor = m(i, col) / m(col, col);
      for (int j = col; j < n; ++j) m(i, j) -= factor * m(col, j);
    }
  }
  return det;
}

/// Solves A x = b when A has full column rank; nullopt if A is rank deficient
/// or the system is inconsistent.
template <class T>
std::optional<std::vector<T>> solve_full_column_rank(const DenseMatrix<T>& a, const std::vector<T>& b, const T& tol) {
  const int rows = a.rows(), cols = a.cols();
  DenseMatrix<T> aug(rows, cols + 1);
  for (int i = 0; i < rows; ++i) {
    for (int j = 0; j < cols; ++j) aug(i, j) = a(i, j);
    aug(i, cols) = b[static_cast<std::size_t>(i)];
  }
  auto pivots = row_echelon(aug, tol, cols);
  if (static_cast<int>(pivots.size()) < cols) return std::nullopt;
  for (int i = cols; i < rows; ++i) {
    if (abs_value(aug(i, cols)) > tol) return std::nullopt;
  }
  std::vector<T> x(static_cast<std::size_t>(cols), T(0));
  for (int i = cols - 1; i >= 0; --i) {
    T s = aug(i, cols);
    for (int j = i + 1; j < cols; ++j) s -= aug(i, j) * x[static_cast<std::size_t>(j)];
    x[static_cast<std::size_t>(i)] = s / aug(i, i);
  }
  return x;
}

// ---------------------------------------------------------------------------
// Floating-point helpers

/// Relative singular-value threshold used for every numerical rank decision.
inline constexpr double kRankRelTol = 1e-8;

inline int numerical_rank(const Eigen::MatrixXd& a, double rel_tol = kRankRelTol) {
  if (a.rows() == 0 || a.cols() == 0) return 0;
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(a);
  const auto& s = svd.singularValues();
  if (s.size() == 0 || s(0) == 0.0) return 0;
  int r = 0;
  for (Eigen::Index i = 0; i < s.size(); ++i)
    if (s(i) > rel_tol * s(0)) ++r;
  return r;
}

/// Orthonormal basis of { w : A w = 0 } as columns (n x k).
inline Eigen::MatrixXd null_space(const Eigen::MatrixXd& a, Eigen::Index n, double rel_tol = kRankRelTol) {
  if (a.rows() == 0) return Eigen::MatrixXd::Identity(n, n);
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeFullV);
  const auto& s = svd.singularValues();
  double top = s.size() ? s(0) : 0.0;
  Eigen::Index r = 0;
  for (Eigen::Index i = 0; i < s.size(); ++i)
    if (top > 0.0 && s(i) > rel_tol * top) ++r;
  return svd.matrixV().rightCols(n - r);
}

/// Orthonormal basis of the column span of `cols` (n x k).
inline Eigen::MatrixXd column_span(const Eigen::MatrixXd& cols, double rel_tol = kRankRelTol) {
  const Eigen::Index n = cols.rows();
  if (cols.cols() == 0) return Eigen::MatrixXd(n, 0);
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(cols, Eigen::ComputeFullU);
  const auto& s = svd.singularValues();
  double top = s.size() ? s(0) : 0.0;
  Eigen::Index r = 0;
  for (Eigen::Index i = 0; i < s.size(); ++i)
    if (top > 0.0 && s(i) > rel_tol * top) ++r;
  return svd.matrixU().leftCols(r);
}

inline Eigen::MatrixXd symmetric_part(const Eigen::MatrixXd& h) { return 0.5 * (h + h.transpose()); }

inline Eigen::MatrixXd select_rows(const Eigen::MatrixXd& a, const std::vector<int>& rows) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(rows.size()), a.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = a.row(rows[i]);
  return out;
}

inline Eigen::MatrixXd vstack(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  const Eigen::Index cols = a.rows() ? a.cols() : b.cols();
  Eigen::MatrixXd out(a.rows() + b.rows(), cols);
  if (a.rows()) out.topRows(a.rows()) = a;
  if (b.rows()) out.bottomRows(b.rows()) = b;
  return out;
}

/// Subsets of {0..n-1} encoded as bitmasks, as index lists.
inline std::vector<int> mask_to_indices(unsigned mask, const std::vector<int>& universe) {
  std::vector<int> out;
  for (std::size_t i = 0; i < universe.size(); ++i)
    if (mask & (1u << i)) out.push_back(universe[i]);
  return out;
}

}  // namespace fullstab
