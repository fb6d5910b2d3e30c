#pragma once

#include <Eigen/Dense>

#include <algorithm>

#include "subcart/expr.hpp"

namespace subcart {

/// Number of singular values strictly above `tol`.
inline int numerical_rank(const Matrix& a, double tol) {
  if (a.size() == 0) return 0;
  Eigen::JacobiSVD<Matrix> svd(a);
  const auto& s = svd.singularValues();
  int r = 0;
  for (int i = 0; i < s.size(); ++i) {
    if (s[i] > tol) ++r;
  }
  return r;
}

/// Smallest of the min(rows, cols) singular values; 0 for empty input.
inline double min_singular_value(const Matrix& a) {
  if (a.size() == 0) return 0.0;
  Eigen::JacobiSVD<Matrix> svd(a);
  return svd.singularValues().minCoeff();
}

/// Orthonormal basis (as columns) of the kernel of `a`, which has `cols`
/// columns. Singular values at or below `tol` count as zero.
inline Matrix null_space(const Matrix& a, int cols, double tol) {
  if (a.rows() == 0) return Matrix::Identity(cols, cols);
  Eigen::JacobiSVD<Matrix> svd(a, Eigen::ComputeFullV);
  const auto& s = svd.singularValues();
  int r = 0;
  for (int i = 0; i < s.size(); ++i) {
    if (s[i] > tol) ++r;
  }
  return svd.matrixV().rightCols(cols - r);
}

/// Orthonormal basis of the column span of `a`, at rank tolerance `tol`.
inline Matrix column_span(const Matrix& a, double tol) {
  if (a.cols() == 0) return Matrix(a.rows(), 0);
  Eigen::JacobiSVD<Matrix> svd(a, Eigen::ComputeThinU);
  const auto& s = svd.singularValues();
  int r = 0;
  for (int i = 0; i < s.size(); ++i) {
    if (s[i] > tol) ++r;
  }
  return svd.matrixU().leftCols(r);
}

/// Norm of the component of `v` orthogonal to the orthonormal columns of `basis`.
inline double projection_residual(const Matrix& basis, const Eigen::VectorXd& v) {
  if (basis.cols() == 0) return v.norm();
  return (v - basis * (basis.transpose() * v)).norm();
}

}  // namespace subcart
