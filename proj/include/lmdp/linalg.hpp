#pragma once

#include <Eigen/Dense>

namespace lmdp {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

namespace linalg {

/// Smallest eigenvalue of a symmetric matrix.
double min_eigenvalue(const Mat& m);
double max_eigenvalue(const Mat& m);

/// Unit eigenvector for the smallest eigenvalue (ascending order, first returned).
Vec min_eigenvector(const Mat& m);

/// Smallest eigenvalue of basisᵀ·m·basis; basis has orthonormal columns.
double min_eigenvalue_on(const Mat& m, const Mat& basis);

/// Symmetric inverse via LDLT; throws Unsatisfiable when m is numerically singular.
Mat spd_inverse(const Mat& m, const char* what = "matrix");

bool is_symmetric(const Mat& m, double tol = 1e-10);

/// Orthonormal basis for the column span of `columns` (rank tolerance relative to
/// the largest singular value).
Mat column_span(const Mat& columns, double rel_tol = 1e-10);

/// xᵀ·m⁻¹·x given a factorization of m.
inline double inverse_quadratic(const Eigen::LDLT<Mat>& factor, const Vec& x) {
  return x.dot(factor.solve(x));
}

}  // namespace linalg
}  // namespace lmdp
