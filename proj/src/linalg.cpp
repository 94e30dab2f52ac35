#include "lmdp/linalg.hpp"

#include <cmath>
#include <string>

#include "lmdp/errors.hpp"

namespace lmdp::linalg {

double min_eigenvalue(const Mat& m) {
  if (m.rows() == 0) return 0.0;
  Eigen::SelfAdjointEigenSolver<Mat> es(m, Eigen::EigenvaluesOnly);
  return es.eigenvalues()(0);
}

double max_eigenvalue(const Mat& m) {
  if (m.rows() == 0) return 0.0;
  Eigen::SelfAdjointEigenSolver<Mat> es(m, Eigen::EigenvaluesOnly);
  return es.eigenvalues()(m.rows() - 1);
}

Vec min_eigenvector(const Mat& m) {
  Eigen::SelfAdjointEigenSolver<Mat> es(m);
  Vec u = es.eigenvectors().col(0);
  // Sign convention: first nonzero entry positive.
  for (Eigen::Index i = 0; i < u.size(); ++i) {
    if (std::abs(u(i)) > 1e-12) {
      if (u(i) < 0) u = -u;
      break;
    }
  }
  return u;
}

double min_eigenvalue_on(const Mat& m, const Mat& basis) {
  if (basis.cols() == 0) return 0.0;
  const Mat restricted = basis.transpose() * m * basis;
  return min_eigenvalue(0.5 * (restricted + restricted.transpose()));
}

Mat spd_inverse(const Mat& m, const char* what) {
  Eigen::LDLT<Mat> ldlt(m);
  const auto d = ldlt.vectorD();
  const double scale = std::max(1.0, d.cwiseAbs().maxCoeff());
  if (ldlt.info() != Eigen::Success || d.minCoeff() <= 1e-14 * scale)
    throw Unsatisfiable(std::string(what) +
                        " is singular; add ridge regularization (lambda_reg > 0) or more data");
  return ldlt.solve(Mat::Identity(m.rows(), m.cols()));
}

bool is_symmetric(const Mat& m, double tol) {
  if (m.rows() != m.cols()) return false;
  return (m - m.transpose()).cwiseAbs().maxCoeff() <= tol * std::max(1.0, m.cwiseAbs().maxCoeff());
}

Mat column_span(const Mat& columns, double rel_tol) {
  if (columns.cols() == 0) return Mat(columns.rows(), 0);
  Eigen::JacobiSVD<Mat> svd(columns, Eigen::ComputeThinU);
  const auto& sv = svd.singularValues();
  const double top = sv.size() ? sv(0) : 0.0;
  Eigen::Index rank = 0;
  for (Eigen::Index i = 0; i < sv.size(); ++i)
    if (sv(i) > rel_tol * std::max(top, 1e-300)) ++rank;
  if (top == 0.0) rank = 0;
  return svd.matrixU().leftCols(rank);
}

}  // namespace lmdp::linalg
