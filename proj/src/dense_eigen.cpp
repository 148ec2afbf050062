#include "msbayes/dense_eigen.hpp"

#include <lapacke.h>

#include <algorithm>
#include <string>
#include <vector>

#include "msbayes/errors.hpp"

namespace msbayes {

EigenPairs smallest_generalized_eigenpairs(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B, int count) {
  const lapack_int n = static_cast<lapack_int>(A.rows());
  if (A.cols() != n || B.rows() != n || B.cols() != n) throw NumericalError("pencil matrices must be square and equal size");
  count = std::clamp(count, 0, static_cast<int>(n));
  EigenPairs out;
  if (count == 0 || n == 0) {
    out.values.resize(0);
    out.vectors.resize(n, 0);
    return out;
  }
  Eigen::MatrixXd a = A;
  Eigen::MatrixXd b = B;
  lapack_int found = 0;
  Eigen::VectorXd w(n);
  Eigen::MatrixXd z(n, count);
  std::vector<lapack_int> ifail(n);
  const lapack_int info = LAPACKE_dsygvx(LAPACK_COL_MAJOR, 1, 'V', 'I', 'U', n, a.data(), n, b.data(), n, 0.0, 0.0, 1,
                                         count, 2.0 * LAPACKE_dlamch('S'), &found, w.data(), z.data(), n, ifail.data());
  if (info > n) throw NumericalError("pencil mass matrix is not positive definite");
  if (info != 0) throw NumericalError("dsygvx failed with info " + std::to_string(info));
  out.values = w.head(found);
  out.vectors = z.leftCols(found);
  normalize_signs(out.vectors);
  return out;
}

void normalize_signs(Eigen::MatrixXd& vectors) {
  for (Eigen::Index j = 0; j < vectors.cols(); ++j) {
    auto col = vectors.col(j);
    const double tol = 1e-12 * col.cwiseAbs().maxCoeff();
    for (Eigen::Index i = 0; i < col.size(); ++i) {
      if (std::abs(col[i]) > tol) {
        if (col[i] < 0) col *= -1.0;
        break;
      }
    }
  }
}

}  // namespace msbayes
