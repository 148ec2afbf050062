#pragma once

#include <Eigen/Core>

namespace msbayes {

struct EigenPairs {
  Eigen::VectorXd values;   // ascending
  Eigen::MatrixXd vectors;  // columns, B-orthonormal
};

/// Smallest `count` eigenpairs of the symmetric-definite pencil A v = lambda B v
/// (LAPACK dsygvx). Throws NumericalError when B is not positive definite or
/// the solver does not converge.
EigenPairs smallest_generalized_eigenpairs(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B, int count);

/// Flips each column so that its first entry exceeding 1e-12 * max|column| is positive.
void normalize_signs(Eigen::MatrixXd& vectors);

}  // namespace msbayes
