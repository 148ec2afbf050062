#pragma once

#include <Eigen/Cholesky>
#include <span>
#include <vector>

#include "msbayes/fem.hpp"
#include "msbayes/msbasis.hpp"

namespace msbayes {

/// Galerkin projection of the fine operators onto an offline basis.
///
/// Coarse column c < num_perm() is permanent column c; column num_perm() + j
/// is additional column j.
class CoarseSpace {
 public:
  CoarseSpace(const FineProblem& problem, const OfflineBasis& basis);

  int num_perm() const { return num_perm_; }
  int num_add() const { return num_add_; }
  int size() const { return num_perm_ + num_add_; }

  const FineProblem& problem() const { return *problem_; }
  const SpMat& prolongation() const { return P_; }

  /// Dense M_c/dt + A_c(t) restricted to `cols`.
  MatrixXd system_matrix(std::span<const int> cols, double t, double dt) const;
  MatrixXd mass_matrix(std::span<const int> cols) const;
  VectorXd load(std::span<const int> cols) const;
  /// P_cols^T v for a fine vector v.
  VectorXd restrict_vector(std::span<const int> cols, const VectorXd& v) const;
  /// P_cols c.
  VectorXd prolong(std::span<const int> cols, const VectorXd& coeffs) const;

  /// Column lists for common spans.
  std::vector<int> permanent_columns() const;
  std::vector<int> all_columns() const;
  /// Permanent columns followed by the given additional columns.
  std::vector<int> with_additional(std::span<const int> additional) const;

 private:
  MatrixXd gather(const SpMat& m, std::span<const int> cols) const;

  const FineProblem* problem_;
  int num_perm_;
  int num_add_;
  SpMat P_;
  SpMat Mc_;
  SpMat Ac_fixed_;
  SpMat Ac_mod_;
  VectorXd Fc_;
};

/// Implicit Euler on span(cols) over one interval, with the step
/// factorizations computed once. Solving is const and thread-safe.
class GalerkinStepper {
 public:
  GalerkinStepper(const CoarseSpace& space, std::vector<int> cols, const TimeGrid& time, int interval);

  /// Fine states at the interval's steps, starting from the fine state u_start.
  std::vector<VectorXd> trajectory(const VectorXd& u_start) const;
  const std::vector<int>& columns() const { return cols_; }

 private:
  const CoarseSpace* space_;
  std::vector<int> cols_;
  double dt_;
  int interval_;
  MatrixXd mass_;
  VectorXd load_;
  std::vector<Eigen::LLT<MatrixXd>> factors_;
};

}  // namespace msbayes
