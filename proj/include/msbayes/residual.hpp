#pragma once

#include <memory>
#include <span>
#include <vector>

#include "msbayes/fem.hpp"
#include "msbayes/msbasis.hpp"

namespace msbayes {

/// Grouping of additional columns by neighborhood. Columns of one region are
/// stored in ascending eigen-index order.
struct ColumnLayout {
  std::vector<int> region_of;
  std::vector<std::vector<int>> columns_of_region;

  int num_columns() const { return static_cast<int>(region_of.size()); }
  int num_regions() const { return static_cast<int>(columns_of_region.size()); }

  static ColumnLayout from_basis(const OfflineBasis& basis);
  /// `regions` equal-sized consecutive groups covering `columns` columns.
  static ColumnLayout uniform(int columns, int regions);
};

/// The part of the residual system that depends only on the interval's time
/// steps and the basis; shared by every sample.
struct IntervalSensitivity {
  int interval = 0;
  int steps = 0;
  int block_size = 0;
  double dt = 0.0;
  /// Stacked sqrt(dt) [A(t_m) P_add + (M/dt) P_add 1{m = first}] blocks.
  SpMat K;
  MatrixXd gram;  // K^T K
  MatrixXd S;     // D P_add
  std::shared_ptr<const ColumnLayout> layout;
};

std::shared_ptr<const IntervalSensitivity> build_interval_sensitivity(const FineProblem& problem, const SpMat& additional,
                                                                      const SpMat& D, const TimeGrid& time,
                                                                      int interval,
                                                                      std::shared_ptr<const ColumnLayout> layout);

/// Affine residual R(beta) = K beta - b and mismatch E(beta) = S beta - g of
/// one interval, in terms of the additional coefficients beta.
struct ResidualSystem {
  int interval = 0;
  std::shared_ptr<const IntervalSensitivity> sensitivity;
  VectorXd b;          // stacked sqrt(dt) fine residuals of the fixed solution
  VectorXd Ktb;        // K^T b
  double b_norm2 = 0;  // |b|^2
  VectorXd g;          // Y^n - D u_fixed(T_n)
  /// |R(0; phi_j)|: time-integrated residual tested against each additional column.
  VectorXd correlation;

  const SpMat& K() const { return sensitivity->K; }
  const MatrixXd& gram() const { return sensitivity->gram; }
  const MatrixXd& S() const { return sensitivity->S; }
  const ColumnLayout& layout() const { return *sensitivity->layout; }
  int num_columns() const { return static_cast<int>(sensitivity->gram.cols()); }
  int num_observations() const { return static_cast<int>(g.size()); }

  /// K_a beta - b, computed with the stored sensitivity matrix.
  VectorXd residual(std::span<const int> active, const VectorXd& beta) const;
  /// |K_a beta - b|^2 evaluated through the Gram matrix.
  double residual_norm2(std::span<const int> active, const VectorXd& beta) const;
  /// S_a beta - g.
  VectorXd mismatch(std::span<const int> active, const VectorXd& beta) const;

  /// Small explicit systems (tests, toy problems). correlation = |K^T b|.
  static ResidualSystem from_dense(const MatrixXd& K, const VectorXd& b, const MatrixXd& S, const VectorXd& g,
                                   std::shared_ptr<const ColumnLayout> layout = nullptr);
};

/// Builds b, K^T b, g and the correlations for one interval.
///
/// fixed_trajectory holds the fixed solution at the interval's steps and
/// u_start the corrected state at T_{n-1}; an empty u_start is a sequencing
/// error. data may be empty when no observations exist.
ResidualSystem build_residual_system(std::shared_ptr<const IntervalSensitivity> sensitivity,
                                     const FineProblem& problem, const SpMat& additional, const TimeGrid& time,
                                     std::span<const VectorXd> fixed_trajectory, const VectorXd& u_start,
                                     const SpMat& D, const VectorXd& data);

/// Unweighted fine residual blocks r_m = F - (M/dt)(u_m - u_{m-1}) - A(t_m) u_m.
std::vector<VectorXd> fine_residual_blocks(const FineProblem& problem, const TimeGrid& time, int interval,
                                           std::span<const VectorXd> trajectory, const VectorXd& u_start);

}  // namespace msbayes
