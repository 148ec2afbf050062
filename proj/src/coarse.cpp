#include "msbayes/coarse.hpp"

#include <string>

#include "msbayes/errors.hpp"

namespace msbayes {

CoarseSpace::CoarseSpace(const FineProblem& problem, const OfflineBasis& basis)
    : problem_(&problem),
      num_perm_(static_cast<int>(basis.perm.cols())),
      num_add_(static_cast<int>(basis.add.cols())) {
  P_.resize(basis.num_nodes, size());
  std::vector<Eigen::Triplet<double>> trips;
  trips.reserve(basis.perm.nonZeros() + basis.add.nonZeros());
  for (int c = 0; c < num_perm_; ++c) {
    for (SpMat::InnerIterator it(basis.perm, c); it; ++it) trips.emplace_back(it.row(), c, it.value());
  }
  for (int c = 0; c < num_add_; ++c) {
    for (SpMat::InnerIterator it(basis.add, c); it; ++it) trips.emplace_back(it.row(), num_perm_ + c, it.value());
  }
  P_.setFromTriplets(trips.begin(), trips.end());
  const SpMat Pt = P_.transpose();
  Mc_ = Pt * (problem.M * P_);
  Ac_fixed_ = Pt * (problem.stiffness.fixed * P_);
  Ac_mod_ = Pt * (problem.stiffness.modulated * P_);
  Fc_ = Pt * problem.F;
}

MatrixXd CoarseSpace::gather(const SpMat& m, std::span<const int> cols) const {
  std::vector<int> pos(size(), -1);
  for (std::size_t k = 0; k < cols.size(); ++k) pos[cols[k]] = static_cast<int>(k);
  const int n = static_cast<int>(cols.size());
  MatrixXd out = MatrixXd::Zero(n, n);
  for (int k = 0; k < n; ++k) {
    for (SpMat::InnerIterator it(m, cols[k]); it; ++it) {
      const int r = pos[it.row()];
      if (r >= 0) out(r, k) = it.value();
    }
  }
  return out;
}

MatrixXd CoarseSpace::system_matrix(std::span<const int> cols, double t, double dt) const {
  return gather(Mc_, cols) / dt + gather(Ac_fixed_, cols) + problem_->stiffness.factor(t) * gather(Ac_mod_, cols);
}

MatrixXd CoarseSpace::mass_matrix(std::span<const int> cols) const { return gather(Mc_, cols); }

VectorXd CoarseSpace::load(std::span<const int> cols) const {
  VectorXd out(cols.size());
  for (std::size_t k = 0; k < cols.size(); ++k) out[k] = Fc_[cols[k]];
  return out;
}

VectorXd CoarseSpace::restrict_vector(std::span<const int> cols, const VectorXd& v) const {
  VectorXd out(cols.size());
  for (std::size_t k = 0; k < cols.size(); ++k) out[k] = P_.col(cols[k]).dot(v);
  return out;
}

VectorXd CoarseSpace::prolong(std::span<const int> cols, const VectorXd& coeffs) const {
  VectorXd u = VectorXd::Zero(P_.rows());
  for (std::size_t k = 0; k < cols.size(); ++k) {
    const double c = coeffs[static_cast<Eigen::Index>(k)];
    if (c == 0.0) continue;
    for (SpMat::InnerIterator it(P_, cols[k]); it; ++it) u[it.row()] += c * it.value();
  }
  return u;
}

std::vector<int> CoarseSpace::permanent_columns() const {
  std::vector<int> cols(num_perm_);
  for (int c = 0; c < num_perm_; ++c) cols[c] = c;
  return cols;
}

std::vector<int> CoarseSpace::all_columns() const {
  std::vector<int> cols(size());
  for (int c = 0; c < size(); ++c) cols[c] = c;
  return cols;
}

std::vector<int> CoarseSpace::with_additional(std::span<const int> additional) const {
  std::vector<int> cols = permanent_columns();
  for (int j : additional) cols.push_back(num_perm_ + j);
  return cols;
}

GalerkinStepper::GalerkinStepper(const CoarseSpace& space, std::vector<int> cols, const TimeGrid& time, int interval)
    : space_(&space), cols_(std::move(cols)), dt_(time.dt()), interval_(interval) {
  mass_ = space.mass_matrix(cols_);
  load_ = space.load(cols_);
  for (int m = time.first_step(interval); m <= time.last_step(interval); ++m) {
    factors_.emplace_back(space.system_matrix(cols_, time.time(m), dt_));
    if (factors_.back().info() != Eigen::Success) {
      throw NumericalError("coarse Galerkin factorization failed at step " + std::to_string(m) + " (" +
                           std::to_string(cols_.size()) + " columns)");
    }
  }
}

std::vector<VectorXd> GalerkinStepper::trajectory(const VectorXd& u_start) const {
  std::vector<VectorXd> out;
  out.reserve(factors_.size());
  if (cols_.empty()) {
    out.assign(factors_.size(), VectorXd::Zero(u_start.size()));
    return out;
  }
  VectorXd rhs = load_ + space_->restrict_vector(cols_, space_->problem().M * u_start) / dt_;
  VectorXd coeffs;
  for (const auto& llt : factors_) {
    coeffs = llt.solve(rhs);
    if (!coeffs.allFinite()) throw NumericalError("coarse Galerkin solve produced non-finite values");
    out.push_back(space_->prolong(cols_, coeffs));
    rhs = load_ + mass_ * coeffs / dt_;
  }
  return out;
}

}  // namespace msbayes
