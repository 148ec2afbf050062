#include "msbayes/residual.hpp"

#include <cmath>
#include <string>

#include "msbayes/errors.hpp"

namespace msbayes {

ColumnLayout ColumnLayout::from_basis(const OfflineBasis& basis) {
  ColumnLayout layout;
  layout.columns_of_region = basis.add_columns_of_region;
  layout.region_of.resize(basis.add_columns.size());
  for (std::size_t c = 0; c < basis.add_columns.size(); ++c) layout.region_of[c] = basis.add_columns[c].region;
  return layout;
}

ColumnLayout ColumnLayout::uniform(int columns, int regions) {
  ColumnLayout layout;
  layout.columns_of_region.resize(regions);
  layout.region_of.resize(columns);
  const int per = (columns + regions - 1) / regions;
  for (int c = 0; c < columns; ++c) {
    const int r = std::min(c / per, regions - 1);
    layout.region_of[c] = r;
    layout.columns_of_region[r].push_back(c);
  }
  return layout;
}

std::shared_ptr<const IntervalSensitivity> build_interval_sensitivity(const FineProblem& problem, const SpMat& P_add,
                                                                      const SpMat& D, const TimeGrid& time,
                                                                      int interval,
                                                                      std::shared_ptr<const ColumnLayout> layout) {
  auto sens = std::make_shared<IntervalSensitivity>();
  sens->interval = interval;
  sens->steps = time.steps_per_interval();
  sens->block_size = static_cast<int>(P_add.rows());
  sens->dt = time.dt();
  sens->layout = layout ? std::move(layout) : std::make_shared<ColumnLayout>(ColumnLayout::uniform(P_add.cols(), 1));

  const double dt = time.dt();
  const double w = std::sqrt(dt);
  const SpMat fixed_part = problem.stiffness.fixed * P_add;
  const SpMat modulated_part = problem.stiffness.modulated * P_add;
  const SpMat mass_part = problem.M * P_add;

  std::vector<SpMat> blocks;
  for (int m = time.first_step(interval); m <= time.last_step(interval); ++m) {
    SpMat block = w * (fixed_part + problem.stiffness.factor(time.time(m)) * modulated_part);
    if (m == time.first_step(interval)) block += (w / dt) * mass_part;
    block.prune(0.0);
    blocks.push_back(std::move(block));
  }

  const int rows = sens->block_size;
  const int cols = static_cast<int>(P_add.cols());
  SpMat& K = sens->K;
  K.resize(rows * sens->steps, cols);
  Eigen::Index nnz = 0;
  for (const auto& blk : blocks) nnz += blk.nonZeros();
  K.reserve(nnz);
  for (int c = 0; c < cols; ++c) {
    K.startVec(c);
    for (int m = 0; m < sens->steps; ++m) {
      for (SpMat::InnerIterator it(blocks[m], c); it; ++it) K.insertBack(m * rows + it.row(), c) = it.value();
    }
  }
  K.finalize();

  const SpMat Kt = K.transpose();
  sens->gram = MatrixXd(Kt * K);
  sens->S = MatrixXd(D * P_add);
  return sens;
}

VectorXd ResidualSystem::residual(std::span<const int> active, const VectorXd& beta) const {
  VectorXd r = -b;
  for (std::size_t k = 0; k < active.size(); ++k) {
    const double c = beta[static_cast<Eigen::Index>(k)];
    for (SpMat::InnerIterator it(K(), active[k]); it; ++it) r[it.row()] += c * it.value();
  }
  return r;
}

double ResidualSystem::residual_norm2(std::span<const int> active, const VectorXd& beta) const {
  const MatrixXd& G = gram();
  double quad = 0.0;
  double lin = 0.0;
  for (std::size_t l = 0; l < active.size(); ++l) {
    const double* col = G.col(active[l]).data();
    double s = 0.0;
    for (std::size_t k = 0; k < active.size(); ++k) s += col[active[k]] * beta[static_cast<Eigen::Index>(k)];
    quad += s * beta[static_cast<Eigen::Index>(l)];
    lin += Ktb[active[l]] * beta[static_cast<Eigen::Index>(l)];
  }
  return quad - 2.0 * lin + b_norm2;
}

VectorXd ResidualSystem::mismatch(std::span<const int> active, const VectorXd& beta) const {
  VectorXd e = -g;
  for (std::size_t k = 0; k < active.size(); ++k) e += S().col(active[k]) * beta[static_cast<Eigen::Index>(k)];
  return e;
}

ResidualSystem ResidualSystem::from_dense(const MatrixXd& K, const VectorXd& b, const MatrixXd& S, const VectorXd& g,
                                          std::shared_ptr<const ColumnLayout> layout) {
  auto sens = std::make_shared<IntervalSensitivity>();
  sens->steps = 1;
  sens->block_size = static_cast<int>(K.rows());
  sens->K = K.sparseView(0.0, 0.0);
  sens->gram = K.transpose() * K;
  sens->S = S;
  sens->layout = layout ? std::move(layout) : std::make_shared<ColumnLayout>(ColumnLayout::uniform(K.cols(), 1));
  ResidualSystem sys;
  sys.sensitivity = std::move(sens);
  sys.b = b;
  sys.Ktb = K.transpose() * b;
  sys.b_norm2 = b.squaredNorm();
  sys.g = g;
  sys.correlation = sys.Ktb.cwiseAbs();
  return sys;
}

std::vector<VectorXd> fine_residual_blocks(const FineProblem& problem, const TimeGrid& time, int interval,
                                           std::span<const VectorXd> trajectory, const VectorXd& u_start) {
  std::vector<VectorXd> blocks;
  const VectorXd* prev = &u_start;
  int k = 0;
  for (int m = time.first_step(interval); m <= time.last_step(interval); ++m, ++k) {
    blocks.push_back(problem.step_residual(trajectory[k], *prev, time.time(m), time.dt()));
    prev = &trajectory[k];
  }
  return blocks;
}

ResidualSystem build_residual_system(std::shared_ptr<const IntervalSensitivity> sensitivity,
                                     const FineProblem& problem, const SpMat& P_add, const TimeGrid& time,
                                     std::span<const VectorXd> fixed_trajectory, const VectorXd& u_start,
                                     const SpMat& D, const VectorXd& data) {
  const int interval = sensitivity->interval;
  if (u_start.size() == 0) {
    throw SequencingError("interval " + std::to_string(interval) + " started without the previous corrected state");
  }
  if (static_cast<int>(fixed_trajectory.size()) != time.steps_per_interval()) {
    throw SequencingError("fixed trajectory does not cover interval " + std::to_string(interval));
  }
  const double w = std::sqrt(time.dt());
  const auto blocks = fine_residual_blocks(problem, time, interval, fixed_trajectory, u_start);
  const int n = sensitivity->block_size;

  ResidualSystem sys;
  sys.interval = interval;
  sys.b.resize(static_cast<Eigen::Index>(n) * blocks.size());
  VectorXd summed = VectorXd::Zero(n);
  for (std::size_t m = 0; m < blocks.size(); ++m) {
    sys.b.segment(static_cast<Eigen::Index>(m) * n, n) = w * blocks[m];
    summed += w * blocks[m];
  }
  sys.Ktb = sensitivity->K.transpose() * sys.b;
  sys.b_norm2 = sys.b.squaredNorm();
  sys.correlation = (P_add.transpose() * (w * summed)).cwiseAbs();
  if (D.rows() > 0) {
    if (data.size() != D.rows()) throw ConfigError("observation data size does not match the observation operator");
    sys.g = data - D * fixed_trajectory.back();
  } else {
    sys.g.resize(0);
  }
  sys.sensitivity = std::move(sensitivity);
  return sys;
}

}  // namespace msbayes
