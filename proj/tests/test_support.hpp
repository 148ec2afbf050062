#pragma once

// Small helpers shared by the unit tests and the acceptance binary.

#include <Eigen/Dense>
#include <Eigen/SparseCholesky>
#include <cmath>
#include <filesystem>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "msbayes/config.hpp"
#include "msbayes/fem.hpp"

namespace msbayes::testing {

/// Rows and columns of A on the grid's free nodes.
inline SpMat restrict_free(const FineGrid& grid, const SpMat& A) {
  const auto& free = grid.free_nodes();
  std::vector<int> map(grid.num_nodes(), -1);
  for (std::size_t k = 0; k < free.size(); ++k) map[free[k]] = static_cast<int>(k);
  std::vector<Eigen::Triplet<double>> t;
  for (int c = 0; c < A.outerSize(); ++c) {
    for (SpMat::InnerIterator it(A, c); it; ++it) {
      const int r = map[it.row()];
      const int cc = map[it.col()];
      if (r >= 0 && cc >= 0) t.emplace_back(r, cc, it.value());
    }
  }
  SpMat out(static_cast<Eigen::Index>(free.size()), static_cast<Eigen::Index>(free.size()));
  out.setFromTriplets(t.begin(), t.end());
  return out;
}

/// Smallest eigenvalue of A x = lambda M x by inverse iteration with a
/// Rayleigh quotient.
inline double smallest_eigenvalue(const SpMat& A, const SpMat& M, int iterations = 60) {
  Eigen::SimplicialLDLT<SpMat> solver(A);
  VectorXd x = VectorXd::Ones(A.rows());
  double lambda = 0.0;
  for (int k = 0; k < iterations; ++k) {
    x = solver.solve(M * x);
    x /= std::sqrt(x.dot(M * x));
    lambda = x.dot(A * x);
  }
  return lambda;
}

/// Center value of -Lap u = 1 on the unit square with zero boundary data,
/// from the double sine series.
inline double poisson_center_series(int terms = 401) {
  const double pi = std::numbers::pi;
  double sum = 0.0;
  for (int m = 1; m <= terms; m += 2) {
    for (int n = 1; n <= terms; n += 2) {
      const double sign = (((m - 1) / 2 + (n - 1) / 2) % 2 == 0) ? 1.0 : -1.0;
      sum += sign * 16.0 / (pi * pi * pi * pi * m * n * (m * m + n * n));
    }
  }
  return sum;
}

inline MatrixXd random_matrix(int rows, int cols, std::mt19937_64& rng) {
  std::normal_distribution<double> z;
  MatrixXd m(rows, cols);
  for (int j = 0; j < cols; ++j) {
    for (int i = 0; i < rows; ++i) m(i, j) = z(rng);
  }
  return m;
}

inline VectorXd random_vector(int n, std::mt19937_64& rng) { return random_matrix(n, 1, rng).col(0); }

/// 20x20 fine grid, 4x4 coarse grid, two intervals of five steps, 2+4 basis.
inline RunConfig small_config() {
  RunConfig c;
  c.n_fine = 20;
  c.n_coarse = 4;
  c.t_final = 0.01;
  c.intervals = 2;
  c.l_perm = 2;
  c.l_add = 4;
  c.field.inclusions = 4;
  c.field.channels = 2;
  c.inflow = {{0, 0}, {0, 3}};
  c.outflow = {{3, 0}, {3, 3}};
  c.obs_regions = {{1, 1}, {2, 2}};
  c.sampler.n_omega = 6;
  c.sampler.n_basis = 2;
  c.sampler.n_samples = 4;
  c.experiment_samples = 2;
  return c;
}

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("msbayes_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace msbayes::testing
