#pragma once

#include <random>
#include <span>
#include <utility>
#include <vector>

#include "msbayes/fem.hpp"

namespace msbayes {

/// Linear observations D_i(u) = int_{K_i} u over coarse elements K_i.
struct ObservationSet {
  std::vector<int> regions;
  SpMat D;
  /// Y^n for each interval n, observed at T_n.
  std::vector<VectorXd> data;
  double noise = 0.0;

  int size() const { return static_cast<int>(regions.size()); }
};

/// Row i integrates the bilinear interpolant over K_i with 2x2 Gauss
/// quadrature per fine cell. Throws ConfigError for out-of-range ids.
SpMat build_observation_matrix(const FineGrid& grid, const CoarseGrid& coarse, std::span<const int> regions);

/// Converts (row, col) coarse-element coordinates to element ids.
std::vector<int> element_ids(const CoarseGrid& coarse, std::span<const std::pair<int, int>> cells);

/// Y^n = D u_ref(T_n) + noise * xi for every interval end.
std::vector<VectorXd> synthesize_data(std::span<const VectorXd> reference, const SpMat& D, const TimeGrid& time,
                                      double noise, std::mt19937_64& rng);

/// max_i |D_i(u) - D_i(reference)|.
double max_obs_error(const VectorXd& u, const VectorXd& reference, const SpMat& D);

}  // namespace msbayes
