#include "msbayes/observation.hpp"

#include "msbayes/errors.hpp"

namespace msbayes {

SpMat build_observation_matrix(const FineGrid& grid, const CoarseGrid& coarse, std::span<const int> regions) {
  const ElementMatrices em = element_matrices(grid.h());
  std::vector<Eigen::Triplet<double>> trips;
  for (std::size_t row = 0; row < regions.size(); ++row) {
    const int e = regions[row];
    if (e < 0 || e >= coarse.num_elements()) {
      throw ConfigError("observation region " + std::to_string(e) + " is not a coarse element");
    }
    for (int cell : coarse.element_cells(e)) {
      const auto nodes = grid.cell_nodes(cell);
      for (int k = 0; k < 4; ++k) trips.emplace_back(static_cast<int>(row), nodes[k], em.load[k]);
    }
  }
  SpMat D(static_cast<int>(regions.size()), grid.num_nodes());
  D.setFromTriplets(trips.begin(), trips.end());
  return D;
}

std::vector<int> element_ids(const CoarseGrid& coarse, std::span<const std::pair<int, int>> cells) {
  std::vector<int> ids;
  for (const auto& [r, c] : cells) {
    if (r < 0 || c < 0 || r >= coarse.elements_per_side() || c >= coarse.elements_per_side()) {
      throw ConfigError("coarse element (" + std::to_string(r) + "," + std::to_string(c) + ") out of range");
    }
    ids.push_back(coarse.element(r, c));
  }
  return ids;
}

std::vector<VectorXd> synthesize_data(std::span<const VectorXd> reference, const SpMat& D, const TimeGrid& time,
                                      double noise, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<VectorXd> data;
  for (int n = 0; n < time.intervals(); ++n) {
    VectorXd y = D * reference[time.last_step(n)];
    if (noise > 0.0) {
      for (Eigen::Index i = 0; i < y.size(); ++i) y[i] += noise * normal(rng);
    }
    data.push_back(std::move(y));
  }
  return data;
}

double max_obs_error(const VectorXd& u, const VectorXd& reference, const SpMat& D) {
  if (D.rows() == 0) return 0.0;
  return (D * (u - reference)).cwiseAbs().maxCoeff();
}

}  // namespace msbayes
