#include "msbayes/grid.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "msbayes/errors.hpp"

namespace msbayes {

FineGrid::FineGrid(int cells_per_side) : n_(cells_per_side) {
  if (n_ < 1) throw ConfigError("fine grid needs at least one cell per side");
  h_ = 1.0 / n_;
  dirichlet_.assign(num_nodes(), 0);
  for (int r = 0; r <= n_; ++r) {
    for (int c = 0; c <= n_; ++c) {
      const bool edge = r == 0 || c == 0 || r == n_ || c == n_;
      dirichlet_[node(r, c)] = edge ? 1 : 0;
      if (!edge) free_nodes_.push_back(node(r, c));
    }
  }
}

std::array<int, 4> FineGrid::cell_nodes(int cell) const {
  const int r = cell_row(cell);
  const int c = cell_col(cell);
  return {node(r, c), node(r, c + 1), node(r + 1, c + 1), node(r + 1, c)};
}

std::pair<double, double> FineGrid::node_coord(int node) const {
  return {node_col(node) * h_, node_row(node) * h_};
}

std::pair<double, double> FineGrid::cell_center(int cell) const {
  return {(cell_col(cell) + 0.5) * h_, (cell_row(cell) + 0.5) * h_};
}

CoarseGrid::CoarseGrid(const FineGrid& fine, int elements_per_side)
    : fine_n_(fine.cells_per_side()), n_(elements_per_side) {
  if (n_ < 1) throw ConfigError("coarse grid needs at least one element per side");
  if (fine_n_ % n_ != 0) {
    throw ConfigError("fine grid size " + std::to_string(fine_n_) +
                      " is not a multiple of coarse grid size " + std::to_string(n_));
  }
  ratio_ = fine_n_ / n_;
  H_ = 1.0 / n_;

  element_cells_.resize(num_elements());
  cell_element_.resize(fine.num_cells());
  for (int cell = 0; cell < fine.num_cells(); ++cell) {
    const int e = element(fine.cell_row(cell) / ratio_, fine.cell_col(cell) / ratio_);
    element_cells_[e].push_back(cell);
    cell_element_[cell] = e;
  }

  neighborhoods_.resize(num_nodes());
  for (int r = 0; r <= n_; ++r) {
    for (int c = 0; c <= n_; ++c) {
      auto& list = neighborhoods_[node(r, c)];
      for (int er = r - 1; er <= r; ++er) {
        for (int ec = c - 1; ec <= c; ++ec) {
          if (er >= 0 && er < n_ && ec >= 0 && ec < n_) list.push_back(element(er, ec));
        }
      }
    }
  }
}

std::array<int, 4> CoarseGrid::element_nodes(int e) const {
  const int r = element_row(e);
  const int c = element_col(e);
  return {node(r, c), node(r, c + 1), node(r + 1, c + 1), node(r + 1, c)};
}

int CoarseGrid::fine_node(int coarse_node) const {
  return node_row(coarse_node) * ratio_ * (fine_n_ + 1) + node_col(coarse_node) * ratio_;
}

std::array<int, 4> CoarseGrid::neighborhood_block(int i) const {
  const int r = node_row(i);
  const int c = node_col(i);
  return {std::max(r - 1, 0), std::min(r, n_ - 1), std::max(c - 1, 0), std::min(c, n_ - 1)};
}

std::vector<int> CoarseGrid::block_cells(int row0, int row1, int col0, int col1) const {
  std::vector<int> cells;
  for (int r = row0 * ratio_; r < (row1 + 1) * ratio_; ++r) {
    for (int c = col0 * ratio_; c < (col1 + 1) * ratio_; ++c) cells.push_back(r * fine_n_ + c);
  }
  return cells;
}

std::vector<int> CoarseGrid::block_nodes(int row0, int row1, int col0, int col1) const {
  std::vector<int> nodes;
  for (int r = row0 * ratio_; r <= (row1 + 1) * ratio_; ++r) {
    for (int c = col0 * ratio_; c <= (col1 + 1) * ratio_; ++c) nodes.push_back(r * (fine_n_ + 1) + c);
  }
  return nodes;
}

std::vector<int> CoarseGrid::neighborhood_cells(int i) const {
  const auto b = neighborhood_block(i);
  return block_cells(b[0], b[1], b[2], b[3]);
}

std::vector<int> CoarseGrid::neighborhood_nodes(int i) const {
  const auto b = neighborhood_block(i);
  return block_nodes(b[0], b[1], b[2], b[3]);
}

TimeGrid::TimeGrid(double t_final, double dt, int intervals) : dt_(dt), intervals_(intervals) {
  if (!(dt > 0.0) || !(t_final > 0.0)) throw ConfigError("time step and final time must be positive");
  if (intervals < 1) throw ConfigError("need at least one time interval");
  const double steps_real = t_final / dt;
  const long steps = std::lround(steps_real);
  if (steps < 1 || std::abs(steps_real - static_cast<double>(steps)) > 1e-9 * std::max(1.0, steps_real)) {
    throw ConfigError("final time is not an integer number of time steps");
  }
  if (steps % intervals != 0) {
    throw ConfigError("number of time steps " + std::to_string(steps) + " is not divisible by " +
                      std::to_string(intervals) + " intervals");
  }
  steps_per_interval_ = static_cast<int>(steps / intervals);
}

std::pair<FineGrid, CoarseGrid> build_grids(int n_fine, int n_coarse) {
  if (n_fine < 1 || n_coarse < 1) throw ConfigError("grid sizes must be positive");
  FineGrid fine(n_fine);
  CoarseGrid coarse(fine, n_coarse);
  return {std::move(fine), std::move(coarse)};
}

}  // namespace msbayes
