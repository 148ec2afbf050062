#pragma once

#include <array>
#include <utility>
#include <vector>

namespace msbayes {

/// Uniform n x n quadrilateral grid on the unit square.
///
/// Nodes and cells are numbered row-major with row 0 at the bottom (y = 0).
class FineGrid {
 public:
  explicit FineGrid(int cells_per_side);

  int cells_per_side() const { return n_; }
  int nodes_per_side() const { return n_ + 1; }
  int num_nodes() const { return (n_ + 1) * (n_ + 1); }
  int num_cells() const { return n_ * n_; }
  double h() const { return h_; }

  int node(int row, int col) const { return row * (n_ + 1) + col; }
  int cell(int row, int col) const { return row * n_ + col; }
  int node_row(int node) const { return node / (n_ + 1); }
  int node_col(int node) const { return node % (n_ + 1); }
  int cell_row(int cell) const { return cell / n_; }
  int cell_col(int cell) const { return cell % n_; }

  /// Corner nodes of a cell in counter-clockwise order starting at the
  /// bottom-left corner.
  std::array<int, 4> cell_nodes(int cell) const;
  std::pair<double, double> node_coord(int node) const;
  std::pair<double, double> cell_center(int cell) const;

  bool on_boundary(int node) const { return dirichlet_[node] != 0; }
  const std::vector<char>& dirichlet_mask() const { return dirichlet_; }
  const std::vector<int>& free_nodes() const { return free_nodes_; }

 private:
  int n_;
  double h_;
  std::vector<char> dirichlet_;
  std::vector<int> free_nodes_;
};

/// Coarse partition of the unit square aligned with a FineGrid.
///
/// Coarse node i owns the neighborhood omega_i: the union of the (up to four)
/// coarse elements sharing that node.
class CoarseGrid {
 public:
  CoarseGrid(const FineGrid& fine, int elements_per_side);

  int elements_per_side() const { return n_; }
  int nodes_per_side() const { return n_ + 1; }
  int num_elements() const { return n_ * n_; }
  int num_nodes() const { return (n_ + 1) * (n_ + 1); }
  int num_neighborhoods() const { return num_nodes(); }
  double H() const { return H_; }
  /// Fine cells per coarse element side.
  int ratio() const { return ratio_; }

  int element(int row, int col) const { return row * n_ + col; }
  int node(int row, int col) const { return row * (n_ + 1) + col; }
  int element_row(int e) const { return e / n_; }
  int element_col(int e) const { return e % n_; }
  int node_row(int i) const { return i / (n_ + 1); }
  int node_col(int i) const { return i % (n_ + 1); }

  /// Coarse nodes of an element, counter-clockwise from bottom-left.
  std::array<int, 4> element_nodes(int e) const;
  /// Fine node id of a coarse node.
  int fine_node(int coarse_node) const;

  const std::vector<int>& neighborhood_elements(int i) const { return neighborhoods_[i]; }
  const std::vector<int>& element_cells(int e) const { return element_cells_[e]; }
  int element_of_cell(int cell) const { return cell_element_[cell]; }

  /// Fine cells of omega_i.
  std::vector<int> neighborhood_cells(int i) const;
  /// Fine nodes in the closure of omega_i (Dirichlet nodes included), sorted.
  std::vector<int> neighborhood_nodes(int i) const;
  /// Fine nodes in the closure of a rectangular block of coarse elements.
  std::vector<int> block_nodes(int row0, int row1, int col0, int col1) const;
  /// Fine cells of a rectangular block of coarse elements (inclusive bounds).
  std::vector<int> block_cells(int row0, int row1, int col0, int col1) const;

  /// Inclusive coarse-element index range [row0,row1]x[col0,col1] of omega_i.
  std::array<int, 4> neighborhood_block(int i) const;

 private:
  int fine_n_;
  int n_;
  int ratio_;
  double H_;
  std::vector<std::vector<int>> neighborhoods_;
  std::vector<std::vector<int>> element_cells_;
  std::vector<int> cell_element_;
};

/// Uniform time stepping on [0, T] split into equal Bayesian intervals.
///
/// Fine step m (1-based) advances from t_{m-1} to t_m = m dt. Interval n
/// (0-based) covers steps n*s+1 .. (n+1)*s where s = steps_per_interval.
class TimeGrid {
 public:
  TimeGrid(double t_final, double dt, int intervals);

  double dt() const { return dt_; }
  double t_final() const { return dt_ * total_steps(); }
  int intervals() const { return intervals_; }
  int steps_per_interval() const { return steps_per_interval_; }
  int total_steps() const { return steps_per_interval_ * intervals_; }
  double time(int step) const { return step * dt_; }
  int first_step(int interval) const { return interval * steps_per_interval_ + 1; }
  int last_step(int interval) const { return (interval + 1) * steps_per_interval_; }
  double interval_start(int interval) const { return time(first_step(interval) - 1); }
  double interval_end(int interval) const { return time(last_step(interval)); }

 private:
  double dt_;
  int intervals_;
  int steps_per_interval_;
};

/// Builds both grids, validating that the coarse grid refines exactly.
std::pair<FineGrid, CoarseGrid> build_grids(int n_fine, int n_coarse);

}  // namespace msbayes
