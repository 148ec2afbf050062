#pragma once

#include <Eigen/Core>
#include <string>
#include <vector>

#include "msbayes/grid.hpp"

namespace msbayes {

/// Shortest round-trip decimal representation ("%.17g").
std::string format_double(double v);

/// Writes one "x,y,value" line per fine node, node order.
void write_nodal_csv(const std::string& path, const FineGrid& grid, const Eigen::VectorXd& values);
/// Reads the value column of a file written by write_nodal_csv.
Eigen::VectorXd read_nodal_csv(const std::string& path, const FineGrid& grid);

/// 8-bit grayscale PNG with linear min-max scaling; image row 0 is the top,
/// so the grid's row 0 (bottom of the domain) is written last.
void write_heatmap_png(const std::string& path, int width, int height, const std::vector<double>& values_row_major);
void write_nodal_heatmap(const std::string& path, const FineGrid& grid, const Eigen::VectorXd& values);

void ensure_directory(const std::string& path);

}  // namespace msbayes
