#pragma once

#include <Eigen/Core>
#include <Eigen/SparseCore>
#include <Eigen/SparseCholesky>
#include <span>
#include <vector>

#include "msbayes/field.hpp"
#include "msbayes/grid.hpp"

namespace msbayes {

using SpMat = Eigen::SparseMatrix<double>;
using Eigen::MatrixXd;
using Eigen::VectorXd;

/// Q1 element matrices on a square cell, integrated with 2x2 Gauss quadrature.
/// Local node order matches FineGrid::cell_nodes.
struct ElementMatrices {
  Eigen::Matrix4d stiffness;  // for unit coefficient; independent of h in 2D
  Eigen::Matrix4d mass;       // for unit weight on a cell of side h
  Eigen::Vector4d load;       // for unit source on a cell of side h
  /// Gradient of each shape function at the cell center (scaled by 1/h).
  Eigen::Matrix<double, 2, 4> center_gradient;
};

ElementMatrices element_matrices(double h);

enum class ElementKind { Stiffness, Mass };

/// Assembles sum over `cells` of weight(cell) * element matrix, keeping only
/// nodes with node_map[node] >= 0 (rows/columns of other nodes are dropped).
SpMat assemble_cells(const FineGrid& grid, std::span<const int> cells, std::span<const double> cell_weight,
                     ElementKind kind, std::span<const int> node_map, int size);

/// Global node map with Dirichlet nodes mapped to -1.
std::vector<int> dirichlet_node_map(const FineGrid& grid);

/// Cellwise source term f.
struct SourceSpec {
  std::vector<double> cell_values;

  static SourceSpec constant(const FineGrid& grid, double value);
  /// f = sum of +1 over `positive` coarse elements and -1 over `negative` ones.
  static SourceSpec coarse_indicator(const FineGrid& grid, const CoarseGrid& coarse,
                                     std::span<const int> positive, std::span<const int> negative);
};

/// Fine-scale operators at one time instant. Dirichlet rows and columns are
/// eliminated (stored as zero), so all vectors live on the full node set.
struct FineOperators {
  SpMat A;
  SpMat M;
  VectorXd F;
};

/// Stiffness split into a time-invariant part and a part scaled by the
/// field's modulation factor: A(t) = fixed + factor(t) * modulated.
struct StiffnessSplit {
  SpMat fixed;
  SpMat modulated;
  const PermeabilityField* field = nullptr;

  double factor(double t) const { return field->factor(t); }
  SpMat at(double t) const { return fixed + factor(t) * modulated; }
};

StiffnessSplit assemble_stiffness_split(const FineGrid& grid, const PermeabilityField& field);
SpMat assemble_mass(const FineGrid& grid);
VectorXd assemble_load(const FineGrid& grid, const SourceSpec& source);

/// Throws DataError for nonpositive kappa.
FineOperators assemble(const FineGrid& grid, const PermeabilityField& field, double t, const SourceSpec& source);

/// Everything needed to time-step the fine problem; built once per run.
struct FineProblem {
  FineProblem(const FineGrid& grid, const PermeabilityField& field, const SourceSpec& source);

  const FineGrid* grid;
  const PermeabilityField* field;
  StiffnessSplit stiffness;
  SpMat M;
  VectorXd F;

  SpMat A(double t) const { return stiffness.at(t); }
  /// F - (M/dt)(u_new - u_old) - A(t) u_new, zero on Dirichlet rows.
  VectorXd step_residual(const VectorXd& u_new, const VectorXd& u_old, double t, double dt) const;
};

/// Sparse LDLT solver for (M/dt + A(t)) on the free nodes.
class ImplicitEulerStepper {
 public:
  ImplicitEulerStepper(const FineProblem& problem, double dt);
  /// One implicit Euler step to time t. Throws NumericalError on failure.
  VectorXd step(const VectorXd& u_old, double t, int step_index);

 private:
  const FineProblem* problem_;
  double dt_;
  SpMat dirichlet_identity_;
  Eigen::SimplicialLDLT<SpMat> solver_;
  bool analyzed_ = false;
  double factored_time_ = -1.0;
};

/// Fine reference trajectory u^0..u^N with u^0 = 0.
std::vector<VectorXd> solve_reference(const FineProblem& problem, const TimeGrid& time);
std::vector<VectorXd> solve_reference(const FineGrid& grid, const PermeabilityField& field,
                                      const SourceSpec& source, const TimeGrid& time);

}  // namespace msbayes
