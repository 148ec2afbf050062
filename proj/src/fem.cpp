#include "msbayes/fem.hpp"

#include <cmath>
#include <string>

#include "msbayes/errors.hpp"

namespace msbayes {

ElementMatrices element_matrices(double h) {
  // Reference square [0,1]^2, shape functions in FineGrid::cell_nodes order.
  auto shape = [](double x, double y) {
    return Eigen::Vector4d((1 - x) * (1 - y), x * (1 - y), x * y, (1 - x) * y);
  };
  auto grad = [](double x, double y) {
    Eigen::Matrix<double, 2, 4> g;
    g << -(1 - y), (1 - y), y, -y,  //
        -(1 - x), -x, x, (1 - x);
    return g;
  };
  const double a = 0.5 - 0.5 / std::sqrt(3.0);
  const double b = 0.5 + 0.5 / std::sqrt(3.0);
  const double pts[2] = {a, b};

  ElementMatrices em;
  em.stiffness.setZero();
  em.mass.setZero();
  em.load.setZero();
  for (double x : pts) {
    for (double y : pts) {
      const auto n = shape(x, y);
      const auto g = grad(x, y);
      em.stiffness += 0.25 * g.transpose() * g;
      em.mass += 0.25 * h * h * n * n.transpose();
      em.load += 0.25 * h * h * n;
    }
  }
  em.center_gradient = grad(0.5, 0.5) / h;
  return em;
}

SpMat assemble_cells(const FineGrid& grid, std::span<const int> cells, std::span<const double> cell_weight,
                     ElementKind kind, std::span<const int> node_map, int size) {
  const ElementMatrices em = element_matrices(grid.h());
  const Eigen::Matrix4d& ref = kind == ElementKind::Stiffness ? em.stiffness : em.mass;
  std::vector<Eigen::Triplet<double>> trips;
  trips.reserve(cells.size() * 16);
  for (int cell : cells) {
    const double w = cell_weight[cell];
    if (w == 0.0) continue;
    const auto nodes = grid.cell_nodes(cell);
    for (int i = 0; i < 4; ++i) {
      const int li = node_map[nodes[i]];
      if (li < 0) continue;
      for (int j = 0; j < 4; ++j) {
        const int lj = node_map[nodes[j]];
        if (lj < 0) continue;
        trips.emplace_back(li, lj, w * ref(i, j));
      }
    }
  }
  SpMat m(size, size);
  m.setFromTriplets(trips.begin(), trips.end());
  return m;
}

std::vector<int> dirichlet_node_map(const FineGrid& grid) {
  std::vector<int> map(grid.num_nodes());
  for (int n = 0; n < grid.num_nodes(); ++n) map[n] = grid.on_boundary(n) ? -1 : n;
  return map;
}

SourceSpec SourceSpec::constant(const FineGrid& grid, double value) {
  return SourceSpec{std::vector<double>(grid.num_cells(), value)};
}

SourceSpec SourceSpec::coarse_indicator(const FineGrid& grid, const CoarseGrid& coarse, std::span<const int> positive,
                                        std::span<const int> negative) {
  SourceSpec s{std::vector<double>(grid.num_cells(), 0.0)};
  auto add = [&](std::span<const int> elems, double sign) {
    for (int e : elems) {
      if (e < 0 || e >= coarse.num_elements()) throw ConfigError("source region id out of range");
      for (int c : coarse.element_cells(e)) s.cell_values[c] += sign;
    }
  };
  add(positive, 1.0);
  add(negative, -1.0);
  return s;
}

namespace {

std::vector<int> all_cells(const FineGrid& grid) {
  std::vector<int> cells(grid.num_cells());
  for (int c = 0; c < grid.num_cells(); ++c) cells[c] = c;
  return cells;
}

void check_field(const FineGrid& grid, const PermeabilityField& field) {
  if (field.n != grid.cells_per_side()) {
    throw DataError("permeability field side " + std::to_string(field.n) + " does not match fine grid " +
                    std::to_string(grid.cells_per_side()));
  }
  for (int c = 0; c < grid.num_cells(); ++c) {
    if (!(field.kappa0[c] > 0.0)) throw DataError("nonpositive permeability in cell " + std::to_string(c));
  }
}

}  // namespace

StiffnessSplit assemble_stiffness_split(const FineGrid& grid, const PermeabilityField& field) {
  check_field(grid, field);
  const auto cells = all_cells(grid);
  const auto map = dirichlet_node_map(grid);
  std::vector<double> fixed(grid.num_cells(), 0.0);
  std::vector<double> modulated(grid.num_cells(), 0.0);
  for (int c = 0; c < grid.num_cells(); ++c) (field.modulated(c) ? modulated : fixed)[c] = field.kappa0[c];
  StiffnessSplit split;
  split.fixed = assemble_cells(grid, cells, fixed, ElementKind::Stiffness, map, grid.num_nodes());
  split.modulated = assemble_cells(grid, cells, modulated, ElementKind::Stiffness, map, grid.num_nodes());
  split.field = &field;
  return split;
}

SpMat assemble_mass(const FineGrid& grid) {
  const auto cells = all_cells(grid);
  const auto map = dirichlet_node_map(grid);
  const std::vector<double> ones(grid.num_cells(), 1.0);
  return assemble_cells(grid, cells, ones, ElementKind::Mass, map, grid.num_nodes());
}

VectorXd assemble_load(const FineGrid& grid, const SourceSpec& source) {
  if (static_cast<int>(source.cell_values.size()) != grid.num_cells()) {
    throw ConfigError("source term size does not match the fine grid");
  }
  const ElementMatrices em = element_matrices(grid.h());
  VectorXd F = VectorXd::Zero(grid.num_nodes());
  for (int cell = 0; cell < grid.num_cells(); ++cell) {
    const double f = source.cell_values[cell];
    if (f == 0.0) continue;
    const auto nodes = grid.cell_nodes(cell);
    for (int i = 0; i < 4; ++i) {
      if (!grid.on_boundary(nodes[i])) F[nodes[i]] += f * em.load[i];
    }
  }
  return F;
}

FineOperators assemble(const FineGrid& grid, const PermeabilityField& field, double t, const SourceSpec& source) {
  check_field(grid, field);
  const auto kappa = modulate(field, t);
  const auto cells = all_cells(grid);
  const auto map = dirichlet_node_map(grid);
  FineOperators ops;
  ops.A = assemble_cells(grid, cells, kappa, ElementKind::Stiffness, map, grid.num_nodes());
  ops.M = assemble_mass(grid);
  ops.F = assemble_load(grid, source);
  return ops;
}

FineProblem::FineProblem(const FineGrid& g, const PermeabilityField& f, const SourceSpec& source)
    : grid(&g), field(&f), stiffness(assemble_stiffness_split(g, f)), M(assemble_mass(g)), F(assemble_load(g, source)) {}

VectorXd FineProblem::step_residual(const VectorXd& u_new, const VectorXd& u_old, double t, double dt) const {
  VectorXd r = F - (M * (u_new - u_old)) / dt - stiffness.fixed * u_new;
  r.noalias() -= stiffness.factor(t) * (stiffness.modulated * u_new);
  return r;
}

ImplicitEulerStepper::ImplicitEulerStepper(const FineProblem& problem, double dt) : problem_(&problem), dt_(dt) {
  const FineGrid& g = *problem.grid;
  dirichlet_identity_.resize(g.num_nodes(), g.num_nodes());
  std::vector<Eigen::Triplet<double>> trips;
  for (int n = 0; n < g.num_nodes(); ++n) {
    if (g.on_boundary(n)) trips.emplace_back(n, n, 1.0);
  }
  dirichlet_identity_.setFromTriplets(trips.begin(), trips.end());
}

VectorXd ImplicitEulerStepper::step(const VectorXd& u_old, double t, int step_index) {
  const FineProblem& p = *problem_;
  if (t != factored_time_) {
    const SpMat sys = p.M / dt_ + p.stiffness.at(t) + dirichlet_identity_;
    if (!analyzed_) {
      solver_.analyzePattern(sys);
      analyzed_ = true;
    }
    solver_.factorize(sys);
    if (solver_.info() != Eigen::Success) {
      throw NumericalError("fine implicit Euler factorization failed at step " + std::to_string(step_index));
    }
    factored_time_ = t;
  }
  const VectorXd rhs = p.F + (p.M * u_old) / dt_;
  VectorXd u = solver_.solve(rhs);
  if (solver_.info() != Eigen::Success || !u.allFinite()) {
    throw NumericalError("fine implicit Euler solve failed at step " + std::to_string(step_index));
  }
  return u;
}

std::vector<VectorXd> solve_reference(const FineProblem& problem, const TimeGrid& time) {
  ImplicitEulerStepper stepper(problem, time.dt());
  std::vector<VectorXd> traj;
  traj.reserve(time.total_steps() + 1);
  traj.push_back(VectorXd::Zero(problem.grid->num_nodes()));
  for (int m = 1; m <= time.total_steps(); ++m) traj.push_back(stepper.step(traj.back(), time.time(m), m));
  return traj;
}

std::vector<VectorXd> solve_reference(const FineGrid& grid, const PermeabilityField& field, const SourceSpec& source,
                                      const TimeGrid& time) {
  FineProblem problem(grid, field, source);
  return solve_reference(problem, time);
}

}  // namespace msbayes
