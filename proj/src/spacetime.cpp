#include "msbayes/spacetime.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <atomic>
#include <cmath>
#include <random>
#include <string>

#include "msbayes/dense_eigen.hpp"
#include "msbayes/errors.hpp"
#include "msbayes/log.hpp"
#include "msbayes/parallel.hpp"

namespace msbayes {

namespace {

std::vector<int> local_map(int num_nodes, std::span<const int> nodes) {
  std::vector<int> map(num_nodes, -1);
  for (std::size_t k = 0; k < nodes.size(); ++k) map[nodes[k]] = static_cast<int>(k);
  return map;
}

std::uint64_t derived_seed(std::uint64_t seed, int region, int interval) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(region), static_cast<std::uint32_t>(interval)};
  std::mt19937_64 rng(seq);
  return rng();
}

Eigen::Vector2d center_gradient(const ElementMatrices& em, const FineGrid& grid, const VectorXd& v, int cell) {
  const auto nodes = grid.cell_nodes(cell);
  const Eigen::Vector4d vals(v[nodes[0]], v[nodes[1]], v[nodes[2]], v[nodes[3]]);
  return em.center_gradient * vals;
}

}  // namespace

OversampledRegion build_oversampled(const FineGrid& grid, const CoarseGrid& coarse, int region, int layers,
                                    const TimeGrid& time, int interval, int extension_steps) {
  if (layers < 0) throw ConfigError("basis.layers must be nonnegative");
  OversampledRegion out;
  out.region = region;
  out.layers = layers;
  out.interval = interval;
  const auto base = coarse.neighborhood_block(region);
  const int last = coarse.elements_per_side() - 1;
  out.block = {std::max(base[0] - layers, 0), std::min(base[1] + layers, last), std::max(base[2] - layers, 0),
               std::min(base[3] + layers, last)};
  out.nodes = coarse.block_nodes(out.block[0], out.block[1], out.block[2], out.block[3]);
  out.cells = coarse.block_cells(out.block[0], out.block[1], out.block[2], out.block[3]);
  const int r = coarse.ratio();
  const int row_lo = out.block[0] * r;
  const int row_hi = (out.block[1] + 1) * r;
  const int col_lo = out.block[2] * r;
  const int col_hi = (out.block[3] + 1) * r;
  out.on_edge.resize(out.nodes.size());
  for (std::size_t k = 0; k < out.nodes.size(); ++k) {
    const int nr = grid.node_row(out.nodes[k]);
    const int nc = grid.node_col(out.nodes[k]);
    out.on_edge[k] = nr == row_lo || nr == row_hi || nc == col_lo || nc == col_hi;
  }
  const int ext = extension_steps < 0 ? time.steps_per_interval() : extension_steps;
  out.end_step = time.last_step(interval);
  out.start_step = std::max(time.first_step(interval) - 1 - ext, 0);
  return out;
}

SnapshotSet generate_snapshots(const FineGrid& grid, const OversampledRegion& region, const PermeabilityField& field,
                               double t_star, int count, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  bool free_edge = false;
  for (std::size_t k = 0; k < region.nodes.size(); ++k) {
    free_edge = free_edge || (region.on_edge[k] && !grid.on_boundary(region.nodes[k]));
  }
  if (!free_edge) {
    throw ConfigError("oversampled region " + std::to_string(region.region) +
                      " has no edge inside the domain; use fewer layers or a finer coarse grid");
  }
  MatrixXd boundary = MatrixXd::Zero(static_cast<Eigen::Index>(region.nodes.size()), count);
  for (int j = 0; j < count; ++j) {
    for (std::size_t k = 0; k < region.nodes.size(); ++k) {
      if (!region.on_edge[k]) continue;
      const double v = normal(rng);
      boundary(static_cast<Eigen::Index>(k), j) = grid.on_boundary(region.nodes[k]) ? 0.0 : v;
    }
  }
  SnapshotSet set = generate_snapshots(grid, region, field, t_star, boundary);
  set.seed = seed;
  return set;
}

SnapshotSet generate_snapshots(const FineGrid& grid, const OversampledRegion& region, const PermeabilityField& field,
                               double t_star, const MatrixXd& boundary_values) {
  const auto kappa = modulate(field, t_star);
  const auto map = local_map(grid.num_nodes(), region.nodes);
  const int n = static_cast<int>(region.nodes.size());
  const SpMat A = assemble_cells(grid, region.cells, kappa, ElementKind::Stiffness, map, n);

  std::vector<int> interior(n, -1);
  int n_int = 0;
  for (int k = 0; k < n; ++k) {
    if (!region.on_edge[k]) interior[k] = n_int++;
  }
  SnapshotSet set;
  set.t_star = t_star;
  set.values = boundary_values;
  for (int k = 0; k < n; ++k) {
    if (interior[k] >= 0) set.values.row(k).setZero();
  }
  if (n_int == 0) return set;

  std::vector<Eigen::Triplet<double>> trips;
  MatrixXd rhs = MatrixXd::Zero(n_int, boundary_values.cols());
  for (int col = 0; col < A.outerSize(); ++col) {
    for (SpMat::InnerIterator it(A, col); it; ++it) {
      const int ri = interior[it.row()];
      if (ri < 0) continue;
      if (interior[col] >= 0) {
        trips.emplace_back(ri, interior[col], it.value());
      } else {
        rhs.row(ri) -= it.value() * boundary_values.row(col);
      }
    }
  }
  SpMat A_ii(n_int, n_int);
  A_ii.setFromTriplets(trips.begin(), trips.end());
  Eigen::SimplicialLDLT<SpMat> solver(A_ii);
  if (solver.info() != Eigen::Success) {
    throw NumericalError("snapshot solve failed on oversampled region " + std::to_string(region.region));
  }
  const MatrixXd x = solver.solve(rhs);
  if (!x.allFinite()) throw NumericalError("snapshot solve produced non-finite values");
  for (int k = 0; k < n; ++k) {
    if (interior[k] >= 0) set.values.row(k) = x.row(interior[k]);
  }
  return set;
}

double harmonic_residual(const FineGrid& grid, const OversampledRegion& region, const PermeabilityField& field,
                         const SnapshotSet& snapshots) {
  const auto kappa = modulate(field, snapshots.t_star);
  const auto map = local_map(grid.num_nodes(), region.nodes);
  const int n = static_cast<int>(region.nodes.size());
  const SpMat A = assemble_cells(grid, region.cells, kappa, ElementKind::Stiffness, map, n);
  const SpMat absA = A.cwiseAbs();
  double worst = 0.0;
  for (int j = 0; j < snapshots.count(); ++j) {
    const VectorXd psi = snapshots.values.col(j);
    const VectorXd r = A * psi;
    const VectorXd scale = absA * psi.cwiseAbs();
    for (int k = 0; k < n; ++k) {
      if (region.on_edge[k] || scale[k] == 0.0) continue;
      worst = std::max(worst, std::abs(r[k]) / scale[k]);
    }
  }
  return worst;
}

std::vector<VectorXd> oversampled_pou(const FineGrid& grid, const CoarseGrid& coarse, int layers) {
  const double width = (1.0 + layers) * coarse.H();
  std::vector<VectorXd> chi(coarse.num_nodes(), VectorXd::Zero(grid.num_nodes()));
  for (int node = 0; node < grid.num_nodes(); ++node) {
    const auto [x, y] = grid.node_coord(node);
    double total = 0.0;
    for (int i = 0; i < coarse.num_nodes(); ++i) {
      const double xi = coarse.node_col(i) * coarse.H();
      const double yi = coarse.node_row(i) * coarse.H();
      const double w = std::max(0.0, 1.0 - std::abs(x - xi) / width) * std::max(0.0, 1.0 - std::abs(y - yi) / width);
      chi[i][node] = w;
      total += w;
    }
    for (auto& c : chi) c[node] /= total;
  }
  return chi;
}

std::vector<double> oversampled_pou_energy(const FineGrid& grid, const CoarseGrid&,
                                           const std::vector<VectorXd>& chi_plus) {
  const ElementMatrices em = element_matrices(grid.h());
  std::vector<double> energy(grid.num_cells(), 0.0);
  for (const auto& chi : chi_plus) {
    for (int cell = 0; cell < grid.num_cells(); ++cell) energy[cell] += center_gradient(em, grid, chi, cell).squaredNorm();
  }
  return energy;
}

SnapshotPencil assemble_snapshot_pencil(const FineGrid& grid, const OversampledRegion& region,
                                        const PermeabilityField& field, const TimeGrid& time,
                                        std::span<const double> pou_energy, const SnapshotSet& snapshots) {
  // Trapezoid rule over the fine time points of (T*_{n-1}, T_n).
  double fixed_weight = 0.0;
  double modulated_weight = 0.0;
  for (int m = region.start_step; m <= region.end_step; ++m) {
    const double w = (m == region.start_step || m == region.end_step) ? 0.5 * time.dt() : time.dt();
    fixed_weight += w;
    modulated_weight += w * field.factor(time.time(m));
  }
  std::vector<double> a_weight(grid.num_cells(), 0.0);
  std::vector<double> s_weight(grid.num_cells(), 0.0);
  for (int cell : region.cells) {
    a_weight[cell] = field.kappa0[cell] * (field.modulated(cell) ? modulated_weight : fixed_weight);
    s_weight[cell] = a_weight[cell] * pou_energy[cell];
  }
  const auto map = local_map(grid.num_nodes(), region.nodes);
  const int n = static_cast<int>(region.nodes.size());
  const SpMat A = assemble_cells(grid, region.cells, a_weight, ElementKind::Stiffness, map, n);
  const SpMat S = assemble_cells(grid, region.cells, s_weight, ElementKind::Mass, map, n);
  const MatrixXd& psi = snapshots.values;
  SnapshotPencil p;
  p.stiffness = psi.transpose() * (A * psi);
  p.mass = psi.transpose() * (S * psi);
  p.stiffness = 0.5 * (p.stiffness + p.stiffness.transpose()).eval();
  p.mass = 0.5 * (p.mass + p.mass.transpose()).eval();
  return p;
}

SpacetimeModes spacetime_spectral(const SnapshotPencil& pencil, const SnapshotSet& snapshots, int count) {
  const int n = static_cast<int>(pencil.mass.rows());
  SpacetimeModes out;
  if (n == 0 || count <= 0) {
    out.modes.resize(snapshots.values.rows(), 0);
    return out;
  }
  Eigen::SelfAdjointEigenSolver<MatrixXd> mass_eig(pencil.mass);
  if (mass_eig.info() != Eigen::Success) throw NumericalError("snapshot mass eigendecomposition failed");
  const VectorXd& mu = mass_eig.eigenvalues();
  const double top = mu.maxCoeff();
  if (!(top > 0.0)) throw NumericalError("snapshot mass matrix vanishes");
  std::vector<int> kept;
  for (int k = 0; k < n; ++k) {
    if (mu[k] > 1e-10 * top) kept.push_back(k);
  }
  out.rank = static_cast<int>(kept.size());
  const int m = std::min(count, out.rank);

  MatrixXd coeffs;
  if (out.rank == n) {
    EigenPairs eig = smallest_generalized_eigenpairs(pencil.stiffness, pencil.mass, m);
    out.eigenvalues = eig.values;
    coeffs = std::move(eig.vectors);
  } else {
    MatrixXd Q(n, out.rank);
    for (int k = 0; k < out.rank; ++k) Q.col(k) = mass_eig.eigenvectors().col(kept[k]) / std::sqrt(mu[kept[k]]);
    const MatrixXd reduced = Q.transpose() * pencil.stiffness * Q;
    Eigen::SelfAdjointEigenSolver<MatrixXd> eig(0.5 * (reduced + reduced.transpose()));
    if (eig.info() != Eigen::Success) throw NumericalError("reduced snapshot pencil eigensolve failed");
    out.eigenvalues = eig.eigenvalues().head(m);
    coeffs = Q * eig.eigenvectors().leftCols(m);
  }
  out.modes = snapshots.values * coeffs;
  normalize_signs(out.modes);
  return out;
}

SpacetimeBasis build_spacetime_basis(const FineGrid& grid, const CoarseGrid& coarse, const PermeabilityField& field,
                                     const TimeGrid& time, const SpacetimeParams& params, int threads) {
  if (params.l_perm < 0 || params.l_add < 0 || params.buffer < 0) {
    throw ConfigError("basis counts must be nonnegative");
  }
  const int target = params.l_perm + params.l_add;
  const auto chi_plus = oversampled_pou(grid, coarse, params.layers);
  const auto energy = oversampled_pou_energy(grid, coarse, chi_plus);
  const ElementMatrices em = element_matrices(grid.h());

  SpacetimeBasis out;
  std::atomic<int> reductions{0};
  std::atomic<long> dominant{0};
  std::atomic<long> compared{0};
  for (int n = 0; n < time.intervals(); ++n) {
    const double t_star = time.interval_start(n);
    const PartitionOfUnity pou = build_pou(grid, coarse, modulate(field, t_star));
    std::vector<NeighborhoodBasis> regions(coarse.num_neighborhoods());
    parallel_for(coarse.num_neighborhoods(), threads, [&](int i) {
      const OversampledRegion region =
          build_oversampled(grid, coarse, i, params.layers, time, n, params.extension_steps);
      const SnapshotSet snaps =
          generate_snapshots(grid, region, field, t_star, target + params.buffer, derived_seed(params.seed, i, n));
      const SnapshotPencil pencil = assemble_snapshot_pencil(grid, region, field, time, energy, snaps);
      SpacetimeModes modes = spacetime_spectral(pencil, snaps, target);
      if (modes.rank < snaps.count()) ++reductions;

      NeighborhoodBasis& nb = regions[i];
      nb.region = i;
      nb.l_perm = params.l_perm;
      nb.l_add = params.l_add;
      nb.eigenvalues = modes.eigenvalues;
      nb.snapshot_nodes = region.nodes;
      nb.support_nodes = coarse.neighborhood_nodes(i);
      const auto map = local_map(grid.num_nodes(), region.nodes);
      nb.functions = MatrixXd::Zero(static_cast<Eigen::Index>(nb.support_nodes.size()), modes.modes.cols());
      for (std::size_t q = 0; q < nb.support_nodes.size(); ++q) {
        const int node = nb.support_nodes[q];
        nb.functions.row(static_cast<Eigen::Index>(q)) = pou.chi[i][node] * modes.modes.row(map[node]);
      }
      nb.eigenvectors = std::move(modes.modes);

      if (n == 0) {
        long hits = 0;
        const auto cells = coarse.neighborhood_cells(i);
        for (int cell : cells) {
          hits += center_gradient(em, grid, chi_plus[i], cell).norm() >=
                  center_gradient(em, grid, pou.chi[i], cell).norm();
        }
        dominant += hits;
        compared += static_cast<long>(cells.size());
      }
    });
    out.intervals.push_back(build_offline(std::move(regions), grid.num_nodes()));
  }
  out.rank_reductions = reductions.load();
  out.dominance_fraction = compared > 0 ? static_cast<double>(dominant) / static_cast<double>(compared) : 0.0;
  if (out.rank_reductions > 0) {
    log_warning(std::to_string(out.rank_reductions) +
                " snapshot set(s) were rank deficient and reduced to their numerical rank");
  }
  return out;
}

}  // namespace msbayes
