#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "msbayes/msbasis.hpp"

namespace msbayes {

/// Neighborhood omega_i grown by `layers` rings of coarse elements (clipped
/// to the domain), with a time window starting extension steps before T_{n-1}.
struct OversampledRegion {
  int region = 0;
  int layers = 0;
  int interval = 0;
  std::array<int, 4> block{};  // inclusive coarse-element rows/cols of omega+
  std::vector<int> nodes;      // fine nodes in closure(omega+), sorted
  std::vector<int> cells;
  std::vector<char> on_edge;   // per entry of nodes: lies on the boundary of omega+
  int start_step = 0;          // T*_{n-1} = start_step * dt
  int end_step = 0;            // T_n

  int block_rows() const { return block[1] - block[0] + 1; }
  int block_cols() const { return block[3] - block[2] + 1; }
};

OversampledRegion build_oversampled(const FineGrid& grid, const CoarseGrid& coarse, int region, int layers,
                                    const TimeGrid& time, int interval, int extension_steps);

/// Local kappa(t_star)-harmonic functions on omega+, one column per snapshot,
/// rows ordered as OversampledRegion::nodes.
struct SnapshotSet {
  double t_star = 0.0;
  std::uint64_t seed = 0;
  MatrixXd values;

  int count() const { return static_cast<int>(values.cols()); }
};

/// Snapshots with i.i.d. standard normal data on the boundary of omega+;
/// nodes on the domain boundary are held at zero.
SnapshotSet generate_snapshots(const FineGrid& grid, const OversampledRegion& region, const PermeabilityField& field,
                               double t_star, int count, std::uint64_t seed);

/// Snapshots for explicit boundary data: one column per snapshot, one row
/// per entry of region.nodes (only rows on the edge of omega+ are read).
SnapshotSet generate_snapshots(const FineGrid& grid, const OversampledRegion& region, const PermeabilityField& field,
                               double t_star, const MatrixXd& boundary_values);

/// Largest |(A psi)_k| / (|A| |psi|)_k over interior nodes of omega+, where A
/// is the local stiffness at t_star.
double harmonic_residual(const FineGrid& grid, const OversampledRegion& region, const PermeabilityField& field,
                         const SnapshotSet& snapshots);

/// Wide-hat partition of unity chi+_i for `layers`-oversampled supports,
/// normalized to sum to one.
std::vector<VectorXd> oversampled_pou(const FineGrid& grid, const CoarseGrid& coarse, int layers);

/// Cellwise sum_i |grad chi+_i|^2 (without kappa).
std::vector<double> oversampled_pou_energy(const FineGrid& grid, const CoarseGrid& coarse,
                                           const std::vector<VectorXd>& chi_plus);

/// Time-integrated pencil restricted to the snapshot span.
struct SnapshotPencil {
  MatrixXd stiffness;  // Psi^T A_n Psi
  MatrixXd mass;       // Psi^T S_n Psi
};

SnapshotPencil assemble_snapshot_pencil(const FineGrid& grid, const OversampledRegion& region,
                                        const PermeabilityField& field, const TimeGrid& time,
                                        std::span<const double> pou_energy, const SnapshotSet& snapshots);

struct SpacetimeModes {
  VectorXd eigenvalues;  // ascending
  MatrixXd modes;        // nodal values on region.nodes
  int rank = 0;          // numerical rank of the snapshot mass matrix
};

/// Smallest `count` eigenpairs of the snapshot pencil. A rank-deficient
/// snapshot mass matrix is reduced to its numerical rank (1e-10 relative).
SpacetimeModes spacetime_spectral(const SnapshotPencil& pencil, const SnapshotSet& snapshots, int count);

struct SpacetimeParams {
  int l_perm = 2;
  int l_add = 18;
  int layers = 1;
  int buffer = 4;
  int extension_steps = -1;  // negative: one interval
  std::uint64_t seed = 1;
};

struct SpacetimeBasis {
  std::vector<OfflineBasis> intervals;
  /// Fraction of (region, cell) pairs in omega_i with |grad chi+_i| >= |grad chi_i|.
  double dominance_fraction = 0.0;
  int rank_reductions = 0;
};

SpacetimeBasis build_spacetime_basis(const FineGrid& grid, const CoarseGrid& coarse, const PermeabilityField& field,
                                     const TimeGrid& time, const SpacetimeParams& params, int threads = 1);

}  // namespace msbayes
