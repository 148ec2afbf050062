#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "msbayes/fem.hpp"

namespace msbayes {

/// Multiscale partition of unity: chi[i] is a fine nodal vector supported in
/// the closure of omega_i.
struct PartitionOfUnity {
  std::vector<VectorXd> chi;
};

/// chi_i on each coarse element K solves -div(kappa grad chi) = 0 with
/// boundary data equal to the bilinear hat of node i on the edges of K.
PartitionOfUnity build_pou(const FineGrid& grid, const CoarseGrid& coarse, std::span<const double> kappa);

/// Local harmonic extension on one coarse element, used by build_pou.
/// Returns values on FineGrid nodes of the element for the given nodal
/// boundary data (all element-closure nodes, row-major within the element).
VectorXd element_harmonic_extension(const FineGrid& grid, const CoarseGrid& coarse, int element,
                                    std::span<const double> kappa, const VectorXd& boundary_values);

/// Cellwise sum_i kappa |grad chi_i|^2 evaluated at cell centers.
std::vector<double> pou_energy_weight(const FineGrid& grid, const CoarseGrid& coarse, const PartitionOfUnity& pou,
                                      std::span<const double> kappa);

/// Local offline space of one neighborhood.
struct NeighborhoodBasis {
  int region = 0;
  int l_perm = 0;
  int l_add = 0;
  VectorXd eigenvalues;           // ascending
  std::vector<int> snapshot_nodes;  // free fine nodes in closure(omega_i)
  MatrixXd eigenvectors;          // snapshot_nodes x count, s_i-orthonormal
  std::vector<int> support_nodes;   // all fine nodes in closure(omega_i)
  MatrixXd functions;             // support_nodes x count, chi_i * eigenvector

  int count() const { return static_cast<int>(functions.cols()); }
  int permanent_count() const { return std::min(l_perm, count()); }
  int additional_count() const { return count() - permanent_count(); }
};

/// Local pencil a_i(v,w) = int kappa grad v . grad w, s_i(v,w) = int kappa_tilde v w
/// on the free nodes of closure(omega_i).
struct LocalPencil {
  std::vector<int> nodes;
  MatrixXd stiffness;
  MatrixXd mass;
};

LocalPencil assemble_local_pencil(const FineGrid& grid, const CoarseGrid& coarse, int region,
                                  std::span<const double> kappa, std::span<const double> kappa_tilde);

NeighborhoodBasis build_spectral_basis(const FineGrid& grid, const CoarseGrid& coarse, const PartitionOfUnity& pou,
                                       std::span<const double> kappa, std::span<const double> kappa_tilde, int region,
                                       int l_perm, int l_add);

struct ColumnId {
  int region;
  int index;  // eigen-index within the neighborhood
};

/// Global offline space: permanent and additional prolongations with
/// node-major, eigen-index-minor column order.
struct OfflineBasis {
  int num_nodes = 0;
  std::vector<NeighborhoodBasis> regions;
  SpMat perm;
  SpMat add;
  std::vector<ColumnId> perm_columns;
  std::vector<ColumnId> add_columns;
  std::vector<std::vector<int>> add_columns_of_region;

  int num_regions() const { return static_cast<int>(regions.size()); }
};

OfflineBasis build_offline(std::vector<NeighborhoodBasis> regions, int num_nodes);

/// Standard pipeline: PoU and spectral problems at t = 0 for every neighborhood.
OfflineBasis build_standard_basis(const FineGrid& grid, const CoarseGrid& coarse, const PermeabilityField& field,
                                  int l_perm, int l_add, int threads = 1);

struct BasisCacheKey {
  std::uint64_t field_hash = 0;
  int n_fine = 0;
  int n_coarse = 0;
  int l_perm = 0;
  int l_add = 0;

  std::string file_name() const;
  bool operator==(const BasisCacheKey&) const = default;
};

void save_basis_cache(const std::string& path, const BasisCacheKey& key, const OfflineBasis& basis);
/// Returns nullopt when the file is missing, stale (different key) or of another version.
std::optional<OfflineBasis> load_basis_cache(const std::string& path, const BasisCacheKey& key, int num_nodes);

}  // namespace msbayes
