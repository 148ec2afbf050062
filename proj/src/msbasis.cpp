#include "msbayes/msbasis.hpp"

#include <cstdio>
#include <fstream>

#include "msbayes/dense_eigen.hpp"
#include "msbayes/errors.hpp"
#include "msbayes/parallel.hpp"

namespace msbayes {

namespace {

std::vector<int> local_map(int num_nodes, std::span<const int> nodes) {
  std::vector<int> map(num_nodes, -1);
  for (std::size_t k = 0; k < nodes.size(); ++k) map[nodes[k]] = static_cast<int>(k);
  return map;
}

}  // namespace

VectorXd element_harmonic_extension(const FineGrid& grid, const CoarseGrid& coarse, int element,
                                    std::span<const double> kappa, const VectorXd& boundary_values) {
  const int er = coarse.element_row(element);
  const int ec = coarse.element_col(element);
  const int r = coarse.ratio();
  const auto nodes = coarse.block_nodes(er, er, ec, ec);
  const auto cells = coarse.element_cells(element);
  const int side = r + 1;
  auto is_edge = [side](int k) {
    const int lr = k / side;
    const int lc = k % side;
    return lr == 0 || lc == 0 || lr == side - 1 || lc == side - 1;
  };

  std::vector<int> interior_index(nodes.size(), -1);
  int n_int = 0;
  for (std::size_t k = 0; k < nodes.size(); ++k) {
    if (!is_edge(static_cast<int>(k))) interior_index[k] = n_int++;
  }
  VectorXd result = boundary_values;
  for (std::size_t k = 0; k < nodes.size(); ++k) {
    if (!is_edge(static_cast<int>(k))) result[k] = 0.0;
  }
  if (n_int == 0) return result;

  const auto map = local_map(grid.num_nodes(), nodes);
  const SpMat A = assemble_cells(grid, cells, kappa, ElementKind::Stiffness, map, static_cast<int>(nodes.size()));

  std::vector<Eigen::Triplet<double>> trips;
  VectorXd rhs = VectorXd::Zero(n_int);
  for (int col = 0; col < A.outerSize(); ++col) {
    for (SpMat::InnerIterator it(A, col); it; ++it) {
      const int ri = interior_index[it.row()];
      if (ri < 0) continue;
      const int ci = interior_index[col];
      if (ci >= 0) {
        trips.emplace_back(ri, ci, it.value());
      } else {
        rhs[ri] -= it.value() * boundary_values[col];
      }
    }
  }
  SpMat A_ii(n_int, n_int);
  A_ii.setFromTriplets(trips.begin(), trips.end());
  Eigen::SimplicialLDLT<SpMat> solver(A_ii);
  if (solver.info() != Eigen::Success) {
    throw NumericalError("partition of unity solve failed on coarse element " + std::to_string(element));
  }
  const VectorXd x = solver.solve(rhs);
  if (solver.info() != Eigen::Success || !x.allFinite()) {
    throw NumericalError("partition of unity solve failed on coarse element " + std::to_string(element));
  }
  for (std::size_t k = 0; k < nodes.size(); ++k) {
    if (interior_index[k] >= 0) result[k] = x[interior_index[k]];
  }
  return result;
}

PartitionOfUnity build_pou(const FineGrid& grid, const CoarseGrid& coarse, std::span<const double> kappa) {
  PartitionOfUnity pou;
  pou.chi.assign(coarse.num_nodes(), VectorXd::Zero(grid.num_nodes()));
  const int r = coarse.ratio();
  const int side = r + 1;
  for (int e = 0; e < coarse.num_elements(); ++e) {
    const int er = coarse.element_row(e);
    const int ec = coarse.element_col(e);
    const auto nodes = coarse.block_nodes(er, er, ec, ec);
    const auto corners = coarse.element_nodes(e);
    // Corner k sits at local (a, b) in {0,1}^2, counter-clockwise from bottom-left.
    constexpr int corner_x[4] = {0, 1, 1, 0};
    constexpr int corner_y[4] = {0, 0, 1, 1};
    for (int k = 0; k < 4; ++k) {
      VectorXd g(nodes.size());
      for (std::size_t q = 0; q < nodes.size(); ++q) {
        const double s = static_cast<double>(q % side) / r;
        const double t = static_cast<double>(q / side) / r;
        g[q] = (corner_x[k] ? s : 1.0 - s) * (corner_y[k] ? t : 1.0 - t);
      }
      const VectorXd chi_local = element_harmonic_extension(grid, coarse, e, kappa, g);
      VectorXd& chi = pou.chi[corners[k]];
      for (std::size_t q = 0; q < nodes.size(); ++q) chi[nodes[q]] = chi_local[q];
    }
  }
  return pou;
}

std::vector<double> pou_energy_weight(const FineGrid& grid, const CoarseGrid& coarse, const PartitionOfUnity& pou,
                                      std::span<const double> kappa) {
  const ElementMatrices em = element_matrices(grid.h());
  std::vector<double> w(grid.num_cells(), 0.0);
  for (int cell = 0; cell < grid.num_cells(); ++cell) {
    const auto nodes = grid.cell_nodes(cell);
    double sum = 0.0;
    for (int i : coarse.element_nodes(coarse.element_of_cell(cell))) {
      const Eigen::Vector4d vals(pou.chi[i][nodes[0]], pou.chi[i][nodes[1]], pou.chi[i][nodes[2]], pou.chi[i][nodes[3]]);
      sum += (em.center_gradient * vals).squaredNorm();
    }
    w[cell] = kappa[cell] * sum;
  }
  return w;
}

LocalPencil assemble_local_pencil(const FineGrid& grid, const CoarseGrid& coarse, int region,
                                  std::span<const double> kappa, std::span<const double> kappa_tilde) {
  LocalPencil p;
  for (int n : coarse.neighborhood_nodes(region)) {
    if (!grid.on_boundary(n)) p.nodes.push_back(n);
  }
  const auto cells = coarse.neighborhood_cells(region);
  const auto map = local_map(grid.num_nodes(), p.nodes);
  const int size = static_cast<int>(p.nodes.size());
  p.stiffness = MatrixXd(assemble_cells(grid, cells, kappa, ElementKind::Stiffness, map, size));
  p.mass = MatrixXd(assemble_cells(grid, cells, kappa_tilde, ElementKind::Mass, map, size));
  return p;
}

NeighborhoodBasis build_spectral_basis(const FineGrid& grid, const CoarseGrid& coarse, const PartitionOfUnity& pou,
                                       std::span<const double> kappa, std::span<const double> kappa_tilde, int region,
                                       int l_perm, int l_add) {
  LocalPencil pencil = assemble_local_pencil(grid, coarse, region, kappa, kappa_tilde);
  NeighborhoodBasis nb;
  nb.region = region;
  nb.l_perm = l_perm;
  nb.l_add = l_add;
  EigenPairs eig;
  try {
    eig = smallest_generalized_eigenpairs(pencil.stiffness, pencil.mass, l_perm + l_add);
  } catch (const NumericalError& e) {
    throw NumericalError("degenerate region " + std::to_string(region) + ": " + e.what());
  }
  nb.eigenvalues = eig.values;
  nb.eigenvectors = std::move(eig.vectors);
  nb.snapshot_nodes = std::move(pencil.nodes);
  nb.support_nodes = coarse.neighborhood_nodes(region);

  const auto map = local_map(grid.num_nodes(), nb.snapshot_nodes);
  const VectorXd& chi = pou.chi[region];
  nb.functions = MatrixXd::Zero(nb.support_nodes.size(), nb.eigenvectors.cols());
  for (std::size_t q = 0; q < nb.support_nodes.size(); ++q) {
    const int node = nb.support_nodes[q];
    const int loc = map[node];
    if (loc < 0) continue;
    nb.functions.row(q) = chi[node] * nb.eigenvectors.row(loc);
  }
  return nb;
}

OfflineBasis build_offline(std::vector<NeighborhoodBasis> regions, int num_nodes) {
  OfflineBasis basis;
  basis.num_nodes = num_nodes;
  basis.regions = std::move(regions);
  basis.add_columns_of_region.resize(basis.regions.size());
  std::vector<Eigen::Triplet<double>> perm_trips;
  std::vector<Eigen::Triplet<double>> add_trips;
  for (const auto& nb : basis.regions) {
    for (int j = 0; j < nb.count(); ++j) {
      const bool permanent = j < nb.permanent_count();
      auto& ids = permanent ? basis.perm_columns : basis.add_columns;
      auto& trips = permanent ? perm_trips : add_trips;
      const int col = static_cast<int>(ids.size());
      ids.push_back({nb.region, j});
      if (!permanent) basis.add_columns_of_region[nb.region].push_back(col);
      for (std::size_t q = 0; q < nb.support_nodes.size(); ++q) {
        const double v = nb.functions(q, j);
        if (v != 0.0) trips.emplace_back(nb.support_nodes[q], col, v);
      }
    }
  }
  basis.perm.resize(num_nodes, static_cast<int>(basis.perm_columns.size()));
  basis.perm.setFromTriplets(perm_trips.begin(), perm_trips.end());
  basis.add.resize(num_nodes, static_cast<int>(basis.add_columns.size()));
  basis.add.setFromTriplets(add_trips.begin(), add_trips.end());
  return basis;
}

OfflineBasis build_standard_basis(const FineGrid& grid, const CoarseGrid& coarse, const PermeabilityField& field,
                                  int l_perm, int l_add, int threads) {
  if (l_perm < 0 || l_add < 0) throw ConfigError("basis counts must be nonnegative");
  const auto& kappa = field.kappa0;
  const PartitionOfUnity pou = build_pou(grid, coarse, kappa);
  const auto kappa_tilde = pou_energy_weight(grid, coarse, pou, kappa);
  std::vector<NeighborhoodBasis> regions(coarse.num_neighborhoods());
  parallel_for(coarse.num_neighborhoods(), threads, [&](int i) {
    regions[i] = build_spectral_basis(grid, coarse, pou, kappa, kappa_tilde, i, l_perm, l_add);
  });
  return build_offline(std::move(regions), grid.num_nodes());
}

// ---------------------------------------------------------------------------
// Cache file: "MSBC", u32 version, key, then per region the eigenvalues and
// the conforming functions on the closure nodes.

namespace {

constexpr std::uint32_t kCacheVersion = 1;

template <typename T>
void put(std::ofstream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <typename T>
bool get(std::ifstream& in, T& v) {
  return static_cast<bool>(in.read(reinterpret_cast<char*>(&v), sizeof v));
}

}  // namespace

std::string BasisCacheKey::file_name() const {
  char buf[128];
  std::snprintf(buf, sizeof buf, "basis_%016llx_%d_%d_%d_%d.bin", static_cast<unsigned long long>(field_hash), n_fine,
                n_coarse, l_perm, l_add);
  return buf;
}

void save_basis_cache(const std::string& path, const BasisCacheKey& key, const OfflineBasis& basis) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write basis cache " + path);
  out.write("MSBC", 4);
  put(out, kCacheVersion);
  put(out, key.field_hash);
  put(out, key.n_fine);
  put(out, key.n_coarse);
  put(out, key.l_perm);
  put(out, key.l_add);
  put(out, static_cast<std::int32_t>(basis.regions.size()));
  for (const auto& nb : basis.regions) {
    put(out, static_cast<std::int32_t>(nb.region));
    put(out, static_cast<std::int32_t>(nb.count()));
    put(out, static_cast<std::int32_t>(nb.support_nodes.size()));
    out.write(reinterpret_cast<const char*>(nb.eigenvalues.data()),
              static_cast<std::streamsize>(nb.eigenvalues.size() * sizeof(double)));
    out.write(reinterpret_cast<const char*>(nb.support_nodes.data()),
              static_cast<std::streamsize>(nb.support_nodes.size() * sizeof(int)));
    out.write(reinterpret_cast<const char*>(nb.functions.data()),
              static_cast<std::streamsize>(nb.functions.size() * sizeof(double)));
  }
  if (!out) throw DataError("failed writing basis cache " + path);
}

std::optional<OfflineBasis> load_basis_cache(const std::string& path, const BasisCacheKey& key, int num_nodes) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return std::nullopt;
  char magic[4];
  if (!in.read(magic, 4) || std::string(magic, 4) != "MSBC") return std::nullopt;
  std::uint32_t version = 0;
  BasisCacheKey stored;
  if (!get(in, version) || version != kCacheVersion) return std::nullopt;
  if (!get(in, stored.field_hash) || !get(in, stored.n_fine) || !get(in, stored.n_coarse) || !get(in, stored.l_perm) ||
      !get(in, stored.l_add)) {
    return std::nullopt;
  }
  if (!(stored == key)) return std::nullopt;
  std::int32_t count = 0;
  if (!get(in, count) || count < 0) return std::nullopt;
  std::vector<NeighborhoodBasis> regions(count);
  for (auto& nb : regions) {
    std::int32_t region = 0, cols = 0, support = 0;
    if (!get(in, region) || !get(in, cols) || !get(in, support) || cols < 0 || support < 0) return std::nullopt;
    nb.region = region;
    nb.l_perm = key.l_perm;
    nb.l_add = key.l_add;
    nb.eigenvalues.resize(cols);
    nb.support_nodes.resize(support);
    nb.functions.resize(support, cols);
    in.read(reinterpret_cast<char*>(nb.eigenvalues.data()), static_cast<std::streamsize>(cols * sizeof(double)));
    in.read(reinterpret_cast<char*>(nb.support_nodes.data()), static_cast<std::streamsize>(support * sizeof(int)));
    in.read(reinterpret_cast<char*>(nb.functions.data()),
            static_cast<std::streamsize>(static_cast<std::size_t>(support) * cols * sizeof(double)));
    if (!in) return std::nullopt;
  }
  return build_offline(std::move(regions), num_nodes);
}

}  // namespace msbayes
