#include <doctest.h>

#include <Eigen/Eigenvalues>

#include "msbayes/dense_eigen.hpp"
#include "msbayes/errors.hpp"
#include "msbayes/msbasis.hpp"
#include "test_support.hpp"

using namespace msbayes;

namespace {

struct Toy {
  FineGrid grid{20};
  CoarseGrid coarse{grid, 2};
  PermeabilityField field;
  PartitionOfUnity pou;
  std::vector<double> kappa_tilde;

  Toy() {
    FieldGeneratorParams p;
    p.n = 20;
    p.seed = 5;
    p.inclusion_value = 1e3;
    p.inclusions = 6;
    field = generate_field(p);
    pou = build_pou(grid, coarse, field.kappa0);
    kappa_tilde = pou_energy_weight(grid, coarse, pou, field.kappa0);
  }
};

}  // namespace

TEST_CASE("partition of unity") {
  const Toy t;
  VectorXd sum = VectorXd::Zero(t.grid.num_nodes());
  for (const auto& chi : t.pou.chi) sum += chi;
  CHECK((sum.array() - 1.0).abs().maxCoeff() < 1e-10);
  for (int i = 0; i < t.coarse.num_neighborhoods(); ++i) {
    const auto& chi = t.pou.chi[i];
    CHECK(chi.minCoeff() > -1e-12);
    CHECK(chi.maxCoeff() < 1.0 + 1e-12);
    CHECK(chi[t.coarse.fine_node(i)] == doctest::Approx(1.0));
    std::vector<char> inside(t.grid.num_nodes(), 0);
    for (int n : t.coarse.neighborhood_nodes(i)) inside[n] = 1;
    for (int n = 0; n < t.grid.num_nodes(); ++n) {
      if (!inside[n]) CHECK(chi[n] == 0.0);
    }
  }
}

TEST_CASE("dense eigen wrapper agrees with a brute-force solve") {
  std::mt19937_64 rng(11);
  const MatrixXd X = testing::random_matrix(12, 12, rng);
  const MatrixXd Y = testing::random_matrix(12, 12, rng);
  const MatrixXd A = X * X.transpose();
  const MatrixXd B = Y * Y.transpose() + 12.0 * MatrixXd::Identity(12, 12);
  const auto got = smallest_generalized_eigenpairs(A, B, 5);
  Eigen::GeneralizedSelfAdjointEigenSolver<MatrixXd> ref(A, B);
  REQUIRE(got.values.size() == 5);
  for (int k = 0; k < 5; ++k) {
    CHECK(std::abs(got.values[k] - ref.eigenvalues()[k]) <= 1e-10 * (1.0 + std::abs(ref.eigenvalues()[k])));
    const VectorXd v = got.vectors.col(k);
    CHECK(std::abs(v.dot(B * v) - 1.0) < 1e-10);
    CHECK(std::abs(std::abs(v.dot(B * ref.eigenvectors().col(k))) - 1.0) < 1e-10);
  }
  MatrixXd indefinite = B;
  indefinite(0, 0) = -5.0;
  CHECK_THROWS_AS(smallest_generalized_eigenpairs(A, indefinite, 2), NumericalError);
}

TEST_CASE("sign normalization") {
  MatrixXd v(3, 2);
  v << 0.0, -1e-20, -2.0, 3.0, 1.0, 1.0;
  normalize_signs(v);
  CHECK(v(1, 0) == 2.0);
  CHECK(v(1, 1) == 3.0);
}

TEST_CASE("local eigenpairs match a brute-force pencil solve on the toy problem") {
  const Toy t;
  for (int region = 0; region < t.coarse.num_neighborhoods(); ++region) {
    CAPTURE(region);
    const auto nb = build_spectral_basis(t.grid, t.coarse, t.pou, t.field.kappa0, t.kappa_tilde, region, 2, 6);
    const auto pencil = assemble_local_pencil(t.grid, t.coarse, region, t.field.kappa0, t.kappa_tilde);
    Eigen::GeneralizedSelfAdjointEigenSolver<MatrixXd> ref(pencil.stiffness, pencil.mass);
    REQUIRE(nb.count() == 8);
    CHECK(nb.permanent_count() == 2);
    CHECK(nb.additional_count() == 6);
    const double scale = std::max(1.0, ref.eigenvalues()[7]);
    for (int k = 0; k < 8; ++k) {
      CHECK(std::abs(nb.eigenvalues[k] - ref.eigenvalues()[k]) <= 1e-8 * scale);
      if (k > 0) CHECK(nb.eigenvalues[k] >= nb.eigenvalues[k - 1]);
      const double gap = std::min(k > 0 ? ref.eigenvalues()[k] - ref.eigenvalues()[k - 1] : 1e300,
                                  ref.eigenvalues()[k + 1] - ref.eigenvalues()[k]);
      if (gap > 1e-6 * scale) {
        const VectorXd v = nb.eigenvectors.col(k);
        const VectorXd w = ref.eigenvectors().col(k);
        const double overlap = std::abs(v.dot(pencil.mass * w));
        CHECK(std::abs(overlap - 1.0) < 1e-8);
      }
    }
  }
}

TEST_CASE("interior neighborhoods contain the constants") {
  const FineGrid grid(20);
  const CoarseGrid coarse(grid, 4);
  FieldGeneratorParams p;
  p.n = 20;
  const auto field = generate_field(p);
  const auto pou = build_pou(grid, coarse, field.kappa0);
  const auto kt = pou_energy_weight(grid, coarse, pou, field.kappa0);
  const auto inner = build_spectral_basis(grid, coarse, pou, field.kappa0, kt, coarse.node(2, 2), 1, 1);
  CHECK(std::abs(inner.eigenvalues[0]) < 1e-8);
  CHECK(inner.eigenvalues[1] > 1e-3);
  // a neighborhood touching the Dirichlet boundary has no null mode
  const auto edge = build_spectral_basis(grid, coarse, pou, field.kappa0, kt, coarse.node(0, 2), 1, 1);
  CHECK(edge.eigenvalues[0] > 1e-6);
}

TEST_CASE("offline prolongation ordering") {
  const Toy t;
  const auto basis = build_standard_basis(t.grid, t.coarse, t.field, 2, 3);
  CHECK(basis.num_regions() == 9);
  CHECK(basis.perm.cols() == 18);
  CHECK(basis.add.cols() == 27);
  for (int c = 0; c < basis.add.cols(); ++c) {
    const ColumnId id = basis.add_columns[c];
    CHECK(id.region == c / 3);
    CHECK(id.index == 2 + c % 3);
  }
  CHECK(basis.add_columns_of_region[4] == std::vector<int>{12, 13, 14});
  // each column is chi_i times its eigenvector
  const auto& nb = basis.regions[4];
  const MatrixXd P(basis.add);
  for (std::size_t q = 0; q < nb.support_nodes.size(); ++q) {
    CHECK(P(nb.support_nodes[q], 13) == doctest::Approx(nb.functions(q, 3)));
  }
  const auto threaded = build_standard_basis(t.grid, t.coarse, t.field, 2, 3, 3);
  CHECK(MatrixXd(threaded.add - basis.add).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("basis cache round trip and staleness") {
  const Toy t;
  const auto basis = build_standard_basis(t.grid, t.coarse, t.field, 2, 3);
  const BasisCacheKey key{t.field.hash(), 20, 2, 2, 3};
  const auto dir = testing::scratch_dir("cache");
  const std::string path = (dir / key.file_name()).string();
  save_basis_cache(path, key, basis);
  const auto loaded = load_basis_cache(path, key, t.grid.num_nodes());
  REQUIRE(loaded.has_value());
  CHECK(MatrixXd(loaded->add - basis.add).cwiseAbs().maxCoeff() == 0.0);
  CHECK(MatrixXd(loaded->perm - basis.perm).cwiseAbs().maxCoeff() == 0.0);
  CHECK(loaded->add_columns_of_region == basis.add_columns_of_region);
  BasisCacheKey other = key;
  other.l_add = 4;
  CHECK_FALSE(load_basis_cache(path, other, t.grid.num_nodes()).has_value());
  CHECK_FALSE(load_basis_cache((dir / "missing.bin").string(), key, t.grid.num_nodes()).has_value());
  CHECK(key.file_name() != other.file_name());
}
