#include <doctest.h>

#include "msbayes/errors.hpp"
#include "msbayes/observation.hpp"
#include "test_support.hpp"

using namespace msbayes;

TEST_CASE("observation rows integrate over coarse elements") {
  const FineGrid g(20);
  const CoarseGrid c(g, 4);
  const std::vector<std::pair<int, int>> cells{{0, 0}, {1, 2}, {3, 3}};
  const auto ids = element_ids(c, cells);
  CHECK(ids == std::vector<int>{0, 6, 15});
  const SpMat D = build_observation_matrix(g, c, ids);
  CHECK(D.rows() == 3);
  const VectorXd ones = VectorXd::Ones(g.num_nodes());
  const VectorXd area = D * ones;
  for (int i = 0; i < 3; ++i) CHECK(area[i] == doctest::Approx(c.H() * c.H()).epsilon(1e-14));

  // x*y integrated exactly by the bilinear interpolant over [0.25,0.5]x[0.5,0.75]
  VectorXd xy(g.num_nodes());
  for (int n = 0; n < g.num_nodes(); ++n) {
    const auto [x, y] = g.node_coord(n);
    xy[n] = x * y;
  }
  const double exact = (0.5 * 0.5 - 0.25 * 0.25) / 2.0 * (0.75 * 0.75 - 0.5 * 0.5) / 2.0;
  CHECK((D * xy)[1] == doctest::Approx(exact).epsilon(1e-13));
}

TEST_CASE("linearity and the constant-shift example") {
  const FineGrid g(20);
  const CoarseGrid c(g, 4);
  const std::vector<int> ids{5, 10};
  const SpMat D = build_observation_matrix(g, c, ids);
  std::mt19937_64 rng(3);
  const VectorXd u = testing::random_vector(g.num_nodes(), rng);
  const VectorXd v = testing::random_vector(g.num_nodes(), rng);
  const VectorXd lhs = D * (2.5 * u - 1.5 * v);
  const VectorXd rhs = 2.5 * (D * u) - 1.5 * (D * v);
  CHECK((lhs - rhs).cwiseAbs().maxCoeff() < 1e-14);
  CHECK(max_obs_error(u, u, D) == 0.0);
  const VectorXd shifted = u + VectorXd::Constant(g.num_nodes(), 0.3);
  CHECK(max_obs_error(shifted, u, D) == doctest::Approx(0.3 * 0.0625));
}

TEST_CASE("synthetic data") {
  const FineGrid g(20);
  const CoarseGrid c(g, 4);
  const TimeGrid t(0.004, 1e-3, 2);
  const std::vector<int> ids{5, 10};
  const SpMat D = build_observation_matrix(g, c, ids);
  std::mt19937_64 rng(1);
  std::vector<VectorXd> ref;
  for (int m = 0; m <= t.total_steps(); ++m) ref.push_back(testing::random_vector(g.num_nodes(), rng));
  std::mt19937_64 a(9);
  const auto exact = synthesize_data(ref, D, t, 0.0, a);
  REQUIRE(exact.size() == 2u);
  CHECK((exact[1] - D * ref[4]).norm() == 0.0);
  CHECK((exact[0] - D * ref[2]).norm() == 0.0);
  std::mt19937_64 b1(9);
  std::mt19937_64 b2(9);
  const auto noisy1 = synthesize_data(ref, D, t, 0.1, b1);
  const auto noisy2 = synthesize_data(ref, D, t, 0.1, b2);
  CHECK((noisy1[0] - noisy2[0]).norm() == 0.0);
  CHECK((noisy1[0] - exact[0]).norm() > 0.0);
}

TEST_CASE("bad regions") {
  const FineGrid g(20);
  const CoarseGrid c(g, 4);
  const std::vector<std::pair<int, int>> bad{{4, 0}};
  CHECK_THROWS_AS(element_ids(c, bad), ConfigError);
  const std::vector<int> ids{16};
  CHECK_THROWS_AS(build_observation_matrix(g, c, ids), ConfigError);
}
