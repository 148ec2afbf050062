#include <doctest.h>

#include <vector>

#include "msbayes/log.hpp"
#include "msbayes/prior.hpp"

using namespace msbayes;

TEST_CASE("rescaled probabilities") {
  bool fallback = true;
  const std::vector<double> even{1, 1, 1, 1};
  VectorXd p = rescaled_probabilities(even, 2.0, &fallback);
  CHECK_FALSE(fallback);
  for (int k = 0; k < 4; ++k) CHECK(p[k] == doctest::Approx(0.5));

  const std::vector<double> skew{3, 1, 0, 0};
  p = rescaled_probabilities(skew, 2.0);
  CHECK(p[0] == 1.0);
  CHECK(p[1] == doctest::Approx(0.5));
  CHECK(p[2] == 0.0);
  CHECK(p[3] == 0.0);

  const std::vector<double> zeros{0, 0, 0};
  p = rescaled_probabilities(zeros, 2.0, &fallback);
  CHECK(fallback);
  for (int k = 0; k < 3; ++k) CHECK(p[k] == doctest::Approx(2.0 / 3.0));
  p = rescaled_probabilities(zeros, 9.0, &fallback);
  CHECK(p[0] == 1.0);
}

TEST_CASE("unclipped priors sum to the target") {
  const std::vector<double> alpha{0.1, 0.4, 0.2, 0.3, 0.25, 0.15};
  const VectorXd p = rescaled_probabilities(alpha, 3.0);
  CHECK(p.maxCoeff() < 1.0);
  CHECK(p.sum() == doctest::Approx(3.0));
}

TEST_CASE("region and basis priors follow the column correlations") {
  set_log_level(LogLevel::Quiet);
  // 6 columns in 3 regions; correlation |K^T b| = (1,3,2,2,0,0)
  MatrixXd K = MatrixXd::Identity(6, 6);
  VectorXd b(6);
  b << 1, -3, 2, 2, 0, 0;
  const auto layout = std::make_shared<const ColumnLayout>(ColumnLayout::uniform(6, 3));
  const auto sys = ResidualSystem::from_dense(K, b, MatrixXd::Zero(0, 6), VectorXd(0), layout);

  const VectorXd region = region_prior(sys, 1.5);
  CHECK(region[0] == doctest::Approx(0.75));
  CHECK(region[1] == doctest::Approx(0.75));
  CHECK(region[2] == 0.0);

  const VectorXd first = basis_prior(sys, 0, 1.0);
  CHECK(first[0] == doctest::Approx(0.25));
  CHECK(first[1] == doctest::Approx(0.75));

  const Priors all = compute_priors(sys, 1.5, 1.0);
  CHECK_FALSE(all.region_fallback);
  CHECK(all.basis_fallbacks == 1);
  CHECK(all.basis[1] == doctest::Approx(0.75));
  CHECK(all.basis[2] == doctest::Approx(0.5));
  // region 2 has zero correlations: uniform N_basis / 2
  CHECK(all.basis[4] == doctest::Approx(0.5));
  CHECK(all.basis[5] == doctest::Approx(0.5));
  set_log_level(LogLevel::Warning);
}

TEST_CASE("all-zero residual falls back to uniform priors") {
  set_log_level(LogLevel::Quiet);
  const auto layout = std::make_shared<const ColumnLayout>(ColumnLayout::uniform(4, 2));
  const auto sys =
      ResidualSystem::from_dense(MatrixXd::Identity(4, 4), VectorXd::Zero(4), MatrixXd::Zero(0, 4), VectorXd(0), layout);
  const Priors p = compute_priors(sys, 1.0, 1.0);
  CHECK(p.region_fallback);
  CHECK(p.basis_fallbacks == 2);
  CHECK(p.region[0] == doctest::Approx(0.5));
  CHECK(p.basis[3] == doctest::Approx(0.5));
  set_log_level(LogLevel::Warning);
}
