#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <limits>

#include "msbayes/errors.hpp"
#include "msbayes/log.hpp"
#include "msbayes/sampler.hpp"
#include "test_support.hpp"

using namespace msbayes;

namespace {

std::vector<int> iota(int n) {
  std::vector<int> v(n);
  for (int k = 0; k < n; ++k) v[k] = k;
  return v;
}

// Minimizer of |K b - b0|^2/sL^2 + |S b - g|^2/sd^2 + lam |b|^2 through the
// pseudo-inverse of the stacked weighted least-squares matrix.
VectorXd pinv_oracle(const MatrixXd& K, const VectorXd& b, const MatrixXd& S, const VectorXd& g,
                     const SamplerConfig& cfg) {
  const int n = static_cast<int>(K.cols());
  const double lam = 1.0 / cfg.prior_var + cfg.ridge;
  MatrixXd A(K.rows() + S.rows() + n, n);
  VectorXd y(A.rows());
  A << K / cfg.sigma_L, S / cfg.sigma_d, std::sqrt(lam) * MatrixXd::Identity(n, n);
  y << b / cfg.sigma_L, g / cfg.sigma_d, VectorXd::Zero(n);
  return A.completeOrthogonalDecomposition().pseudoInverse() * y;
}

struct RandomSystem {
  MatrixXd K, S;
  VectorXd b, g;
  ResidualSystem sys;
};

RandomSystem random_system(std::mt19937_64& rng, int rows, int cols, int obs, int regions) {
  RandomSystem r;
  r.K = testing::random_matrix(rows, cols, rng);
  r.b = testing::random_vector(rows, rng);
  r.S = testing::random_matrix(obs, cols, rng);
  r.g = testing::random_vector(obs, rng);
  auto layout = std::make_shared<const ColumnLayout>(ColumnLayout::uniform(cols, regions));
  r.sys = ResidualSystem::from_dense(r.K, r.b, r.S, r.g, layout);
  return r;
}

IndicatorState full_state(const ResidualSystem& sys) {
  IndicatorState s;
  s.J.assign(sys.layout().num_regions(), 1);
  s.I.assign(sys.num_columns(), 0);
  s.sync_active();
  return s;
}

}  // namespace

TEST_CASE("posterior mode matches a pseudo-inverse oracle") {
  std::mt19937_64 rng(2024);
  for (int trial = 0; trial < 20; ++trial) {
    CAPTURE(trial);
    const int cols = 3 + trial % 7;
    const auto r = random_system(rng, 30, cols, 3, 1);
    SamplerConfig cfg;
    cfg.sigma_L = 0.5 + 0.1 * trial;
    cfg.sigma_d = trial % 3 == 0 ? 0.05 : 2.0;
    const VectorXd mode = posterior_mode(r.sys, iota(cols), cfg);
    const VectorXd oracle = pinv_oracle(r.K, r.b, r.S, r.g, cfg);
    CHECK((mode - oracle).norm() <= 1e-8 * oracle.norm());
  }
}

TEST_CASE("mode on a column subset equals the oracle on the submatrix") {
  std::mt19937_64 rng(5);
  const auto r = random_system(rng, 25, 8, 2, 2);
  const std::vector<int> active{1, 4, 6};
  SamplerConfig cfg;
  MatrixXd Ks(25, 3), Ss(2, 3);
  for (int k = 0; k < 3; ++k) {
    Ks.col(k) = r.K.col(active[k]);
    Ss.col(k) = r.S.col(active[k]);
  }
  const VectorXd mode = posterior_mode(r.sys, active, cfg);
  CHECK((mode - pinv_oracle(Ks, r.b, Ss, r.g, cfg)).norm() <= 1e-10);
  CHECK(posterior_mode(r.sys, std::vector<int>{}, cfg).size() == 0);
}

TEST_CASE("infinite sigma_d drops the data term") {
  std::mt19937_64 rng(6);
  const auto r = random_system(rng, 20, 5, 3, 1);
  SamplerConfig data_free;
  data_free.sigma_d = std::numeric_limits<double>::infinity();
  SamplerConfig weak;
  weak.sigma_d = 1e8;
  const VectorXd a = posterior_mode(r.sys, iota(5), data_free);
  const VectorXd b = posterior_mode(r.sys, iota(5), weak);
  CHECK((a - b).norm() <= 1e-6 * a.norm());
  const VectorXd oracle = pinv_oracle(r.K, r.b, MatrixXd::Zero(0, 5), VectorXd(0), data_free);
  CHECK((a - oracle).norm() <= 1e-10 * oracle.norm());
}

TEST_CASE("gibbs probability matches a direct scalar evaluation") {
  std::mt19937_64 rng(77);
  for (int trial = 0; trial < 10; ++trial) {
    CAPTURE(trial);
    // two columns, one region; column 0 is always on
    MatrixXd K = testing::random_matrix(6, 2, rng);
    VectorXd b = testing::random_vector(6, rng);
    MatrixXd S = testing::random_matrix(1, 2, rng);
    VectorXd g = testing::random_vector(1, rng);
    auto layout = std::make_shared<const ColumnLayout>(ColumnLayout::uniform(2, 1));
    const auto sys = ResidualSystem::from_dense(K, b, S, g, layout);
    SamplerConfig cfg;
    cfg.sigma_L = 1.0 + 0.3 * trial;
    cfg.sigma_d = 0.7 + 0.2 * trial;
    cfg.prior_var = std::numeric_limits<double>::infinity();
    cfg.ridge = 0.0;

    // closed-form modes
    const double wl = 1.0 / (cfg.sigma_L * cfg.sigma_L);
    const double wd = 1.0 / (cfg.sigma_d * cfg.sigma_d);
    const Eigen::Matrix2d H = wl * K.transpose() * K + wd * S.transpose() * S;
    const Eigen::Vector2d rhs = wl * K.transpose() * b + wd * S.transpose() * g;
    const double det = H(0, 0) * H(1, 1) - H(0, 1) * H(1, 0);
    const Eigen::Vector2d beta_on((H(1, 1) * rhs[0] - H(0, 1) * rhs[1]) / det,
                                  (H(0, 0) * rhs[1] - H(1, 0) * rhs[0]) / det);
    const double beta_off = rhs[0] / H(0, 0);
    const double r_on = (K * beta_on - b).squaredNorm();
    const double e_on = (S * beta_on - g).squaredNorm();
    const double r_off = (K.col(0) * beta_off - b).squaredNorm();
    const double e_off = (S.col(0) * beta_off - g).squaredNorm();
    const double prior = 0.3;
    const double odds = prior / (1.0 - prior) * std::exp(-(r_on - r_off) * wl / 2.0 - (e_on - e_off) * wd / 2.0);
    const double expected = odds / (1.0 + odds);

    Priors priors;
    priors.region = VectorXd::Ones(1);
    priors.basis = VectorXd::Constant(2, prior);
    IndicatorState state = full_state(sys);
    state.I[0] = 1;
    state.sync_active();
    double p = -1.0;
    std::mt19937_64 local(trial);
    gibbs_step(sys, state, 1, priors, cfg, local, &p);
    CHECK(std::abs(p - expected) <= 1e-12);
    CHECK(std::abs(gibbs_probability(prior, r_on - r_off, e_on - e_off, cfg) - expected) <= 1e-12);
  }
}

TEST_CASE("gibbs probability clamps the prior and stays finite") {
  SamplerConfig cfg;
  CHECK(gibbs_probability(0.0, 0.0, 0.0, cfg) == doctest::Approx(1e-12));
  CHECK(gibbs_probability(1.0, 0.0, 0.0, cfg) == doctest::Approx(1.0 - 1e-12));
  CHECK(gibbs_probability(0.5, -1e6, 0.0, cfg) == 1.0);
  CHECK(gibbs_probability(0.5, 1e6, 0.0, cfg) == 0.0);
  CHECK(gibbs_probability(0.5, 0.0, 0.0, cfg) == doctest::Approx(0.5));
  cfg.sigma_d = std::numeric_limits<double>::infinity();
  CHECK(gibbs_probability(0.5, 0.0, 1e9, cfg) == doctest::Approx(0.5));
}

TEST_CASE("draws collapse to the mode as the scales vanish") {
  MatrixXd K(2, 2);
  K << 2, 1, 1, 3;
  const VectorXd b = VectorXd::Ones(2);
  MatrixXd S(1, 2);
  S << 1, 1;
  const VectorXd g = VectorXd::Constant(1, 0.5);
  const auto sys = ResidualSystem::from_dense(K, b, S, g);
  SamplerConfig cfg;
  cfg.sigma_L = 1e-8;
  cfg.sigma_d = 1e-8;
  std::mt19937_64 rng(1);
  const VectorXd mode = posterior_mode(sys, iota(2), cfg);
  const VectorXd draw = sample_beta(sys, iota(2), cfg, rng);
  CHECK((draw - mode).norm() < 1e-3 * mode.norm());
}

TEST_CASE("draw covariance is the inverse precision") {
  std::mt19937_64 rng(9);
  const auto r = random_system(rng, 10, 3, 1, 1);
  SamplerConfig cfg;
  const auto f = factor_posterior(r.sys, iota(3), cfg);
  const MatrixXd H = r.K.transpose() * r.K + r.S.transpose() * r.S + (1.0 / cfg.prior_var + f.ridge) * MatrixXd::Identity(3, 3);
  const MatrixXd cov = H.inverse();
  const int n = 20000;
  MatrixXd acc = MatrixXd::Zero(3, 3);
  for (int k = 0; k < n; ++k) {
    const VectorXd d = sample_beta(r.sys, iota(3), cfg, rng) - f.mode;
    acc += d * d.transpose();
  }
  acc /= n;
  for (int i = 0; i < 3; ++i) {
    CHECK(std::abs(acc(i, i) / cov(i, i) - 1.0) < 0.05);
  }
}

TEST_CASE("ridge escalation on dependent columns") {
  MatrixXd K(4, 2);
  K << 1, 1, 2, 2, 0, 0, 1, 1;
  const auto sys = ResidualSystem::from_dense(K, VectorXd::Ones(4), MatrixXd::Zero(0, 2), VectorXd(0));
  SamplerConfig cfg;
  cfg.prior_var = std::numeric_limits<double>::infinity();
  cfg.ridge = 0.0;
  const auto f = factor_posterior(sys, iota(2), cfg);
  CHECK(f.ridge > 0.0);
  CHECK(f.ridge <= 1e-6);
  CHECK(f.mode.allFinite());
  // symmetric split of the shared direction
  CHECK(f.mode[0] == doctest::Approx(f.mode[1]).epsilon(1e-6));
}

TEST_CASE("active-set solver tracks the dense modes") {
  std::mt19937_64 rng(31);
  const auto r = random_system(rng, 60, 24, 3, 4);
  SamplerConfig cfg;
  cfg.sigma_L = 0.3;
  cfg.sigma_d = 0.1;
  std::vector<int> active{0, 5, 9, 17};
  ActiveSetSolver solver(r.sys, cfg, active);
  std::vector<char> on(24, 0);
  for (int c : active) on[c] = 1;
  std::uniform_int_distribution<int> pick(0, 23);
  for (int step = 0; step < 60; ++step) {
    const int c = pick(rng);
    // what-if evaluation first
    const auto alt = on[c] ? solver.evaluate_without(c) : solver.evaluate_with(c);
    const VectorXd dense = posterior_mode(r.sys, alt.columns, cfg);
    CHECK((alt.beta - dense).norm() <= 1e-8 * std::max(1.0, dense.norm()));
    if (on[c]) {
      solver.remove(c);
    } else {
      solver.add(c);
    }
    on[c] = !on[c];
    const auto& cur = solver.current();
    const VectorXd mode = posterior_mode(r.sys, cur.columns, cfg);
    CHECK((cur.beta - mode).norm() <= 1e-8 * std::max(1.0, mode.norm()));
    CHECK(cur.residual2 == doctest::Approx(r.sys.residual(cur.columns, cur.beta).squaredNorm()));
    CHECK(solver.size() == std::count(on.begin(), on.end(), 1));
  }
  CHECK_THROWS_AS(solver.evaluate_without(on[3] ? 99 : 3), SequencingError);
}

TEST_CASE("incremental MCMC sweep agrees with dense gibbs steps") {
  std::mt19937_64 gen(12);
  const auto r = random_system(gen, 40, 12, 2, 3);
  SamplerConfig cfg;
  cfg.sigma_L = 0.8;
  cfg.sigma_d = 0.5;
  Priors priors;
  priors.region = VectorXd::Constant(3, 0.9);
  priors.basis = VectorXd::Constant(12, 0.5);
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    std::mt19937_64 a(seed);
    const IndicatorState fast = mcmc_sample(r.sys, priors, cfg, a);

    std::mt19937_64 b(seed);
    IndicatorState slow = draw_indicators(r.sys, priors, b);
    for (int reg = 0; reg < 3; ++reg) {
      if (!slow.J[reg]) continue;
      for (int c : r.sys.layout().columns_of_region[reg]) slow = gibbs_step(r.sys, slow, c, priors, cfg, b);
    }
    slow.beta_plus = sample_beta(r.sys, slow.active, cfg, b);
    CHECK(fast.I == slow.I);
    CHECK(fast.J == slow.J);
    CHECK((fast.beta_plus - slow.beta_plus).norm() <= 1e-10 * std::max(1.0, slow.beta_plus.norm()));
    CHECK(fast.consistent(r.sys.layout()));
  }
}

TEST_CASE("prior draws and implication invariant") {
  std::mt19937_64 gen(3);
  const auto r = random_system(gen, 10, 9, 1, 3);
  Priors priors;
  priors.region = VectorXd::Zero(3);
  priors.basis = VectorXd::Ones(9);
  std::mt19937_64 rng(1);
  SamplerConfig cfg;
  IndicatorState s = sequential_sample(r.sys, priors, cfg, rng);
  CHECK(s.active.empty());
  CHECK(s.beta_plus.size() == 0);
  CHECK(s.consistent(r.sys.layout()));

  priors.region << 1.0, 0.0, 1.0;
  s = draw_indicators(r.sys, priors, rng);
  CHECK(s.active == std::vector<int>{0, 1, 2, 6, 7, 8});
  CHECK_THROWS_AS(gibbs_step(r.sys, s, 4, priors, cfg, rng), SequencingError);

  priors.region = VectorXd::Constant(3, 0.5);
  priors.basis = VectorXd::Constant(9, 0.5);
  std::mt19937_64 x(42);
  std::mt19937_64 y(42);
  const auto s1 = mcmc_sample(r.sys, priors, cfg, x);
  const auto s2 = mcmc_sample(r.sys, priors, cfg, y);
  CHECK(s1.I == s2.I);
  CHECK(s1.J == s2.J);
  CHECK((s1.beta_plus - s2.beta_plus).norm() == 0.0);
  for (int c = 0; c < 9; ++c) {
    if (s1.I[c]) CHECK(s1.J[r.sys.layout().region_of[c]]);
  }
}

TEST_CASE("prior-limit selection frequencies") {
  // with huge scales the likelihood ratio is 1 and each column is kept with its prior
  std::mt19937_64 gen(8);
  const auto r = random_system(gen, 20, 4, 1, 1);
  SamplerConfig cfg;
  cfg.sigma_L = 1e8;
  cfg.sigma_d = 1e8;
  Priors priors;
  priors.region = VectorXd::Ones(1);
  priors.basis.resize(4);
  priors.basis << 0.1, 0.4, 0.7, 0.95;
  const int n = 2000;
  VectorXd freq = VectorXd::Zero(4);
  std::mt19937_64 rng(5);
  for (int k = 0; k < n; ++k) {
    const auto s = mcmc_sample(r.sys, priors, cfg, rng);
    for (int c = 0; c < 4; ++c) freq[c] += s.I[c];
  }
  freq /= n;
  for (int c = 0; c < 4; ++c) {
    const double p = priors.basis[c];
    CHECK(std::abs(freq[c] - p) <= 3.0 * std::sqrt(p * (1 - p) / n));
  }
}

TEST_CASE("config validation") {
  SamplerConfig cfg;
  CHECK_NOTHROW(cfg.validate());
  cfg.sigma_L = 0.0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = {};
  cfg.ridge = 1e-3;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = {};
  cfg.n_samples = 0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = {};
  cfg.sigma_d = std::numeric_limits<double>::infinity();
  CHECK_NOTHROW(cfg.validate());
}
