#pragma once

#include <Eigen/Cholesky>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "msbayes/prior.hpp"
#include "msbayes/residual.hpp"

namespace msbayes {

struct SamplerConfig {
  double sigma_L = 1.0;
  double sigma_d = 1.0;  // +inf drops the data term
  double n_omega = 27.0;
  double n_basis = 9.0;
  double prior_var = 1e6;
  double ridge = 1e-12;
  std::uint64_t seed = 1;
  int n_samples = 100;
  double data_noise = 0.0;
  int sweeps = 1;

  /// Throws ConfigError when a scale is not positive or a count is below 1.
  void validate() const;
  double residual_weight() const { return 1.0 / (sigma_L * sigma_L); }
  double data_weight() const { return 1.0 / (sigma_d * sigma_d); }
};

/// Region indicators J, column indicators I and the coefficients of the
/// active columns (ascending column order).
struct IndicatorState {
  std::vector<char> J;
  std::vector<char> I;
  std::vector<int> active;
  VectorXd beta_plus;

  int num_active() const { return static_cast<int>(active.size()); }
  /// I implies J, active matches I, and beta_plus has one entry per active column.
  bool consistent(const ColumnLayout& layout) const;
  void sync_active();
};

/// Factorization of the Jacobi-scaled posterior precision
/// D^-1 (K_a^T K_a / sL^2 + S_a^T S_a / sd^2 + (1/tau^2 + eps) I) D^-1.
struct PosteriorFactor {
  std::vector<int> active;
  VectorXd scale;  // D
  Eigen::LLT<MatrixXd> llt;
  VectorXd mode;
  double ridge = 0.0;
};

/// Raises eps tenfold until the factorization succeeds; NumericalError past 1e-6.
PosteriorFactor factor_posterior(const ResidualSystem& system, std::span<const int> active, const SamplerConfig& config);

VectorXd posterior_mode(const ResidualSystem& system, std::span<const int> active, const SamplerConfig& config);

/// Mode plus a draw with covariance equal to the inverse precision.
VectorXd sample_beta(const ResidualSystem& system, std::span<const int> active, const SamplerConfig& config,
                     std::mt19937_64& rng);

/// p = odds / (1 + odds), odds = a/(1-a) exp(-dR2/(2 sL^2) - dE2/(2 sd^2)),
/// with the prior a clipped to [1e-12, 1 - 1e-12].
double gibbs_probability(double prior, double delta_residual2, double delta_mismatch2, const SamplerConfig& config);

/// Resamples I for one column with both modes solved from scratch. The
/// column's region must be selected. beta_plus is set to the mode of the new mask.
IndicatorState gibbs_step(const ResidualSystem& system, const IndicatorState& state, int column, const Priors& priors,
                          const SamplerConfig& config, std::mt19937_64& rng, double* probability = nullptr);

/// Draws J from the region prior, then I from the basis prior in selected regions.
IndicatorState draw_indicators(const ResidualSystem& system, const Priors& priors, std::mt19937_64& rng);

IndicatorState sequential_sample(const ResidualSystem& system, const Priors& priors, const SamplerConfig& config,
                                 std::mt19937_64& rng);

/// Prior draw followed by config.sweeps Gibbs sweeps (region-major,
/// eigen-index minor) and a final coefficient draw.
IndicatorState mcmc_sample(const ResidualSystem& system, const Priors& priors, const SamplerConfig& config,
                           std::mt19937_64& rng);

/// Posterior modes over a changing active set. Keeps an upper Cholesky
/// factor of the scaled precision and updates it by bordering (add) and
/// Givens rotations (remove); single-column what-if modes cost O(n^2).
class ActiveSetSolver {
 public:
  struct Evaluation {
    std::vector<int> columns;  // in solver order
    VectorXd beta;
    double residual2 = 0.0;
    double mismatch2 = 0.0;
  };

  ActiveSetSolver(const ResidualSystem& system, const SamplerConfig& config, std::vector<int> active);

  const Evaluation& current() const { return current_; }
  Evaluation evaluate_without(int column) const;
  Evaluation evaluate_with(int column) const;
  void add(int column);
  void remove(int column);

  int size() const { return static_cast<int>(cols_.size()); }
  double ridge() const { return ridge_; }

 private:
  double scaled_entry(int i, int j) const;
  double scaled_rhs(int c) const;
  VectorXd scaled_column(int c) const;
  void set_ridge(double ridge);
  void rebuild(std::vector<int> cols);
  void refresh();
  void reserve(int n);
  Evaluation evaluate(std::vector<int> cols, const VectorXd& scaled_mode) const;
  Evaluation evaluate_beta(std::vector<int> cols, VectorXd beta) const;
  int position(int column) const;

  const ResidualSystem* system_;
  SamplerConfig config_;
  double ridge_;
  VectorXd diag_;  // unscaled precision diagonal per column
  VectorXd scale_;
  std::vector<int> cols_;
  MatrixXd R_;  // capacity x capacity, leading size() block is the factor
  VectorXd q_;  // R^-T rhs
  VectorXd y_;  // scaled mode
  Evaluation current_;
};

}  // namespace msbayes
