#pragma once

#include <functional>
#include <memory>
#include <mutex>
#include <random>
#include <string>
#include <vector>

#include "msbayes/coarse.hpp"
#include "msbayes/config.hpp"
#include "msbayes/observation.hpp"
#include "msbayes/residual.hpp"
#include "msbayes/sampler.hpp"

namespace msbayes {

struct PipelineOptions {
  int threads = 1;
  std::string cache_dir;  // empty: no basis cache
};

/// Shared, immutable setup of one run: grids, field, operators, reference,
/// offline basis, observations and the per-interval sensitivities.
class Pipeline {
 public:
  Pipeline(const RunConfig& config, const PipelineOptions& options = {});
  Pipeline(const Pipeline&) = delete;
  Pipeline& operator=(const Pipeline&) = delete;

  const RunConfig& config() const { return config_; }
  const FineGrid& grid() const { return grid_; }
  const CoarseGrid& coarse() const { return coarse_; }
  const TimeGrid& time() const { return time_; }
  const PermeabilityField& field() const { return field_; }
  const FineProblem& problem() const { return *problem_; }
  const std::vector<VectorXd>& reference() const { return reference_; }
  const ObservationSet& observations() const { return obs_; }

  const OfflineBasis& basis(int interval) const { return *basis_[interval]; }
  const CoarseSpace& space(int interval) const { return *spaces_[interval]; }
  const std::shared_ptr<const IntervalSensitivity>& sensitivity(int interval) const { return sensitivity_[interval]; }
  const GalerkinStepper& fixed_stepper(int interval) const { return *fixed_[interval]; }
  /// Galerkin stepper on the whole offline space, built on first use.
  const GalerkinStepper& full_stepper(int interval) const;

  /// Median |b| over the intervals of the FixedOnly chain.
  double base_scale() const { return base_scale_; }
  /// Config sampler with sigma_L, sigma_d resolved to absolute values.
  SamplerConfig sampler() const { return resolve(config_.sampler.sigma_L, config_.sampler.sigma_d); }
  SamplerConfig resolve(double sigma_L, double sigma_d) const;
  /// Fraction of oversampled-PoU dominance (spacetime basis only, else -1).
  double dominance_fraction() const { return dominance_; }

 private:
  RunConfig config_;
  FineGrid grid_;
  CoarseGrid coarse_;
  TimeGrid time_;
  PermeabilityField field_;
  SourceSpec source_;
  std::unique_ptr<FineProblem> problem_;
  std::vector<VectorXd> reference_;
  std::vector<std::shared_ptr<const OfflineBasis>> basis_;
  std::vector<std::shared_ptr<const CoarseSpace>> spaces_;
  ObservationSet obs_;
  std::vector<std::shared_ptr<const IntervalSensitivity>> sensitivity_;
  std::vector<std::unique_ptr<GalerkinStepper>> fixed_;
  mutable std::vector<std::unique_ptr<GalerkinStepper>> full_;
  mutable std::mutex full_mutex_;
  double base_scale_ = 1.0;
  double dominance_ = -1.0;
};

/// Builds the permeability field described by a config (file or generator).
PermeabilityField make_field(const RunConfig& config);
SourceSpec make_source(const RunConfig& config, const FineGrid& grid, const CoarseGrid& coarse);

struct IntervalOutput {
  IndicatorState state;                  // empty vectors for FixedOnly / FullOffline
  std::vector<VectorXd> trajectory;      // chosen reconstruction at the interval's steps
  VectorXd alternative_end;              // other reconstruction at T_n (empty when not computed)
  double residual_norm = 0.0;            // |stacked sqrt(dt) fine residual| of the trajectory
  double fixed_residual_norm = 0.0;      // |b|
  int selected_regions = 0;
  int candidate_columns = 0;             // additional columns in selected regions
};

/// One interval: fixed solve, residual system, selection, corrected solve.
/// u_start is the carried state at T_{n-1}.
IntervalOutput run_interval(const Pipeline& pipeline, int interval, const VectorXd& u_start, Method method,
                            const SamplerConfig& sampler, std::mt19937_64& rng, bool compute_alternative = false);

/// Residual system of the fixed solution started from u_start.
ResidualSystem interval_system(const Pipeline& pipeline, int interval, const VectorXd& u_start);

struct ChainResult {
  VectorXd final_state;
  VectorXd final_alternative;
  std::vector<IntervalOutput> intervals;  // trajectories dropped, end state kept
  std::vector<VectorXd> end_states;
};

std::mt19937_64 sample_rng(std::uint64_t seed, int sample);

ChainResult run_chain(const Pipeline& pipeline, Method method, const SamplerConfig& sampler, int sample,
                      bool compute_alternative = false);

struct SampleSummary {
  int index = 0;
  bool failed = false;
  std::string error;
  ChainResult chain;
  double l2_error = 0.0;
  double obs_error = 0.0;
};

struct EnsembleResult {
  Method method = Method::MCMC;
  SamplerConfig sampler;
  std::vector<SampleSummary> samples;
  VectorXd mean;
  VectorXd std;
  VectorXd mean_alternative;  // empty unless alternatives were computed
  double l2_error = 0.0;      // of the mean, percent
  double obs_error = 0.0;     // of the mean
  double alternative_l2_error = -1.0;
  double alternative_obs_error = -1.0;
  double selection_percentage = 0.0;
  double mean_selected_regions = 0.0;
  int failures = 0;

  int successes() const { return static_cast<int>(samples.size()) - failures; }
};

/// n_samples independent chains; more than 10% failures is a NumericalError.
/// on_sample is called (serialized) as each sample completes.
EnsembleResult run_ensemble(const Pipeline& pipeline, Method method, const SamplerConfig& sampler, int n_samples,
                            int threads, bool compute_alternative = false,
                            const std::function<void(const SampleSummary&)>& on_sample = {});

/// |u - ref|_M / |ref|_M in percent; DataError for a zero reference.
double relative_l2_error(const VectorXd& u, const VectorXd& reference, const SpMat& M);

/// metrics.txt, mean/std CSV and PNG, samples/, selection.csv, residuals.csv.
void write_results(const std::string& dir, const Pipeline& pipeline, const EnsembleResult& result);
void write_sample(const std::string& dir, const Pipeline& pipeline, const SampleSummary& sample);

struct TableCell {
  double sigma_L_multiplier = 0.0;
  double sigma_d_multiplier = 0.0;
  double selection_percentage = 0.0;
  double l2_error = 0.0;
  double obs_error = 0.0;
};

/// MCMC ensembles over the experiment sigma grid (row-major in sigma_L).
std::vector<TableCell> run_table_sweep(const Pipeline& pipeline, int n_samples, int threads);

/// Inflow-outflow variant of a config: coarse-indicator source with
/// observations on the outflow elements.
RunConfig example2_config(RunConfig config);

/// Writes table1.csv (selection %), table2.csv (L2 %), table3.csv (max obs error).
void write_tables(const std::string& dir, const Pipeline& pipeline, const std::vector<TableCell>& cells);

}  // namespace msbayes
