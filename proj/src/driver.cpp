#include "msbayes/driver.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "msbayes/errors.hpp"
#include "msbayes/io.hpp"
#include "msbayes/log.hpp"
#include "msbayes/parallel.hpp"
#include "msbayes/prior.hpp"
#include "msbayes/spacetime.hpp"

namespace msbayes {

PermeabilityField make_field(const RunConfig& config) {
  PermeabilityField field;
  if (!config.field_path.empty()) {
    field = load_field(config.field_path, config.n_fine);
  } else {
    FieldGeneratorParams params = config.field;
    params.n = config.n_fine;
    field = generate_field(params);
  }
  field.modulation = config.modulation;
  field.rate = config.rate;
  return field;
}

SourceSpec make_source(const RunConfig& config, const FineGrid& grid, const CoarseGrid& coarse) {
  if (config.source_kind == "inflow_outflow") {
    const auto pos = element_ids(coarse, config.inflow);
    const auto neg = element_ids(coarse, config.outflow);
    return SourceSpec::coarse_indicator(grid, coarse, pos, neg);
  }
  return SourceSpec::constant(grid, config.source_value);
}

namespace {

std::shared_ptr<const OfflineBasis> standard_basis(const Pipeline& p, const RunConfig& config,
                                                   const PipelineOptions& options) {
  BasisCacheKey key{p.field().hash(), config.n_fine, config.n_coarse, config.l_perm, config.l_add};
  std::string path;
  if (!options.cache_dir.empty()) {
    ensure_directory(options.cache_dir);
    path = (std::filesystem::path(options.cache_dir) / key.file_name()).string();
    if (auto cached = load_basis_cache(path, key, p.grid().num_nodes())) {
      return std::make_shared<const OfflineBasis>(std::move(*cached));
    }
  }
  auto basis = std::make_shared<const OfflineBasis>(
      build_standard_basis(p.grid(), p.coarse(), p.field(), config.l_perm, config.l_add, options.threads));
  if (!path.empty()) save_basis_cache(path, key, *basis);
  return basis;
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  if (n == 0) return 0.0;
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace

Pipeline::Pipeline(const RunConfig& config, const PipelineOptions& options)
    : config_(config),
      grid_(config.n_fine),
      coarse_(grid_, config.n_coarse),
      time_(config.t_final, config.dt, config.intervals) {
  config_.validate();
  field_ = make_field(config_);
  source_ = make_source(config_, grid_, coarse_);
  problem_ = std::make_unique<FineProblem>(grid_, field_, source_);
  reference_ = solve_reference(*problem_, time_);

  if (config_.basis_source == "spacetime") {
    SpacetimeParams params;
    params.l_perm = config_.l_perm;
    params.l_add = config_.l_add;
    params.layers = config_.layers;
    params.buffer = config_.buffer;
    params.extension_steps = config_.extension_steps;
    params.seed = config_.basis_seed;
    SpacetimeBasis st = build_spacetime_basis(grid_, coarse_, field_, time_, params, options.threads);
    dominance_ = st.dominance_fraction;
    for (auto& b : st.intervals) basis_.push_back(std::make_shared<const OfflineBasis>(std::move(b)));
  } else {
    basis_.assign(time_.intervals(), standard_basis(*this, config_, options));
  }

  obs_.regions = element_ids(coarse_, config_.obs_regions);
  obs_.D = build_observation_matrix(grid_, coarse_, obs_.regions);
  obs_.noise = config_.sampler.data_noise;
  std::seed_seq seq{static_cast<std::uint32_t>(config_.sampler.seed),
                    static_cast<std::uint32_t>(config_.sampler.seed >> 32), 0x0b5e7u};
  std::mt19937_64 rng(seq);
  obs_.data = synthesize_data(reference_, obs_.D, time_, obs_.noise, rng);

  spaces_.resize(time_.intervals());
  sensitivity_.resize(time_.intervals());
  fixed_.resize(time_.intervals());
  full_.resize(time_.intervals());
  for (int n = 0; n < time_.intervals(); ++n) {
    if (n > 0 && basis_[n] == basis_[n - 1]) {
      spaces_[n] = spaces_[n - 1];
    } else {
      spaces_[n] = std::make_shared<const CoarseSpace>(*problem_, *basis_[n]);
    }
    auto layout = std::make_shared<const ColumnLayout>(ColumnLayout::from_basis(*basis_[n]));
    sensitivity_[n] = build_interval_sensitivity(*problem_, basis_[n]->add, obs_.D, time_, n, std::move(layout));
    fixed_[n] = std::make_unique<GalerkinStepper>(*spaces_[n], spaces_[n]->permanent_columns(), time_, n);
  }

  // Calibration scale: residual norms along the FixedOnly chain.
  std::vector<double> norms;
  VectorXd u = VectorXd::Zero(grid_.num_nodes());
  for (int n = 0; n < time_.intervals(); ++n) {
    const auto traj = fixed_[n]->trajectory(u);
    const ResidualSystem sys = build_residual_system(sensitivity_[n], *problem_, basis_[n]->add, time_, traj, u,
                                                     obs_.D, obs_.data[n]);
    norms.push_back(std::sqrt(sys.b_norm2));
    u = traj.back();
  }
  base_scale_ = median(norms);
  if (!(base_scale_ > 0.0)) base_scale_ = 1.0;
}

const GalerkinStepper& Pipeline::full_stepper(int interval) const {
  std::lock_guard lock(full_mutex_);
  if (!full_[interval]) {
    full_[interval] = std::make_unique<GalerkinStepper>(*spaces_[interval], spaces_[interval]->all_columns(), time_,
                                                        interval);
  }
  return *full_[interval];
}

SamplerConfig Pipeline::resolve(double sigma_L, double sigma_d) const {
  SamplerConfig s = config_.sampler;
  const double scale = config_.sigma_mode == SigmaMode::Relative ? base_scale_ : 1.0;
  s.sigma_L = sigma_L * scale;
  s.sigma_d = sigma_d * scale;
  return s;
}

ResidualSystem interval_system(const Pipeline& p, int interval, const VectorXd& u_start) {
  const auto traj = p.fixed_stepper(interval).trajectory(u_start);
  return build_residual_system(p.sensitivity(interval), p.problem(), p.basis(interval).add, p.time(), traj, u_start,
                               p.observations().D, p.observations().data[interval]);
}

namespace {

double trajectory_residual(const Pipeline& p, int interval, const std::vector<VectorXd>& traj, const VectorXd& u_start) {
  double total = 0.0;
  for (const auto& r : fine_residual_blocks(p.problem(), p.time(), interval, traj, u_start)) total += r.squaredNorm();
  return std::sqrt(p.time().dt() * total);
}

VectorXd prolong_additional(const SpMat& add, std::span<const int> active, const VectorXd& beta) {
  VectorXd u = VectorXd::Zero(add.rows());
  for (std::size_t k = 0; k < active.size(); ++k) {
    const double c = beta[static_cast<Eigen::Index>(k)];
    for (SpMat::InnerIterator it(add, active[k]); it; ++it) u[it.row()] += c * it.value();
  }
  return u;
}

}  // namespace

IntervalOutput run_interval(const Pipeline& p, int interval, const VectorXd& u_start, Method method,
                            const SamplerConfig& sampler, std::mt19937_64& rng, bool compute_alternative) {
  if (u_start.size() != p.grid().num_nodes()) {
    throw SequencingError("interval " + std::to_string(interval) + " started without the previous corrected state");
  }
  IntervalOutput out;
  const auto fixed_traj = p.fixed_stepper(interval).trajectory(u_start);
  if (method == Method::FixedOnly || method == Method::FullOffline) {
    out.trajectory = method == Method::FixedOnly ? fixed_traj : p.full_stepper(interval).trajectory(u_start);
    double fixed_total = 0.0;
    for (const auto& r : fine_residual_blocks(p.problem(), p.time(), interval, fixed_traj, u_start)) {
      fixed_total += r.squaredNorm();
    }
    out.fixed_residual_norm = std::sqrt(p.time().dt() * fixed_total);
    out.residual_norm = trajectory_residual(p, interval, out.trajectory, u_start);
    return out;
  }

  const ResidualSystem sys = build_residual_system(p.sensitivity(interval), p.problem(), p.basis(interval).add,
                                                   p.time(), fixed_traj, u_start, p.observations().D,
                                                   p.observations().data[interval]);
  out.fixed_residual_norm = std::sqrt(sys.b_norm2);
  const Priors priors = compute_priors(sys, sampler.n_omega, sampler.n_basis);
  out.state = method == Method::MCMC ? mcmc_sample(sys, priors, sampler, rng) : sequential_sample(sys, priors, sampler, rng);
  for (int r = 0; r < sys.layout().num_regions(); ++r) {
    if (!out.state.J[r]) continue;
    ++out.selected_regions;
    out.candidate_columns += static_cast<int>(sys.layout().columns_of_region[r].size());
  }

  const auto& active = out.state.active;
  const bool galerkin = p.config().reconstruction == Reconstruction::Galerkin;
  auto sampled = [&] {
    const VectorXd correction = prolong_additional(p.basis(interval).add, active, out.state.beta_plus);
    std::vector<VectorXd> traj = fixed_traj;
    for (auto& u : traj) u += correction;
    return traj;
  };
  auto resolved = [&] {
    const CoarseSpace& space = p.space(interval);
    GalerkinStepper stepper(space, space.with_additional(active), p.time(), interval);
    return stepper.trajectory(u_start);
  };
  out.trajectory = galerkin ? resolved() : sampled();
  if (compute_alternative) out.alternative_end = (galerkin ? sampled() : resolved()).back();
  out.residual_norm = trajectory_residual(p, interval, out.trajectory, u_start);
  return out;
}

std::mt19937_64 sample_rng(std::uint64_t seed, int sample) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(sample), 0x5a3b1eu};
  return std::mt19937_64(seq);
}

ChainResult run_chain(const Pipeline& p, Method method, const SamplerConfig& sampler, int sample,
                      bool compute_alternative) {
  std::mt19937_64 rng = sample_rng(sampler.seed, sample);
  ChainResult chain;
  VectorXd u = VectorXd::Zero(p.grid().num_nodes());
  for (int n = 0; n < p.time().intervals(); ++n) {
    IntervalOutput out = run_interval(p, n, u, method, sampler, rng, compute_alternative);
    u = out.trajectory.back();
    if (compute_alternative) chain.final_alternative = out.alternative_end;
    out.trajectory.clear();
    chain.end_states.push_back(u);
    chain.intervals.push_back(std::move(out));
  }
  chain.final_state = u;
  return chain;
}

double relative_l2_error(const VectorXd& u, const VectorXd& reference, const SpMat& M) {
  const double ref = reference.dot(M * reference);
  if (!(ref > 0.0)) throw DataError("relative L2 error is undefined for a zero reference");
  const VectorXd d = u - reference;
  return 100.0 * std::sqrt(std::max(d.dot(M * d), 0.0) / ref);
}

EnsembleResult run_ensemble(const Pipeline& p, Method method, const SamplerConfig& sampler, int n_samples,
                            int threads, bool compute_alternative,
                            const std::function<void(const SampleSummary&)>& on_sample) {
  EnsembleResult result;
  result.method = method;
  result.sampler = sampler;
  result.samples.resize(n_samples);
  const VectorXd& ref = p.reference().back();
  const SpMat& M = p.problem().M;
  std::mutex callback_mutex;
  parallel_for(n_samples, threads, [&](int i) {
    SampleSummary& s = result.samples[i];
    s.index = i;
    try {
      s.chain = run_chain(p, method, sampler, i, compute_alternative);
      s.l2_error = relative_l2_error(s.chain.final_state, ref, M);
      s.obs_error = max_obs_error(s.chain.final_state, ref, p.observations().D);
    } catch (const NumericalError& e) {
      s.failed = true;
      s.error = e.what();
    }
    if (on_sample) {
      std::lock_guard lock(callback_mutex);
      on_sample(s);
    }
  });

  const int nodes = p.grid().num_nodes();
  result.mean = VectorXd::Zero(nodes);
  VectorXd second = VectorXd::Zero(nodes);
  if (compute_alternative) result.mean_alternative = VectorXd::Zero(nodes);
  long active = 0;
  long candidates = 0;
  long regions = 0;
  for (const auto& s : result.samples) {
    if (s.failed) {
      ++result.failures;
      log_warning("sample " + std::to_string(s.index) + " failed: " + s.error);
      continue;
    }
    result.mean += s.chain.final_state;
    if (compute_alternative && s.chain.final_alternative.size() == nodes) {
      result.mean_alternative += s.chain.final_alternative;
    }
    for (const auto& iv : s.chain.intervals) {
      active += iv.state.num_active();
      candidates += iv.candidate_columns;
      regions += iv.selected_regions;
    }
  }
  if (result.failures * 10 > n_samples) {
    throw NumericalError(std::to_string(result.failures) + " of " + std::to_string(n_samples) + " samples failed");
  }
  const double k = result.successes();
  result.mean /= k;
  for (const auto& s : result.samples) {
    if (!s.failed) second += (s.chain.final_state - result.mean).cwiseAbs2();
  }
  result.std = (second / k).cwiseSqrt();
  result.l2_error = relative_l2_error(result.mean, ref, M);
  result.obs_error = max_obs_error(result.mean, ref, p.observations().D);
  if (compute_alternative) {
    result.mean_alternative /= k;
    result.alternative_l2_error = relative_l2_error(result.mean_alternative, ref, M);
    result.alternative_obs_error = max_obs_error(result.mean_alternative, ref, p.observations().D);
  }
  result.selection_percentage = candidates > 0 ? 100.0 * static_cast<double>(active) / static_cast<double>(candidates) : 0.0;
  result.mean_selected_regions = static_cast<double>(regions) / (k * p.time().intervals());
  return result;
}

namespace {

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path);
  out << text;
  if (!out) throw DataError("failed writing " + path);
}

std::string bits(const std::vector<char>& v) {
  std::string s(v.size(), '0');
  for (std::size_t k = 0; k < v.size(); ++k) s[k] = v[k] ? '1' : '0';
  return s;
}

std::string sample_name(int index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%03d.csv", index);
  return buf;
}

}  // namespace

void write_sample(const std::string& dir, const Pipeline& p, const SampleSummary& sample) {
  if (sample.failed) return;
  const auto samples = std::filesystem::path(dir) / "samples";
  ensure_directory(samples.string());
  write_nodal_csv((samples / sample_name(sample.index)).string(), p.grid(), sample.chain.final_state);
}

void write_results(const std::string& dir, const Pipeline& p, const EnsembleResult& r) {
  ensure_directory(dir);
  const std::filesystem::path root(dir);
  const bool galerkin = p.config().reconstruction == Reconstruction::Galerkin;

  std::string m;
  auto kv = [&m](const std::string& k, const std::string& v) { m += k + "=" + v + "\n"; };
  kv("method", to_string(r.method));
  kv("reconstruction", to_string(p.config().reconstruction));
  kv("n_samples", std::to_string(r.samples.size()));
  kv("failures", std::to_string(r.failures));
  kv("seed", std::to_string(r.sampler.seed));
  kv("sigma_L", format_double(r.sampler.sigma_L));
  kv("sigma_d", format_double(r.sampler.sigma_d));
  kv("base_scale", format_double(p.base_scale()));
  kv("l2_error_mean_percent", format_double(r.l2_error));
  kv("max_obs_error_mean", format_double(r.obs_error));
  kv("selection_percentage", format_double(r.selection_percentage));
  kv("mean_selected_regions", format_double(r.mean_selected_regions));
  if (r.alternative_l2_error >= 0.0) {
    const std::string alt = galerkin ? "sampled" : "galerkin";
    kv("l2_error_mean_" + alt + "_percent", format_double(r.alternative_l2_error));
    kv("max_obs_error_mean_" + alt, format_double(r.alternative_obs_error));
  }
  if (p.dominance_fraction() >= 0.0) kv("pou_dominance_fraction", format_double(p.dominance_fraction()));
  write_text((root / "metrics.txt").string(), m);

  write_nodal_csv((root / "mean.csv").string(), p.grid(), r.mean);
  write_nodal_csv((root / "std.csv").string(), p.grid(), r.std);
  write_nodal_heatmap((root / "mean.png").string(), p.grid(), r.mean);
  write_nodal_heatmap((root / "std.png").string(), p.grid(), r.std);
  // Uncertainty band: pointwise mean -/+ 2 std.
  write_nodal_csv((root / "band_lower.csv").string(), p.grid(), r.mean - 2.0 * r.std);
  write_nodal_csv((root / "band_upper.csv").string(), p.grid(), r.mean + 2.0 * r.std);
  if (r.mean_alternative.size() > 0) {
    write_nodal_csv((root / (galerkin ? "mean_galerkin.csv" : "mean_sampled.csv")).string(), p.grid(), r.mean);
    write_nodal_csv((root / (galerkin ? "mean_sampled.csv" : "mean_galerkin.csv")).string(), p.grid(),
                    r.mean_alternative);
  }

  std::string sel = "sample,interval,J,I\n";
  std::string res = "sample,interval,residual_norm,fixed_residual_norm,l2_error_percent,max_obs_error\n";
  for (const auto& s : r.samples) {
    if (s.failed) continue;
    write_sample(dir, p, s);
    for (std::size_t n = 0; n < s.chain.intervals.size(); ++n) {
      const auto& iv = s.chain.intervals[n];
      sel += std::to_string(s.index) + "," + std::to_string(n) + "," + bits(iv.state.J) + "," + bits(iv.state.I) + "\n";
      res += std::to_string(s.index) + "," + std::to_string(n) + "," + format_double(iv.residual_norm) + "," +
             format_double(iv.fixed_residual_norm) + "," +
             format_double(relative_l2_error(s.chain.end_states[n], p.reference()[p.time().last_step(n)], p.problem().M)) +
             "," + format_double(max_obs_error(s.chain.end_states[n], p.reference()[p.time().last_step(n)],
                                               p.observations().D)) +
             "\n";
    }
  }
  write_text((root / "selection.csv").string(), sel);
  write_text((root / "residuals.csv").string(), res);
}

std::vector<TableCell> run_table_sweep(const Pipeline& p, int n_samples, int threads) {
  std::vector<TableCell> cells;
  for (double sL : p.config().experiment_sigma_L) {
    for (double sd : p.config().experiment_sigma_d) {
      const SamplerConfig s = p.resolve(sL, sd);
      const EnsembleResult r = run_ensemble(p, Method::MCMC, s, n_samples, threads);
      cells.push_back({sL, sd, r.selection_percentage, r.l2_error, r.obs_error});
    }
  }
  return cells;
}

void write_tables(const std::string& dir, const Pipeline& p, const std::vector<TableCell>& cells) {
  ensure_directory(dir);
  const auto& sd = p.config().experiment_sigma_d;
  auto table = [&](const char* name, double TableCell::*value) {
    std::string t = "sigma_L";
    for (double d : sd) t += "," + format_double(d);
    t += "\n";
    for (std::size_t k = 0; k < cells.size(); k += sd.size()) {
      t += format_double(cells[k].sigma_L_multiplier);
      for (std::size_t j = 0; j < sd.size(); ++j) t += "," + format_double(cells[k + j].*value);
      t += "\n";
    }
    write_text((std::filesystem::path(dir) / name).string(), t);
  };
  table("table1.csv", &TableCell::selection_percentage);
  table("table2.csv", &TableCell::l2_error);
  table("table3.csv", &TableCell::obs_error);
}

RunConfig example2_config(RunConfig config) {
  config.source_kind = "inflow_outflow";
  config.obs_regions = config.outflow;
  return config;
}

}  // namespace msbayes
