#pragma once

#include <string>
#include <utility>
#include <vector>

#include "msbayes/field.hpp"
#include "msbayes/sampler.hpp"

namespace msbayes {

using CellList = std::vector<std::pair<int, int>>;

enum class SigmaMode { Relative, Absolute };
enum class Reconstruction { Sampled, Galerkin };
enum class Method { Sequential, MCMC, FixedOnly, FullOffline };

const char* to_string(SigmaMode m);
const char* to_string(Reconstruction r);
const char* to_string(Method m);
Method parse_method(const std::string& s);

/// Everything a run needs. Text form is flat key=value lines with section
/// prefixes; '#' starts a comment.
struct RunConfig {
  // grid
  int n_fine = 100;
  int n_coarse = 10;
  // time
  double dt = 1e-3;
  double t_final = 0.02;
  int intervals = 4;
  // field
  std::string field_path;  // empty: generated
  FieldGeneratorParams field;
  Modulation modulation = Modulation::Literal;
  double rate = 250.0;
  // source
  std::string source_kind = "constant";  // constant | inflow_outflow
  double source_value = 1.0;
  CellList inflow = {{1, 1}, {1, 8}};
  CellList outflow = {{8, 1}, {8, 8}};
  // basis
  std::string basis_source = "standard";  // standard | spacetime
  int l_perm = 2;
  int l_add = 18;
  int layers = 1;
  int buffer = 4;
  int extension_steps = -1;
  std::uint64_t basis_seed = 1;
  // sampler; sigma_L and sigma_d are multipliers of the calibrated base in relative mode
  SamplerConfig sampler{.sigma_L = 1e-3, .sigma_d = 1e-3};
  SigmaMode sigma_mode = SigmaMode::Relative;
  // observations
  CellList obs_regions = {{2, 2}, {2, 7}, {7, 2}, {7, 7}};
  // driver
  Method method = Method::MCMC;
  Reconstruction reconstruction = Reconstruction::Galerkin;
  // experiment sweeps
  std::string experiment = "table1";
  std::vector<double> experiment_sigma_L = {5e-4, 1e-3, 2e-3};
  std::vector<double> experiment_sigma_d = {1e-6, 1e-3, 1.0};
  int experiment_samples = 20;
  double example2_sigma_L = 9e-6;
  double example2_sigma_d = 1e-7;

  static RunConfig parse(const std::string& text);
  static RunConfig load(const std::string& path);
  std::string serialize() const;
  /// Range checks and file existence; throws ConfigError.
  void validate() const;
};

/// Applies one key=value assignment; throws ConfigError for unknown keys or
/// malformed values.
void apply_setting(RunConfig& config, const std::string& key, const std::string& value);

}  // namespace msbayes
