// msbayes: command-line front end.
//
//   msbayes reference  --config C --out DIR
//   msbayes basis      --config C --out DIR
//   msbayes sample     --config C --method seq|mcmc --n N --out DIR
//   msbayes experiment table1|table2|table3|example2 --config C --out DIR
//   msbayes report     --out DIR
//
// Exit codes: 0 ok, 2 configuration, 3 numerical, 4 data.

#include <CLI11.hpp>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <sstream>

#include "msbayes/config.hpp"
#include "msbayes/driver.hpp"
#include "msbayes/errors.hpp"
#include "msbayes/io.hpp"
#include "msbayes/log.hpp"
#include "msbayes/spacetime.hpp"

namespace fs = std::filesystem;
using namespace msbayes;

namespace {

struct Options {
  std::string config_path;
  std::vector<std::string> overrides;
  std::uint64_t seed = 0;
  bool seed_given = false;
  int threads = 1;
  std::string method = "mcmc";
  int n = 0;
  std::string out = "results";
  std::string experiment;
  bool quiet = false;
};

RunConfig load_config(const Options& o) {
  RunConfig c = o.config_path.empty() ? RunConfig{} : RunConfig::load(o.config_path);
  for (const auto& kv : o.overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + kv + "'");
    apply_setting(c, kv.substr(0, eq), kv.substr(eq + 1));
  }
  if (o.seed_given) c.sampler.seed = o.seed;
  c.validate();
  return c;
}

std::string cache_dir() {
  if (const char* env = std::getenv("MSBAYES_CACHE"); env && *env) return env;
  return "msbayes_cache";
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << text;
}

int cmd_reference(const Options& o) {
  const RunConfig c = load_config(o);
  const FineGrid grid(c.n_fine);
  const CoarseGrid coarse(grid, c.n_coarse);
  const TimeGrid time(c.t_final, c.dt, c.intervals);
  const PermeabilityField field = make_field(c);
  const SourceSpec source = make_source(c, grid, coarse);
  const auto traj = solve_reference(grid, field, source, time);
  ensure_directory(o.out);
  write_nodal_csv((fs::path(o.out) / "reference.csv").string(), grid, traj.back());
  write_nodal_heatmap((fs::path(o.out) / "reference.png").string(), grid, traj.back());
  std::vector<double> kappa(field.kappa0.begin(), field.kappa0.end());
  for (double& k : kappa) k = std::log10(k);
  write_heatmap_png((fs::path(o.out) / "kappa.png").string(), c.n_fine, c.n_fine, kappa);
  return 0;
}

int cmd_basis(const Options& o) {
  const RunConfig c = load_config(o);
  const Pipeline p(c, {o.threads, cache_dir()});
  ensure_directory(o.out);
  std::string t = "interval,region,index,kind,eigenvalue\n";
  const int intervals = c.basis_source == "spacetime" ? p.time().intervals() : 1;
  for (int n = 0; n < intervals; ++n) {
    for (const auto& nb : p.basis(n).regions) {
      for (int j = 0; j < nb.eigenvalues.size(); ++j) {
        t += std::to_string(n) + "," + std::to_string(nb.region) + "," + std::to_string(j) + "," +
             (j < nb.permanent_count() ? "permanent" : "additional") + "," + format_double(nb.eigenvalues[j]) + "\n";
      }
    }
  }
  write_text(fs::path(o.out) / "basis.csv", t);
  std::string m = "base_scale=" + format_double(p.base_scale()) + "\n";
  m += "additional_columns=" + std::to_string(p.basis(0).add.cols()) + "\n";
  m += "permanent_columns=" + std::to_string(p.basis(0).perm.cols()) + "\n";
  if (p.dominance_fraction() >= 0.0) m += "pou_dominance_fraction=" + format_double(p.dominance_fraction()) + "\n";
  write_text(fs::path(o.out) / "basis_metrics.txt", m);
  return 0;
}

int cmd_sample(const Options& o, const RunConfig& c) {
  const Pipeline p(c, {o.threads, cache_dir()});
  const Method method = parse_method(o.method);
  const int n = o.n > 0 ? o.n : c.sampler.n_samples;
  ensure_directory(o.out);
  const auto result = run_ensemble(p, method, p.sampler(), n, o.threads, true,
                                   [&](const SampleSummary& s) { write_sample(o.out, p, s); });
  write_results(o.out, p, result);
  write_nodal_csv((fs::path(o.out) / "reference.csv").string(), p.grid(), p.reference().back());
  write_nodal_heatmap((fs::path(o.out) / "reference.png").string(), p.grid(), p.reference().back());
  if (!o.quiet) {
    std::cout << "method=" << to_string(method) << " l2_error_mean_percent=" << format_double(result.l2_error)
              << " max_obs_error_mean=" << format_double(result.obs_error)
              << " selection_percentage=" << format_double(result.selection_percentage) << "\n";
  }
  return 0;
}

int cmd_experiment(const Options& o) {
  RunConfig c = load_config(o);
  const std::string& id = o.experiment;
  const int n = o.n > 0 ? o.n : c.experiment_samples;
  ensure_directory(o.out);
  if (id == "table1" || id == "table2" || id == "table3") {
    const Pipeline p(c, {o.threads, cache_dir()});
    const auto cells = run_table_sweep(p, n, o.threads);
    write_tables(o.out, p, cells);
    return 0;
  }
  if (id == "example2") {
    c = example2_config(std::move(c));
    const Pipeline p(c, {o.threads, cache_dir()});
    const SamplerConfig with_data = p.resolve(c.example2_sigma_L, c.example2_sigma_d);
    SamplerConfig residual_only = with_data;
    residual_only.sigma_d = std::numeric_limits<double>::infinity();
    std::string t = "variant,selection_percentage,l2_error_percent,max_obs_error\n";
    for (const auto& [name, s] : {std::pair{"data_driven", with_data}, std::pair{"residual_only", residual_only}}) {
      const auto r = run_ensemble(p, Method::MCMC, s, n, o.threads, true);
      t += std::string(name) + "," + format_double(r.selection_percentage) + "," + format_double(r.l2_error) + "," +
           format_double(r.obs_error) + "\n";
      write_results((fs::path(o.out) / name).string(), p, r);
    }
    write_text(fs::path(o.out) / "example2.csv", t);
    return 0;
  }
  throw ConfigError("unknown experiment '" + id + "' (expected table1, table2, table3 or example2)");
}

int cmd_report(const Options& o) {
  const fs::path dir(o.out);
  std::ifstream metrics(dir / "metrics.txt");
  if (!metrics) throw DataError("no metrics.txt in " + o.out);
  std::cout << metrics.rdbuf();
  for (const char* name : {"mean", "std", "reference"}) {
    const fs::path csv = dir / (std::string(name) + ".csv");
    if (!fs::exists(csv)) continue;
    std::ifstream in(csv);
    std::string line;
    int rows = 0;
    while (std::getline(in, line)) ++rows;
    const int side = static_cast<int>(std::lround(std::sqrt(static_cast<double>(rows))));
    if (side * side != rows || side < 2) throw FormatError(csv.string() + " is not a square nodal field");
    const FineGrid grid(side - 1);
    write_nodal_heatmap((dir / (std::string(name) + ".png")).string(), grid, read_nodal_csv(csv.string(), grid));
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Bayesian multiscale basis selection for parabolic problems"};
  app.require_subcommand(1);
  Options o;
  auto common = [&o](CLI::App* sub) {
    sub->add_option("--config", o.config_path, "configuration file (key=value)")->check(CLI::ExistingFile);
    sub->add_option("--set", o.overrides, "override a configuration key (key=value)");
    sub->add_option("--seed", o.seed, "sampler seed")->each([&o](const std::string&) { o.seed_given = true; });
    sub->add_option("--threads", o.threads, "worker threads")->check(CLI::PositiveNumber);
    sub->add_option("--out", o.out, "output directory");
    sub->add_flag("--quiet", o.quiet, "suppress warnings and summaries");
  };
  auto* reference = app.add_subcommand("reference", "solve the fine reference problem");
  auto* basis = app.add_subcommand("basis", "build (or load) the offline basis");
  auto* sample = app.add_subcommand("sample", "run a sample ensemble");
  auto* experiment = app.add_subcommand("experiment", "run a table or example sweep");
  auto* report = app.add_subcommand("report", "summarize a results directory");
  for (auto* sub : {reference, basis, sample, experiment}) common(sub);
  sample->add_option("--method", o.method, "seq, mcmc, fixed or full");
  sample->add_option("--n", o.n, "number of samples")->check(CLI::PositiveNumber);
  experiment->add_option("id", o.experiment, "table1, table2, table3 or example2")->required();
  experiment->add_option("--n", o.n, "samples per ensemble")->check(CLI::PositiveNumber);
  report->add_option("--out", o.out, "results directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (o.quiet) set_log_level(LogLevel::Quiet);
    if (*reference) return cmd_reference(o);
    if (*basis) return cmd_basis(o);
    if (*sample) return cmd_sample(o, load_config(o));
    if (*experiment) return cmd_experiment(o);
    if (*report) return cmd_report(o);
  } catch (const Error& e) {
    std::cerr << "msbayes: " << e.what() << "\n";
    return e.exit_code();
  } catch (const std::exception& e) {
    std::cerr << "msbayes: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
