#include "msbayes/config.hpp"

#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>

#include "msbayes/errors.hpp"
#include "msbayes/io.hpp"

namespace msbayes {

const char* to_string(SigmaMode m) { return m == SigmaMode::Relative ? "relative" : "absolute"; }
const char* to_string(Reconstruction r) { return r == Reconstruction::Sampled ? "sampled" : "galerkin"; }

const char* to_string(Method m) {
  switch (m) {
    case Method::Sequential: return "seq";
    case Method::MCMC: return "mcmc";
    case Method::FixedOnly: return "fixed";
    case Method::FullOffline: return "full";
  }
  return "?";
}

Method parse_method(const std::string& s) {
  if (s == "seq" || s == "sequential") return Method::Sequential;
  if (s == "mcmc") return Method::MCMC;
  if (s == "fixed") return Method::FixedOnly;
  if (s == "full") return Method::FullOffline;
  throw ConfigError("unknown method '" + s + "' (expected seq, mcmc, fixed or full)");
}

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <typename T>
T parse_number(const std::string& key, const std::string& value) {
  T out{};
  const char* first = value.data();
  const char* last = first + value.size();
  if (!value.empty() && value[0] == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, last, out);
  if (ec != std::errc() || ptr != last) throw ConfigError("invalid value '" + value + "' for " + key);
  return out;
}

double parse_real(const std::string& key, const std::string& value) { return parse_number<double>(key, value); }
int parse_int(const std::string& key, const std::string& value) { return parse_number<int>(key, value); }

std::vector<double> parse_reals(const std::string& key, const std::string& value) {
  std::vector<double> out;
  std::stringstream ss(value);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(parse_real(key, trim(item)));
  if (out.empty()) throw ConfigError(key + " needs at least one value");
  return out;
}

std::string format_reals(const std::vector<double>& v) {
  std::string out;
  for (std::size_t k = 0; k < v.size(); ++k) out += (k ? "," : "") + format_double(v[k]);
  return out;
}

/// "(r,c);(r,c)" pairs of coarse element indices.
CellList parse_cells(const std::string& key, const std::string& value) {
  CellList out;
  std::stringstream ss(value);
  std::string item;
  while (std::getline(ss, item, ';')) {
    item = trim(item);
    if (item.empty()) continue;
    if (item.front() != '(' || item.back() != ')') throw ConfigError("invalid element '" + item + "' in " + key);
    const std::string inner = item.substr(1, item.size() - 2);
    const auto comma = inner.find(',');
    if (comma == std::string::npos) throw ConfigError("invalid element '" + item + "' in " + key);
    out.emplace_back(parse_int(key, trim(inner.substr(0, comma))), parse_int(key, trim(inner.substr(comma + 1))));
  }
  return out;
}

std::string format_cells(const CellList& cells) {
  std::string out;
  for (std::size_t k = 0; k < cells.size(); ++k) {
    out += (k ? ";(" : "(") + std::to_string(cells[k].first) + "," + std::to_string(cells[k].second) + ")";
  }
  return out;
}

struct Setting {
  const char* key;
  std::function<void(RunConfig&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

#define MSB_INT(KEY, FIELD)                                                              \
  Setting {                                                                              \
    KEY, [](RunConfig& c, const std::string& v) { c.FIELD = parse_int(KEY, v); },       \
        [](const RunConfig& c) { return std::to_string(c.FIELD); }                       \
  }
#define MSB_REAL(KEY, FIELD)                                                             \
  Setting {                                                                              \
    KEY, [](RunConfig& c, const std::string& v) { c.FIELD = parse_real(KEY, v); },      \
        [](const RunConfig& c) { return format_double(c.FIELD); }                        \
  }
#define MSB_U64(KEY, FIELD)                                                                          \
  Setting {                                                                                          \
    KEY, [](RunConfig& c, const std::string& v) { c.FIELD = parse_number<std::uint64_t>(KEY, v); }, \
        [](const RunConfig& c) { return std::to_string(c.FIELD); }                                   \
  }
#define MSB_TEXT(KEY, FIELD)                                                 \
  Setting {                                                                  \
    KEY, [](RunConfig& c, const std::string& v) { c.FIELD = v; },            \
        [](const RunConfig& c) { return c.FIELD; }                           \
  }
#define MSB_CELLS(KEY, FIELD)                                                          \
  Setting {                                                                            \
    KEY, [](RunConfig& c, const std::string& v) { c.FIELD = parse_cells(KEY, v); },   \
        [](const RunConfig& c) { return format_cells(c.FIELD); }                       \
  }

const std::vector<Setting>& settings() {
  static const std::vector<Setting> table = {
      MSB_INT("grid.n_fine", n_fine),
      MSB_INT("grid.n_coarse", n_coarse),
      MSB_REAL("time.dt", dt),
      MSB_REAL("time.t_final", t_final),
      MSB_INT("time.intervals", intervals),
      MSB_TEXT("field.path", field_path),
      MSB_U64("field.seed", field.seed),
      MSB_REAL("field.background", field.background),
      MSB_REAL("field.inclusion", field.inclusion_value),
      MSB_INT("field.channels", field.channels),
      MSB_INT("field.inclusions", field.inclusions),
      Setting{"field.modulation",
              [](RunConfig& c, const std::string& v) { c.modulation = parse_modulation(v); },
              [](const RunConfig& c) { return std::string(to_string(c.modulation)); }},
      MSB_REAL("field.rate", rate),
      MSB_TEXT("source.kind", source_kind),
      MSB_REAL("source.value", source_value),
      MSB_CELLS("source.inflow", inflow),
      MSB_CELLS("source.outflow", outflow),
      MSB_TEXT("basis.source", basis_source),
      MSB_INT("basis.l_perm", l_perm),
      MSB_INT("basis.l_add", l_add),
      MSB_INT("basis.layers", layers),
      MSB_INT("basis.buffer", buffer),
      MSB_INT("basis.extension_steps", extension_steps),
      MSB_U64("basis.seed", basis_seed),
      Setting{"sampler.sigma_mode",
              [](RunConfig& c, const std::string& v) {
                if (v == "relative") {
                  c.sigma_mode = SigmaMode::Relative;
                } else if (v == "absolute") {
                  c.sigma_mode = SigmaMode::Absolute;
                } else {
                  throw ConfigError("sampler.sigma_mode must be relative or absolute");
                }
              },
              [](const RunConfig& c) { return std::string(to_string(c.sigma_mode)); }},
      MSB_REAL("sampler.sigma_L", sampler.sigma_L),
      MSB_REAL("sampler.sigma_d", sampler.sigma_d),
      MSB_REAL("sampler.n_omega", sampler.n_omega),
      MSB_REAL("sampler.n_basis", sampler.n_basis),
      MSB_REAL("sampler.prior_var", sampler.prior_var),
      MSB_REAL("sampler.ridge", sampler.ridge),
      MSB_U64("sampler.seed", sampler.seed),
      MSB_INT("sampler.n_samples", sampler.n_samples),
      MSB_INT("sampler.sweeps", sampler.sweeps),
      MSB_CELLS("obs.regions", obs_regions),
      MSB_REAL("obs.noise", sampler.data_noise),
      Setting{"driver.method", [](RunConfig& c, const std::string& v) { c.method = parse_method(v); },
              [](const RunConfig& c) { return std::string(to_string(c.method)); }},
      Setting{"driver.reconstruction",
              [](RunConfig& c, const std::string& v) {
                if (v == "sampled") {
                  c.reconstruction = Reconstruction::Sampled;
                } else if (v == "galerkin") {
                  c.reconstruction = Reconstruction::Galerkin;
                } else {
                  throw ConfigError("driver.reconstruction must be sampled or galerkin");
                }
              },
              [](const RunConfig& c) { return std::string(to_string(c.reconstruction)); }},
      MSB_TEXT("experiment.id", experiment),
      Setting{"experiment.sigma_L",
              [](RunConfig& c, const std::string& v) { c.experiment_sigma_L = parse_reals("experiment.sigma_L", v); },
              [](const RunConfig& c) { return format_reals(c.experiment_sigma_L); }},
      Setting{"experiment.sigma_d",
              [](RunConfig& c, const std::string& v) { c.experiment_sigma_d = parse_reals("experiment.sigma_d", v); },
              [](const RunConfig& c) { return format_reals(c.experiment_sigma_d); }},
      MSB_INT("experiment.n_samples", experiment_samples),
      MSB_REAL("experiment.example2_sigma_L", example2_sigma_L),
      MSB_REAL("experiment.example2_sigma_d", example2_sigma_d),
  };
  return table;
}

}  // namespace

void apply_setting(RunConfig& config, const std::string& key, const std::string& value) {
  for (const auto& s : settings()) {
    if (key == s.key) {
      s.set(config, value);
      return;
    }
  }
  throw ConfigError("unknown configuration key '" + key + "'");
}

RunConfig RunConfig::parse(const std::string& text) {
  RunConfig config;
  std::stringstream ss(text);
  std::string line;
  int number = 0;
  while (std::getline(ss, line)) {
    ++number;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("line " + std::to_string(number) + ": expected key=value");
    }
    apply_setting(config, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  return config;
}

RunConfig RunConfig::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return parse(buf.str());
}

std::string RunConfig::serialize() const {
  std::string out;
  for (const auto& s : settings()) out += std::string(s.key) + "=" + s.get(*this) + "\n";
  return out;
}

void RunConfig::validate() const {
  if (n_fine < 2 || n_coarse < 1) throw ConfigError("grid sizes must be positive");
  if (n_fine % n_coarse != 0) throw ConfigError("grid.n_fine must be a multiple of grid.n_coarse");
  if (!(dt > 0.0) || !(t_final > 0.0) || intervals < 1) throw ConfigError("time step, final time and intervals must be positive");
  if (!field_path.empty() && !std::filesystem::exists(field_path)) {
    throw ConfigError("field file " + field_path + " does not exist");
  }
  if (!(field.background > 0.0) || !(field.inclusion_value > 0.0)) throw ConfigError("field values must be positive");
  if (field.channels < 0 || field.inclusions < 0) throw ConfigError("field feature counts must be nonnegative");
  if (!std::isfinite(rate)) throw ConfigError("field.rate must be finite");
  if (source_kind != "constant" && source_kind != "inflow_outflow") {
    throw ConfigError("source.kind must be constant or inflow_outflow");
  }
  if (basis_source != "standard" && basis_source != "spacetime") {
    throw ConfigError("basis.source must be standard or spacetime");
  }
  if (l_perm < 1 || l_add < 0) throw ConfigError("basis.l_perm must be at least 1 and basis.l_add nonnegative");
  if (layers < 0 || buffer < 0) throw ConfigError("basis.layers and basis.buffer must be nonnegative");
  sampler.validate();
  auto check_cells = [this](const CellList& cells, const char* key) {
    for (const auto& [r, c] : cells) {
      if (r < 0 || c < 0 || r >= n_coarse || c >= n_coarse) {
        throw ConfigError(std::string(key) + " element (" + std::to_string(r) + "," + std::to_string(c) +
                          ") is outside the coarse grid");
      }
    }
  };
  check_cells(obs_regions, "obs.regions");
  check_cells(inflow, "source.inflow");
  check_cells(outflow, "source.outflow");
  for (double s : experiment_sigma_L) {
    if (!(s > 0.0)) throw ConfigError("experiment.sigma_L values must be positive");
  }
  for (double s : experiment_sigma_d) {
    if (!(s > 0.0)) throw ConfigError("experiment.sigma_d values must be positive");
  }
  if (!(example2_sigma_L > 0.0) || !(example2_sigma_d > 0.0)) {
    throw ConfigError("experiment.example2 scales must be positive");
  }
  if (experiment_samples < 1) throw ConfigError("experiment.n_samples must be at least 1");
}

}  // namespace msbayes
