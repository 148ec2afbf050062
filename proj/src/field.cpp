#include "msbayes/field.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <random>
#include <sstream>

#include "msbayes/errors.hpp"

namespace msbayes {

static_assert(std::endian::native == std::endian::little, "binary field I/O assumes little-endian host");

const char* to_string(Modulation m) {
  return m == Modulation::Literal ? "literal" : "inclusion";
}

Modulation parse_modulation(const std::string& s) {
  if (s == "literal") return Modulation::Literal;
  if (s == "inclusion" || s == "inclusion_only") return Modulation::InclusionOnly;
  throw ConfigError("unknown modulation mode '" + s + "'");
}

double PermeabilityField::min() const { return *std::min_element(kappa0.begin(), kappa0.end()); }
double PermeabilityField::max() const { return *std::max_element(kappa0.begin(), kappa0.end()); }

double PermeabilityField::factor(double t) const { return std::exp(rate * t); }

bool PermeabilityField::modulated(int cell) const {
  return modulation == Modulation::Literal || inclusion[cell] != 0;
}

std::uint64_t PermeabilityField::hash() const {
  std::uint64_t h = 1469598103934665603ULL;
  auto mix = [&h](const void* data, std::size_t len) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < len; ++i) {
      h ^= p[i];
      h *= 1099511628211ULL;
    }
  };
  mix(&n, sizeof n);
  mix(kappa0.data(), kappa0.size() * sizeof(double));
  mix(inclusion.data(), inclusion.size());
  const int mode = static_cast<int>(modulation);
  mix(&mode, sizeof mode);
  mix(&rate, sizeof rate);
  return h;
}

namespace {

void finalize(PermeabilityField& f) {
  for (double v : f.kappa0) {
    if (!(v > 0.0) || !std::isfinite(v)) throw DataError("permeability values must be positive and finite");
  }
  const double lo = f.min();
  f.inclusion.assign(f.kappa0.size(), 0);
  for (std::size_t i = 0; i < f.kappa0.size(); ++i) f.inclusion[i] = f.kappa0[i] > lo ? 1 : 0;
}

PermeabilityField load_binary(std::ifstream& in, const std::string& path) {
  std::uint32_t n = 0;
  in.read(reinterpret_cast<char*>(&n), sizeof n);
  if (!in || n == 0) throw FormatError("truncated KPF1 header in " + path);
  PermeabilityField f;
  f.n = static_cast<int>(n);
  f.kappa0.resize(static_cast<std::size_t>(n) * n);
  in.read(reinterpret_cast<char*>(f.kappa0.data()), static_cast<std::streamsize>(f.kappa0.size() * sizeof(double)));
  if (!in) throw FormatError("KPF1 payload shorter than n^2 values in " + path);
  char extra;
  if (in.read(&extra, 1)) throw FormatError("trailing bytes after KPF1 payload in " + path);
  return f;
}

PermeabilityField load_csv(std::ifstream& in, const std::string& path) {
  std::vector<std::vector<double>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
      char* end = nullptr;
      const double v = std::strtod(tok.c_str(), &end);
      if (end == tok.c_str() || std::string(end).find_first_not_of(" \t") != std::string::npos) {
        throw FormatError("non-numeric entry '" + tok + "' in " + path);
      }
      row.push_back(v);
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw FormatError("empty field file " + path);
  const std::size_t n = rows.size();
  for (const auto& r : rows) {
    if (r.size() != n) {
      throw FormatError("field file " + path + " is not square: " + std::to_string(n) + " rows, row with " +
                        std::to_string(r.size()) + " columns");
    }
  }
  PermeabilityField f;
  f.n = static_cast<int>(n);
  for (const auto& r : rows) f.kappa0.insert(f.kappa0.end(), r.begin(), r.end());
  return f;
}

}  // namespace

PermeabilityField uniform_field(int n, double value) {
  PermeabilityField f;
  f.n = n;
  f.kappa0.assign(static_cast<std::size_t>(n) * n, value);
  finalize(f);
  return f;
}

PermeabilityField load_field(const std::string& path, int expected_n) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open field file " + path);
  char magic[4] = {0, 0, 0, 0};
  in.read(magic, 4);
  PermeabilityField f;
  if (in && std::memcmp(magic, "KPF1", 4) == 0) {
    f = load_binary(in, path);
  } else {
    in.clear();
    in.seekg(0);
    f = load_csv(in, path);
  }
  if (expected_n > 0 && f.n != expected_n) {
    throw FormatError("field file " + path + " has side " + std::to_string(f.n) + ", expected " +
                      std::to_string(expected_n));
  }
  finalize(f);
  return f;
}

void save_field_csv(const PermeabilityField& field, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path);
  char buf[32];
  for (int r = 0; r < field.n; ++r) {
    for (int c = 0; c < field.n; ++c) {
      std::snprintf(buf, sizeof buf, "%.17g", field.kappa0[static_cast<std::size_t>(r) * field.n + c]);
      out << buf << (c + 1 < field.n ? ',' : '\n');
    }
  }
}

void save_field_binary(const PermeabilityField& field, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path);
  const std::uint32_t n = static_cast<std::uint32_t>(field.n);
  out.write("KPF1", 4);
  out.write(reinterpret_cast<const char*>(&n), sizeof n);
  out.write(reinterpret_cast<const char*>(field.kappa0.data()),
            static_cast<std::streamsize>(field.kappa0.size() * sizeof(double)));
}

PermeabilityField generate_field(const FieldGeneratorParams& p) {
  const int n = std::max(p.n, 1);
  PermeabilityField f;
  f.n = n;
  f.kappa0.assign(static_cast<std::size_t>(n) * n, p.background);
  std::mt19937_64 rng(p.seed);
  auto uniform_int = [&rng](int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); };
  auto paint = [&](int r0, int r1, int c0, int c1) {
    r0 = std::clamp(r0, 0, n - 1);
    r1 = std::clamp(r1, 0, n - 1);
    c0 = std::clamp(c0, 0, n - 1);
    c1 = std::clamp(c1, 0, n - 1);
    for (int r = r0; r <= r1; ++r) {
      for (int c = c0; c <= c1; ++c) f.kappa0[static_cast<std::size_t>(r) * n + c] = p.inclusion_value;
    }
  };

  const int max_width = std::max(1, n / 50);
  for (int k = 0; k < std::max(p.channels, 0); ++k) {
    const bool horizontal = uniform_int(0, 1) == 0;
    const int width = uniform_int(1, max_width);
    const int length = uniform_int(std::max(1, (3 * n) / 10), std::max(1, (9 * n) / 10));
    const int across = uniform_int(0, n - 1);
    const int along = uniform_int(0, std::max(0, n - length));
    if (horizontal) {
      paint(across, across + width - 1, along, along + length - 1);
    } else {
      paint(along, along + length - 1, across, across + width - 1);
    }
  }
  const int max_size = std::max(1, n / 12);
  for (int k = 0; k < std::max(p.inclusions, 0); ++k) {
    const int h = uniform_int(1, max_size);
    const int w = uniform_int(1, max_size);
    const int r = uniform_int(0, n - 1);
    const int c = uniform_int(0, n - 1);
    paint(r, r + h - 1, c, c + w - 1);
  }
  finalize(f);
  return f;
}

std::vector<double> modulate(const PermeabilityField& field, double t) {
  std::vector<double> out(field.kappa0);
  if (t == 0.0) return out;
  const double s = field.factor(t);
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (field.modulated(static_cast<int>(i))) out[i] *= s;
  }
  return out;
}

}  // namespace msbayes
