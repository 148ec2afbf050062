#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace msbayes {

/// How kappa(x, t) evolves from kappa0(x).
enum class Modulation {
  /// kappa(x, t) = exp(rate t) kappa0(x) everywhere.
  Literal,
  /// Only inclusion cells are scaled by exp(rate t); background stays fixed.
  InclusionOnly,
};

const char* to_string(Modulation m);
Modulation parse_modulation(const std::string& s);

/// Cellwise positive permeability kappa0 on an n x n fine grid, row-major with
/// row 0 at the bottom of the domain.
struct PermeabilityField {
  int n = 0;
  std::vector<double> kappa0;
  /// Nonzero for cells that belong to channels/inclusions.
  std::vector<char> inclusion;
  Modulation modulation = Modulation::Literal;
  double rate = 250.0;

  double min() const;
  double max() const;
  double contrast() const { return max() / min(); }
  /// Scale factor applied to modulated cells at time t.
  double factor(double t) const;
  /// Nonzero for cells that are scaled by factor(t).
  bool modulated(int cell) const;
  /// Content hash of kappa0 and the modulation law.
  std::uint64_t hash() const;
};

PermeabilityField uniform_field(int n, double value);

/// Reads a square CSV (one grid row per line, no header) or a KPF1 binary
/// file. The expected side length is checked when expected_n > 0.
PermeabilityField load_field(const std::string& path, int expected_n = 0);
void save_field_csv(const PermeabilityField& field, const std::string& path);
void save_field_binary(const PermeabilityField& field, const std::string& path);

struct FieldGeneratorParams {
  std::uint64_t seed = 1;
  int n = 100;
  double background = 1.0;
  double inclusion_value = 1e4;
  int channels = 4;
  int inclusions = 12;
};

/// Synthetic high-contrast medium: long axis-aligned channels and small
/// rectangular inclusions at inclusion_value on a uniform background.
PermeabilityField generate_field(const FieldGeneratorParams& params);

/// Cellwise kappa(., t).
std::vector<double> modulate(const PermeabilityField& field, double t);

}  // namespace msbayes
