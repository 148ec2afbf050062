#include "msbayes/prior.hpp"

#include <algorithm>
#include <string>
#include <vector>

#include "msbayes/log.hpp"

namespace msbayes {

VectorXd rescaled_probabilities(std::span<const double> alpha, double target, bool* fallback) {
  const auto n = static_cast<Eigen::Index>(alpha.size());
  VectorXd p(n);
  double total = 0.0;
  for (double a : alpha) total += a;
  const bool degenerate = !(total > 0.0);
  if (fallback) *fallback = degenerate && n > 0;
  if (n == 0) return p;
  if (degenerate) {
    p.setConstant(std::min(target / static_cast<double>(n), 1.0));
    return p;
  }
  for (Eigen::Index k = 0; k < n; ++k) p[k] = std::min(alpha[k] / total * target, 1.0);
  return p;
}

namespace {

std::vector<double> region_alpha(const ResidualSystem& system) {
  const auto& layout = system.layout();
  std::vector<double> alpha(layout.num_regions(), 0.0);
  for (int r = 0; r < layout.num_regions(); ++r) {
    for (int c : layout.columns_of_region[r]) alpha[r] += system.correlation[c];
  }
  return alpha;
}

VectorXd basis_prior_impl(const ResidualSystem& system, int region, double n_basis, bool* fallback) {
  const auto& cols = system.layout().columns_of_region[region];
  std::vector<double> alpha;
  alpha.reserve(cols.size());
  for (int c : cols) alpha.push_back(system.correlation[c]);
  return rescaled_probabilities(alpha, n_basis, fallback);
}

}  // namespace

VectorXd region_prior(const ResidualSystem& system, double n_omega) {
  bool fallback = false;
  VectorXd p = rescaled_probabilities(region_alpha(system), n_omega, &fallback);
  if (fallback) log_warning("all region correlations are zero; using a uniform region prior");
  return p;
}

VectorXd basis_prior(const ResidualSystem& system, int region, double n_basis) {
  bool fallback = false;
  VectorXd p = basis_prior_impl(system, region, n_basis, &fallback);
  if (fallback) {
    log_warning("region " + std::to_string(region) + " has zero basis correlations; using a uniform basis prior");
  }
  return p;
}

Priors compute_priors(const ResidualSystem& system, double n_omega, double n_basis) {
  const auto& layout = system.layout();
  Priors priors;
  priors.region = rescaled_probabilities(region_alpha(system), n_omega, &priors.region_fallback);
  priors.basis = VectorXd::Zero(layout.num_columns());
  for (int r = 0; r < layout.num_regions(); ++r) {
    bool fallback = false;
    const VectorXd p = basis_prior_impl(system, r, n_basis, &fallback);
    if (fallback) ++priors.basis_fallbacks;
    const auto& cols = layout.columns_of_region[r];
    for (std::size_t k = 0; k < cols.size(); ++k) priors.basis[cols[k]] = p[static_cast<Eigen::Index>(k)];
  }
  if (priors.region_fallback) log_warning("all region correlations are zero; using a uniform region prior");
  if (priors.basis_fallbacks > 0) {
    log_warning(std::to_string(priors.basis_fallbacks) + " region(s) have zero basis correlations; using uniform basis priors");
  }
  return priors;
}

}  // namespace msbayes
