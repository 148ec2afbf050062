#pragma once

#include <span>

#include "msbayes/residual.hpp"

namespace msbayes {

/// min(alpha_k / sum(alpha) * target, 1). All-zero alpha falls back to the
/// uniform min(target / n, 1) and sets *fallback.
VectorXd rescaled_probabilities(std::span<const double> alpha, double target, bool* fallback = nullptr);

/// Per-region activation probabilities from the summed column correlations.
VectorXd region_prior(const ResidualSystem& system, double n_omega);

/// Activation probabilities of one region's additional columns, in the
/// order of layout().columns_of_region[region].
VectorXd basis_prior(const ResidualSystem& system, int region, double n_basis);

struct Priors {
  VectorXd region;  // per neighborhood
  VectorXd basis;   // per additional column
  bool region_fallback = false;
  int basis_fallbacks = 0;
};

/// Region and basis priors; fallbacks are reported through log_warning.
Priors compute_priors(const ResidualSystem& system, double n_omega, double n_basis);

}  // namespace msbayes
