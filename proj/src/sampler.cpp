#include "msbayes/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "msbayes/errors.hpp"

namespace msbayes {

namespace {

constexpr double kMaxRidge = 1e-6;
constexpr double kPivotFloor = 1e-14;

double next_ridge(double ridge) { return ridge > 0.0 ? ridge * 10.0 : 1e-12; }
bool ridge_exhausted(double ridge) { return ridge > kMaxRidge * (1.0 + 1e-9); }

double data_weight(const ResidualSystem& system, const SamplerConfig& config) {
  if (system.num_observations() == 0 || std::isinf(config.sigma_d)) return 0.0;
  return config.data_weight();
}

double prior_precision(const SamplerConfig& config) {
  return std::isinf(config.prior_var) ? 0.0 : 1.0 / config.prior_var;
}

}  // namespace

void SamplerConfig::validate() const {
  auto positive = [](double v, const char* name) {
    if (!(v > 0.0)) throw ConfigError(std::string("sampler.") + name + " must be positive");
  };
  positive(sigma_L, "sigma_L");
  positive(sigma_d, "sigma_d");
  positive(n_omega, "n_omega");
  positive(n_basis, "n_basis");
  positive(prior_var, "prior_var");
  if (!(ridge >= 0.0) || ridge > kMaxRidge) throw ConfigError("sampler.ridge must lie in [0, 1e-6]");
  if (!(data_noise >= 0.0)) throw ConfigError("obs.noise must be non-negative");
  if (n_samples < 1) throw ConfigError("sampler.n_samples must be at least 1");
  if (sweeps < 1) throw ConfigError("sampler.sweeps must be at least 1");
}

bool IndicatorState::consistent(const ColumnLayout& layout) const {
  if (static_cast<int>(I.size()) != layout.num_columns() || static_cast<int>(J.size()) != layout.num_regions()) {
    return false;
  }
  std::vector<int> expected;
  for (int c = 0; c < layout.num_columns(); ++c) {
    if (!I[c]) continue;
    if (!J[layout.region_of[c]]) return false;
    expected.push_back(c);
  }
  return expected == active && beta_plus.size() == static_cast<Eigen::Index>(active.size());
}

void IndicatorState::sync_active() {
  active.clear();
  for (int c = 0; c < static_cast<int>(I.size()); ++c) {
    if (I[c]) active.push_back(c);
  }
}

PosteriorFactor factor_posterior(const ResidualSystem& system, std::span<const int> active, const SamplerConfig& config) {
  const auto n = static_cast<Eigen::Index>(active.size());
  const double wL = config.residual_weight();
  const double wd = data_weight(system, config);
  const MatrixXd& G = system.gram();
  const MatrixXd& S = system.S();

  MatrixXd base(n, n);
  VectorXd rhs(n);
  for (Eigen::Index l = 0; l < n; ++l) {
    for (Eigen::Index k = 0; k < n; ++k) base(k, l) = wL * G(active[k], active[l]);
    rhs[l] = wL * system.Ktb[active[l]];
  }
  if (wd > 0.0) {
    MatrixXd Sa(S.rows(), n);
    for (Eigen::Index k = 0; k < n; ++k) Sa.col(k) = S.col(active[k]);
    base.noalias() += wd * Sa.transpose() * Sa;
    rhs.noalias() += wd * Sa.transpose() * system.g;
  }

  PosteriorFactor f;
  f.active.assign(active.begin(), active.end());
  f.ridge = config.ridge;
  for (;;) {
    const double shift = prior_precision(config) + f.ridge;
    f.scale = (base.diagonal().array() + shift).sqrt();
    MatrixXd H = base;
    H.diagonal().array() += shift;
    const VectorXd inv = f.scale.cwiseInverse();
    H = inv.asDiagonal() * H * inv.asDiagonal();
    f.llt.compute(H);
    if (f.llt.info() == Eigen::Success && H.allFinite()) break;
    f.ridge = next_ridge(f.ridge);
    if (ridge_exhausted(f.ridge)) {
      throw NumericalError("posterior precision is not positive definite with " + std::to_string(n) +
                           " active columns even at ridge 1e-6");
    }
  }
  f.mode = f.llt.solve(rhs.cwiseQuotient(f.scale)).cwiseQuotient(f.scale);
  if (!f.mode.allFinite()) throw NumericalError("posterior mode is not finite");
  return f;
}

VectorXd posterior_mode(const ResidualSystem& system, std::span<const int> active, const SamplerConfig& config) {
  if (active.empty()) return VectorXd(0);
  return factor_posterior(system, active, config).mode;
}

VectorXd sample_beta(const ResidualSystem& system, std::span<const int> active, const SamplerConfig& config,
                     std::mt19937_64& rng) {
  if (active.empty()) return VectorXd(0);
  const PosteriorFactor f = factor_posterior(system, active, config);
  std::normal_distribution<double> normal(0.0, 1.0);
  VectorXd z(static_cast<Eigen::Index>(active.size()));
  for (Eigen::Index k = 0; k < z.size(); ++k) z[k] = normal(rng);
  const VectorXd x = f.llt.matrixU().solve(z);
  return f.mode + x.cwiseQuotient(f.scale);
}

double gibbs_probability(double prior, double delta_residual2, double delta_mismatch2, const SamplerConfig& config) {
  const double a = std::clamp(prior, 1e-12, 1.0 - 1e-12);
  double logit = std::log(a / (1.0 - a)) - 0.5 * config.residual_weight() * delta_residual2;
  if (!std::isinf(config.sigma_d)) logit -= 0.5 * config.data_weight() * delta_mismatch2;
  if (logit >= 0.0) return 1.0 / (1.0 + std::exp(-logit));
  const double e = std::exp(logit);
  return e / (1.0 + e);
}

namespace {

struct ModeFit {
  VectorXd beta;
  double residual2 = 0.0;
  double mismatch2 = 0.0;
};

ModeFit fit_mode(const ResidualSystem& system, std::span<const int> active, const SamplerConfig& config) {
  ModeFit fit;
  fit.beta = posterior_mode(system, active, config);
  fit.residual2 = system.residual_norm2(active, fit.beta);
  fit.mismatch2 = system.num_observations() ? system.mismatch(active, fit.beta).squaredNorm() : 0.0;
  return fit;
}

}  // namespace

IndicatorState gibbs_step(const ResidualSystem& system, const IndicatorState& state, int column, const Priors& priors,
                          const SamplerConfig& config, std::mt19937_64& rng, double* probability) {
  const auto& layout = system.layout();
  if (!state.J[layout.region_of[column]]) {
    throw SequencingError("gibbs step on column " + std::to_string(column) + " of an unselected region");
  }
  IndicatorState on = state;
  on.I[column] = 1;
  on.sync_active();
  IndicatorState off = state;
  off.I[column] = 0;
  off.sync_active();

  const ModeFit plus = fit_mode(system, on.active, config);
  const ModeFit minus = fit_mode(system, off.active, config);
  const double p = gibbs_probability(priors.basis[column], plus.residual2 - minus.residual2,
                                     plus.mismatch2 - minus.mismatch2, config);
  if (probability) *probability = p;
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  if (uniform(rng) < p) {
    on.beta_plus = plus.beta;
    return on;
  }
  off.beta_plus = minus.beta;
  return off;
}

IndicatorState draw_indicators(const ResidualSystem& system, const Priors& priors, std::mt19937_64& rng) {
  const auto& layout = system.layout();
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  IndicatorState state;
  state.J.assign(layout.num_regions(), 0);
  state.I.assign(layout.num_columns(), 0);
  for (int r = 0; r < layout.num_regions(); ++r) state.J[r] = uniform(rng) < priors.region[r];
  for (int r = 0; r < layout.num_regions(); ++r) {
    if (!state.J[r]) continue;
    for (int c : layout.columns_of_region[r]) state.I[c] = uniform(rng) < priors.basis[c];
  }
  state.sync_active();
  return state;
}

IndicatorState sequential_sample(const ResidualSystem& system, const Priors& priors, const SamplerConfig& config,
                                 std::mt19937_64& rng) {
  IndicatorState state = draw_indicators(system, priors, rng);
  state.beta_plus = sample_beta(system, state.active, config, rng);
  return state;
}

IndicatorState mcmc_sample(const ResidualSystem& system, const Priors& priors, const SamplerConfig& config,
                           std::mt19937_64& rng) {
  IndicatorState state = draw_indicators(system, priors, rng);
  const auto& layout = system.layout();
  ActiveSetSolver solver(system, config, state.active);
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  for (int sweep = 0; sweep < config.sweeps; ++sweep) {
    for (int r = 0; r < layout.num_regions(); ++r) {
      if (!state.J[r]) continue;
      for (int c : layout.columns_of_region[r]) {
        const bool was_on = state.I[c];
        const ActiveSetSolver::Evaluation alt = was_on ? solver.evaluate_without(c) : solver.evaluate_with(c);
        const auto& plus = was_on ? solver.current() : alt;
        const auto& minus = was_on ? alt : solver.current();
        const double p = gibbs_probability(priors.basis[c], plus.residual2 - minus.residual2,
                                           plus.mismatch2 - minus.mismatch2, config);
        const bool on = uniform(rng) < p;
        if (on == was_on) continue;
        if (on) {
          solver.add(c);
        } else {
          solver.remove(c);
        }
        state.I[c] = on;
      }
    }
  }
  state.sync_active();
  state.beta_plus = sample_beta(system, state.active, config, rng);
  return state;
}

ActiveSetSolver::ActiveSetSolver(const ResidualSystem& system, const SamplerConfig& config, std::vector<int> active)
    : system_(&system), config_(config), ridge_(config.ridge) {
  const int N = system.num_columns();
  const double wL = config.residual_weight();
  const double wd = data_weight(system, config);
  diag_.resize(N);
  for (int c = 0; c < N; ++c) {
    diag_[c] = wL * system.gram()(c, c);
    if (wd > 0.0) diag_[c] += wd * system.S().col(c).squaredNorm();
  }
  set_ridge(ridge_);
  rebuild(std::move(active));
}

void ActiveSetSolver::set_ridge(double ridge) {
  ridge_ = ridge;
  scale_ = (diag_.array() + prior_precision(config_) + ridge_).sqrt();
}

double ActiveSetSolver::scaled_entry(int i, int j) const {
  double h = config_.residual_weight() * system_->gram()(i, j);
  const double wd = data_weight(*system_, config_);
  if (wd > 0.0) h += wd * system_->S().col(i).dot(system_->S().col(j));
  if (i == j) h += prior_precision(config_) + ridge_;
  return h / (scale_[i] * scale_[j]);
}

double ActiveSetSolver::scaled_rhs(int c) const {
  double r = config_.residual_weight() * system_->Ktb[c];
  const double wd = data_weight(*system_, config_);
  if (wd > 0.0) r += wd * system_->S().col(c).dot(system_->g);
  return r / scale_[c];
}

VectorXd ActiveSetSolver::scaled_column(int c) const {
  VectorXd h(size());
  for (int k = 0; k < size(); ++k) h[k] = scaled_entry(cols_[k], c);
  return h;
}

void ActiveSetSolver::reserve(int n) {
  if (R_.rows() >= n) return;
  const int cap = std::max<int>(n, std::max<int>(32, 2 * static_cast<int>(R_.rows())));
  MatrixXd grown = MatrixXd::Zero(cap, cap);
  const int m = size();
  grown.topLeftCorner(m, m) = R_.topLeftCorner(m, m);
  R_ = std::move(grown);
}

void ActiveSetSolver::rebuild(std::vector<int> cols) {
  const int n = static_cast<int>(cols.size());
  for (;;) {
    MatrixXd H(n, n);
    for (int l = 0; l < n; ++l) {
      for (int k = 0; k < n; ++k) H(k, l) = scaled_entry(cols[k], cols[l]);
    }
    Eigen::LLT<MatrixXd> llt(H);
    if (llt.info() == Eigen::Success && H.allFinite()) {
      cols_ = std::move(cols);
      R_ = MatrixXd::Zero(std::max(32, 2 * n), std::max(32, 2 * n));
      R_.topLeftCorner(n, n) = llt.matrixU();
      break;
    }
    const double next = next_ridge(ridge_);
    if (ridge_exhausted(next)) {
      throw NumericalError("incremental posterior factor is not positive definite with " + std::to_string(n) +
                           " active columns even at ridge 1e-6");
    }
    set_ridge(next);
  }
  refresh();
}

void ActiveSetSolver::refresh() {
  const int n = size();
  VectorXd rhs(n);
  for (int k = 0; k < n; ++k) rhs[k] = scaled_rhs(cols_[k]);
  const auto R = R_.topLeftCorner(n, n);
  q_ = R.transpose().triangularView<Eigen::Lower>().solve(rhs);
  y_ = R.triangularView<Eigen::Upper>().solve(q_);
  current_ = evaluate(cols_, y_);
}

ActiveSetSolver::Evaluation ActiveSetSolver::evaluate(std::vector<int> cols, const VectorXd& scaled_mode) const {
  VectorXd beta(scaled_mode.size());
  for (Eigen::Index k = 0; k < scaled_mode.size(); ++k) beta[k] = scaled_mode[k] / scale_[cols[k]];
  return evaluate_beta(std::move(cols), std::move(beta));
}

ActiveSetSolver::Evaluation ActiveSetSolver::evaluate_beta(std::vector<int> cols, VectorXd beta) const {
  Evaluation e;
  e.beta = std::move(beta);
  e.residual2 = system_->residual_norm2(cols, e.beta);
  e.mismatch2 = system_->num_observations() ? system_->mismatch(cols, e.beta).squaredNorm() : 0.0;
  e.columns = std::move(cols);
  return e;
}

int ActiveSetSolver::position(int column) const {
  const auto it = std::find(cols_.begin(), cols_.end(), column);
  if (it == cols_.end()) throw SequencingError("column " + std::to_string(column) + " is not active");
  return static_cast<int>(it - cols_.begin());
}

ActiveSetSolver::Evaluation ActiveSetSolver::evaluate_without(int column) const {
  const int k = position(column);
  const int n = size();
  const auto R = R_.topLeftCorner(n, n);
  VectorXd e = VectorXd::Zero(n);
  e[k] = 1.0;
  const VectorXd z = R.triangularView<Eigen::Upper>().solve(R.transpose().triangularView<Eigen::Lower>().solve(e));
  const VectorXd y = y_ - (y_[k] / z[k]) * z;
  VectorXd reduced(n - 1);
  std::vector<int> cols;
  cols.reserve(n - 1);
  for (int i = 0, j = 0; i < n; ++i) {
    if (i == k) continue;
    reduced[j++] = y[i];
    cols.push_back(cols_[i]);
  }
  return evaluate(std::move(cols), reduced);
}

ActiveSetSolver::Evaluation ActiveSetSolver::evaluate_with(int column) const {
  const int n = size();
  std::vector<int> cols = cols_;
  cols.push_back(column);
  const auto R = R_.topLeftCorner(n, n);
  const VectorXd w = R.transpose().triangularView<Eigen::Lower>().solve(scaled_column(column));
  const double delta2 = 1.0 - w.squaredNorm();
  if (!(delta2 > kPivotFloor)) {
    // Nearly dependent column: fall back to a direct solve.
    VectorXd beta = factor_posterior(*system_, cols, config_).mode;
    return evaluate_beta(std::move(cols), std::move(beta));
  }
  const double delta = std::sqrt(delta2);
  const double q_last = (scaled_rhs(column) - w.dot(q_)) / delta;
  VectorXd y(n + 1);
  y[n] = q_last / delta;
  y.head(n) = R.triangularView<Eigen::Upper>().solve(q_ - w * y[n]);
  return evaluate(std::move(cols), y);
}

void ActiveSetSolver::add(int column) {
  const int n = size();
  const auto R = R_.topLeftCorner(n, n);
  const VectorXd w = R.transpose().triangularView<Eigen::Lower>().solve(scaled_column(column));
  const double delta2 = 1.0 - w.squaredNorm();
  if (!(delta2 > kPivotFloor)) {
    std::vector<int> cols = cols_;
    cols.push_back(column);
    const double next = next_ridge(ridge_);
    if (ridge_exhausted(next)) throw NumericalError("incremental posterior factor lost definiteness");
    set_ridge(next);
    rebuild(std::move(cols));
    return;
  }
  reserve(n + 1);
  R_.block(0, n, n, 1) = w;
  R_.block(n, 0, 1, n).setZero();
  R_(n, n) = std::sqrt(delta2);
  cols_.push_back(column);
  refresh();
}

void ActiveSetSolver::remove(int column) {
  const int k = position(column);
  const int n = size();
  for (int j = k; j < n - 1; ++j) R_.block(0, j, j + 2, 1) = R_.block(0, j + 1, j + 2, 1);
  for (int j = k; j < n - 1; ++j) {
    const double a = R_(j, j);
    const double b = R_(j + 1, j);
    const double r = std::hypot(a, b);
    const double c = a / r;
    const double s = b / r;
    for (int l = j; l < n - 1; ++l) {
      const double x = R_(j, l);
      const double y = R_(j + 1, l);
      R_(j, l) = c * x + s * y;
      R_(j + 1, l) = -s * x + c * y;
    }
    R_(j + 1, j) = 0.0;
  }
  R_.row(n - 1).head(n).setZero();
  R_.col(n - 1).head(n).setZero();
  cols_.erase(cols_.begin() + k);
  refresh();
}

}  // namespace msbayes
