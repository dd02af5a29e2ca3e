#pragma once

#include "specmc/objective.hpp"
#include "specmc/optimize.hpp"
#include "specmc/prior.hpp"
#include "specmc/rng.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace specmc {

/// Contiguous, balanced split of n terms into G groups.
struct GroupPartition {
  Eigen::Index n = 0;
  std::vector<Eigen::Index> bounds;  // G + 1 split points

  Eigen::Index groups() const { return static_cast<Eigen::Index>(bounds.size()) - 1; }
  TermRange range(Eigen::Index g) const { return {bounds[static_cast<std::size_t>(g)], bounds[static_cast<std::size_t>(g) + 1]}; }
  Eigen::Index size(Eigen::Index g) const { return range(g).second - range(g).first; }
};

GroupPartition build_groups(Eigen::Index n, Eigen::Index G);

/// Second-order Taylor expansions of every group's summed log-likelihood around theta*.
struct ControlVariateSet {
  Eigen::VectorXd theta_star;
  Eigen::VectorXd values;                 // G
  Eigen::MatrixXd gradients;              // dim x G
  std::vector<Eigen::MatrixXd> hessians;  // G symmetric dim x dim
  double total_value = 0.0;
  Eigen::VectorXd total_gradient;
  Eigen::MatrixXd total_hessian;

  Eigen::Index groups() const { return values.size(); }
  /// q(theta) summed over all groups, from the aggregates.
  double q(const Eigen::VectorXd& theta) const;
  double q_group(const Eigen::VectorXd& theta, Eigen::Index g) const;
};

/// Central finite differences with h_i = 1e-5 (1 + |theta*_i|); all groups share each
/// stencil evaluation. Throws Errc::stencil naming the coordinate on a non-finite value.
ControlVariateSet fit_control_variates(const GroupedObjective& objective, const Eigen::VectorXd& theta_star,
                                       const GroupPartition& partition);

/// Group indices u_1..u_m, split into B equal blocks.
struct SubsampleState {
  std::vector<Eigen::Index> indices;
  Eigen::Index blocks = 1;

  Eigen::Index size() const { return static_cast<Eigen::Index>(indices.size()); }
  Eigen::Index block_size() const { return size() / blocks; }
};

SubsampleState initial_subsample(Eigen::Index G, Eigen::Index m, Eigen::Index B, Rng& rng);

/// Redraws the indices of one uniformly chosen block, uniformly with replacement from [0, G).
SubsampleState block_update(SubsampleState state, Eigen::Index G, Rng& rng);

struct DifferenceEstimate {
  double ell_hat = 0.0;
  double sigma2_hat = 0.0;
};

/// ell_hat = q(theta) + (G/m) sum_i (l_{u_i}(theta) - q_{u_i}(theta)) and
/// sigma2_hat = (G^2/m) * sample variance of the m differences (0 when m = 1).
DifferenceEstimate difference_estimator(const Eigen::VectorXd& theta, std::span<const Eigen::Index> sample,
                                        const ControlVariateSet& cv, const GroupedObjective& objective,
                                        const GroupPartition& partition);

/// ell_hat - sigma2_hat / 2.
double bias_corrected_loglik(double ell_hat, double sigma2_hat);

struct MhResult {
  Eigen::VectorXd theta;
  double log_target = 0.0;
  bool accepted = false;
};

/// Gaussian random-walk Metropolis-Hastings step. The proposal uses dim normals from
/// `rng`, then one uniform is always drawn for the decision. A target that throws or is
/// not finite is rejected.
MhResult mh_step(const Eigen::VectorXd& theta, double log_target, const Eigen::MatrixXd& proposal_cov,
                 const std::function<double(const Eigen::VectorXd&)>& target, Rng& rng);

struct McmcSettings {
  Eigen::Index iterations = 55000;
  Eigen::Index burnin = 5000;
  Eigen::Index groups = 1000;  // G
  Eigen::Index sample = 10;    // m
  Eigen::Index blocks = 10;    // B
  std::uint64_t seed = 1;
  Eigen::Index adapt_interval = 200;
  double sticky_sigma2 = 10.0;
  Eigen::Index sticky_run = 50;
  ModeSearchOptions mode;
  std::optional<Eigen::VectorXd> initial_theta;       // skips the mode search
  std::optional<Eigen::MatrixXd> initial_covariance;  // skips the Laplace proposal

  void validate(bool subsample) const;
};

struct ChainOutput {
  std::string method;  // "full" or "subsample"
  std::vector<std::string> names;
  Eigen::MatrixXd draws;                    // post burn-in draws, one row each
  std::vector<double> log_target;           // current state, every iteration
  std::vector<double> loglik;               // current log-likelihood (estimate), every iteration
  std::vector<double> sigma2;               // sigma2_hat at the proposal, every iteration
  std::vector<std::uint8_t> accepted;       // every iteration
  std::vector<std::uint64_t> evaluations;   // cumulative likelihood terms after each iteration
  std::uint64_t setup_evaluations = 0;      // mode search plus Hessian or control variates
  Eigen::VectorXd theta_star;
  Eigen::MatrixXd initial_covariance;
  Eigen::MatrixXd final_covariance;
  Eigen::Index iterations = 0;
  Eigen::Index burnin = 0;
  Eigen::Index term_count = 0;
  Eigen::Index groups = 0;
  Eigen::Index sample = 0;
  Eigen::Index blocks = 0;
  std::uint64_t seed = 0;
  double seconds = 0.0;
  std::vector<std::string> warnings;

  std::uint64_t total_evaluations() const { return evaluations.empty() ? setup_evaluations : evaluations.back(); }
  double acceptance_rate() const;  // post burn-in
  Eigen::VectorXd posterior_mean() const { return draws.colwise().mean(); }
  Eigen::VectorXd posterior_sd() const;
};

/// Random-walk chain on the exact target loglik + prior. The chain starts at the
/// posterior mode with proposal covariance (2.38^2/dim) times the inverse negative
/// Hessian there, adapts every adapt_interval iterations during burn-in, then freezes.
ChainOutput run_full_mcmc(const GroupedObjective& loglik, const LogPrior& prior, const McmcSettings& settings,
                          std::vector<std::string> names = {});

/// Block pseudo-marginal chain on the difference estimator with grouped quadratic
/// control variates fitted at the posterior mode. Theta and one block of u are
/// proposed jointly.
ChainOutput run_subsample_mcmc(const GroupedObjective& loglik, const LogPrior& prior, const McmcSettings& settings,
                               std::vector<std::string> names = {});

}  // namespace specmc
