#pragma once

#include "specmc/models.hpp"
#include "specmc/objective.hpp"
#include "specmc/prior.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <vector>

namespace specmc {

struct ModeSearchOptions {
  int starts = 5;                      // zero vector plus starts-1 random perturbations
  double perturbation_sd = 0.5;
  std::uint64_t seed = 0;
  int coarse_iterations = 200;
  int polish_iterations = 200;
  Eigen::Index coarse_terms = 512;     // bins of adjacent frequencies in the multistart stage
  const ModelShape* shape = nullptr;   // when tempered, perturbed starts draw d and log lambda from a long-memory range
};

struct ModeResult {
  Eigen::VectorXd theta;
  double value = 0.0;    // objective at theta, including the prior when one was given
  double loglik = 0.0;   // log-likelihood part only
  bool converged = false;
  int best_start = 0;
  std::vector<double> start_values;  // full objective at the coarse optimum of each start
  std::uint64_t evaluations = 0;     // likelihood terms spent on the search
};

/// Maximises objective (+ prior) over the unconstrained vector by BFGS with
/// finite-difference gradients. Every start first runs on binned frequencies;
/// the best one is then refined on all terms. Throws ConvergenceError when the
/// refined point is not stationary.
ModeResult find_mode(const GroupedObjective& objective, const LogPrior* prior, const ModeSearchOptions& options = {});

/// Central-difference gradient with step h_i = 1e-5 (1 + |theta_i|).
Eigen::VectorXd numeric_gradient(const std::function<double(const Eigen::VectorXd&)>& f, const Eigen::VectorXd& theta);

}  // namespace specmc
