#pragma once

#include "specmc/ingest.hpp"
#include "specmc/models.hpp"

#include <Eigen/Dense>

namespace specmc {

/// Hyperparameters of the Minnesota-style coefficient prior and the scalar priors.
struct MinnesotaConfig {
  double lambda0 = 1.0;     // overall tightness
  double theta0 = 0.2;      // cross-series discount
  Eigen::VectorXd sigma2;   // residual variance per series; empty means all ones
  double scalar_variance = 0.1;  // Cholesky entries and log lambda
  double d_variance = 1.0;

  void validate(int r) const;
};

/// Residual variance of a least-squares univariate AR(order) fit to each column.
Eigen::VectorXd residual_variances(const MultiSeries& series, int order = 4);

/// v_{ij,l}: prior variance of entry (i, j) of the lag-l coefficient matrix (0-based i, j).
double minnesota_variance(int i, int j, int l, const MinnesotaConfig& config);

/// Prior variance of every coordinate of the unconstrained vector.
Eigen::VectorXd prior_variances(const ModelShape& shape, const MinnesotaConfig& config);

/// Sum of independent zero-mean normal log densities over the unconstrained vector.
double log_prior(const Eigen::VectorXd& theta, const ModelShape& shape, const MinnesotaConfig& config);

/// Precomputed form of log_prior for repeated evaluation.
class LogPrior {
 public:
  LogPrior() = default;
  LogPrior(const ModelShape& shape, const MinnesotaConfig& config);

  double operator()(const Eigen::VectorXd& theta) const;
  /// Diagonal of the (constant) Hessian, -1 / variance.
  Eigen::VectorXd hessian_diagonal() const { return -variances_.cwiseInverse(); }
  const Eigen::VectorXd& variances() const { return variances_; }
  bool empty() const { return variances_.size() == 0; }

 private:
  Eigen::VectorXd variances_;
  double constant_ = 0.0;
};

}  // namespace specmc
