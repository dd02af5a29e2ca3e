#include "specmc/prior.hpp"

#include "specmc/error.hpp"

#include <cmath>
#include <numbers>

namespace specmc {

void MinnesotaConfig::validate(int r) const {
  if (!(lambda0 > 0.0)) throw Error(Errc::config, "prior lambda0 must be positive");
  if (!(theta0 >= 0.0 && theta0 < 1.0)) throw Error(Errc::config, "prior theta0 must lie in [0, 1)");
  if (!(scalar_variance > 0.0) || !(d_variance > 0.0)) throw Error(Errc::config, "prior variances must be positive");
  if (sigma2.size() != 0) {
    if (sigma2.size() != r) throw Error(Errc::config, "prior sigma2 needs one entry per series");
    if (!(sigma2.array() > 0.0).all()) throw Error(Errc::config, "prior sigma2 entries must be positive");
  }
}

Eigen::VectorXd residual_variances(const MultiSeries& series, int order) {
  const Eigen::Index T = series.length();
  if (order < 1) throw Error(Errc::domain, "AR order for residual variances must be at least 1");
  if (T <= 10 * order) throw Error(Errc::too_short, "residual_variances needs T > 10 * order");
  if (series.missing_count() > 0) throw Error(Errc::domain, "residual_variances requires a gap-free series");
  Eigen::VectorXd out(series.dim());
  const Eigen::Index n = T - order;
  for (Eigen::Index j = 0; j < series.dim(); ++j) {
    const auto x = series.values.col(j);
    Eigen::MatrixXd X(n, order);
    for (int l = 1; l <= order; ++l) X.col(l - 1) = x.segment(order - l, n);
    const Eigen::VectorXd y = x.tail(n);
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(X);
    if (qr.rank() < order || y.cwiseAbs().maxCoeff() == 0.0) {
      throw Error(Errc::degenerate, "series " + std::to_string(j + 1) + " is degenerate (rank-deficient AR design)");
    }
    const Eigen::VectorXd resid = y - X * qr.solve(y);
    out(j) = resid.squaredNorm() / static_cast<double>(n);
  }
  return out;
}

double minnesota_variance(int i, int j, int l, const MinnesotaConfig& config) {
  if (l < 1) throw Error(Errc::domain, "Minnesota lag must be at least 1");
  const double lag = static_cast<double>(l);
  if (i == j) return (config.lambda0 / lag) * (config.lambda0 / lag);
  double ratio = 1.0;
  if (config.sigma2.size() != 0) ratio = std::sqrt(config.sigma2(i) / config.sigma2(j));
  const double s = config.lambda0 * config.theta0 * ratio / lag;
  return s * s;
}

Eigen::VectorXd prior_variances(const ModelShape& shape, const MinnesotaConfig& config) {
  config.validate(shape.r);
  Eigen::VectorXd v(shape.dimension());
  Eigen::Index pos = 0;
  auto coefficient_block = [&](int order) {
    for (int l = 1; l <= order; ++l)
      for (int j = 0; j < shape.r; ++j)
        for (int i = 0; i < shape.r; ++i) v(pos++) = minnesota_variance(i, j, l, config);
  };
  coefficient_block(shape.p);
  coefficient_block(shape.q);
  for (Eigen::Index k = 0; k < shape.chol_count(); ++k) v(pos++) = config.scalar_variance;
  if (shape.tempered()) {
    for (int k = 0; k < shape.r; ++k) v(pos++) = config.d_variance;
    for (Eigen::Index k = 0; k < shape.lambda_count(); ++k) v(pos++) = config.scalar_variance;
  }
  return v;
}

LogPrior::LogPrior(const ModelShape& shape, const MinnesotaConfig& config) : variances_(prior_variances(shape, config)) {
  constant_ = -0.5 * (2.0 * std::numbers::pi * variances_.array()).log().sum();
}

double LogPrior::operator()(const Eigen::VectorXd& theta) const {
  if (theta.size() != variances_.size()) {
    throw Error(Errc::shape, "prior expects " + std::to_string(variances_.size()) + " coordinates, got " + std::to_string(theta.size()));
  }
  return constant_ - 0.5 * (theta.array().square() / variances_.array()).sum();
}

double log_prior(const Eigen::VectorXd& theta, const ModelShape& shape, const MinnesotaConfig& config) {
  return LogPrior(shape, config)(theta);
}

}  // namespace specmc
