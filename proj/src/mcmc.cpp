#include "specmc/mcmc.hpp"

#include "specmc/error.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <map>

namespace specmc {
namespace {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

constexpr double kScale = 2.38 * 2.38;

double step_for(double x) { return 1e-5 * (1.0 + std::abs(x)); }

// Inverse of -H with eigenvalues floored so the result is positive definite.
MatrixXd inverse_negative_hessian(const MatrixXd& hessian) {
  const MatrixXd A = -0.5 * (hessian + hessian.transpose());
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(A);
  VectorXd ev = es.eigenvalues().cwiseAbs();
  const double floor = std::max(1e-8 * ev.maxCoeff(), 1e-12);
  for (Index i = 0; i < ev.size(); ++i) ev(i) = 1.0 / std::max(ev(i), floor);
  return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
}

struct ChainSetup {
  VectorXd theta;
  MatrixXd laplace;  // inverse negative posterior Hessian
  MatrixXd covariance;
};

VectorXd find_start(const GroupedObjective& loglik, const LogPrior& prior, const McmcSettings& settings) {
  if (settings.initial_theta) {
    if (settings.initial_theta->size() != loglik.dimension()) throw Error(Errc::shape, "initial_theta has the wrong dimension");
    return *settings.initial_theta;
  }
  ModeSearchOptions options = settings.mode;
  options.seed = settings.seed;
  try {
    return find_mode(loglik, prior.empty() ? nullptr : &prior, options).theta;
  } catch (const ConvergenceError& e) {
    throw Error(Errc::initialization, std::string("could not locate the posterior mode: ") + e.what());
  }
}

ChainSetup finish_setup(VectorXd theta, const MatrixXd& loglik_hessian, const LogPrior& prior, const McmcSettings& settings) {
  ChainSetup s;
  s.theta = std::move(theta);
  const double dim = static_cast<double>(s.theta.size());
  if (settings.initial_covariance) {
    s.covariance = *settings.initial_covariance;
    // Adaptation shrinks towards the supplied proposal instead of the Laplace fit.
    s.laplace = (dim / kScale) * s.covariance;
  } else {
    MatrixXd H = loglik_hessian;
    if (!prior.empty()) H.diagonal() += prior.hessian_diagonal();
    s.laplace = inverse_negative_hessian(H);
    s.covariance = (kScale / dim) * s.laplace;
  }
  return s;
}

std::vector<std::string> default_names(std::vector<std::string> names, Index dim) {
  if (!names.empty()) {
    if (static_cast<Index>(names.size()) != dim) throw Error(Errc::shape, "parameter names do not match the dimension");
    return names;
  }
  for (Index i = 1; i <= dim; ++i) names.push_back("theta_" + std::to_string(i));
  return names;
}

// Shared bookkeeping for both samplers.
class ChainRecorder {
 public:
  ChainRecorder(ChainOutput& out, const McmcSettings& settings, const ChainSetup& setup)
      : out_(out), settings_(settings), laplace_(setup.laplace), dim_(setup.theta.size()) {
    out_.draws.resize(settings.iterations - settings.burnin, dim_);
    out_.log_target.reserve(static_cast<std::size_t>(settings.iterations));
    out_.loglik.reserve(static_cast<std::size_t>(settings.iterations));
    out_.sigma2.reserve(static_cast<std::size_t>(settings.iterations));
    out_.accepted.reserve(static_cast<std::size_t>(settings.iterations));
    out_.evaluations.reserve(static_cast<std::size_t>(settings.iterations));
    sum_ = VectorXd::Zero(dim_);
    cross_ = MatrixXd::Zero(dim_, dim_);
  }

  // Returns true when the proposal covariance was re-estimated.
  bool record(Index it, const VectorXd& theta, double log_target, double loglik, double sigma2, bool accepted,
              std::uint64_t evaluations, MatrixXd& covariance) {
    out_.log_target.push_back(log_target);
    out_.loglik.push_back(loglik);
    out_.sigma2.push_back(sigma2);
    out_.accepted.push_back(accepted ? 1 : 0);
    out_.evaluations.push_back(evaluations);
    if (it >= settings_.burnin) out_.draws.row(it - settings_.burnin) = theta.transpose();

    if (sigma2 > settings_.sticky_sigma2) {
      if (++sticky_ == settings_.sticky_run && !warned_) {
        warned_ = true;
        out_.warnings.push_back("sigma2_hat exceeded " + std::to_string(settings_.sticky_sigma2) + " for " +
                                std::to_string(settings_.sticky_run) + " consecutive iterations (ending at iteration " +
                                std::to_string(it + 1) + "); the chain may be stuck");
      }
    } else {
      sticky_ = 0;
    }

    sum_ += theta;
    cross_.noalias() += theta * theta.transpose();
    const Index done = it + 1;
    if (done <= settings_.burnin && done % settings_.adapt_interval == 0) {
      const double n = static_cast<double>(done);
      const VectorXd mean = sum_ / n;
      const MatrixXd sample = (cross_ - n * mean * mean.transpose()) / std::max(n - 1.0, 1.0);
      // Shrink towards the Laplace covariance with the weight of 10 * dim pseudo-draws.
      const double prior_weight = 10.0 * static_cast<double>(dim_);
      MatrixXd blended = (n * sample + prior_weight * laplace_) / (n + prior_weight);
      blended = 0.5 * (blended + blended.transpose());
      covariance = (kScale / static_cast<double>(dim_)) * blended;
      covariance.diagonal().array() += 1e-8;
      return true;
    }
    return false;
  }

 private:
  ChainOutput& out_;
  const McmcSettings& settings_;
  MatrixXd laplace_;
  Index dim_;
  VectorXd sum_;
  MatrixXd cross_;
  Index sticky_ = 0;
  bool warned_ = false;
};

void fill_common(ChainOutput& out, const McmcSettings& settings, const GroupedObjective& loglik, std::vector<std::string> names) {
  out.names = default_names(std::move(names), loglik.dimension());
  out.iterations = settings.iterations;
  out.burnin = settings.burnin;
  out.term_count = loglik.term_count();
  out.seed = settings.seed;
}

}  // namespace

GroupPartition build_groups(Index n, Index G) {
  if (G < 1) throw Error(Errc::partition, "number of groups must be at least 1");
  if (G > n) throw Error(Errc::partition, "cannot split " + std::to_string(n) + " terms into " + std::to_string(G) + " groups");
  GroupPartition p;
  p.n = n;
  p.bounds.resize(static_cast<std::size_t>(G + 1));
  const Index base = n / G;
  const Index extra = n % G;
  Index pos = 0;
  for (Index g = 0; g < G; ++g) {
    p.bounds[static_cast<std::size_t>(g)] = pos;
    pos += base + (g < extra ? 1 : 0);
  }
  p.bounds[static_cast<std::size_t>(G)] = n;
  return p;
}

double ControlVariateSet::q(const VectorXd& theta) const {
  const VectorXd delta = theta - theta_star;
  return total_value + total_gradient.dot(delta) + 0.5 * delta.dot(total_hessian * delta);
}

double ControlVariateSet::q_group(const VectorXd& theta, Index g) const {
  const VectorXd delta = theta - theta_star;
  return values(g) + gradients.col(g).dot(delta) + 0.5 * delta.dot(hessians[static_cast<std::size_t>(g)] * delta);
}

ControlVariateSet fit_control_variates(const GroupedObjective& objective, const VectorXd& theta_star, const GroupPartition& partition) {
  const Index dim = objective.dimension();
  if (theta_star.size() != dim) throw Error(Errc::shape, "theta_star has the wrong dimension");
  if (partition.n != objective.term_count()) throw Error(Errc::partition, "partition does not cover the likelihood terms");
  const Index G = partition.groups();
  std::vector<TermRange> ranges;
  ranges.reserve(static_cast<std::size_t>(G));
  for (Index g = 0; g < G; ++g) ranges.push_back(partition.range(g));

  auto where = [](Index coordinate) {
    return coordinate < 0 ? std::string("the expansion point") : "coordinate " + std::to_string(coordinate + 1);
  };
  auto eval = [&](const VectorXd& x, Index coordinate) {
    VectorXd out(G);
    try {
      objective.range_sums(x, ranges, std::span<double>(out.data(), static_cast<std::size_t>(G)));
    } catch (const Error& e) {
      throw Error(Errc::stencil, "likelihood failed on the finite-difference stencil at " + where(coordinate) +
                                     ": " + e.what());
    }
    if (!out.allFinite()) {
      throw Error(Errc::stencil, "non-finite likelihood on the finite-difference stencil at " + where(coordinate));
    }
    return out;
  };

  ControlVariateSet cv;
  cv.theta_star = theta_star;
  const VectorXd h = theta_star.unaryExpr([](double x) { return step_for(x); });
  const VectorXd f0 = eval(theta_star, -1);
  std::vector<VectorXd> fp(static_cast<std::size_t>(dim));
  std::vector<VectorXd> fm(static_cast<std::size_t>(dim));
  VectorXd x = theta_star;
  for (Index i = 0; i < dim; ++i) {
    x(i) = theta_star(i) + h(i);
    fp[static_cast<std::size_t>(i)] = eval(x, i);
    x(i) = theta_star(i) - h(i);
    fm[static_cast<std::size_t>(i)] = eval(x, i);
    x(i) = theta_star(i);
  }
  cv.values = f0;
  cv.gradients.resize(dim, G);
  cv.hessians.assign(static_cast<std::size_t>(G), MatrixXd::Zero(dim, dim));
  for (Index i = 0; i < dim; ++i) {
    const auto& up = fp[static_cast<std::size_t>(i)];
    const auto& down = fm[static_cast<std::size_t>(i)];
    cv.gradients.row(i) = ((up - down) / (2.0 * h(i))).transpose();
    const VectorXd diag = (up - 2.0 * f0 + down) / (h(i) * h(i));
    for (Index g = 0; g < G; ++g) cv.hessians[static_cast<std::size_t>(g)](i, i) = diag(g);
  }
  for (Index i = 0; i < dim; ++i) {
    for (Index j = i + 1; j < dim; ++j) {
      x(i) = theta_star(i) + h(i);
      x(j) = theta_star(j) + h(j);
      const VectorXd fpp = eval(x, i);
      x(j) = theta_star(j) - h(j);
      const VectorXd fpm = eval(x, i);
      x(i) = theta_star(i) - h(i);
      const VectorXd fmm = eval(x, i);
      x(j) = theta_star(j) + h(j);
      const VectorXd fmp = eval(x, i);
      x(i) = theta_star(i);
      x(j) = theta_star(j);
      const VectorXd off = (fpp - fpm - fmp + fmm) / (4.0 * h(i) * h(j));
      for (Index g = 0; g < G; ++g) {
        cv.hessians[static_cast<std::size_t>(g)](i, j) = off(g);
        cv.hessians[static_cast<std::size_t>(g)](j, i) = off(g);
      }
    }
  }
  cv.total_value = 0.0;
  cv.total_gradient = VectorXd::Zero(dim);
  cv.total_hessian = MatrixXd::Zero(dim, dim);
  for (Index g = 0; g < G; ++g) {
    cv.total_value += cv.values(g);
    cv.total_gradient += cv.gradients.col(g);
    cv.total_hessian += cv.hessians[static_cast<std::size_t>(g)];
  }
  return cv;
}

SubsampleState initial_subsample(Index G, Index m, Index B, Rng& rng) {
  if (m < 1) throw Error(Errc::empty_sample, "subsample size must be at least 1");
  if (B < 1 || m % B != 0) throw Error(Errc::config, "number of blocks must divide the subsample size");
  SubsampleState s;
  s.blocks = B;
  s.indices.resize(static_cast<std::size_t>(m));
  for (auto& u : s.indices) u = static_cast<Index>(rng.index(static_cast<std::uint64_t>(G)));
  return s;
}

SubsampleState block_update(SubsampleState state, Index G, Rng& rng) {
  if (state.blocks < 1) throw Error(Errc::config, "subsample state has no blocks");
  const Index b = static_cast<Index>(rng.index(static_cast<std::uint64_t>(state.blocks)));
  const Index size = state.block_size();
  for (Index i = b * size; i < (b + 1) * size; ++i)
    state.indices[static_cast<std::size_t>(i)] = static_cast<Index>(rng.index(static_cast<std::uint64_t>(G)));
  return state;
}

DifferenceEstimate difference_estimator(const VectorXd& theta, std::span<const Index> sample, const ControlVariateSet& cv,
                                        const GroupedObjective& objective, const GroupPartition& partition) {
  const Index m = static_cast<Index>(sample.size());
  if (m == 0) throw Error(Errc::empty_sample, "difference estimator needs at least one sampled group");
  const Index G = cv.groups();
  if (partition.groups() != G) throw Error(Errc::partition, "partition and control variates disagree on the group count");

  std::map<Index, double> exact;
  for (Index u : sample) {
    if (u < 0 || u >= G) throw Error(Errc::partition, "sampled group index out of range");
    exact.emplace(u, 0.0);
  }
  std::vector<TermRange> ranges;
  ranges.reserve(exact.size());
  for (const auto& [g, _] : exact) ranges.push_back(partition.range(g));
  std::vector<double> sums(ranges.size());
  objective.range_sums(theta, ranges, sums);
  std::size_t k = 0;
  for (auto& [g, v] : exact) v = sums[k++];

  VectorXd diff(m);
  for (Index i = 0; i < m; ++i) {
    const Index u = sample[static_cast<std::size_t>(i)];
    diff(i) = exact[u] - cv.q_group(theta, u);
  }
  const double Gd = static_cast<double>(G);
  const double md = static_cast<double>(m);
  DifferenceEstimate out;
  out.ell_hat = cv.q(theta) + (Gd / md) * diff.sum();
  if (m > 1) {
    const double mean = diff.mean();
    const double var = (diff.array() - mean).square().sum() / (md - 1.0);
    out.sigma2_hat = Gd * Gd / md * var;
  }
  return out;
}

double bias_corrected_loglik(double ell_hat, double sigma2_hat) { return ell_hat - 0.5 * sigma2_hat; }

MhResult mh_step(const VectorXd& theta, double log_target, const MatrixXd& proposal_cov,
                 const std::function<double(const VectorXd&)>& target, Rng& rng) {
  Eigen::LLT<MatrixXd> llt(proposal_cov);
  if (llt.info() != Eigen::Success) throw Error(Errc::domain, "proposal covariance is not positive definite");
  VectorXd z(theta.size());
  for (Index i = 0; i < z.size(); ++i) z(i) = rng.normal();
  VectorXd proposal = theta + llt.matrixL() * z;
  double proposed = -std::numeric_limits<double>::infinity();
  try {
    const double v = target(proposal);
    if (std::isfinite(v)) proposed = v;
  } catch (const Error&) {
  }
  const double u = rng.uniform();
  MhResult out;
  if (std::isfinite(proposed) && std::log(u) < proposed - log_target) {
    out.theta = std::move(proposal);
    out.log_target = proposed;
    out.accepted = true;
  } else {
    out.theta = theta;
    out.log_target = log_target;
  }
  return out;
}

void McmcSettings::validate(bool subsample) const {
  if (iterations < 1 || burnin < 0 || burnin >= iterations) throw Error(Errc::config, "need iterations > burnin >= 0");
  if (adapt_interval < 1) throw Error(Errc::config, "adapt_interval must be positive");
  if (subsample) {
    if (sample < 1 || sample > groups) throw Error(Errc::config, "need 1 <= m <= G");
    if (blocks < 1 || sample % blocks != 0) throw Error(Errc::config, "B must divide m");
  }
}

double ChainOutput::acceptance_rate() const {
  const auto b = static_cast<std::size_t>(burnin);
  if (accepted.size() <= b) return 0.0;
  double n = 0.0;
  for (std::size_t i = b; i < accepted.size(); ++i) n += accepted[i];
  return n / static_cast<double>(accepted.size() - b);
}

VectorXd ChainOutput::posterior_sd() const {
  const VectorXd mean = posterior_mean();
  const double n = static_cast<double>(draws.rows());
  return ((draws.rowwise() - mean.transpose()).array().square().colwise().sum() / std::max(n - 1.0, 1.0)).sqrt();
}

ChainOutput run_full_mcmc(const GroupedObjective& loglik, const LogPrior& prior, const McmcSettings& settings,
                          std::vector<std::string> names) {
  settings.validate(false);
  const auto t0 = std::chrono::steady_clock::now();
  const std::uint64_t base = loglik.evaluations();
  ChainOutput out;
  out.method = "full";
  fill_common(out, settings, loglik, std::move(names));

  VectorXd start = find_start(loglik, prior, settings);
  MatrixXd hessian = MatrixXd::Zero(start.size(), start.size());
  if (!settings.initial_covariance) {
    try {
      hessian = fit_control_variates(loglik, start, build_groups(loglik.term_count(), 1)).total_hessian;
    } catch (const Error& e) {
      throw Error(Errc::initialization, std::string("Hessian at the starting point failed: ") + e.what());
    }
  }
  ChainSetup setup = finish_setup(std::move(start), hessian, prior, settings);
  out.theta_star = setup.theta;
  out.initial_covariance = setup.covariance;
  out.setup_evaluations = loglik.evaluations() - base;

  auto log_prior = [&](const VectorXd& th) { return prior.empty() ? 0.0 : prior(th); };
  VectorXd theta = setup.theta;
  double current_loglik = 0.0;
  try {
    current_loglik = loglik.total(theta);
  } catch (const Error& e) {
    throw Error(Errc::initialization, std::string("likelihood undefined at the starting point: ") + e.what());
  }
  double current = current_loglik + log_prior(theta);
  if (!std::isfinite(current)) throw Error(Errc::initialization, "log target is not finite at the starting point");

  Rng rng(settings.seed, Stream::proposal);
  MatrixXd cov = setup.covariance;
  ChainRecorder recorder(out, settings, setup);
  double proposed_loglik = 0.0;
  const std::function<double(const VectorXd&)> target = [&](const VectorXd& th) {
    proposed_loglik = loglik.total(th);
    return proposed_loglik + log_prior(th);
  };
  for (Index it = 0; it < settings.iterations; ++it) {
    MhResult step = mh_step(theta, current, cov, target, rng);
    if (step.accepted) {
      theta = std::move(step.theta);
      current = step.log_target;
      current_loglik = proposed_loglik;
    }
    recorder.record(it, theta, current, current_loglik, 0.0, step.accepted, loglik.evaluations() - base, cov);
  }
  out.final_covariance = cov;
  out.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return out;
}

ChainOutput run_subsample_mcmc(const GroupedObjective& loglik, const LogPrior& prior, const McmcSettings& settings,
                               std::vector<std::string> names) {
  settings.validate(true);
  const auto t0 = std::chrono::steady_clock::now();
  const std::uint64_t base = loglik.evaluations();
  ChainOutput out;
  out.method = "subsample";
  fill_common(out, settings, loglik, std::move(names));
  out.groups = settings.groups;
  out.sample = settings.sample;
  out.blocks = settings.blocks;

  const GroupPartition partition = build_groups(loglik.term_count(), settings.groups);
  VectorXd start = find_start(loglik, prior, settings);
  ControlVariateSet cv;
  try {
    cv = fit_control_variates(loglik, start, partition);
  } catch (const Error& e) {
    throw Error(Errc::initialization, std::string("control variate fit failed: ") + e.what());
  }
  ChainSetup setup = finish_setup(std::move(start), cv.total_hessian, prior, settings);
  out.theta_star = setup.theta;
  out.initial_covariance = setup.covariance;

  auto log_prior = [&](const VectorXd& th) { return prior.empty() ? 0.0 : prior(th); };
  Rng rng(settings.seed, Stream::proposal);
  Rng sub_rng(settings.seed, Stream::subsample);
  SubsampleState u = initial_subsample(settings.groups, settings.sample, settings.blocks, sub_rng);

  VectorXd theta = setup.theta;
  DifferenceEstimate est;
  try {
    est = difference_estimator(theta, u.indices, cv, loglik, partition);
  } catch (const Error& e) {
    throw Error(Errc::initialization, std::string("likelihood undefined at the starting point: ") + e.what());
  }
  out.setup_evaluations = loglik.evaluations() - base;
  double current_loglik = bias_corrected_loglik(est.ell_hat, est.sigma2_hat);
  double current = current_loglik + log_prior(theta);
  if (!std::isfinite(current)) throw Error(Errc::initialization, "log target is not finite at the starting point");

  MatrixXd cov = setup.covariance;
  ChainRecorder recorder(out, settings, setup);
  SubsampleState proposed_u;
  DifferenceEstimate proposed_est;
  const std::function<double(const VectorXd&)> target = [&](const VectorXd& th) {
    proposed_est = DifferenceEstimate{std::numeric_limits<double>::quiet_NaN(), std::numeric_limits<double>::quiet_NaN()};
    proposed_est = difference_estimator(th, proposed_u.indices, cv, loglik, partition);
    return bias_corrected_loglik(proposed_est.ell_hat, proposed_est.sigma2_hat) + log_prior(th);
  };
  for (Index it = 0; it < settings.iterations; ++it) {
    proposed_u = block_update(u, settings.groups, sub_rng);
    MhResult step = mh_step(theta, current, cov, target, rng);
    if (step.accepted) {
      theta = std::move(step.theta);
      current = step.log_target;
      current_loglik = bias_corrected_loglik(proposed_est.ell_hat, proposed_est.sigma2_hat);
      u = std::move(proposed_u);
    }
    recorder.record(it, theta, current, current_loglik, proposed_est.sigma2_hat, step.accepted, loglik.evaluations() - base, cov);
  }
  out.final_covariance = cov;
  out.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return out;
}

}  // namespace specmc
