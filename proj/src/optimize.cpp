#include "specmc/optimize.hpp"

#include "specmc/error.hpp"
#include "specmc/rng.hpp"

#include <ceres/ceres.h>

#include <cmath>
#include <functional>
#include <limits>

namespace specmc {
namespace {

using Eigen::Index;
using Eigen::VectorXd;
using Fn = std::function<double(const VectorXd&)>;

double step_for(double x) { return 1e-5 * (1.0 + std::abs(x)); }

// Returns NaN instead of throwing so the line search can back off.
double safe(const Fn& f, const VectorXd& theta) {
  try {
    const double v = f(theta);
    return std::isfinite(v) ? v : std::numeric_limits<double>::quiet_NaN();
  } catch (const Error&) {
    return std::numeric_limits<double>::quiet_NaN();
  }
}

class NegatedObjective final : public ceres::FirstOrderFunction {
 public:
  NegatedObjective(Fn f, int n, bool central) : f_(std::move(f)), n_(n), central_(central) {}

  bool Evaluate(const double* parameters, double* cost, double* gradient) const override {
    VectorXd theta = Eigen::Map<const VectorXd>(parameters, n_);
    const double f0 = safe(f_, theta);
    if (!std::isfinite(f0)) return false;
    *cost = -f0;
    if (gradient == nullptr) return true;
    for (int i = 0; i < n_; ++i) {
      const double h = step_for(theta(i));
      const double x = theta(i);
      theta(i) = x + h;
      const double up = safe(f_, theta);
      double g = 0.0;
      if (central_) {
        theta(i) = x - h;
        const double down = safe(f_, theta);
        g = (up - down) / (2.0 * h);
      } else {
        g = (up - f0) / h;
      }
      theta(i) = x;
      if (!std::isfinite(g)) return false;
      gradient[i] = -g;
    }
    return true;
  }

  int NumParameters() const override { return n_; }

 private:
  Fn f_;
  int n_;
  bool central_;
};

ceres::GradientProblemSolver::Summary run_bfgs(const Fn& f, VectorXd& theta, int iterations, bool central) {
  ceres::GradientProblemSolver::Options options;
  options.line_search_direction_type = ceres::BFGS;
  options.max_num_iterations = iterations;
  options.function_tolerance = 1e-11;
  options.gradient_tolerance = 1e-7;
  options.parameter_tolerance = 1e-10;
  options.logging_type = ceres::SILENT;
  options.minimizer_progress_to_stdout = false;
  ceres::GradientProblem problem(new NegatedObjective(f, static_cast<int>(theta.size()), central));
  ceres::GradientProblemSolver::Summary summary;
  ceres::Solve(options, problem, theta.data(), &summary);
  return summary;
}

}  // namespace

VectorXd numeric_gradient(const Fn& f, const VectorXd& theta) {
  VectorXd g(theta.size());
  VectorXd x = theta;
  for (Index i = 0; i < theta.size(); ++i) {
    const double h = step_for(theta(i));
    x(i) = theta(i) + h;
    const double up = f(x);
    x(i) = theta(i) - h;
    const double down = f(x);
    x(i) = theta(i);
    g(i) = (up - down) / (2.0 * h);
  }
  return g;
}

ModeResult find_mode(const GroupedObjective& objective, const LogPrior* prior, const ModeSearchOptions& options) {
  if (options.starts < 1) throw Error(Errc::config, "mode search needs at least one start");
  const Index dim = objective.dimension();
  const std::uint64_t before = objective.evaluations();
  auto prior_at = [prior](const VectorXd& theta) { return prior != nullptr && !prior->empty() ? (*prior)(theta) : 0.0; };

  const Index n = objective.term_count();
  const Index bin = std::max<Index>(1, n / std::max<Index>(1, options.coarse_terms));
  const Fn coarse = [&](const VectorXd& theta) { return objective.binned_total(theta, bin) + prior_at(theta); };
  const Fn fine = [&](const VectorXd& theta) { return objective.total(theta) + prior_at(theta); };

  ModeResult result;
  Rng rng(options.seed, Stream::optimizer);
  double best = -std::numeric_limits<double>::infinity();
  VectorXd best_theta;
  for (int s = 0; s < options.starts; ++s) {
    VectorXd theta = VectorXd::Zero(dim);
    if (s > 0) {
      if (options.shape != nullptr && options.shape->tempered()) {
        // Memory parameters carry the multimodality; the other coordinates start at zero.
        const ModelShape& sh = *options.shape;
        for (Index i = 0; i < sh.r; ++i) theta(sh.d_offset() + i) = 0.5 * rng.uniform();
        const double loglam = std::log(0.01) + (0.0 - std::log(0.01)) * rng.uniform();
        for (Index i = 0; i < sh.lambda_count(); ++i) theta(sh.lambda_offset() + i) = loglam;
      } else {
        for (Index i = 0; i < dim; ++i) theta(i) = options.perturbation_sd * rng.normal();
      }
    }
    double value = -std::numeric_limits<double>::infinity();
    if (std::isfinite(safe(coarse, theta))) {
      run_bfgs(coarse, theta, options.coarse_iterations, true);
      const double v = safe(fine, theta);
      if (std::isfinite(v)) value = v;
    }
    result.start_values.push_back(value);
    if (value > best) {
      best = value;
      best_theta = theta;
      result.best_start = s;
    }
  }
  if (!std::isfinite(best)) throw ConvergenceError(best, "no start produced a finite objective");

  VectorXd theta = best_theta;
  const auto summary = run_bfgs(fine, theta, options.polish_iterations, true);
  const double value = safe(fine, theta);
  if (!std::isfinite(value)) throw ConvergenceError(best, "refinement left the domain of the likelihood");
  const VectorXd g = numeric_gradient(fine, theta);
  result.theta = theta;
  result.value = value;
  result.loglik = value - prior_at(theta);
  result.converged = summary.termination_type == ceres::CONVERGENCE || g.cwiseAbs().maxCoeff() <= 1e-4 * (1.0 + std::abs(value));
  result.evaluations = objective.evaluations() - before;
  if (!result.converged) {
    throw ConvergenceError(value, "mode search did not reach a stationary point (max |gradient| = " +
                                      std::to_string(g.cwiseAbs().maxCoeff()) + ")");
  }
  return result;
}

}  // namespace specmc
