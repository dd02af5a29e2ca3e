// Runs the acceptance criteria and prints one PASS/FAIL line per criterion.
// With arguments, only the listed criterion numbers run.

#include "specmc/diagnostics.hpp"
#include "specmc/error.hpp"
#include "specmc/ingest.hpp"
#include "specmc/likelihood.hpp"
#include "specmc/mcmc.hpp"
#include "specmc/models.hpp"
#include "specmc/prior.hpp"
#include "specmc/spectral.hpp"

#include "../oracles.hpp"
#include "../support.hpp"

#include <Eigen/Eigenvalues>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <map>
#include <set>
#include <string>
#include <vector>

using namespace specmc;
using Eigen::Index;
using Eigen::MatrixXcd;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

struct Verdict {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

class Stopwatch {
 public:
  double seconds() const { return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0_).count(); }

 private:
  std::chrono::steady_clock::time_point t0_ = std::chrono::steady_clock::now();
};

// Exact Gaussian log-likelihood as a single-term objective.
class KalmanObjective final : public GroupedObjective {
 public:
  KalmanObjective(const MultiSeries& series, ModelShape shape) : series_(series), shape_(shape) {}
  Index dimension() const override { return shape_.dimension(); }
  Index term_count() const override { return 1; }
  void range_sums(const VectorXd& theta, std::span<const TermRange> ranges, std::span<double> out) const override {
    for (std::size_t i = 0; i < ranges.size(); ++i) {
      out[i] = ranges[i].second > ranges[i].first ? kalman_exact_loglik(unpack(theta, shape_), series_) : 0.0;
      count(static_cast<std::uint64_t>(ranges[i].second - ranges[i].first));
    }
  }

 private:
  const MultiSeries& series_;
  ModelShape shape_;
};

ModelParams var1_truth() {
  ModelParams p;
  p.kind = ModelKind::varma;
  p.mu = VectorXd::Zero(2);
  p.ar.coeffs = {(MatrixXd(2, 2) << 0.5, 0.1, -0.2, 0.3).finished()};
  p.sigma_chol = (MatrixXd(2, 2) << 1.0, 0.0, 0.4, 0.8).finished();
  return p;
}

Verdict criterion1() {
  Stopwatch clock;
  const ModelParams truth = var1_truth();
  const ModelShape shape = truth.shape();
  const MultiSeries series = demean(simulate_model(truth, 1 << 14, 500, 1));
  const PeriodogramSet pgram = periodogram(series);
  MinnesotaConfig cfg;
  cfg.sigma2 = residual_variances(series, 4);
  const LogPrior prior(shape, cfg);

  McmcSettings s;
  s.iterations = 20000;
  s.burnin = 2000;
  s.seed = 1;
  s.mode.shape = &shape;
  const WhittleLikelihood whittle(pgram, shape);
  const ChainOutput w = run_full_mcmc(whittle, prior, s, shape.parameter_names());

  const KalmanObjective kalman(series, shape);
  s.initial_theta = w.theta_star;
  const ChainOutput k = run_full_mcmc(kalman, prior, s, shape.parameter_names());

  const VectorXd mw = w.posterior_mean(), sw = w.posterior_sd(), mk = k.posterior_mean();
  const VectorXd theta = pack(truth, shape);
  const double vs_truth = ((mw - theta).cwiseAbs().cwiseQuotient(sw)).maxCoeff();
  const double vs_kalman = ((mw - mk).cwiseAbs().cwiseQuotient(sw)).maxCoeff();
  const double t = clock.seconds();
  return {vs_truth < 3.0 && vs_kalman < 3.0 && t < 600.0,
          fmt("VARMA(1,0) r=2 T=2^14: max |Whittle mean - truth| = %.2f SD, max |Whittle mean - Kalman mean| = %.2f SD "
              "(limit 3); %.0f s (limit 600)",
              vs_truth, vs_kalman, t)};
}

// Criterion 2 and criterion 8 share one pair of chains.
struct FidelityRun {
  double max_z = 0.0;
  double mean_rct = 0.0;
  double min_rct = 0.0;
  double max_rct = 0.0;
  double seconds = 0.0;
  double full_seconds = 0.0;
  double sub_seconds = 0.0;
  double acceptance_full = 0.0;
  double acceptance_sub = 0.0;
  std::size_t warnings = 0;
};

const FidelityRun& fidelity_run() {
  static const FidelityRun run = [] {
    Stopwatch clock;
    ModelParams truth;
    truth.kind = ModelKind::vartfima;
    truth.mu = VectorXd::Zero(2);
    truth.ar.coeffs = {(MatrixXd(2, 2) << 0.6, -0.6, 0.6, 0.6).finished()};
    truth.ma.coeffs = {(MatrixXd(2, 2) << 0.7, 0.0, 0.0, 0.7).finished()};
    truth.sigma_chol = (MatrixXd(2, 2) << 1.0, 0.0, 0.3, 1.0).finished();
    truth.d = Eigen::Vector2d(0.4, 0.3);
    truth.lambda = VectorXd::Constant(1, 0.1);
    const ModelShape shape = truth.shape();
    const PeriodogramSet pgram = periodogram(demean(simulate_model(truth, 1 << 15, 500, 1)));
    const WhittleLikelihood loglik(pgram, shape);
    const LogPrior prior(shape, MinnesotaConfig{});

    McmcSettings s;  // 55000 iterations, 5000 burn-in, G = 1000, m = 10, B = 10
    s.seed = 1;
    s.mode.shape = &shape;
    const ChainOutput sub = run_subsample_mcmc(loglik, prior, s, shape.parameter_names());
    const ChainOutput full = run_full_mcmc(loglik, prior, s, shape.parameter_names());

    FidelityRun r;
    const VectorXd z = (sub.posterior_mean() - full.posterior_mean()).cwiseQuotient(full.posterior_sd());
    r.max_z = z.cwiseAbs().maxCoeff();
    const VectorXd rct = relative_ct(chain_efficiency(full), chain_efficiency(sub));
    r.mean_rct = rct.mean();
    r.min_rct = rct.minCoeff();
    r.max_rct = rct.maxCoeff();
    r.full_seconds = full.seconds;
    r.sub_seconds = sub.seconds;
    r.acceptance_full = full.acceptance_rate();
    r.acceptance_sub = sub.acceptance_rate();
    r.warnings = sub.warnings.size();
    r.seconds = clock.seconds();
    return r;
  }();
  return run;
}

Verdict criterion2() {
  const FidelityRun& r = fidelity_run();
  return {r.max_z < 0.1 && r.seconds < 1800.0,
          fmt("VARTFIMA(1,1) r=2 T=2^15 defaults: max |subsample mean - full mean| = %.3f full SD (limit 0.1); "
              "acceptance %.3f / %.3f, %zu warnings; %.0f s (limit 1800)",
              r.max_z, r.acceptance_sub, r.acceptance_full, r.warnings, r.seconds)};
}

Verdict criterion3() {
  Stopwatch clock;
  ModelParams truth;
  truth.kind = ModelKind::vartfima;
  truth.mu = VectorXd::Zero(2);
  truth.ar.coeffs = {(MatrixXd(2, 2) << 0.4, 0.1, 0.0, 0.2).finished()};
  truth.ma.coeffs = {(MatrixXd(2, 2) << 0.2, 0.0, 0.1, 0.3).finished()};
  truth.sigma_chol = (MatrixXd(2, 2) << 1.0, 0.0, 0.3, 1.0).finished();
  truth.d = Eigen::Vector2d(0.3, 0.2);
  truth.lambda = VectorXd::Constant(1, 0.2);
  const ModelShape shape = truth.shape();
  const PeriodogramSet pgram = periodogram(demean(simulate_model(truth, 2048, 500, 3)));
  const WhittleLikelihood loglik(pgram, shape);
  const GroupPartition part = build_groups(loglik.term_count(), 4);
  const VectorXd star = pack(truth, shape);
  const ControlVariateSet cv = fit_control_variates(loglik, star, part);
  Rng rng(3, Stream::replication);
  double worst = 0.0;
  for (int rep = 0; rep < 20; ++rep) {
    VectorXd theta = star;
    for (Index i = 0; i < theta.size(); ++i) theta(i) += 0.2 * rng.normal();
    double sum = 0.0;
    for (Index a = 0; a < 4; ++a)
      for (Index b = 0; b < 4; ++b) {
        const Index sample[2] = {a, b};
        sum += difference_estimator(theta, sample, cv, loglik, part).ell_hat;
      }
    const double exact = loglik.total(theta);
    worst = std::max(worst, std::abs(sum / 16.0 - exact) / std::max(1.0, std::abs(exact)));
  }
  return {worst < 1e-9, fmt("G=4, m=2, 16 ordered samples at 20 points: max relative gap %.2e (limit 1e-9); %.1f s", worst, clock.seconds())};
}

Verdict criterion4() {
  Stopwatch clock;
  Rng rng(4, Stream::replication);
  double worst_density = 0.0;
  for (int rep = 0; rep < 100; ++rep) {
    const int r = 1 + rep % 3;
    const ModelShape shape{ModelKind::vartfima, r, rep % 3, (rep / 3) % 2, rep % 2 == 0};
    ModelParams p = testing::random_params(shape, rng);
    p.d.setZero();
    ModelParams v = p;
    v.kind = ModelKind::varma;
    v.d.resize(0);
    v.lambda.resize(0);
    for (double w : {0.01, 0.5, 1.3, 2.9}) {
      const MatrixXcd a = vartfima_spectral_density(p, w), b = varma_spectral_density(v, w);
      worst_density = std::max(worst_density, (a - b).cwiseAbs().maxCoeff() / std::max(1.0, b.cwiseAbs().maxCoeff()));
    }
  }
  double worst_conv = 0.0;
  for (double lambda : {0.01, 0.1, 1.0})
    for (double d : {-0.4, 0.3, 0.45, 1.2}) {
      const auto b = tempered_coeffs(d, lambda, 50);
      const auto c = inverse_tempered_coeffs(d, lambda, 50);
      for (int v = 0; v <= 50; ++v) {
        double s = 0.0;
        for (int k = 0; k <= v; ++k) s += b[static_cast<std::size_t>(k)] * c[static_cast<std::size_t>(v - k)];
        worst_conv = std::max(worst_conv, std::abs(s - (v == 0 ? 1.0 : 0.0)));
      }
    }
  return {worst_density < 1e-12 && worst_conv < 1e-10,
          fmt("d=0 reduction on 100 sets: max gap %.2e (limit 1e-12); b*c identity v<=50 on 12 (d, lambda): max gap %.2e (limit 1e-10); %.1f s",
              worst_density, worst_conv, clock.seconds())};
}

Verdict criterion5() {
  Stopwatch clock;
  Rng rng(5, Stream::replication);
  double worst_parseval = 0.0, worst_herm = 0.0, worst_psd = 0.0, worst_rank = 0.0;
  for (int rep = 0; rep < 50; ++rep) {
    const Index T = 8 + static_cast<Index>(rng.index(4089));
    const Index r = 1 + static_cast<Index>(rng.index(4));
    const MultiSeries s = demean(make_series(testing::random_matrix(T, r, rng)));
    const MatrixXcd J = dft(s);
    for (Index j = 0; j < r; ++j) {
      const double lhs = J.row(j).cwiseAbs2().sum() / (static_cast<double>(T) * static_cast<double>(T));
      const double var = s.values.col(j).squaredNorm() / static_cast<double>(T);
      worst_parseval = std::max(worst_parseval, std::abs(lhs - var) / var);
    }
    const PeriodogramSet p = periodogram(s);
    for (Index i = 0; i < p.size(); ++i) {
      const MatrixXcd I = p.ordinate(i);
      const double scale = I.norm() + 1e-300;
      worst_herm = std::max(worst_herm, (I - I.adjoint()).norm() / scale);
      const Eigen::VectorXd ev = Eigen::SelfAdjointEigenSolver<MatrixXcd>(I).eigenvalues();
      worst_psd = std::max(worst_psd, -ev.minCoeff() / scale);
      if (r > 1) worst_rank = std::max(worst_rank, ev(r - 2) / scale);
    }
  }
  return {worst_parseval < 1e-8 && worst_herm < 1e-12 && worst_psd < 1e-12 && worst_rank < 1e-10,
          fmt("50 series, T<=4096, r<=4: Parseval %.1e (limit 1e-8), Hermitian %.1e, negative eigenvalue %.1e, second eigenvalue %.1e; %.1f s",
              worst_parseval, worst_herm, worst_psd, worst_rank, clock.seconds())};
}

Verdict criterion6() {
  Stopwatch clock;
  Rng rng(6, Stream::replication);
  double worst = 0.0;
  for (int rep = 0; rep < 20; ++rep) {
    const int r = 1 + rep % 3;
    const int p = rep % 3;
    const int q = p == 2 ? 0 : (rep / 3) % 2;
    const ModelParams params = testing::random_params(ModelShape{ModelKind::varma, r, p, q}, rng);
    const Index T = 22 + 2 * rep;
    const MultiSeries s = simulate_model(params, T, 100, 60 + static_cast<std::uint64_t>(rep));
    worst = std::max(worst, std::abs(kalman_exact_loglik(params, s) - oracles::dense_gaussian_loglik(params, s)));
  }
  return {worst < 1e-6, fmt("20 VARMA sets, T<=60, r<=3, p+q<=2: max |Kalman - dense Gaussian| = %.2e (limit 1e-6); %.1f s", worst, clock.seconds())};
}

Verdict criterion7() {
  Stopwatch clock;
  Rng rng(7, Stream::replication);
  std::vector<double> x(1000000);
  x[0] = rng.normal() / std::sqrt(1.0 - 0.81);
  for (std::size_t t = 1; t < x.size(); ++t) x[t] = 0.9 * x[t - 1] + rng.normal();
  const double tau = iact(x);
  return {std::abs(tau - 19.0) < 1.9, fmt("AR(1) rho=0.9, N=10^6: IACT %.2f (target 19 +- 10%%); %.1f s", tau, clock.seconds())};
}

Verdict criterion8() {
  const FidelityRun& r = fidelity_run();
  return {r.mean_rct > 10.0,
          fmt("criterion 2 chains: RCT min %.1f / mean %.1f / max %.1f (mean limit > 10); full chain %.0f s, subsample chain %.0f s",
              r.min_rct, r.mean_rct, r.max_rct, r.full_seconds, r.sub_seconds)};
}

Verdict criterion9() {
  Stopwatch clock;
  ModelParams truth;
  truth.kind = ModelKind::vartfima;
  truth.mu = VectorXd::Zero(2);
  truth.ar.coeffs = {(MatrixXd(2, 2) << 0.5, 0.1, -0.2, 0.3).finished()};
  truth.sigma_chol = (MatrixXd(2, 2) << 1.0, 0.0, 0.3, 1.0).finished();
  truth.d = Eigen::Vector2d(0.3, 0.3);
  truth.lambda = VectorXd::Constant(1, 0.05);
  const ModelShape tfi{ModelKind::vartfima, 2, 1, 0, true};
  const ModelShape plain{ModelKind::varma, 2, 1, 0, true};
  int wins = 0, failures = 0;
  for (int rep = 0; rep < 100; ++rep) {
    const PeriodogramSet pgram = periodogram(demean(simulate_model(truth, 1 << 14, 500, split_seed(9, Stream::replication, rep))));
    try {
      wins += bic(pgram, tfi).bic > bic(pgram, plain).bic;
    } catch (const ConvergenceError&) {
      ++failures;
    }
  }
  const double t = clock.seconds();
  return {wins >= 90 && t < 1200.0,
          fmt("VARTFIMA(1,0) d=0.3 lambda=0.05 T=2^14: TFI preferred in %d/100 (limit 90), %d fit failures; %.0f s (limit 1200)", wins,
              failures, t)};
}

Verdict criterion10() {
  const Index a = ModelShape{ModelKind::vartfima, 2, 1, 1, true}.dimension();
  const Index b = ModelShape{ModelKind::vartfima, 3, 2, 0, true}.dimension();
  const Index c = ModelShape{ModelKind::vartfima, 4, 2, 0, true}.dimension();
  Rng rng(10);
  bool packed = true;
  for (const ModelShape& s : {ModelShape{ModelKind::vartfima, 2, 1, 1, true}, ModelShape{ModelKind::vartfima, 3, 2, 0, true},
                              ModelShape{ModelKind::vartfima, 4, 2, 0, true}})
    packed = packed && pack(testing::random_params(s, rng), s).size() == s.dimension();
  return {a == 14 && b == 28 && c == 47 && packed,
          fmt("VARTFIMA(1,1) r=2: %td, VARTFIMA(2,0) r=3: %td, VARTFIMA(2,0) r=4: %td (expected 14 / 28 / 47)", a, b, c)};
}

}  // namespace

int main(int argc, char** argv) {
  const std::map<int, std::function<Verdict()>> criteria{{1, criterion1}, {2, criterion2}, {3, criterion3}, {4, criterion4},
                                                         {5, criterion5}, {6, criterion6}, {7, criterion7}, {8, criterion8},
                                                         {9, criterion9}, {10, criterion10}};
  std::set<int> wanted;
  for (int i = 1; i < argc; ++i) wanted.insert(std::atoi(argv[i]));
  int failed = 0;
  for (const auto& [id, run] : criteria) {
    if (!wanted.empty() && !wanted.count(id)) continue;
    Verdict v;
    try {
      v = run();
    } catch (const std::exception& e) {
      v = {false, std::string("error: ") + e.what()};
    }
    failed += !v.pass;
    std::printf("criterion %2d: %s  %s\n", id, v.pass ? "PASS" : "FAIL", v.detail.c_str());
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
