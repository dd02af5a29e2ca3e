#pragma once

#include "specmc/mcmc.hpp"
#include "specmc/models.hpp"
#include "specmc/optimize.hpp"
#include "specmc/spectral.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace specmc {

/// Integrated autocorrelation time 1 + 2 sum_k rho_k, truncated by Geyer's initial
/// positive and initial monotone sequence rules on pairs of autocorrelations. The
/// result is floored at 1 / log10(N).
///
/// Throws Errc::degenerate for chains shorter than 100 or with zero variance.
double iact(std::span<const double> chain);

/// Sample autocorrelations rho_0..rho_max_lag (biased autocovariance, FFT based).
std::vector<double> autocorrelation(std::span<const double> chain, std::size_t max_lag);

struct RangeSummary {
  double min = 0.0;
  double mean = 0.0;
  double max = 0.0;

  static RangeSummary of(const Eigen::VectorXd& values);
};

/// CT = IACT x (likelihood terms per iteration), with the setup cost amortised over
/// the iterations of the run.
struct ChainEfficiency {
  Eigen::VectorXd iact;
  double evaluations_per_iteration = 0.0;
  Eigen::VectorXd ct;
};

ChainEfficiency compute_ct(const Eigen::VectorXd& iact, std::uint64_t total_evaluations, Eigen::Index iterations);
/// IACT of every column of `draws`, then compute_ct.
ChainEfficiency draws_efficiency(const Eigen::MatrixXd& draws, std::uint64_t total_evaluations, Eigen::Index iterations);
ChainEfficiency chain_efficiency(const ChainOutput& chain);

struct EfficiencyReport {
  std::vector<std::string> names;
  ChainEfficiency full;
  std::optional<ChainEfficiency> subsample;
  std::optional<Eigen::VectorXd> rct;  // CT_full / CT_subsample per parameter
  RangeSummary iact_full;
  std::optional<RangeSummary> iact_subsample;
  std::optional<RangeSummary> rct_summary;
};

/// Per-parameter CT_full / CT_subsample. Throws Errc::shape on a length mismatch.
Eigen::VectorXd relative_ct(const ChainEfficiency& full, const ChainEfficiency& subsample);

EfficiencyReport efficiency_report(std::vector<std::string> names, const ChainEfficiency& full,
                                   const std::optional<ChainEfficiency>& subsample);

enum class BicPenalty { time_points, frequencies };

struct BicResult {
  ModelShape shape;
  Eigen::VectorXd theta;
  double loglik = 0.0;  // Whittle log-likelihood at the maximum
  double bic = 0.0;     // loglik - k log(n) / 2
  Eigen::Index k = 0;
  Eigen::Index n = 0;
  std::uint64_t evaluations = 0;
};

double bic_value(double loglik, Eigen::Index k, Eigen::Index n);

/// Whittle maximum likelihood (no prior) by the multistart search of find_mode, then
/// the BIC. n is T for time_points and the number of retained frequencies otherwise.
/// Throws ConvergenceError carrying the best value when the search fails.
BicResult bic(const PeriodogramSet& pgram, const ModelShape& shape, BicPenalty penalty = BicPenalty::time_points,
              ModeSearchOptions options = {}, int threads = 1);

/// |f_ij|^2 / (f_ii f_jj).
double squared_coherence(const Eigen::MatrixXcd& f, Eigen::Index i, Eigen::Index j);
/// -arg(f_ij(w)) / w in samples.
double time_delay(const Eigen::MatrixXcd& f, Eigen::Index i, Eigen::Index j, double omega);

/// Pointwise posterior quantiles of one spectral quantity; rows follow the grid,
/// columns the quantile levels.
struct SpectralPanel {
  enum class Kind { spectrum, coherence, delay };
  Kind kind = Kind::spectrum;
  Eigen::Index i = 0;
  Eigen::Index j = 0;
  Eigen::MatrixXd quantiles;
};

struct SpectralSummary {
  Eigen::VectorXd omega;             // radians per sample, in (0, pi)
  std::vector<double> levels;        // 0.025, 0.5, 0.975
  std::vector<SpectralPanel> panels; // f_jj for every j, |K_ij|^2 for i < j, delay for i != j
  Eigen::Index draws_used = 0;
};

/// Type 7 sample quantile of unsorted values.
double quantile(std::vector<double> values, double level);

/// Grid w_k = pi (k + 1/2) / N, k = 0..N-1. Draws are thinned by a uniform stride to at
/// most `max_draws`. Throws Errc::domain if a squared coherence leaves [0, 1].
SpectralSummary spectral_summary(const Eigen::MatrixXd& draws, const ModelShape& shape, Eigen::Index grid_size = 512,
                                 Eigen::Index max_draws = 2000, int threads = 1);

struct PredictiveBands {
  Eigen::VectorXd omega;              // positive retained frequencies
  std::vector<double> levels;         // 0.025, 0.5, 0.975
  std::vector<Eigen::MatrixXd> bands; // per series: frequencies x levels
  Eigen::MatrixXd observed;           // frequencies x series, diagonal periodogram
  Eigen::Index draws_used = 0;
};

/// Posterior predictive periodogram: for each retained draw, I_jj(w) ~ Exponential with
/// mean f_jj(w), `draws_per_theta` times per frequency. Draws are thinned to at most
/// `max_draws`.
PredictiveBands predictive_periodogram(const Eigen::MatrixXd& draws, const PeriodogramSet& pgram, const ModelShape& shape,
                                       Eigen::Index draws_per_theta = 100, std::uint64_t seed = 1,
                                       Eigen::Index max_draws = 200);

/// Rows 0, s, 2s, ... with the smallest stride s giving at most `limit` rows.
std::vector<Eigen::Index> thin_rows(Eigen::Index rows, Eigen::Index limit);

}  // namespace specmc
