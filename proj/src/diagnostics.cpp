#include "specmc/diagnostics.hpp"

#include "specmc/error.hpp"
#include "specmc/likelihood.hpp"
#include "specmc/parallel.hpp"
#include "specmc/rng.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>

namespace specmc {
namespace {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

const std::vector<double> kLevels = {0.025, 0.5, 0.975};

std::size_t fft_size(std::size_t n) {
  std::size_t m = 1;
  while (m < 2 * n) m <<= 1;
  return m;
}

// Type 7 quantiles of a scratch buffer, reordered in place.
std::vector<double> quantiles_inplace(std::vector<double>& x, const std::vector<double>& levels) {
  std::vector<double> out;
  out.reserve(levels.size());
  const std::size_t n = x.size();
  for (double p : levels) {
    const double h = static_cast<double>(n - 1) * p;
    const auto lo = static_cast<std::size_t>(std::floor(h));
    std::nth_element(x.begin(), x.begin() + static_cast<std::ptrdiff_t>(lo), x.end());
    const double a = x[lo];
    double b = a;
    if (lo + 1 < n) b = *std::min_element(x.begin() + static_cast<std::ptrdiff_t>(lo) + 1, x.end());
    out.push_back(a + (h - static_cast<double>(lo)) * (b - a));
  }
  return out;
}

std::vector<ModelParams> unpack_rows(const MatrixXd& draws, const ModelShape& shape, const std::vector<Index>& rows) {
  if (draws.cols() != shape.dimension()) {
    throw Error(Errc::shape, "draws have " + std::to_string(draws.cols()) + " columns but the model has " +
                                 std::to_string(shape.dimension()) + " parameters");
  }
  std::vector<ModelParams> params;
  params.reserve(rows.size());
  for (Index row : rows) params.push_back(unpack(draws.row(row).transpose(), shape));
  return params;
}

}  // namespace

std::vector<double> autocorrelation(std::span<const double> chain, std::size_t max_lag) {
  const std::size_t n = chain.size();
  if (n < 2) throw Error(Errc::degenerate, "autocorrelation needs at least two values");
  double mean = 0.0;
  for (double v : chain) mean += v;
  mean /= static_cast<double>(n);

  const std::size_t m = fft_size(n);
  std::vector<double> buf(m, 0.0);
  for (std::size_t t = 0; t < n; ++t) buf[t] = chain[t] - mean;
  std::vector<std::complex<double>> spec(m / 2 + 1);
  auto* cbuf = reinterpret_cast<fftw_complex*>(spec.data());
  fftw_plan forward;
  fftw_plan backward;
  {
    std::lock_guard lock(fftw_planner_mutex());
    forward = fftw_plan_dft_r2c_1d(static_cast<int>(m), buf.data(), cbuf, FFTW_ESTIMATE);
    backward = fftw_plan_dft_c2r_1d(static_cast<int>(m), cbuf, buf.data(), FFTW_ESTIMATE);
  }
  fftw_execute(forward);
  for (auto& c : spec) c = std::norm(c);
  fftw_execute(backward);
  {
    std::lock_guard lock(fftw_planner_mutex());
    fftw_destroy_plan(forward);
    fftw_destroy_plan(backward);
  }
  const double c0 = buf[0];
  if (!(c0 > 0.0) || !std::isfinite(c0)) throw Error(Errc::degenerate, "chain has zero variance");
  const std::size_t L = std::min(max_lag, n - 1);
  std::vector<double> rho(L + 1);
  for (std::size_t k = 0; k <= L; ++k) rho[k] = buf[k] / c0;
  return rho;
}

double iact(std::span<const double> chain) {
  const std::size_t n = chain.size();
  if (n < 100) throw Error(Errc::degenerate, "IACT needs a chain of length at least 100");
  const double first = chain[0];
  if (std::all_of(chain.begin(), chain.end(), [first](double v) { return v == first; })) {
    throw Error(Errc::degenerate, "chain is constant");
  }
  const std::vector<double> rho = autocorrelation(chain, n - 1);
  double sum = 0.0;
  double previous = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k + 1 < rho.size(); k += 2) {
    double pair = rho[k] + rho[k + 1];
    if (pair <= 0.0) break;
    pair = std::min(pair, previous);
    previous = pair;
    sum += pair;
  }
  const double tau = -1.0 + 2.0 * sum;
  return std::max(tau, 1.0 / std::log10(static_cast<double>(n)));
}

RangeSummary RangeSummary::of(const VectorXd& values) {
  if (values.size() == 0) return {};
  return {values.minCoeff(), values.mean(), values.maxCoeff()};
}

ChainEfficiency compute_ct(const VectorXd& iact_values, std::uint64_t total_evaluations, Index iterations) {
  if (iterations < 1) throw Error(Errc::config, "CT needs at least one iteration");
  if (total_evaluations == 0) throw Error(Errc::config, "CT needs a positive evaluation count");
  ChainEfficiency e;
  e.iact = iact_values;
  e.evaluations_per_iteration = static_cast<double>(total_evaluations) / static_cast<double>(iterations);
  e.ct = iact_values * e.evaluations_per_iteration;
  return e;
}

ChainEfficiency draws_efficiency(const MatrixXd& draws, std::uint64_t total_evaluations, Index iterations) {
  VectorXd tau(draws.cols());
  for (Index j = 0; j < draws.cols(); ++j) {
    const VectorXd col = draws.col(j);
    tau(j) = iact(std::span<const double>(col.data(), static_cast<std::size_t>(col.size())));
  }
  return compute_ct(tau, total_evaluations, iterations);
}

ChainEfficiency chain_efficiency(const ChainOutput& chain) {
  return draws_efficiency(chain.draws, chain.total_evaluations(), chain.iterations);
}

VectorXd relative_ct(const ChainEfficiency& full, const ChainEfficiency& subsample) {
  if (full.ct.size() != subsample.ct.size()) throw Error(Errc::shape, "chains have different parameter counts");
  return full.ct.cwiseQuotient(subsample.ct);
}

EfficiencyReport efficiency_report(std::vector<std::string> names, const ChainEfficiency& full,
                                   const std::optional<ChainEfficiency>& subsample) {
  if (!names.empty() && static_cast<Index>(names.size()) != full.iact.size()) {
    throw Error(Errc::shape, "parameter names do not match the chain dimension");
  }
  EfficiencyReport r;
  r.names = std::move(names);
  r.full = full;
  r.iact_full = RangeSummary::of(full.iact);
  if (subsample) {
    r.subsample = subsample;
    r.iact_subsample = RangeSummary::of(subsample->iact);
    r.rct = relative_ct(full, *subsample);
    r.rct_summary = RangeSummary::of(*r.rct);
  }
  return r;
}

double bic_value(double loglik, Index k, Index n) { return loglik - 0.5 * static_cast<double>(k) * std::log(static_cast<double>(n)); }

BicResult bic(const PeriodogramSet& pgram, const ModelShape& shape, BicPenalty penalty, ModeSearchOptions options, int threads) {
  WhittleLikelihood loglik(pgram, shape, threads);
  options.shape = &shape;
  const ModeResult mode = find_mode(loglik, nullptr, options);
  BicResult r;
  r.shape = shape;
  r.theta = mode.theta;
  r.loglik = mode.loglik;
  r.k = shape.dimension();
  r.n = penalty == BicPenalty::time_points ? pgram.grid.T : pgram.grid.retained_count();
  r.bic = bic_value(r.loglik, r.k, r.n);
  r.evaluations = mode.evaluations;
  return r;
}

double squared_coherence(const Eigen::MatrixXcd& f, Index i, Index j) {
  return std::norm(f(i, j)) / (f(i, i).real() * f(j, j).real());
}

double time_delay(const Eigen::MatrixXcd& f, Index i, Index j, double omega) {
  if (omega == 0.0) throw Error(Errc::domain, "time delay is undefined at frequency zero");
  return -std::arg(f(i, j)) / omega;
}

double quantile(std::vector<double> values, double level) {
  if (values.empty()) throw Error(Errc::empty_sample, "quantile of an empty sample");
  return quantiles_inplace(values, {level}).front();
}

std::vector<Index> thin_rows(Index rows, Index limit) {
  std::vector<Index> out;
  if (rows <= 0 || limit <= 0) return out;
  const Index stride = (rows + limit - 1) / limit;
  for (Index i = 0; i < rows; i += stride) out.push_back(i);
  return out;
}

SpectralSummary spectral_summary(const MatrixXd& draws, const ModelShape& shape, Index grid_size, Index max_draws, int threads) {
  if (grid_size < 1) throw Error(Errc::config, "spectral grid needs at least one point");
  if (draws.rows() == 0) throw Error(Errc::empty_sample, "no posterior draws to summarise");
  const std::vector<ModelParams> params = unpack_rows(draws, shape, thin_rows(draws.rows(), max_draws));
  const Index r = shape.r;

  SpectralSummary s;
  s.levels = kLevels;
  s.draws_used = static_cast<Index>(params.size());
  s.omega.resize(grid_size);
  for (Index k = 0; k < grid_size; ++k) s.omega(k) = std::numbers::pi * (static_cast<double>(k) + 0.5) / static_cast<double>(grid_size);

  for (Index j = 0; j < r; ++j) s.panels.push_back({SpectralPanel::Kind::spectrum, j, j, {}});
  for (Index i = 0; i < r; ++i)
    for (Index j = i + 1; j < r; ++j) s.panels.push_back({SpectralPanel::Kind::coherence, i, j, {}});
  for (Index i = 0; i < r; ++i)
    for (Index j = 0; j < r; ++j)
      if (i != j) s.panels.push_back({SpectralPanel::Kind::delay, i, j, {}});
  for (auto& p : s.panels) p.quantiles.resize(grid_size, static_cast<Index>(kLevels.size()));

  const auto D = params.size();
  parallel_chunks<int>(static_cast<std::size_t>(grid_size), threads, [&](std::size_t begin, std::size_t end, std::size_t) {
    std::vector<Eigen::MatrixXcd> f(D);
    std::vector<double> buf(D);
    for (std::size_t k = begin; k < end; ++k) {
      const double w = s.omega(static_cast<Index>(k));
      for (std::size_t d = 0; d < D; ++d) f[d] = spectral_density(params[d], w);
      for (auto& panel : s.panels) {
        for (std::size_t d = 0; d < D; ++d) {
          switch (panel.kind) {
            case SpectralPanel::Kind::spectrum:
              buf[d] = f[d](panel.i, panel.i).real();
              break;
            case SpectralPanel::Kind::coherence: {
              const double c = squared_coherence(f[d], panel.i, panel.j);
              if (!(c >= -1e-12 && c <= 1.0 + 1e-9)) {
                throw Error(Errc::domain, "squared coherence " + std::to_string(c) + " outside [0, 1]");
              }
              buf[d] = c;
              break;
            }
            case SpectralPanel::Kind::delay:
              buf[d] = time_delay(f[d], panel.i, panel.j, w);
              break;
          }
        }
        const auto q = quantiles_inplace(buf, kLevels);
        for (std::size_t l = 0; l < q.size(); ++l) panel.quantiles(static_cast<Index>(k), static_cast<Index>(l)) = q[l];
      }
    }
    return 0;
  });
  return s;
}

PredictiveBands predictive_periodogram(const MatrixXd& draws, const PeriodogramSet& pgram, const ModelShape& shape,
                                       Index draws_per_theta, std::uint64_t seed, Index max_draws) {
  if (draws_per_theta < 1) throw Error(Errc::config, "draws_per_theta must be positive");
  if (draws.rows() == 0) throw Error(Errc::empty_sample, "no posterior draws for the predictive check");
  if (pgram.dim() != shape.r) throw Error(Errc::shape, "periodogram and model dimensions differ");
  const std::vector<ModelParams> params = unpack_rows(draws, shape, thin_rows(draws.rows(), max_draws));
  const Index P = pgram.positive_count();
  const Index r = shape.r;

  PredictiveBands out;
  out.levels = kLevels;
  out.draws_used = static_cast<Index>(params.size());
  out.omega.resize(P);
  out.observed.resize(P, r);
  out.bands.assign(static_cast<std::size_t>(r), MatrixXd(P, static_cast<Index>(kLevels.size())));

  const std::size_t D = params.size();
  std::vector<double> buf(D * static_cast<std::size_t>(draws_per_theta));
  std::vector<double> diag(D * static_cast<std::size_t>(r));
  for (Index k = 1; k <= P; ++k) {
    const double w = pgram.grid.frequency_of(k);
    out.omega(k - 1) = w;
    for (std::size_t d = 0; d < D; ++d) {
      const Eigen::MatrixXcd f = spectral_density(params[d], w);
      for (Index j = 0; j < r; ++j) diag[d * static_cast<std::size_t>(r) + static_cast<std::size_t>(j)] = f(j, j).real();
    }
    Rng rng(seed, Stream::predictive, static_cast<std::uint64_t>(k));
    for (Index j = 0; j < r; ++j) {
      std::size_t n = 0;
      for (std::size_t d = 0; d < D; ++d) {
        const double mean = diag[d * static_cast<std::size_t>(r) + static_cast<std::size_t>(j)];
        for (Index s = 0; s < draws_per_theta; ++s) buf[n++] = rng.exponential(mean);
      }
      const auto q = quantiles_inplace(buf, kLevels);
      for (std::size_t l = 0; l < q.size(); ++l) out.bands[static_cast<std::size_t>(j)](k - 1, static_cast<Index>(l)) = q[l];
      out.observed(k - 1, j) = std::norm(pgram.factors(j, k - 1));
    }
  }
  return out;
}

}  // namespace specmc
