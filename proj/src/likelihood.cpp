#include "specmc/likelihood.hpp"

#include "specmc/error.hpp"
#include "specmc/parallel.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

namespace specmc {
namespace {

using Eigen::Index;
using cd = std::complex<double>;

constexpr double kTwoPi = 2.0 * std::numbers::pi;

// In-place LU with partial pivoting of a row-major n x n matrix. Returns log|det|;
// -inf when a pivot vanishes. piv receives the row permutation.
double lu_factor(cd* a, int n, int* piv) {
  double logdet = 0.0;
  for (int c = 0; c < n; ++c) {
    int best = c;
    double best_abs = std::abs(a[c * n + c]);
    for (int i = c + 1; i < n; ++i) {
      const double v = std::abs(a[i * n + c]);
      if (v > best_abs) {
        best = i;
        best_abs = v;
      }
    }
    piv[c] = best;
    if (!(best_abs > 0.0)) return -std::numeric_limits<double>::infinity();
    if (best != c)
      for (int j = 0; j < n; ++j) std::swap(a[c * n + j], a[best * n + j]);
    const cd inv = 1.0 / a[c * n + c];
    for (int i = c + 1; i < n; ++i) {
      const cd m = a[i * n + c] * inv;
      a[i * n + c] = m;
      for (int j = c + 1; j < n; ++j) a[i * n + j] -= m * a[c * n + j];
    }
    logdet += std::log(best_abs);
  }
  return logdet;
}

void lu_solve(const cd* a, int n, const int* piv, cd* b) {
  for (int c = 0; c < n; ++c)
    if (piv[c] != c) std::swap(b[c], b[piv[c]]);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < i; ++j) b[i] -= a[i * n + j] * b[j];
  for (int i = n - 1; i >= 0; --i) {
    for (int j = i + 1; j < n; ++j) b[i] -= a[i * n + j] * b[j];
    b[i] /= a[i * n + i];
  }
}

void flatten(const std::vector<Eigen::MatrixXd>& mats, int r, std::vector<double>& out) {
  out.assign(mats.size() * static_cast<std::size_t>(r * r), 0.0);
  for (std::size_t l = 0; l < mats.size(); ++l)
    for (int i = 0; i < r; ++i)
      for (int j = 0; j < r; ++j) out[l * static_cast<std::size_t>(r * r) + static_cast<std::size_t>(i * r + j)] = mats[l](i, j);
}

}  // namespace

KernelData KernelData::from_periodogram(const PeriodogramSet& pgram) {
  KernelData d;
  d.r = static_cast<int>(pgram.dim());
  d.per = 1;
  const Index P = pgram.positive_count();
  d.z.resize(static_cast<std::size_t>(P));
  d.weight.assign(static_cast<std::size_t>(P), 1.0);
  for (Index k = 0; k < P; ++k) {
    const double w = pgram.grid.frequency_of(k + 1);
    d.z[static_cast<std::size_t>(k)] = cd(std::cos(w), -std::sin(w));
  }
  d.vectors = pgram.factors;
  return d;
}

KernelData KernelData::binned(const PeriodogramSet& pgram, Index bin) {
  if (bin <= 1) return from_periodogram(pgram);
  KernelData d;
  d.r = static_cast<int>(pgram.dim());
  d.per = d.r;
  const Index P = pgram.positive_count();
  const Index atoms = (P + bin - 1) / bin;
  d.z.resize(static_cast<std::size_t>(atoms));
  d.weight.resize(static_cast<std::size_t>(atoms));
  d.vectors.resize(d.r, atoms * d.r);
  for (Index a = 0; a < atoms; ++a) {
    const Index b = a * bin;
    const Index e = std::min(P, b + bin);
    Eigen::MatrixXcd S = Eigen::MatrixXcd::Zero(d.r, d.r);
    double mean_k = 0.0;
    for (Index k = b; k < e; ++k) {
      const auto v = pgram.factors.col(k);
      S.noalias() += v * v.adjoint();
      mean_k += static_cast<double>(k + 1);
    }
    mean_k /= static_cast<double>(e - b);
    const double w = 2.0 * std::numbers::pi * mean_k / static_cast<double>(pgram.grid.T);
    d.z[static_cast<std::size_t>(a)] = cd(std::cos(w), -std::sin(w));
    d.weight[static_cast<std::size_t>(a)] = static_cast<double>(e - b);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(0.5 * (S + S.adjoint()));
    for (int j = 0; j < d.r; ++j) {
      const double lam = std::max(es.eigenvalues()(j), 0.0);
      d.vectors.col(a * d.r + j) = std::sqrt(lam) * es.eigenvectors().col(j);
    }
  }
  return d;
}

SpectralKernel::SpectralKernel(std::shared_ptr<const KernelData> data) : data_(std::move(data)), r_(data_->r) {
  const auto rr = static_cast<std::size_t>(r_ * r_);
  ar_.resize(rr);
  ma_.resize(rr);
  taper_.resize(static_cast<std::size_t>(r_));
  w_.resize(static_cast<std::size_t>(r_));
  u_.resize(static_cast<std::size_t>(r_));
}

SpectralKernel::SpectralKernel(const PeriodogramSet& pgram)
    : SpectralKernel(std::make_shared<const KernelData>(KernelData::from_periodogram(pgram))) {}

void SpectralKernel::set_params(const ModelParams& params) {
  if (params.dim() != r_) throw Error(Errc::shape, "model dimension does not match the periodogram");
  p_ = params.ar.order();
  q_ = params.ma.order();
  tempered_ = params.kind == ModelKind::vartfima;
  flatten(params.ar.coeffs, r_, phi_);
  flatten(params.ma.coeffs, r_, theta_);
  chol_.assign(static_cast<std::size_t>(r_ * r_), 0.0);
  double logdet_sigma = 0.0;
  for (int i = 0; i < r_; ++i) {
    for (int j = 0; j <= i; ++j) chol_[static_cast<std::size_t>(i * r_ + j)] = params.sigma_chol(i, j);
    logdet_sigma += 2.0 * std::log(params.sigma_chol(i, i));
  }
  constant_ = -r_ * std::log(kTwoPi) + logdet_sigma;
  d_.clear();
  decay_.clear();
  if (tempered_) {
    for (int i = 0; i < r_; ++i) {
      d_.push_back(params.d(i));
      decay_.push_back(std::exp(-params.lambda_of(i)));
    }
  }
}

double SpectralKernel::term(Index k) {
  const int r = r_;
  const int rr = r * r;
  const KernelData& data = *data_;
  const cd z = data.z[static_cast<std::size_t>(k)];
  int piv[64];
  if (r > 64) throw Error(Errc::shape, "series dimension above 64 is not supported");

  double log_taper = 0.0;
  if (tempered_) {
    for (int i = 0; i < r; ++i) {
      const cd l = std::log(1.0 - decay_[static_cast<std::size_t>(i)] * z);
      const double di = d_[static_cast<std::size_t>(i)];
      taper_[static_cast<std::size_t>(i)] = std::exp(di * l);
      log_taper += di * l.real();
    }
  }

  double logdet_ar = 0.0;
  if (p_ > 0) {
    for (int e = 0; e < rr; ++e) ar_[static_cast<std::size_t>(e)] = 0.0;
    for (int i = 0; i < r; ++i) ar_[static_cast<std::size_t>(i * r + i)] = 1.0;
    cd zj = 1.0;
    for (int j = 0; j < p_; ++j) {
      zj *= z;
      const double* m = phi_.data() + static_cast<std::ptrdiff_t>(j) * rr;
      for (int e = 0; e < rr; ++e) ar_[static_cast<std::size_t>(e)] -= m[e] * zj;
    }
  }
  double logdet_ma = 0.0;
  if (q_ > 0) {
    for (int e = 0; e < rr; ++e) ma_[static_cast<std::size_t>(e)] = 0.0;
    for (int i = 0; i < r; ++i) ma_[static_cast<std::size_t>(i * r + i)] = 1.0;
    cd zj = 1.0;
    for (int j = 0; j < q_; ++j) {
      zj *= z;
      const double* m = theta_.data() + static_cast<std::ptrdiff_t>(j) * rr;
      for (int e = 0; e < rr; ++e) ma_[static_cast<std::size_t>(e)] += m[e] * zj;
    }
    logdet_ma = lu_factor(ma_.data(), r, piv);
  }

  double quad = 0.0;
  for (int a = 0; a < data.per; ++a) {
    const cd* v = data.vectors.col(k * data.per + a).data();
    for (int i = 0; i < r; ++i) w_[static_cast<std::size_t>(i)] = tempered_ ? v[i] * taper_[static_cast<std::size_t>(i)] : v[i];
    if (p_ > 0) {
      for (int i = 0; i < r; ++i) {
        cd acc = 0.0;
        for (int j = 0; j < r; ++j) acc += ar_[static_cast<std::size_t>(i * r + j)] * w_[static_cast<std::size_t>(j)];
        u_[static_cast<std::size_t>(i)] = acc;
      }
    } else {
      u_ = w_;
    }
    if (q_ > 0 && std::isfinite(logdet_ma)) lu_solve(ma_.data(), r, piv, u_.data());
    for (int i = 0; i < r; ++i) {
      cd acc = u_[static_cast<std::size_t>(i)];
      for (int j = 0; j < i; ++j) acc -= chol_[static_cast<std::size_t>(i * r + j)] * u_[static_cast<std::size_t>(j)];
      acc /= chol_[static_cast<std::size_t>(i * r + i)];
      u_[static_cast<std::size_t>(i)] = acc;
      quad += std::norm(acc);
    }
  }
  if (p_ > 0) logdet_ar = lu_factor(ar_.data(), r, piv);

  const double logdet = constant_ + 2.0 * logdet_ma - 2.0 * logdet_ar - 2.0 * log_taper;
  const double value = -(data.weight[static_cast<std::size_t>(k)] * logdet + kTwoPi * quad);
  if (!std::isfinite(value)) {
    throw SingularSpectrumError(static_cast<long>(k), "spectral density is singular at positive frequency index " + std::to_string(k));
  }
  return value;
}

double SpectralKernel::sum(Index begin, Index end, Index stride) {
  double total = 0.0;
  for (Index k = begin; k < end; k += stride) total += term(k);
  return total;
}

WhittleLikelihood::WhittleLikelihood(const PeriodogramSet& pgram, ModelShape shape, int threads)
    : pgram_(&pgram), shape_(shape), threads_(threads <= 0 ? default_threads() : threads), prototype_(pgram) {
  if (pgram.dim() != shape.r) {
    throw Error(Errc::shape, "model has r = " + std::to_string(shape.r) + " but the periodogram has " +
                                 std::to_string(pgram.dim()) + " series");
  }
}

void WhittleLikelihood::range_sums(const Eigen::VectorXd& theta, std::span<const TermRange> ranges, std::span<double> out) const {
  if (out.size() != ranges.size()) throw Error(Errc::shape, "range_sums output size mismatch");
  const ModelParams params = unpack(theta, shape_);
  std::uint64_t terms = 0;
  for (const auto& [b, e] : ranges) terms += static_cast<std::uint64_t>(e - b);
  count(terms);
  parallel_chunks<int>(ranges.size(), threads_, [&](std::size_t begin, std::size_t end, std::size_t) {
    SpectralKernel kernel = prototype_;
    kernel.set_params(params);
    for (std::size_t g = begin; g < end; ++g) out[g] = kernel.sum(ranges[g].first, ranges[g].second);
    return 0;
  });
}

double WhittleLikelihood::total(const Eigen::VectorXd& theta) const { return total_at(unpack(theta, shape_)); }

double WhittleLikelihood::total_at(const ModelParams& params) const {
  const Index P = term_count();
  count(static_cast<std::uint64_t>(P));
  const auto partial = parallel_chunks<double>(static_cast<std::size_t>(P), threads_, [&](std::size_t b, std::size_t e, std::size_t) {
    SpectralKernel kernel = prototype_;
    kernel.set_params(params);
    return kernel.sum(static_cast<Index>(b), static_cast<Index>(e));
  });
  double sum = 0.0;
  for (double v : partial) sum += v;
  return sum;
}

double WhittleLikelihood::binned_total(const Eigen::VectorXd& theta, Index bin) const {
  if (bin <= 1) return total(theta);
  std::shared_ptr<const KernelData> data;
  {
    std::lock_guard lock(binned_mutex_);
    auto& slot = binned_[bin];
    if (!slot) slot = std::make_shared<const KernelData>(KernelData::binned(*pgram_, bin));
    data = slot;
  }
  const ModelParams params = unpack(theta, shape_);
  SpectralKernel kernel(data);
  kernel.set_params(params);
  count(static_cast<std::uint64_t>(data->size()));
  return kernel.sum(0, data->size());
}

std::vector<double> WhittleLikelihood::terms(const Eigen::VectorXd& theta) const {
  const ModelParams params = unpack(theta, shape_);
  SpectralKernel kernel = prototype_;
  kernel.set_params(params);
  std::vector<double> out(static_cast<std::size_t>(term_count()));
  for (Index k = 0; k < term_count(); ++k) out[static_cast<std::size_t>(k)] = kernel.term(k);
  count(out.size());
  return out;
}

double GroupedObjective::total(const Eigen::VectorXd& theta) const {
  const TermRange all{0, term_count()};
  double out = 0.0;
  range_sums(theta, std::span<const TermRange>(&all, 1), std::span<double>(&out, 1));
  return out;
}

double GroupedObjective::binned_total(const Eigen::VectorXd& theta, Index) const { return total(theta); }

}  // namespace specmc
