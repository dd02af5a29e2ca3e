#include "specmc/spectral.hpp"

#include "specmc/error.hpp"
#include "specmc/likelihood.hpp"

#include <Eigen/Eigenvalues>
#include <fftw3.h>

#include <cmath>
#include <cstring>
#include <fstream>
#include <mutex>
#include <numbers>

namespace specmc {
namespace {

using Eigen::Index;
using cd = std::complex<double>;

constexpr double kTwoPi = 2.0 * std::numbers::pi;
constexpr char kCacheMagic[8] = {'S', 'P', 'M', 'C', 'P', 'G', 'M', '1'};

void require_spectral_input(const MultiSeries& series) {
  if (series.length() < 8) {
    throw Error(Errc::too_short, "spectral analysis needs at least 8 time points, got " + std::to_string(series.length()));
  }
  if (series.dim() < 1) throw Error(Errc::shape, "series has no columns");
  if (series.missing_count() > 0) throw Error(Errc::domain, "series has missing values; interpolate first");
}

// Positive-frequency transforms J(w_k), k = 0..T/2, one row per series.
Eigen::MatrixXcd half_spectrum(const MultiSeries& series) {
  const Index T = series.length();
  const Index r = series.dim();
  const Index H = T / 2 + 1;
  Eigen::MatrixXcd out(r, H);
  std::vector<double> in(static_cast<std::size_t>(T));
  auto* buf = static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * static_cast<std::size_t>(H)));
  fftw_plan plan;
  {
    std::lock_guard lock(fftw_planner_mutex());
    plan = fftw_plan_dft_r2c_1d(static_cast<int>(T), in.data(), buf, FFTW_ESTIMATE);
  }
  for (Index j = 0; j < r; ++j) {
    for (Index t = 0; t < T; ++t) in[static_cast<std::size_t>(t)] = series.values(t, j);
    fftw_execute_dft_r2c(plan, in.data(), buf);
    for (Index k = 0; k < H; ++k) out(j, k) = cd(buf[k][0], buf[k][1]);
  }
  {
    std::lock_guard lock(fftw_planner_mutex());
    fftw_destroy_plan(plan);
  }
  fftw_free(buf);
  return out;
}

}  // namespace

std::mutex& fftw_planner_mutex() {
  static std::mutex m;
  return m;
}

double FourierGrid::frequency_of(Index k) const { return kTwoPi * static_cast<double>(k) / static_cast<double>(T); }

Eigen::VectorXcd PeriodogramSet::factor(Index i) const {
  const Index k = grid.retained_k(i);
  return k > 0 ? Eigen::VectorXcd(factors.col(k - 1)) : Eigen::VectorXcd(factors.col(-k - 1).conjugate());
}

Eigen::MatrixXcd PeriodogramSet::ordinate(Index i) const {
  const Eigen::VectorXcd v = factor(i);
  return v * v.adjoint();
}

Eigen::MatrixXcd PeriodogramSet::positive_ordinate(Index k) const {
  const auto v = factors.col(k - 1);
  return v * v.adjoint();
}

Eigen::MatrixXcd dft(const MultiSeries& series) {
  require_spectral_input(series);
  const Index T = series.length();
  const Eigen::MatrixXcd half = half_spectrum(series);
  const FourierGrid grid{T};
  Eigen::MatrixXcd out(series.dim(), T);
  for (Index c = 0; c < T; ++c) {
    const Index k = grid.first_index() + c;
    out.col(c) = k >= 0 ? Eigen::VectorXcd(half.col(k)) : Eigen::VectorXcd(half.col(-k).conjugate());
  }
  return out;
}

Eigen::MatrixXcd dft_direct(const MultiSeries& series) {
  require_spectral_input(series);
  const Index T = series.length();
  const FourierGrid grid{T};
  Eigen::MatrixXcd out = Eigen::MatrixXcd::Zero(series.dim(), T);
  for (Index c = 0; c < T; ++c) {
    const Index k = grid.first_index() + c;
    for (Index t = 0; t < T; ++t) {
      // Reduce k*t mod T first so the phase stays accurate for long series.
      const Index m = ((k * t) % T + T) % T;
      const cd e = std::polar(1.0, -kTwoPi * static_cast<double>(m) / static_cast<double>(T));
      out.col(c) += series.values.row(t).transpose().cast<cd>() * e;
    }
  }
  return out;
}

PeriodogramSet periodogram(const MultiSeries& series) {
  require_spectral_input(series);
  PeriodogramSet out;
  out.grid.T = series.length();
  const Index P = out.grid.positive_count();
  const Eigen::MatrixXcd half = half_spectrum(series);
  const double scale = 1.0 / std::sqrt(kTwoPi * static_cast<double>(series.length()));
  out.factors = half.middleCols(1, P) * scale;
  return out;
}

double whittle_term(const Eigen::MatrixXcd& f, const Eigen::MatrixXcd& I, long frequency_index) {
  const Index r = f.rows();
  if (f.cols() != r || I.rows() != r || I.cols() != r) throw Error(Errc::shape, "whittle_term needs matching square matrices");
  const Eigen::MatrixXcd fh = 0.5 * (f + f.adjoint());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(fh, Eigen::EigenvaluesOnly);
  const double lo = es.eigenvalues().minCoeff();
  const double hi = es.eigenvalues().maxCoeff();
  if (!(hi > 0.0) || !(lo > 1e-12 * hi)) {
    throw SingularSpectrumError(frequency_index, "spectral density is numerically singular at frequency index " +
                                                     std::to_string(frequency_index));
  }
  Eigen::LLT<Eigen::MatrixXcd> llt(fh);
  if (llt.info() != Eigen::Success) {
    throw SingularSpectrumError(frequency_index, "Cholesky factorisation of the spectral density failed at frequency index " +
                                                     std::to_string(frequency_index));
  }
  const auto& L = llt.matrixLLT();
  cd logdet = 0.0;
  for (Index i = 0; i < r; ++i) logdet += 2.0 * std::log(L(i, i));
  // tr(f^{-1} I) = tr(L^{-1} I L^{-H})
  const Eigen::MatrixXcd A = llt.matrixL().solve(I);
  const Eigen::MatrixXcd B = llt.matrixL().solve(A.adjoint());
  const cd trace = B.trace();
  const double scale = std::abs(logdet.real()) + std::abs(trace.real()) + 1.0;
  if (std::abs(logdet.imag()) > 1e-9 * scale || std::abs(trace.imag()) > 1e-9 * scale) {
    throw Error(Errc::domain, "whittle_term produced a complex value; inputs are not Hermitian");
  }
  return -(logdet.real() + trace.real());
}

double whittle_loglik(const ModelParams& params, const PeriodogramSet& pgram) {
  params.validate();
  SpectralKernel kernel(pgram);
  kernel.set_params(params);
  return kernel.sum(0, kernel.size());
}

double whittle_loglik_symmetric(const ModelParams& params, const PeriodogramSet& pgram) {
  params.validate();
  if (params.dim() != pgram.dim()) throw Error(Errc::shape, "model and periodogram dimensions differ");
  double total = 0.0;
  for (Index i = 0; i < pgram.size(); ++i) {
    total += whittle_term(spectral_density(params, pgram.frequency(i)), pgram.ordinate(i), static_cast<long>(i));
  }
  return total;
}

void save_periodogram(const PeriodogramSet& pgram, std::uint64_t data_hash, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(Errc::format, "cannot write periodogram cache " + path.string());
  const std::int64_t header[3] = {pgram.grid.T, pgram.dim(), pgram.positive_count()};
  out.write(kCacheMagic, sizeof kCacheMagic);
  out.write(reinterpret_cast<const char*>(&data_hash), sizeof data_hash);
  out.write(reinterpret_cast<const char*>(header), sizeof header);
  out.write(reinterpret_cast<const char*>(pgram.factors.data()),
            static_cast<std::streamsize>(sizeof(cd) * static_cast<std::size_t>(pgram.factors.size())));
  if (!out) throw Error(Errc::format, "failed writing periodogram cache " + path.string());
}

std::optional<PeriodogramSet> load_periodogram(const std::filesystem::path& path, std::uint64_t data_hash, Index T) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return std::nullopt;
  char magic[8];
  std::uint64_t hash = 0;
  std::int64_t header[3];
  in.read(magic, sizeof magic);
  in.read(reinterpret_cast<char*>(&hash), sizeof hash);
  in.read(reinterpret_cast<char*>(header), sizeof header);
  if (!in || std::memcmp(magic, kCacheMagic, sizeof magic) != 0) {
    throw Error(Errc::format, path.string() + " is not a periodogram cache");
  }
  if (hash != data_hash || header[0] != T) return std::nullopt;
  PeriodogramSet out;
  out.grid.T = header[0];
  if (header[1] < 1 || header[2] != out.grid.positive_count()) throw Error(Errc::format, "corrupt periodogram cache " + path.string());
  out.factors.resize(header[1], header[2]);
  in.read(reinterpret_cast<char*>(out.factors.data()),
          static_cast<std::streamsize>(sizeof(cd) * static_cast<std::size_t>(out.factors.size())));
  if (!in) throw Error(Errc::format, "truncated periodogram cache " + path.string());
  return out;
}

}  // namespace specmc
