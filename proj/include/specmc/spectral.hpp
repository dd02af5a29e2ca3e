#pragma once

#include "specmc/ingest.hpp"
#include "specmc/models.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <mutex>
#include <optional>

namespace specmc {

/// Fourier frequencies 2*pi*k/T for k = -ceil(T/2)+1, ..., floor(T/2).
///
/// The retained set drops k = 0 and, for even T, k = T/2. Retained frequencies come
/// in conjugate pairs; they are numbered with the P negative ones first
/// (k = -P, ..., -1) followed by the P positive ones (k = 1, ..., P).
struct FourierGrid {
  Eigen::Index T = 0;

  Eigen::Index first_index() const { return -((T + 1) / 2) + 1; }
  Eigen::Index last_index() const { return T / 2; }
  Eigen::Index positive_count() const { return (T - 1) / 2; }
  Eigen::Index retained_count() const { return 2 * positive_count(); }
  /// Integer k of the i-th retained frequency.
  Eigen::Index retained_k(Eigen::Index i) const { return i < positive_count() ? i - positive_count() : i - positive_count() + 1; }
  double frequency_of(Eigen::Index k) const;
  double retained_frequency(Eigen::Index i) const { return frequency_of(retained_k(i)); }
};

/// Matrix periodogram on the retained frequencies. Each ordinate is rank one,
/// I(w) = v v^H with v = J(w) / sqrt(2 pi T), so only the factors for the positive
/// frequencies are stored; the negative ones are their conjugates.
struct PeriodogramSet {
  FourierGrid grid;
  Eigen::MatrixXcd factors;  // r x P, column k-1 holds v at w_k

  Eigen::Index dim() const { return factors.rows(); }
  Eigen::Index size() const { return grid.retained_count(); }
  Eigen::Index positive_count() const { return grid.positive_count(); }
  double frequency(Eigen::Index i) const { return grid.retained_frequency(i); }
  Eigen::VectorXcd factor(Eigen::Index i) const;
  Eigen::MatrixXcd ordinate(Eigen::Index i) const;
  /// Ordinate at the positive frequency w_k, k = 1..P.
  Eigen::MatrixXcd positive_ordinate(Eigen::Index k) const;
};

/// FFTW planning is not thread-safe; every plan in the library is made under this lock.
std::mutex& fftw_planner_mutex();

/// J(w_k) = sum_t x_t exp(-i w_k t) over the full grid. Column c of the result is the
/// frequency with index first_index() + c.
Eigen::MatrixXcd dft(const MultiSeries& series);

/// Plain O(r T^2) summation of the same transform; reference implementation.
Eigen::MatrixXcd dft_direct(const MultiSeries& series);

PeriodogramSet periodogram(const MultiSeries& series);

/// -(log det f + tr(f^{-1} I)). Throws SingularSpectrumError tagged with
/// `frequency_index` when f is not numerically positive definite.
double whittle_term(const Eigen::MatrixXcd& f, const Eigen::MatrixXcd& I, long frequency_index = -1);

/// Whittle log-likelihood over the positive retained frequencies.
double whittle_loglik(const ModelParams& params, const PeriodogramSet& pgram);

/// The same sum taken over every retained frequency of both signs, evaluated term by
/// term with whittle_term. Equals 2 * whittle_loglik.
double whittle_loglik_symmetric(const ModelParams& params, const PeriodogramSet& pgram);

/// Binary cache keyed by (content hash, T).
void save_periodogram(const PeriodogramSet& pgram, std::uint64_t data_hash, const std::filesystem::path& path);
/// Returns nothing when the file is absent or was written for different data.
std::optional<PeriodogramSet> load_periodogram(const std::filesystem::path& path, std::uint64_t data_hash, Eigen::Index T);

}  // namespace specmc
