#pragma once

#include "specmc/models.hpp"
#include "specmc/objective.hpp"
#include "specmc/spectral.hpp"

#include <complex>
#include <map>
#include <memory>
#include <mutex>
#include <vector>

namespace specmc {

/// Frequencies and periodogram factors seen by a SpectralKernel. Atom k sits at
/// w_k, carries `per` vectors v_{k,1..per} with sum_j v v^H equal to the summed
/// periodogram of its frequencies, and stands for `weight` frequencies.
struct KernelData {
  int r = 0;
  int per = 1;
  std::vector<std::complex<double>> z;  // exp(-i w_k)
  std::vector<double> weight;
  Eigen::MatrixXcd vectors;             // r x (atoms * per)

  Eigen::Index size() const { return static_cast<Eigen::Index>(z.size()); }

  /// One atom per positive retained frequency.
  static KernelData from_periodogram(const PeriodogramSet& pgram);
  /// Runs of `bin` adjacent positive frequencies merged at their mean frequency.
  static KernelData binned(const PeriodogramSet& pgram, Eigen::Index bin);
};

/// Evaluates Whittle terms -(weight * log det f + sum_j v_j^H f^{-1} v_j) without forming f.
/// With z = exp(-i w) and Sigma = C C^T,
///   v^H f^{-1} v = 2 pi || C^{-1} Theta(z)^{-1} Phi(z) D(z)^{-1} v ||^2,
///   log det f    = -r log 2 pi + log det Sigma + 2 log|det Theta(z)| - 2 log|det Phi(z)|
///                  - 2 sum_k d_k log|1 - exp(-lambda_k) z|,
/// where D(z) = diag((1 - exp(-lambda_k) z)^{-d_k}).
///
/// A kernel holds a small private workspace, so each thread needs its own copy.
class SpectralKernel {
 public:
  explicit SpectralKernel(std::shared_ptr<const KernelData> data);
  explicit SpectralKernel(const PeriodogramSet& pgram);

  void set_params(const ModelParams& params);
  /// Term of atom k. Throws SingularSpectrumError.
  double term(Eigen::Index k);
  double sum(Eigen::Index begin, Eigen::Index end, Eigen::Index stride = 1);

  Eigen::Index size() const { return data_->size(); }

 private:
  using cd = std::complex<double>;

  std::shared_ptr<const KernelData> data_;
  int r_ = 0;
  int p_ = 0;
  int q_ = 0;
  bool tempered_ = false;
  std::vector<double> phi_;    // p blocks of r*r, row-major
  std::vector<double> theta_;  // q blocks of r*r, row-major
  std::vector<double> chol_;   // r*r row-major lower factor
  std::vector<double> d_;
  std::vector<double> decay_;  // exp(-lambda_k)
  double constant_ = 0.0;      // -r log 2 pi + log det Sigma

  std::vector<cd> ar_;
  std::vector<cd> ma_;
  std::vector<cd> taper_;
  std::vector<cd> w_;
  std::vector<cd> u_;
};

/// Whittle log-likelihood of a fixed periodogram as a function of the unconstrained
/// parameter vector; terms are the P positive retained frequencies. The periodogram
/// must outlive the likelihood.
class WhittleLikelihood final : public GroupedObjective {
 public:
  WhittleLikelihood(const PeriodogramSet& pgram, ModelShape shape, int threads = 1);

  Eigen::Index dimension() const override { return shape_.dimension(); }
  Eigen::Index term_count() const override { return pgram_->positive_count(); }
  void range_sums(const Eigen::VectorXd& theta, std::span<const TermRange> ranges, std::span<double> out) const override;
  double total(const Eigen::VectorXd& theta) const override;
  /// Whittle sum over bins of `bin` adjacent frequencies, each evaluated at its mean
  /// frequency against the summed periodogram of the bin.
  double binned_total(const Eigen::VectorXd& theta, Eigen::Index bin) const override;

  /// Sum over all positive frequencies at structured parameters.
  double total_at(const ModelParams& params) const;
  std::vector<double> terms(const Eigen::VectorXd& theta) const;

  const ModelShape& shape() const { return shape_; }
  const PeriodogramSet& periodogram() const { return *pgram_; }
  int threads() const { return threads_; }

 private:
  const PeriodogramSet* pgram_;
  ModelShape shape_;
  int threads_;
  SpectralKernel prototype_;
  mutable std::mutex binned_mutex_;
  mutable std::map<Eigen::Index, std::shared_ptr<const KernelData>> binned_;
};

}  // namespace specmc
