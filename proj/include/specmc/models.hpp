#pragma once

#include "specmc/ingest.hpp"

#include <Eigen/Dense>

#include <complex>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace specmc {

enum class ModelKind { varma, vartfima };

std::string to_string(ModelKind kind);
ModelKind parse_model_kind(std::string_view text);

/// Fixes everything about a model except its parameter values.
struct ModelShape {
  ModelKind kind = ModelKind::varma;
  int r = 1;
  int p = 0;
  int q = 0;
  bool shared_lambda = true;

  bool tempered() const { return kind == ModelKind::vartfima; }
  Eigen::Index lambda_count() const { return tempered() ? (shared_lambda ? 1 : r) : 0; }
  Eigen::Index chol_count() const { return static_cast<Eigen::Index>(r) * (r + 1) / 2; }

  // Offsets of each block inside the unconstrained vector.
  Eigen::Index ar_offset() const { return 0; }
  Eigen::Index ma_offset() const { return static_cast<Eigen::Index>(r) * r * p; }
  Eigen::Index chol_offset() const { return ma_offset() + static_cast<Eigen::Index>(r) * r * q; }
  Eigen::Index d_offset() const { return chol_offset() + chol_count(); }
  Eigen::Index lambda_offset() const { return d_offset() + (tempered() ? r : 0); }
  Eigen::Index dimension() const { return lambda_offset() + lambda_count(); }

  /// Coordinate names of the unconstrained vector, e.g. "ar1_2_1", "logchol_1_1", "d_2".
  std::vector<std::string> parameter_names() const;
  std::string label() const;  // "VARTFIMA(1,1)"

  friend bool operator==(const ModelShape&, const ModelShape&) = default;
};

enum class LagSign { subtract, add };

/// I - sum_j A_j z^j (AR convention) or I + sum_j A_j z^j (MA convention).
struct LagPolynomial {
  std::vector<Eigen::MatrixXd> coeffs;
  LagSign sign = LagSign::subtract;

  int order() const { return static_cast<int>(coeffs.size()); }
  Eigen::MatrixXcd evaluate(std::complex<double> z, Eigen::Index r) const;
};

/// Structured view of a VARMA / VARTFIMA parameter set.
struct ModelParams {
  ModelKind kind = ModelKind::varma;
  Eigen::VectorXd mu;                                  // r; zero for demeaned data
  LagPolynomial ar{{}, LagSign::subtract};             // Phi_1..Phi_p
  LagPolynomial ma{{}, LagSign::add};                  // Theta_1..Theta_q
  Eigen::MatrixXd sigma_chol;                          // lower triangular, positive diagonal
  Eigen::VectorXd d;                                   // r, VARTFIMA only
  Eigen::VectorXd lambda;                              // 1 (shared) or r, VARTFIMA only

  int dim() const { return static_cast<int>(sigma_chol.rows()); }
  Eigen::MatrixXd sigma() const { return sigma_chol * sigma_chol.transpose(); }
  double lambda_of(Eigen::Index series) const { return lambda.size() == 1 ? lambda(0) : lambda(series); }
  ModelShape shape() const;

  /// Checks sizes and the domain constraints that do not involve roots.
  void validate() const;
};

/// White noise with covariance `sigma` (VARMA(0,0)).
ModelParams white_noise(const Eigen::MatrixXd& sigma);

/// Coefficients of (1 - e^{-lambda} L)^d: b_0..b_J.
std::vector<double> tempered_coeffs(double d, double lambda, int J);

/// Coefficients of (1 - e^{-lambda} L)^{-d}: c_0..c_J.
std::vector<double> inverse_tempered_coeffs(double d, double lambda, int J);

/// Smallest K with sum_{j>K} |c_j| below `tolerance`; throws Errc::truncation beyond `max_terms`.
Eigen::Index tempered_truncation(double d, double lambda, double tolerance = 1e-8, Eigen::Index max_terms = 10'000'000);

Eigen::MatrixXcd varma_spectral_density(const ModelParams& params, double omega);
Eigen::MatrixXcd vartfima_spectral_density(const ModelParams& params, double omega);
/// Dispatches on params.kind.
Eigen::MatrixXcd spectral_density(const ModelParams& params, double omega);

/// Maps unconstrained r x r matrices onto AR coefficients with all roots of
/// |I - sum Phi_j z^j| outside the unit circle, through normalised partial
/// autocorrelation matrices and the multivariate Levinson recursion.
std::vector<Eigen::MatrixXd> stationary_map(const std::vector<Eigen::MatrixXd>& unconstrained);
std::vector<Eigen::MatrixXd> stationary_map_inverse(const std::vector<Eigen::MatrixXd>& coefficients);

/// MA counterpart: Theta_j = -stationary_map(.)_j, so |I + sum Theta_j z^j| has no roots in the unit disc.
std::vector<Eigen::MatrixXd> invertible_map(const std::vector<Eigen::MatrixXd>& unconstrained);
std::vector<Eigen::MatrixXd> invertible_map_inverse(const std::vector<Eigen::MatrixXd>& coefficients);

/// Spectral radius of the companion matrix of Phi_1..Phi_p (0 when p = 0).
double companion_spectral_radius(const std::vector<Eigen::MatrixXd>& coefficients);

/// Solves X = A X A^T + Q by the doubling iteration; throws Errc::domain if it diverges.
Eigen::MatrixXd solve_discrete_lyapunov(const Eigen::MatrixXd& A, const Eigen::MatrixXd& Q, double tolerance = 1e-12);

Eigen::VectorXd pack(const ModelParams& params, const ModelShape& shape);
ModelParams unpack(const Eigen::VectorXd& theta, const ModelShape& shape);

/// Draws a path of length T. VARMA paths come from the difference-equation recursion
/// after `burnin` discarded steps; VARTFIMA paths filter a VARMA core through the
/// truncated inverse tempered filter.
MultiSeries simulate_model(const ModelParams& params, Eigen::Index T, Eigen::Index burnin, std::uint64_t seed,
                           Eigen::Index truncation_override = 0);

/// Exact Gaussian log-likelihood of a VARMA model through its state-space form.
double kalman_exact_loglik(const ModelParams& params, const MultiSeries& series);

}  // namespace specmc
