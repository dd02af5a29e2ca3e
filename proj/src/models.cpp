#include "specmc/models.hpp"

#include "specmc/error.hpp"
#include "specmc/rng.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <numbers>

namespace specmc {
namespace {

using Eigen::Index;
using Eigen::MatrixXcd;
using Eigen::MatrixXd;
using Eigen::VectorXd;
using cd = std::complex<double>;

constexpr double kTwoPi = 2.0 * std::numbers::pi;

MatrixXd symmetric_power(const MatrixXd& S, double power) {
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(S);
  const VectorXd ev = es.eigenvalues().array().pow(power);
  return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
}

MatrixXd lower_cholesky(const MatrixXd& S, const char* what) {
  Eigen::LLT<MatrixXd> llt(0.5 * (S + S.transpose()));
  if (llt.info() != Eigen::Success) throw Error(Errc::domain, std::string(what) + " is not positive definite");
  return llt.matrixL();
}

MatrixXd companion(const std::vector<MatrixXd>& phi) {
  const Index p = static_cast<Index>(phi.size());
  const Index r = phi.front().rows();
  MatrixXd F = MatrixXd::Zero(r * p, r * p);
  for (Index j = 0; j < p; ++j) F.block(0, j * r, r, r) = phi[static_cast<std::size_t>(j)];
  if (p > 1) F.block(r, 0, r * (p - 1), r * (p - 1)).setIdentity();
  return F;
}

// Autocovariances Gamma(0..p) of the VAR(p) with unit innovation covariance,
// Gamma(h) = Cov(Y_t, Y_{t-h}).
std::vector<MatrixXd> var_autocovariances(const std::vector<MatrixXd>& phi) {
  const Index p = static_cast<Index>(phi.size());
  const Index r = phi.front().rows();
  MatrixXd Q = MatrixXd::Zero(r * p, r * p);
  Q.topLeftCorner(r, r).setIdentity();
  const MatrixXd S = solve_discrete_lyapunov(companion(phi), Q);
  std::vector<MatrixXd> gamma(static_cast<std::size_t>(p + 1));
  for (Index h = 0; h < p; ++h) gamma[static_cast<std::size_t>(h)] = S.block(0, h * r, r, r);
  MatrixXd last = MatrixXd::Zero(r, r);
  for (Index k = 1; k <= p; ++k) {
    const Index lag = p - k;
    last += phi[static_cast<std::size_t>(k - 1)] * gamma[static_cast<std::size_t>(lag)];
  }
  gamma[static_cast<std::size_t>(p)] = last;
  return gamma;
}

// Multivariate Levinson recursion state.
struct Levinson {
  std::vector<MatrixXd> forward;   // phi_{s,1..s}
  std::vector<MatrixXd> backward;  // phi*_{s,1..s}
  MatrixXd V;                      // forward error variance
  MatrixXd Vb;                     // backward error variance

  // Advances s -> s+1 given Delta_s.
  void advance(const MatrixXd& delta) {
    const Index s = static_cast<Index>(forward.size());
    const MatrixXd f_new = Vb.llt().solve(delta.transpose()).transpose();  // delta * Vb^{-1}
    const MatrixXd b_new = V.llt().solve(delta).transpose();              // delta^T * V^{-1}
    std::vector<MatrixXd> fwd(static_cast<std::size_t>(s + 1));
    std::vector<MatrixXd> bwd(static_cast<std::size_t>(s + 1));
    for (Index k = 0; k < s; ++k) {
      fwd[static_cast<std::size_t>(k)] = forward[static_cast<std::size_t>(k)] - f_new * backward[static_cast<std::size_t>(s - 1 - k)];
      bwd[static_cast<std::size_t>(k)] = backward[static_cast<std::size_t>(k)] - b_new * forward[static_cast<std::size_t>(s - 1 - k)];
    }
    fwd[static_cast<std::size_t>(s)] = f_new;
    bwd[static_cast<std::size_t>(s)] = b_new;
    forward = std::move(fwd);
    backward = std::move(bwd);
    MatrixXd V_new = V - f_new * delta.transpose();
    MatrixXd Vb_new = Vb - b_new * delta;
    V = 0.5 * (V_new + V_new.transpose());
    Vb = 0.5 * (Vb_new + Vb_new.transpose());
  }
};

void check_matrix_list(const std::vector<MatrixXd>& list, const char* what) {
  if (list.empty()) return;
  const Index r = list.front().rows();
  for (const auto& m : list) {
    if (m.rows() != r || m.cols() != r) throw Error(Errc::shape, std::string(what) + " matrices must be square and equal-sized");
  }
}

}  // namespace

std::string to_string(ModelKind kind) { return kind == ModelKind::varma ? "VARMA" : "VARTFIMA"; }

ModelKind parse_model_kind(std::string_view text) {
  std::string upper(text);
  std::transform(upper.begin(), upper.end(), upper.begin(), [](unsigned char c) { return static_cast<char>(std::toupper(c)); });
  if (upper == "VARMA") return ModelKind::varma;
  if (upper == "VARTFIMA") return ModelKind::vartfima;
  throw Error(Errc::config, "unknown model kind \"" + std::string(text) + "\" (expected VARMA or VARTFIMA)");
}

std::vector<std::string> ModelShape::parameter_names() const {
  std::vector<std::string> names;
  names.reserve(static_cast<std::size_t>(dimension()));
  auto matrix_names = [&](const char* prefix, int order) {
    for (int l = 1; l <= order; ++l)
      for (int j = 1; j <= r; ++j)
        for (int i = 1; i <= r; ++i)
          names.push_back(std::string(prefix) + std::to_string(l) + "_" + std::to_string(i) + "_" + std::to_string(j));
  };
  matrix_names("ar", p);
  matrix_names("ma", q);
  for (int i = 1; i <= r; ++i)
    for (int j = 1; j <= i; ++j)
      names.push_back((i == j ? "logchol_" : "chol_") + std::to_string(i) + "_" + std::to_string(j));
  if (tempered()) {
    for (int i = 1; i <= r; ++i) names.push_back("d_" + std::to_string(i));
    if (shared_lambda) {
      names.push_back("loglambda");
    } else {
      for (int i = 1; i <= r; ++i) names.push_back("loglambda_" + std::to_string(i));
    }
  }
  return names;
}

std::string ModelShape::label() const {
  return to_string(kind) + "(" + std::to_string(p) + "," + std::to_string(q) + ")";
}

MatrixXcd LagPolynomial::evaluate(cd z, Index r) const {
  MatrixXcd out = MatrixXcd::Identity(r, r);
  const double s = sign == LagSign::subtract ? -1.0 : 1.0;
  cd zj = 1.0;
  for (const auto& A : coeffs) {
    zj *= z;
    out += (s * zj) * A.cast<cd>();
  }
  return out;
}

ModelShape ModelParams::shape() const {
  ModelShape s;
  s.kind = kind;
  s.r = dim();
  s.p = ar.order();
  s.q = ma.order();
  s.shared_lambda = kind != ModelKind::vartfima || lambda.size() <= 1;
  return s;
}

void ModelParams::validate() const {
  const Index r = sigma_chol.rows();
  if (r < 1 || sigma_chol.cols() != r) throw Error(Errc::shape, "sigma_chol must be a non-empty square matrix");
  for (Index i = 0; i < r; ++i) {
    if (!(sigma_chol(i, i) > 0.0)) throw Error(Errc::domain, "sigma_chol diagonal must be strictly positive");
    for (Index j = i + 1; j < r; ++j)
      if (sigma_chol(i, j) != 0.0) throw Error(Errc::domain, "sigma_chol must be lower triangular");
  }
  if (mu.size() != 0 && mu.size() != r) throw Error(Errc::shape, "mu must have one entry per series");
  check_matrix_list(ar.coeffs, "AR");
  check_matrix_list(ma.coeffs, "MA");
  if (!ar.coeffs.empty() && ar.coeffs.front().rows() != r) throw Error(Errc::shape, "AR matrices do not match sigma dimension");
  if (!ma.coeffs.empty() && ma.coeffs.front().rows() != r) throw Error(Errc::shape, "MA matrices do not match sigma dimension");
  if (kind == ModelKind::vartfima) {
    if (d.size() != r) throw Error(Errc::shape, "VARTFIMA needs one fractional difference per series");
    if (lambda.size() != 1 && lambda.size() != r) throw Error(Errc::shape, "lambda must be shared (1 entry) or per series");
    for (Index k = 0; k < lambda.size(); ++k)
      if (!(lambda(k) > 0.0))
        throw Error(Errc::domain, "VARTFIMA requires lambda > 0 for causality and stationarity (got " + std::to_string(lambda(k)) + ")");
  }
}

ModelParams white_noise(const MatrixXd& sigma) {
  ModelParams p;
  p.kind = ModelKind::varma;
  p.sigma_chol = lower_cholesky(sigma, "sigma");
  p.mu = VectorXd::Zero(sigma.rows());
  return p;
}

std::vector<double> tempered_coeffs(double d, double lambda, int J) {
  std::vector<double> b(static_cast<std::size_t>(std::max(J, 0) + 1));
  b[0] = 1.0;
  const double a = std::exp(-lambda);
  for (int j = 1; j <= J; ++j) b[static_cast<std::size_t>(j)] = b[static_cast<std::size_t>(j - 1)] * a * (j - 1 - d) / j;
  return b;
}

std::vector<double> inverse_tempered_coeffs(double d, double lambda, int J) {
  return tempered_coeffs(-d, lambda, J);
}

Index tempered_truncation(double d, double lambda, double tolerance, Index max_terms) {
  if (!(lambda > 0.0)) throw Error(Errc::domain, "tempered filter truncation requires lambda > 0");
  const double a = std::exp(-lambda);
  const double start = std::max(1.0, std::ceil(1.0 - d));
  double c = 1.0;
  for (Index j = 1; j <= max_terms; ++j) {
    c *= a * (static_cast<double>(j) - 1.0 + d) / static_cast<double>(j);
    if (c == 0.0) return j;
    if (static_cast<double>(j) < start) continue;
    const double rho = a * std::max(1.0, (static_cast<double>(j) + d) / (static_cast<double>(j) + 1.0));
    if (rho >= 1.0) continue;
    if (std::abs(c) * rho / (1.0 - rho) < tolerance) return j;
  }
  throw Error(Errc::truncation, "inverse tempered filter needs more than " + std::to_string(max_terms) +
                                    " terms for lambda = " + std::to_string(lambda) +
                                    "; use a larger lambda or an explicit truncation override");
}

MatrixXcd varma_spectral_density(const ModelParams& params, double omega) {
  const Index r = params.dim();
  const cd z = std::polar(1.0, -omega);
  const MatrixXcd phi = params.ar.evaluate(z, r);
  const MatrixXcd theta = params.ma.evaluate(z, r);
  Eigen::PartialPivLU<MatrixXcd> lu(phi);
  const double scale = phi.cwiseAbs().maxCoeff();
  if (lu.matrixLU().diagonal().cwiseAbs().minCoeff() <= 1e-13 * scale) {
    throw Error(Errc::domain, "AR polynomial is numerically singular at omega = " + std::to_string(omega));
  }
  const MatrixXcd B = lu.solve(theta) * params.sigma_chol.cast<cd>();
  MatrixXcd f = (B * B.adjoint()) / kTwoPi;
  return 0.5 * (f + f.adjoint());
}

MatrixXcd vartfima_spectral_density(const ModelParams& params, double omega) {
  const Index r = params.dim();
  if (params.d.size() != r) throw Error(Errc::shape, "VARTFIMA needs one fractional difference per series");
  for (Index k = 0; k < params.lambda.size(); ++k)
    if (!(params.lambda(k) > 0.0)) throw Error(Errc::domain, "VARTFIMA spectral density requires lambda > 0");
  const MatrixXcd core = varma_spectral_density(params, omega);
  const cd z = std::polar(1.0, -omega);
  Eigen::VectorXcd delta(r);
  for (Index k = 0; k < r; ++k) delta(k) = std::pow(1.0 - std::exp(-params.lambda_of(k)) * z, -params.d(k));
  MatrixXcd f = delta.asDiagonal() * core * delta.conjugate().asDiagonal();
  return 0.5 * (f + f.adjoint());
}

MatrixXcd spectral_density(const ModelParams& params, double omega) {
  return params.kind == ModelKind::vartfima ? vartfima_spectral_density(params, omega) : varma_spectral_density(params, omega);
}

MatrixXd solve_discrete_lyapunov(const MatrixXd& A, const MatrixXd& Q, double tolerance) {
  MatrixXd X = Q;
  MatrixXd Ak = A;
  for (int it = 0; it < 200; ++it) {
    MatrixXd next = X + Ak * X * Ak.transpose();
    next = 0.5 * (next + next.transpose());
    const double change = (next - X).cwiseAbs().maxCoeff();
    const double size = next.cwiseAbs().maxCoeff();
    X = std::move(next);
    if (!std::isfinite(size)) break;
    if (change <= tolerance * std::max(size, 1e-300)) return X;
    Ak = (Ak * Ak).eval();
  }
  throw Error(Errc::domain, "discrete Lyapunov iteration did not converge (transition is not stable)");
}

double companion_spectral_radius(const std::vector<MatrixXd>& coefficients) {
  if (coefficients.empty()) return 0.0;
  Eigen::EigenSolver<MatrixXd> es(companion(coefficients), false);
  return es.eigenvalues().cwiseAbs().maxCoeff();
}

std::vector<MatrixXd> stationary_map(const std::vector<MatrixXd>& unconstrained) {
  if (unconstrained.empty()) return {};
  check_matrix_list(unconstrained, "unconstrained");
  const Index r = unconstrained.front().rows();
  const MatrixXd I = MatrixXd::Identity(r, r);

  Levinson lev{{}, {}, I, I};
  for (const auto& A : unconstrained) {
    const MatrixXd P = A * symmetric_power(I + A.transpose() * A, -0.5);
    const MatrixXd L = lower_cholesky(lev.V, "forward error variance");
    const MatrixXd Lb = lower_cholesky(lev.Vb, "backward error variance");
    lev.advance(L * P * Lb.transpose());
  }
  // Similarity transform to unit innovation covariance: T = chol(V_p)^{-1}.
  const MatrixXd Lp = lower_cholesky(lev.V, "innovation variance");
  const MatrixXd T = Lp.triangularView<Eigen::Lower>().solve(I);
  std::vector<MatrixXd> out;
  out.reserve(unconstrained.size());
  for (const auto& phi : lev.forward) out.push_back(T * phi * Lp);
  return out;
}

std::vector<MatrixXd> stationary_map_inverse(const std::vector<MatrixXd>& coefficients) {
  if (coefficients.empty()) return {};
  check_matrix_list(coefficients, "AR");
  const double radius = companion_spectral_radius(coefficients);
  if (!(radius < 1.0)) {
    throw Error(Errc::domain, "coefficients are not stationary (companion spectral radius " + std::to_string(radius) + ")");
  }
  const Index r = coefficients.front().rows();
  const MatrixXd I = MatrixXd::Identity(r, r);
  const std::vector<MatrixXd> gamma_y = var_autocovariances(coefficients);
  const MatrixXd T = lower_cholesky(gamma_y[0], "autocovariance");
  auto to_x = [&](const MatrixXd& g) {
    const MatrixXd left = T.triangularView<Eigen::Lower>().solve(g);
    return MatrixXd(T.triangularView<Eigen::Lower>().solve(left.transpose()).transpose());
  };
  std::vector<MatrixXd> gamma;
  gamma.reserve(gamma_y.size());
  for (const auto& g : gamma_y) gamma.push_back(to_x(g));

  Levinson lev{{}, {}, gamma[0], gamma[0]};
  std::vector<MatrixXd> out;
  const Index p = static_cast<Index>(coefficients.size());
  for (Index s = 0; s < p; ++s) {
    MatrixXd delta = gamma[static_cast<std::size_t>(s + 1)];
    for (Index k = 1; k <= s; ++k)
      delta -= lev.forward[static_cast<std::size_t>(k - 1)] * gamma[static_cast<std::size_t>(s + 1 - k)];
    const MatrixXd L = lower_cholesky(lev.V, "forward error variance");
    const MatrixXd Lb = lower_cholesky(lev.Vb, "backward error variance");
    const MatrixXd left = L.triangularView<Eigen::Lower>().solve(delta);
    const MatrixXd P = Lb.triangularView<Eigen::Lower>().solve(left.transpose()).transpose();
    Eigen::JacobiSVD<MatrixXd> svd(P);
    if (!(svd.singularValues()(0) < 1.0)) {
      throw Error(Errc::domain, "partial autocorrelation with singular value >= 1; coefficients are on the stationarity boundary");
    }
    out.push_back(P * symmetric_power(I - P.transpose() * P, -0.5));
    lev.advance(delta);
  }
  return out;
}

std::vector<MatrixXd> invertible_map(const std::vector<MatrixXd>& unconstrained) {
  auto out = stationary_map(unconstrained);
  for (auto& m : out) m = -m;
  return out;
}

std::vector<MatrixXd> invertible_map_inverse(const std::vector<MatrixXd>& coefficients) {
  std::vector<MatrixXd> negated;
  negated.reserve(coefficients.size());
  for (const auto& m : coefficients) negated.push_back(-m);
  return stationary_map_inverse(negated);
}

VectorXd pack(const ModelParams& params, const ModelShape& shape) {
  params.validate();
  if (params.shape() != shape && !(params.kind == shape.kind && params.dim() == shape.r && params.ar.order() == shape.p &&
                                   params.ma.order() == shape.q && params.lambda.size() == shape.lambda_count())) {
    throw Error(Errc::shape, "parameters do not match the shape " + shape.label());
  }
  const Index r = shape.r;
  VectorXd theta(shape.dimension());
  Index pos = 0;
  auto put_matrices = [&](const std::vector<MatrixXd>& mats) {
    for (const auto& m : mats) {
      theta.segment(pos, r * r) = Eigen::Map<const VectorXd>(m.data(), r * r);
      pos += r * r;
    }
  };
  put_matrices(stationary_map_inverse(params.ar.coeffs));
  put_matrices(invertible_map_inverse(params.ma.coeffs));
  for (Index i = 0; i < r; ++i)
    for (Index j = 0; j <= i; ++j) theta(pos++) = i == j ? std::log(params.sigma_chol(i, i)) : params.sigma_chol(i, j);
  if (shape.tempered()) {
    for (Index i = 0; i < r; ++i) theta(pos++) = params.d(i);
    for (Index k = 0; k < shape.lambda_count(); ++k) theta(pos++) = std::log(params.lambda(k));
  }
  return theta;
}

ModelParams unpack(const VectorXd& theta, const ModelShape& shape) {
  if (theta.size() != shape.dimension()) {
    throw Error(Errc::shape, "parameter vector has " + std::to_string(theta.size()) + " entries but " + shape.label() +
                                 " with r = " + std::to_string(shape.r) + " needs " + std::to_string(shape.dimension()));
  }
  if (!theta.allFinite()) throw Error(Errc::domain, "parameter vector contains non-finite values");
  const Index r = shape.r;
  ModelParams params;
  params.kind = shape.kind;
  params.mu = VectorXd::Zero(r);
  Index pos = 0;
  auto take_matrices = [&](int count) {
    std::vector<MatrixXd> mats;
    for (int l = 0; l < count; ++l) {
      mats.emplace_back(Eigen::Map<const MatrixXd>(theta.data() + pos, r, r));
      pos += r * r;
    }
    return mats;
  };
  params.ar.coeffs = stationary_map(take_matrices(shape.p));
  params.ma.coeffs = invertible_map(take_matrices(shape.q));
  params.sigma_chol = MatrixXd::Zero(r, r);
  for (Index i = 0; i < r; ++i)
    for (Index j = 0; j <= i; ++j) params.sigma_chol(i, j) = i == j ? std::exp(theta(pos++)) : theta(pos++);
  if (shape.tempered()) {
    params.d = theta.segment(pos, r);
    pos += r;
    params.lambda = theta.segment(pos, shape.lambda_count()).array().exp();
  }
  for (Index i = 0; i < r; ++i) {
    if (!(params.sigma_chol(i, i) > 0.0) || !std::isfinite(params.sigma_chol(i, i)))
      throw Error(Errc::domain, "Cholesky diagonal under- or overflowed");
  }
  return params;
}

MultiSeries simulate_model(const ModelParams& params, Index T, Index burnin, std::uint64_t seed, Index truncation_override) {
  params.validate();
  if (T < 1 || burnin < 0) throw Error(Errc::domain, "simulation length must be positive and burn-in non-negative");
  if (companion_spectral_radius(params.ar.coeffs) >= 1.0) throw Error(Errc::domain, "AR coefficients are not stationary");
  const Index r = params.dim();
  const bool tempered = params.kind == ModelKind::vartfima;

  std::vector<std::vector<double>> filters;
  Index K = 0;
  if (tempered) {
    for (Index k = 0; k < r; ++k) {
      const Index Kk = truncation_override > 0 ? truncation_override : tempered_truncation(params.d(k), params.lambda_of(k));
      K = std::max(K, Kk);
    }
    for (Index k = 0; k < r; ++k)
      filters.push_back(inverse_tempered_coeffs(params.d(k), params.lambda_of(k), static_cast<int>(K)));
  }

  const Index core_length = T + K;
  const Index total = burnin + core_length;
  Rng rng(seed, Stream::simulation);
  MatrixXd eps(r, total);
  VectorXd z(r);
  for (Index t = 0; t < total; ++t) {
    for (Index k = 0; k < r; ++k) z(k) = rng.normal();
    eps.col(t) = params.sigma_chol * z;
  }
  MatrixXd x = MatrixXd::Zero(r, total);
  const Index p = params.ar.order();
  const Index q = params.ma.order();
  for (Index t = 0; t < total; ++t) {
    VectorXd v = eps.col(t);
    for (Index j = 1; j <= p && j <= t; ++j) v.noalias() += params.ar.coeffs[static_cast<std::size_t>(j - 1)] * x.col(t - j);
    for (Index j = 1; j <= q && j <= t; ++j) v.noalias() += params.ma.coeffs[static_cast<std::size_t>(j - 1)] * eps.col(t - j);
    x.col(t) = v;
  }

  MatrixXd out(T, r);
  if (!tempered) {
    out = x.middleCols(burnin, T).transpose();
  } else {
    for (Index k = 0; k < r; ++k) {
      const auto& c = filters[static_cast<std::size_t>(k)];
      for (Index t = 0; t < T; ++t) {
        const Index now = burnin + K + t;
        double acc = 0.0;
        for (Index j = 0; j <= K; ++j) acc += c[static_cast<std::size_t>(j)] * x(k, now - j);
        out(t, k) = acc;
      }
    }
  }
  if (params.mu.size() == r) out.rowwise() += params.mu.transpose();
  return make_series(std::move(out));
}

double kalman_exact_loglik(const ModelParams& params, const MultiSeries& series) {
  params.validate();
  if (params.kind != ModelKind::varma) throw Error(Errc::domain, "the exact time-domain likelihood is implemented for VARMA models only");
  const Index r = params.dim();
  if (series.dim() != r) throw Error(Errc::shape, "series dimension does not match the model");
  if (series.missing_count() > 0) throw Error(Errc::domain, "kalman_exact_loglik requires a gap-free series");
  const Index p = params.ar.order();
  const Index q = params.ma.order();
  const Index m = std::max(p, q + 1);
  const Index s = r * m;

  MatrixXd F = MatrixXd::Zero(s, s);
  for (Index j = 0; j < p; ++j) F.block(j * r, 0, r, r) = params.ar.coeffs[static_cast<std::size_t>(j)];
  if (m > 1) F.block(0, r, r * (m - 1), r * (m - 1)).setIdentity();
  MatrixXd R = MatrixXd::Zero(s, r);
  R.topRows(r).setIdentity();
  for (Index j = 1; j <= q; ++j) R.block(j * r, 0, r, r) = params.ma.coeffs[static_cast<std::size_t>(j - 1)];
  const MatrixXd Q = R * params.sigma() * R.transpose();

  MatrixXd P = solve_discrete_lyapunov(F, Q);
  VectorXd a = VectorXd::Zero(s);
  VectorXd mu = params.mu.size() == r ? params.mu : VectorXd::Zero(r);

  const double log2pi = std::log(kTwoPi);
  double loglik = 0.0;
  bool steady = false;
  Eigen::LLT<MatrixXd> llt(r);
  MatrixXd K(s, r);
  MatrixXd PZt(s, r);
  MatrixXd P_next(s, s);
  VectorXd v(r);
  VectorXd a_next(s);
  VectorXd w(r);
  double steady_logdet = 0.0;

  for (Index t = 0; t < series.length(); ++t) {
    v = series.values.row(t).transpose() - mu - a.head(r);
    if (!steady) {
      llt.compute(P.topLeftCorner(r, r));
      if (llt.info() != Eigen::Success) {
        throw Error(Errc::conditioning, "innovation covariance lost positive definiteness at t = " + std::to_string(t));
      }
      const auto& L = llt.matrixLLT();
      double logdet = 0.0;
      for (Index i = 0; i < r; ++i) logdet += 2.0 * std::log(L(i, i));
      steady_logdet = logdet;
      w = llt.matrixL().solve(v);
      loglik -= 0.5 * (static_cast<double>(r) * log2pi + logdet + w.squaredNorm());

      PZt = P.leftCols(r);
      K.noalias() = F * llt.solve(PZt.transpose()).transpose();
      a_next.noalias() = F * a;
      a_next.noalias() += K * v;
      P_next.noalias() = F * P * F.transpose();
      P_next += Q;
      P_next.noalias() -= K * P.topLeftCorner(r, r) * K.transpose();
      P_next = 0.5 * (P_next + P_next.transpose());
      const double change = (P_next - P).cwiseAbs().maxCoeff();
      steady = change <= 1e-13 * std::max(1.0, P.cwiseAbs().maxCoeff());
      P.swap(P_next);
      a.swap(a_next);
    } else {
      w = llt.matrixL().solve(v);
      loglik -= 0.5 * (static_cast<double>(r) * log2pi + steady_logdet + w.squaredNorm());
      a_next.noalias() = F * a;
      a_next.noalias() += K * v;
      a.swap(a_next);
    }
  }
  return loglik;
}

}  // namespace specmc
