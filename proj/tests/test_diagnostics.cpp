#include "specmc/diagnostics.hpp"
#include "specmc/error.hpp"
#include "specmc/models.hpp"
#include "specmc/spectral.hpp"
#include "support.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>

using namespace specmc;
using Eigen::Index;
using Eigen::MatrixXcd;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

std::vector<double> ar1_chain(double rho, std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<double> x(n);
  x[0] = rng.normal() / std::sqrt(1.0 - rho * rho);
  for (std::size_t t = 1; t < n; ++t) x[t] = rho * x[t - 1] + rng.normal();
  return x;
}

Errc code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an error");
  return Errc::config;
}

ModelParams var1_truth() {
  ModelParams p;
  p.kind = ModelKind::varma;
  p.mu = VectorXd::Zero(2);
  p.ar.coeffs = {(MatrixXd(2, 2) << 0.5, 0.1, -0.2, 0.3).finished()};
  p.sigma_chol = (MatrixXd(2, 2) << 1.0, 0.0, 0.4, 0.8).finished();
  return p;
}

// Rows of identical packed parameters, a point-mass posterior.
MatrixXd point_mass(const ModelParams& p, Index rows) {
  const VectorXd theta = pack(p, p.shape());
  return theta.transpose().replicate(rows, 1);
}

const SpectralPanel& panel(const SpectralSummary& s, SpectralPanel::Kind kind, Index i, Index j) {
  for (const auto& p : s.panels)
    if (p.kind == kind && p.i == i && p.j == j) return p;
  throw std::runtime_error("panel not found");
}

}  // namespace

TEST_CASE("iact of white noise is close to one") {
  Rng rng(1);
  std::vector<double> x(100000);
  for (auto& v : x) v = rng.normal();
  const double tau = iact(x);
  CHECK(tau > 0.9);
  CHECK(tau < 1.2);
}

TEST_CASE("iact of an AR(1) chain matches (1 + rho) / (1 - rho)") {
  const double tau = iact(ar1_chain(0.9, 1000000, 7));
  CHECK(std::abs(tau - 19.0) < 1.9);
  const double tau5 = iact(ar1_chain(0.5, 200000, 8));
  CHECK(std::abs(tau5 - 3.0) < 0.3);
}

TEST_CASE("iact of an alternating chain is below one and finite") {
  std::vector<double> x(1000);
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = (i % 2) ? -1.0 : 1.0;
  const double tau = iact(x);
  CHECK(std::isfinite(tau));
  CHECK(tau > 0.0);
  CHECK(tau < 1.0);
}

TEST_CASE("iact rejects constant and short chains") {
  CHECK(code_of([] { iact(std::vector<double>(500, 2.0)); }) == Errc::degenerate);
  CHECK(code_of([] { iact(std::vector<double>{1.0, 2.0, 3.0}); }) == Errc::degenerate);
}

TEST_CASE("iact is invariant to affine maps") {
  const std::vector<double> x = ar1_chain(0.7, 20000, 3);
  std::vector<double> y(x.size());
  std::transform(x.begin(), x.end(), y.begin(), [](double v) { return -3.5 * v + 12.0; });
  CHECK(iact(y) == doctest::Approx(iact(x)).epsilon(1e-9));
}

TEST_CASE("autocorrelation matches a direct sum") {
  const std::vector<double> x = ar1_chain(0.6, 777, 4);
  const std::vector<double> rho = autocorrelation(x, 20);
  double mean = 0.0;
  for (double v : x) mean += v;
  mean /= static_cast<double>(x.size());
  auto gamma = [&](std::size_t k) {
    double s = 0.0;
    for (std::size_t t = 0; t + k < x.size(); ++t) s += (x[t] - mean) * (x[t + k] - mean);
    return s / static_cast<double>(x.size());
  };
  REQUIRE(rho.size() == 21);
  CHECK(rho[0] == doctest::Approx(1.0));
  for (std::size_t k = 1; k <= 20; ++k) CHECK(rho[k] == doctest::Approx(gamma(k) / gamma(0)).epsilon(1e-10));
}

TEST_CASE("relative computational time arithmetic") {
  const VectorXd tau = VectorXd::Constant(3, 5.0);
  const ChainEfficiency full = compute_ct(tau, 1000 * 100, 100);
  const ChainEfficiency sub = compute_ct(tau, 10 * 100, 100);
  CHECK(full.evaluations_per_iteration == 1000.0);
  CHECK(full.ct(0) == 5000.0);
  const VectorXd rct = relative_ct(full, sub);
  for (Index i = 0; i < 3; ++i) CHECK(rct(i) == doctest::Approx(100.0));
  const ChainEfficiency slow = compute_ct(2.0 * tau, 10 * 100, 100);
  CHECK(relative_ct(full, slow)(1) == doctest::Approx(50.0));
}

TEST_CASE("relative_ct rejects mismatched dimensions") {
  const ChainEfficiency a = compute_ct(VectorXd::Ones(3), 100, 10);
  const ChainEfficiency b = compute_ct(VectorXd::Ones(4), 100, 10);
  CHECK(code_of([&] { relative_ct(a, b); }) == Errc::shape);
}

TEST_CASE("efficiency_report summaries agree with the vectors") {
  VectorXd tf(3), ts(3);
  tf << 2.0, 4.0, 6.0;
  ts << 3.0, 3.0, 9.0;
  const ChainEfficiency full = compute_ct(tf, 50000, 100);
  const ChainEfficiency sub = compute_ct(ts, 600, 100);
  const EfficiencyReport r = efficiency_report({"a", "b", "c"}, full, sub);
  REQUIRE(r.rct);
  REQUIRE(r.rct_summary);
  CHECK(r.iact_full.min == 2.0);
  CHECK(r.iact_full.mean == doctest::Approx(4.0));
  CHECK(r.iact_full.max == 6.0);
  CHECK(r.rct_summary->mean == doctest::Approx(r.rct->mean()));
  CHECK(r.rct_summary->min == doctest::Approx(r.rct->minCoeff()));
  CHECK((*r.rct)(0) == doctest::Approx(2.0 * 500.0 / (3.0 * 6.0)));
  const EfficiencyReport single = efficiency_report({"a", "b", "c"}, full, std::nullopt);
  CHECK_FALSE(single.rct);
}

TEST_CASE("bic_value formula") {
  CHECK(bic_value(-100.0, 4, 1000) == doctest::Approx(-100.0 - 2.0 * std::log(1000.0)));
  CHECK(bic_value(12.5, 0, 7) == 12.5);
}

TEST_CASE("white-noise BIC reproduces the closed-form Whittle maximum") {
  Rng rng(5);
  MatrixXd x = testing::random_matrix(1024, 2, rng);
  x.col(1) += 0.5 * x.col(0);
  const PeriodogramSet pgram = periodogram(demean(make_series(x)));
  const ModelShape shape{ModelKind::varma, 2, 0, 0, true};

  // The maximiser is f = average real periodogram over the positive frequencies.
  const Index P = pgram.positive_count();
  MatrixXd fbar = MatrixXd::Zero(2, 2);
  for (Index k = 1; k <= P; ++k) fbar += pgram.positive_ordinate(k).real();
  fbar /= static_cast<double>(P);
  const double loglik = -static_cast<double>(P) * (std::log(fbar.determinant()) + 2.0);

  const BicResult r = bic(pgram, shape);
  CHECK(r.loglik == doctest::Approx(loglik).epsilon(1e-7));
  CHECK(r.k == 3);
  CHECK(r.n == 1024);
  CHECK(r.bic == doctest::Approx(loglik - 1.5 * std::log(1024.0)).epsilon(1e-7));
  const BicResult f = bic(pgram, shape, BicPenalty::frequencies);
  CHECK(f.n == pgram.size());

  // The doubled-half and full-grid likelihoods agree at the maximiser.
  const ModelParams hat = unpack(r.theta, shape);
  CHECK(whittle_loglik_symmetric(hat, pgram) / 2.0 == doctest::Approx(r.loglik).epsilon(1e-9));
}

TEST_CASE("BIC prefers the true VAR order over an overfit one") {
  const ModelParams truth = var1_truth();
  int wins = 0;
  for (int rep = 0; rep < 100; ++rep) {
    const PeriodogramSet pgram = periodogram(demean(simulate_model(truth, 1 << 14, 500, split_seed(11, Stream::replication, rep))));
    const double b1 = bic(pgram, {ModelKind::varma, 2, 1, 0, true}).bic;
    const double b2 = bic(pgram, {ModelKind::varma, 2, 2, 0, true}).bic;
    wins += b1 > b2;
  }
  CHECK(wins >= 90);
}

TEST_CASE("squared coherence and delay on small matrices") {
  MatrixXcd f(2, 2);
  f << 2.0, std::complex<double>(0.6, 0.8), std::complex<double>(0.6, -0.8), 1.0;
  CHECK(squared_coherence(f, 0, 1) == doctest::Approx(0.5));
  CHECK(squared_coherence(f, 0, 0) == doctest::Approx(1.0));
  CHECK(squared_coherence(f, 1, 1) == doctest::Approx(1.0));
  CHECK(time_delay(f, 0, 1, 0.5) == doctest::Approx(-std::atan2(0.8, 0.6) / 0.5));
  CHECK(time_delay(f, 1, 0, 0.5) == doctest::Approx(std::atan2(0.8, 0.6) / 0.5));
  CHECK(code_of([&] { time_delay(f, 0, 1, 0.0); }) == Errc::domain);
}

TEST_CASE("white noise with correlation rho has squared coherence rho^2 everywhere") {
  const double rho = 0.6;
  MatrixXd sigma(2, 2);
  sigma << 1.0, rho * 1.5, rho * 1.5, 2.25;
  const ModelParams p = white_noise(sigma);
  const SpectralSummary s = spectral_summary(point_mass(p, 10), p.shape(), 64);
  const auto& coh = panel(s, SpectralPanel::Kind::coherence, 0, 1);
  CHECK((coh.quantiles.array() - rho * rho).abs().maxCoeff() < 1e-12);
  const auto& f22 = panel(s, SpectralPanel::Kind::spectrum, 1, 1);
  CHECK((f22.quantiles.array() - 2.25 / (2.0 * std::numbers::pi)).abs().maxCoeff() < 1e-12);
}

TEST_CASE("spectral_summary grid, panels and quantile order") {
  const ModelShape shape{ModelKind::vartfima, 3, 1, 0, true};
  Rng rng(2);
  MatrixXd draws(300, shape.dimension());
  for (Index i = 0; i < draws.rows(); ++i) draws.row(i) = pack(testing::random_params(shape, rng), shape).transpose();
  const SpectralSummary s = spectral_summary(draws, shape, 40, 120);
  CHECK(s.draws_used == 100);
  REQUIRE(s.omega.size() == 40);
  for (Index k = 0; k < 40; ++k) CHECK(s.omega(k) == doctest::Approx(std::numbers::pi * (k + 0.5) / 40.0));
  CHECK(s.panels.size() == 3 + 3 + 6);
  for (const auto& p : s.panels) {
    for (Index k = 0; k < 40; ++k) {
      CHECK(p.quantiles(k, 0) <= p.quantiles(k, 1));
      CHECK(p.quantiles(k, 1) <= p.quantiles(k, 2));
      if (p.kind == SpectralPanel::Kind::coherence) {
        CHECK(p.quantiles(k, 0) >= 0.0);
        CHECK(p.quantiles(k, 2) <= 1.0);
      }
    }
  }
}

TEST_CASE("squared coherence stays in [0, 1] for random model draws") {
  Rng rng(12);
  for (const ModelShape& shape : {ModelShape{ModelKind::varma, 3, 2, 1, true}, ModelShape{ModelKind::vartfima, 2, 1, 1, false}}) {
    for (int rep = 0; rep < 50; ++rep) {
      const ModelParams p = testing::random_params(shape, rng);
      for (double w : {0.01, 0.3, 1.7, 3.1}) {
        const MatrixXcd f = spectral_density(p, w);
        for (Index i = 0; i < shape.r; ++i)
          for (Index j = 0; j < shape.r; ++j) {
            const double c = squared_coherence(f, i, j);
            CHECK(c >= 0.0);
            CHECK(c <= 1.0 + 1e-12);
          }
      }
    }
  }
}

TEST_CASE("a pure delay is recovered from the model spectrum") {
  // x2_t = x1_{t-3} + small noise, written as a VMA(3).
  ModelParams p;
  p.kind = ModelKind::varma;
  p.mu = VectorXd::Zero(2);
  p.ma.coeffs = {MatrixXd::Zero(2, 2), MatrixXd::Zero(2, 2), (MatrixXd(2, 2) << 0.0, 0.0, 1.0, 0.0).finished()};
  p.sigma_chol = (MatrixXd(2, 2) << 1.0, 0.0, 0.0, 0.05).finished();
  for (double w : {0.05, 0.2, 0.5, 0.9}) {
    const MatrixXcd f = spectral_density(p, w);
    CHECK(time_delay(f, 1, 0, w) == doctest::Approx(3.0).epsilon(1e-9));
    CHECK(time_delay(f, 0, 1, w) == doctest::Approx(-3.0).epsilon(1e-9));
  }
}

TEST_CASE("a pure delay is recovered from simulated data at low frequencies") {
  const Index T = 8192, lag = 3;
  Rng rng(21);
  MatrixXd x(T, 2);
  VectorXd e(T + lag);
  for (Index t = 0; t < T + lag; ++t) e(t) = rng.normal();
  for (Index t = 0; t < T; ++t) {
    x(t, 0) = e(t + lag);
    x(t, 1) = e(t) + 0.01 * rng.normal();
  }
  const PeriodogramSet pgram = periodogram(demean(make_series(x)));
  // Band averages of the cross-periodogram at low frequencies.
  const Index band = 40;
  for (Index start = 1; start + band <= 400; start += band) {
    MatrixXcd f = MatrixXcd::Zero(2, 2);
    double w = 0.0;
    for (Index k = start; k < start + band; ++k) {
      f += pgram.positive_ordinate(k);
      w += pgram.grid.frequency_of(k);
    }
    w /= static_cast<double>(band);
    CHECK(std::abs(time_delay(f, 1, 0, w) - 3.0) < 0.3);
  }
}

TEST_CASE("quantile uses linear interpolation between order statistics") {
  CHECK(quantile({4.0, 1.0, 3.0, 2.0}, 0.5) == doctest::Approx(2.5));
  CHECK(quantile({4.0, 1.0, 3.0, 2.0}, 0.25) == doctest::Approx(1.75));
  CHECK(quantile({4.0, 1.0, 3.0, 2.0}, 0.0) == 1.0);
  CHECK(quantile({4.0, 1.0, 3.0, 2.0}, 1.0) == 4.0);
  CHECK(quantile({7.0}, 0.975) == 7.0);
}

TEST_CASE("thin_rows uses the smallest stride within the limit") {
  CHECK(thin_rows(10, 3) == std::vector<Index>{0, 4, 8});
  CHECK(thin_rows(10, 5) == std::vector<Index>{0, 2, 4, 6, 8});
  CHECK(thin_rows(4, 10).size() == 4);
  CHECK(thin_rows(5001, 2000).size() <= 2000);
}

TEST_CASE("predictive median under a white-noise point mass is c log 2") {
  const ModelParams p = white_noise(Eigen::Matrix2d::Identity() * 3.0);
  Rng rng(4);
  const PeriodogramSet pgram = periodogram(demean(make_series(testing::random_matrix(512, 2, rng))));
  const PredictiveBands b = predictive_periodogram(point_mass(p, 200), pgram, p.shape(), 100, 9);
  const double c = 3.0 / (2.0 * std::numbers::pi);
  // Standard error of the median of 20000 exponentials, about 0.0071 c.
  for (std::size_t j = 0; j < 2; ++j) {
    const VectorXd med = b.bands[j].col(1);
    CHECK(std::abs(med.mean() / (c * std::log(2.0)) - 1.0) < 0.005);
    CHECK(((med.array() / (c * std::log(2.0)) - 1.0).abs() < 0.04).all());
    CHECK((b.bands[j].col(0).array() < med.array()).all());
    CHECK((b.bands[j].col(2).array() > med.array()).all());
  }
  CHECK(b.draws_used == 200);
  CHECK(b.omega.size() == pgram.positive_count());
}

TEST_CASE("predictive bands cover about 95 percent of well-specified ordinates") {
  const ModelParams truth = var1_truth();
  const PeriodogramSet pgram = periodogram(demean(simulate_model(truth, 4096, 500, 3)));
  const PredictiveBands b = predictive_periodogram(point_mass(truth, 50), pgram, truth.shape(), 100, 2, 50);
  for (std::size_t j = 0; j < 2; ++j) {
    const auto obs = b.observed.col(static_cast<Index>(j)).array();
    const double inside = ((obs >= b.bands[j].col(0).array()) && (obs <= b.bands[j].col(2).array())).cast<double>().mean();
    CHECK(inside > 0.90);
    CHECK(inside < 0.99);
  }
}

TEST_CASE("one or many replicates per draw give the same band centres") {
  const ModelParams truth = var1_truth();
  const PeriodogramSet pgram = periodogram(demean(simulate_model(truth, 2048, 500, 8)));
  const MatrixXd draws = point_mass(truth, 200);
  const PredictiveBands one = predictive_periodogram(draws, pgram, truth.shape(), 1, 5);
  const PredictiveBands many = predictive_periodogram(draws, pgram, truth.shape(), 100, 5);
  for (std::size_t j = 0; j < 2; ++j) {
    const VectorXd ratio = one.bands[j].col(1).cwiseQuotient(many.bands[j].col(1));
    CHECK(std::abs(ratio.mean() - 1.0) < 0.02);
  }
}
