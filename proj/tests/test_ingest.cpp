#include "specmc/error.hpp"
#include "specmc/ingest.hpp"
#include "specmc/spectral.hpp"
#include "support.hpp"

#include <doctest.h>

#include <cmath>
#include <limits>

using namespace specmc;
using testing::TempDir;
using testing::write_text;

namespace {

Errc code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an error");
  return Errc::config;
}

std::string message_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.what();
  }
  return {};
}

MultiSeries column(std::initializer_list<double> v) {
  Eigen::MatrixXd m(static_cast<Eigen::Index>(v.size()), 1);
  Eigen::Index i = 0;
  for (double x : v) m(i++, 0) = x;
  return make_series(m);
}

constexpr double NaN = std::numeric_limits<double>::quiet_NaN();

}  // namespace

TEST_CASE("load_csv reads a small numeric file") {
  TempDir dir("ingest");
  write_text(dir / "a.csv", "a,b\n1,2\n3,4\n5,6\n");
  const MultiSeries s = load_csv(dir / "a.csv", true);
  CHECK(s.length() == 3);
  CHECK(s.dim() == 2);
  CHECK(s.labels == std::vector<std::string>{"a", "b"});
  CHECK(s.values(2, 1) == 6.0);
  CHECK(s.missing_count() == 0);
}

TEST_CASE("load_csv flags NA and empty cells as missing") {
  TempDir dir("ingest");
  write_text(dir / "a.csv", "1,2\nna,4\n5,\n");
  const MultiSeries s = load_csv(dir / "a.csv", false);
  CHECK(s.missing_count() == 2);
  CHECK(s.is_missing(1, 0));
  CHECK(s.is_missing(2, 1));
  CHECK_FALSE(s.is_missing(0, 0));
  CHECK(s.labels == std::vector<std::string>{"x1", "x2"});
}

TEST_CASE("ragged rows raise a format error naming the row") {
  TempDir dir("ingest");
  write_text(dir / "a.csv", "1,2\n3,4,5\n");
  CHECK(code_of([&] { load_csv(dir / "a.csv", false); }) == Errc::format);
  CHECK(message_of([&] { load_csv(dir / "a.csv", false); }).find("row 2") != std::string::npos);
}

TEST_CASE("non-numeric cells raise a parse error with row and column") {
  TempDir dir("ingest");
  write_text(dir / "a.csv", "1,2\n3,abc\n");
  CHECK(code_of([&] { load_csv(dir / "a.csv", false); }) == Errc::parse);
  const std::string msg = message_of([&] { load_csv(dir / "a.csv", false); });
  CHECK(msg.find("row 2") != std::string::npos);
  CHECK(msg.find("column 2") != std::string::npos);
}

TEST_CASE("write_csv and load_csv round-trip values exactly") {
  TempDir dir("ingest");
  specmc::Rng rng(11);
  MultiSeries s = make_series(testing::random_matrix(50, 3, rng, 1e3));
  s.values(4, 1) = NaN;
  write_csv(s, dir / "r.csv");
  const MultiSeries back = load_csv(dir / "r.csv", true);
  REQUIRE(back.length() == 50);
  CHECK(back.is_missing(4, 1));
  for (Eigen::Index t = 0; t < 50; ++t)
    for (Eigen::Index j = 0; j < 3; ++j)
      if (!s.is_missing(t, j)) CHECK(back.values(t, j) == s.values(t, j));
}

TEST_CASE("interpolate_missing fills interior gaps linearly") {
  CHECK(interpolate_missing(column({1, NaN, 3})).values.col(0).isApprox(Eigen::Vector3d(1, 2, 3)));
  const Eigen::VectorXd v = interpolate_missing(column({0, NaN, NaN, 3})).values.col(0);
  CHECK(v.isApprox(Eigen::Vector4d(0, 1, 2, 3)));
}

TEST_CASE("interpolate_missing rejects missing endpoints") {
  CHECK(code_of([] { interpolate_missing(column({NaN, 1, 2})); }) == Errc::endpoint);
  CHECK(code_of([] { interpolate_missing(column({1, 2, NaN})); }) == Errc::endpoint);
}

TEST_CASE("interpolate_missing is idempotent on gap-free series") {
  specmc::Rng rng(2);
  const MultiSeries s = make_series(testing::random_matrix(30, 2, rng));
  CHECK(interpolate_missing(s).values == s.values);
}

TEST_CASE("demean subtracts column means and sets the flag") {
  const MultiSeries d = demean(column({1, 2, 3}));
  CHECK(d.demeaned);
  CHECK(d.values.col(0).isApprox(Eigen::Vector3d(-1, 0, 1)));
  const MultiSeries z = demean(column({-1, 0, 1}));
  CHECK((z.values.col(0) - Eigen::Vector3d(-1, 0, 1)).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("demean is idempotent and kills the zero-frequency DFT") {
  specmc::Rng rng(5);
  const MultiSeries s = make_series(testing::random_matrix(64, 3, rng, 2.0).array() + 7.0);
  const MultiSeries d = demean(s);
  CHECK((demean(d).values - d.values).cwiseAbs().maxCoeff() < 1e-12);
  const Eigen::MatrixXcd J = dft(d);
  const Eigen::Index zero = -FourierGrid{64}.first_index();
  for (Eigen::Index j = 0; j < 3; ++j) {
    const double sd = std::sqrt((d.values.col(j).array().square()).mean());
    CHECK(std::abs(J(j, zero)) < 1e-8 * 64 * sd);
  }
}

TEST_CASE("log_shift_transform maps the minimum to zero") {
  CHECK(log_shift_transform(column({1, 1, 1})).values.col(0).cwiseAbs().maxCoeff() == 0.0);
  const MultiSeries e = log_shift_transform(column({0, std::exp(1.0) - 1.0}));
  CHECK(e.values(0, 0) == doctest::Approx(0.0));
  CHECK(e.values(1, 0) == doctest::Approx(1.0));
  const MultiSeries n = log_shift_transform(column({-5, 3, 10}));
  CHECK(n.values.allFinite());
  CHECK(n.shift_minimum.at(0) == -5.0);
}

TEST_CASE("content_hash depends on values and dimensions") {
  specmc::Rng rng(9);
  MultiSeries a = make_series(testing::random_matrix(20, 2, rng));
  MultiSeries b = a;
  CHECK(content_hash(a) == content_hash(b));
  b.values(3, 1) += 1e-12;
  CHECK(content_hash(a) != content_hash(b));
  MultiSeries c = make_series(Eigen::Map<Eigen::MatrixXd>(a.values.data(), 40, 1));
  CHECK(content_hash(a) != content_hash(c));
}
