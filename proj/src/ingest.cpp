#include "specmc/ingest.hpp"

#include "specmc/error.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <sstream>

namespace specmc {
namespace {

constexpr double kMissing = std::numeric_limits<double>::quiet_NaN();

std::string trim(std::string_view s) {
  std::size_t b = 0;
  std::size_t e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

std::vector<std::string> split_row(const std::string& line) {
  std::vector<std::string> cells;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    cells.push_back(trim(std::string_view(line).substr(start, comma == std::string::npos ? std::string::npos : comma - start)));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return cells;
}

bool is_missing_token(const std::string& cell) {
  if (cell.empty()) return true;
  if (cell.size() != 2) return false;
  return std::tolower(static_cast<unsigned char>(cell[0])) == 'n' &&
         std::tolower(static_cast<unsigned char>(cell[1])) == 'a';
}

}  // namespace

bool MultiSeries::is_missing(Eigen::Index t, Eigen::Index j) const { return std::isnan(values(t, j)); }

Eigen::Index MultiSeries::missing_count() const {
  return values.unaryExpr([](double v) { return std::isnan(v) ? 1.0 : 0.0; }).sum();
}

MultiSeries make_series(Eigen::MatrixXd values, double dt) {
  MultiSeries s;
  s.values = std::move(values);
  s.dt = dt;
  for (Eigen::Index j = 0; j < s.values.cols(); ++j) s.labels.push_back("x" + std::to_string(j + 1));
  return s;
}

MultiSeries load_csv(const std::filesystem::path& path, bool has_header) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::format, "cannot open " + path.string());

  std::vector<std::string> labels;
  std::vector<std::vector<double>> rows;
  std::string line;
  std::size_t line_no = 0;
  std::size_t width = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    auto cells = split_row(line);
    if (has_header && labels.empty() && rows.empty()) {
      labels = std::move(cells);
      width = labels.size();
      continue;
    }
    if (width == 0) width = cells.size();
    if (cells.size() != width) {
      throw Error(Errc::format, "row " + std::to_string(line_no) + " has " + std::to_string(cells.size()) +
                                    " columns, expected " + std::to_string(width));
    }
    std::vector<double> row(width);
    for (std::size_t j = 0; j < width; ++j) {
      const std::string& cell = cells[j];
      if (is_missing_token(cell)) {
        row[j] = kMissing;
        continue;
      }
      double v = 0.0;
      const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
      if (ec != std::errc() || ptr != cell.data() + cell.size() || !std::isfinite(v)) {
        throw Error(Errc::parse, "cannot parse \"" + cell + "\" at row " + std::to_string(line_no) + ", column " +
                                     std::to_string(j + 1));
      }
      row[j] = v;
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw Error(Errc::format, path.string() + " contains no data rows");

  Eigen::MatrixXd values(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(width));
  for (std::size_t t = 0; t < rows.size(); ++t)
    for (std::size_t j = 0; j < width; ++j) values(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(j)) = rows[t][j];
  MultiSeries s = make_series(std::move(values));
  if (!labels.empty()) s.labels = std::move(labels);
  return s;
}

void write_csv(const MultiSeries& series, const std::filesystem::path& path, bool with_header) {
  std::ofstream out(path);
  if (!out) throw Error(Errc::format, "cannot write " + path.string());
  if (with_header) {
    for (std::size_t j = 0; j < series.labels.size(); ++j) out << (j ? "," : "") << series.labels[j];
    out << '\n';
  }
  char buf[64];
  for (Eigen::Index t = 0; t < series.length(); ++t) {
    for (Eigen::Index j = 0; j < series.dim(); ++j) {
      if (j) out << ',';
      const double v = series.values(t, j);
      if (std::isnan(v)) {
        out << "NA";
      } else {
        std::snprintf(buf, sizeof buf, "%.17g", v);
        out << buf;
      }
    }
    out << '\n';
  }
}

MultiSeries interpolate_missing(MultiSeries series) {
  const Eigen::Index T = series.length();
  for (Eigen::Index j = 0; j < series.dim(); ++j) {
    auto col = series.values.col(j);
    if (std::isnan(col(0)) || std::isnan(col(T - 1))) {
      throw Error(Errc::endpoint, "column " + std::to_string(j + 1) + " (" + series.labels[j] +
                                      ") has a missing first or last observation");
    }
    Eigen::Index last = 0;
    for (Eigen::Index t = 1; t < T; ++t) {
      if (std::isnan(col(t))) continue;
      if (t - last > 1) {
        const double a = col(last);
        const double b = col(t);
        const double span = static_cast<double>(t - last);
        for (Eigen::Index k = last + 1; k < t; ++k) col(k) = a + (b - a) * static_cast<double>(k - last) / span;
      }
      last = t;
    }
  }
  return series;
}

MultiSeries demean(MultiSeries series) {
  if (series.missing_count() > 0) throw Error(Errc::domain, "demean requires a gap-free series");
  series.values.rowwise() -= series.values.colwise().mean();
  series.demeaned = true;
  return series;
}

MultiSeries log_shift_transform(MultiSeries series) {
  if (series.missing_count() > 0) throw Error(Errc::domain, "log_shift_transform requires a gap-free series");
  series.shift_minimum.assign(static_cast<std::size_t>(series.dim()), 0.0);
  for (Eigen::Index j = 0; j < series.dim(); ++j) {
    const double lo = series.values.col(j).minCoeff();
    series.shift_minimum[static_cast<std::size_t>(j)] = lo;
    series.values.col(j) = (series.values.col(j).array() - lo + 1.0).log();
  }
  series.demeaned = false;
  return series;
}

std::uint64_t content_hash(const MultiSeries& series) {
  std::uint64_t h = 1469598103934665603ULL;
  auto feed = [&h](const void* data, std::size_t n) {
    const auto* bytes = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
      h ^= bytes[i];
      h *= 1099511628211ULL;
    }
  };
  const std::int64_t dims[2] = {series.length(), series.dim()};
  feed(dims, sizeof dims);
  feed(series.values.data(), sizeof(double) * static_cast<std::size_t>(series.values.size()));
  return h;
}

}  // namespace specmc
