#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace specmc {

/// A T x r block of observations. Missing cells are stored as quiet NaN until
/// interpolate_missing() fills them.
struct MultiSeries {
  Eigen::MatrixXd values;           // rows = time points, columns = series
  std::vector<std::string> labels;  // one per column
  double dt = 1.0;                  // sampling interval; reporting only
  bool demeaned = false;
  std::vector<double> shift_minimum;  // set by log_shift_transform, one per column

  Eigen::Index length() const { return values.rows(); }
  Eigen::Index dim() const { return values.cols(); }
  bool is_missing(Eigen::Index t, Eigen::Index j) const;
  Eigen::Index missing_count() const;
};

/// Builds a series with default labels "x1", "x2", ...
MultiSeries make_series(Eigen::MatrixXd values, double dt = 1.0);

/// Reads a CSV file. Empty cells and "NA" (any case) are recorded as missing.
MultiSeries load_csv(const std::filesystem::path& path, bool has_header);

/// Writes values with 17 significant digits so that load_csv reproduces them exactly.
/// Missing cells are written as "NA".
void write_csv(const MultiSeries& series, const std::filesystem::path& path, bool with_header = true);

/// Replaces each missing cell by linear interpolation between the nearest observed
/// neighbours in the same column.
MultiSeries interpolate_missing(MultiSeries series);

/// Subtracts each column's sample mean.
MultiSeries demean(MultiSeries series);

/// Maps every column through x -> log(x - min(x) + 1).
MultiSeries log_shift_transform(MultiSeries series);

/// FNV-1a hash of the dimensions and raw values, used to key periodogram caches.
std::uint64_t content_hash(const MultiSeries& series);

}  // namespace specmc
