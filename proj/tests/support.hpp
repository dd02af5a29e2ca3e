#pragma once

#include "specmc/models.hpp"
#include "specmc/rng.hpp"

#include <Eigen/Dense>

#include <unistd.h>

#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <string>

namespace testing {

/// Fresh directory under the system temp path, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    path_ = std::filesystem::temp_directory_path() / ("specmc_test_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter()++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  static std::atomic<int>& counter() {
    static std::atomic<int> n{0};
    return n;
  }
  std::filesystem::path path_;
};

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path);
  out << text;
}

inline Eigen::MatrixXd random_matrix(Eigen::Index rows, Eigen::Index cols, specmc::Rng& rng, double scale = 1.0) {
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = scale * rng.normal();
  return m;
}

/// Random stationary, invertible parameters of the given shape through the unconstrained map.
inline specmc::ModelParams random_params(const specmc::ModelShape& shape, specmc::Rng& rng, double scale = 0.5) {
  Eigen::VectorXd theta(shape.dimension());
  for (Eigen::Index i = 0; i < theta.size(); ++i) theta(i) = scale * rng.normal();
  if (shape.tempered()) {
    for (int k = 0; k < shape.r; ++k) theta(shape.d_offset() + k) = 0.4 * rng.uniform() - 0.1;
    for (Eigen::Index k = 0; k < shape.lambda_count(); ++k) theta(shape.lambda_offset() + k) = std::log(0.05 + rng.uniform());
  }
  return specmc::unpack(theta, shape);
}

}  // namespace testing
