#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace specmc {

/// Named random streams. Every consumer of randomness draws from its own stream so
/// that composing operations never shifts another operation's draws.
enum class Stream : std::uint64_t {
  simulation = 1,
  proposal = 2,
  subsample = 3,
  optimizer = 4,
  predictive = 5,
  replication = 6,
};

/// Counter-based seed splitting: the engine seed for (seed, stream, index) is a
/// SplitMix64 hash of the three values.
std::uint64_t split_seed(std::uint64_t seed, Stream stream, std::uint64_t index = 0) noexcept;

class Rng {
 public:
  explicit Rng(std::uint64_t engine_seed) : engine_(engine_seed) {}
  Rng(std::uint64_t seed, Stream stream, std::uint64_t index = 0)
      : engine_(split_seed(seed, stream, index)) {}

  double normal() { return normal_(engine_); }
  double uniform() { return uniform_(engine_); }
  double exponential(double mean) { return -mean * std::log1p(-uniform()); }
  /// Uniform integer in [0, n).
  std::uint64_t index(std::uint64_t n) {
    return std::uniform_int_distribution<std::uint64_t>(0, n - 1)(engine_);
  }

  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
  std::uniform_real_distribution<double> uniform_{0.0, 1.0};
};

}  // namespace specmc
