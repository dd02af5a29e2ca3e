#pragma once

#include <Eigen/Dense>

#include <atomic>
#include <cstdint>
#include <span>
#include <utility>

namespace specmc {

using TermRange = std::pair<Eigen::Index, Eigen::Index>;

/// A log-likelihood written as a sum of n terms over an unconstrained parameter
/// vector. Samplers and the mode search only see this interface, which lets tests
/// substitute objectives with known structure.
///
/// Every evaluated term increments a counter; this is the "density evaluation"
/// unit used for computational-time comparisons.
class GroupedObjective {
 public:
  virtual ~GroupedObjective() = default;

  virtual Eigen::Index dimension() const = 0;
  virtual Eigen::Index term_count() const = 0;

  /// out[g] = sum of the terms with index in ranges[g] = [begin, end).
  virtual void range_sums(const Eigen::VectorXd& theta, std::span<const TermRange> ranges, std::span<double> out) const = 0;

  /// Sum of every term.
  virtual double total(const Eigen::VectorXd& theta) const;

  /// Cheap approximation of total() that merges runs of `bin` adjacent terms into one;
  /// used by the coarse stage of the mode search. Defaults to total().
  virtual double binned_total(const Eigen::VectorXd& theta, Eigen::Index bin) const;

  std::uint64_t evaluations() const { return evaluations_.load(std::memory_order_relaxed); }
  void reset_evaluations() const { evaluations_.store(0, std::memory_order_relaxed); }

 protected:
  void count(std::uint64_t terms) const { evaluations_.fetch_add(terms, std::memory_order_relaxed); }

 private:
  mutable std::atomic<std::uint64_t> evaluations_{0};
};

}  // namespace specmc
