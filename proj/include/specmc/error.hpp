#pragma once

#include <stdexcept>
#include <string>

namespace specmc {

/// Failure categories raised by the library. The CLI maps them onto exit codes.
enum class Errc {
  format,          // ragged CSV rows, malformed cache or draws files
  parse,           // non-numeric cell
  endpoint,        // missing value at the start or end of a column
  too_short,       // series shorter than the spectral machinery accepts
  singular,        // numerically singular spectral density
  domain,          // parameter outside its mathematical domain
  shape,           // dimension mismatch between a vector and a model shape
  truncation,      // tempered filter needs too many terms
  conditioning,    // Kalman filter covariance lost definiteness
  partition,       // invalid frequency grouping
  stencil,         // non-finite value on a finite-difference stencil
  empty_sample,    // subsample with no groups
  degenerate,      // constant series or chain
  convergence,     // optimizer failed on every start
  initialization,  // chain could not be started
  config,          // invalid run configuration
};

const char* to_string(Errc code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what) : std::runtime_error(what), code_(code) {}
  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

/// Raised when the spectral density is singular at a particular retained frequency.
class SingularSpectrumError : public Error {
 public:
  SingularSpectrumError(long frequency_index, const std::string& what)
      : Error(Errc::singular, what), frequency_index_(frequency_index) {}
  long frequency_index() const noexcept { return frequency_index_; }

 private:
  long frequency_index_;
};

/// Optimizer failure that still carries the best objective value found.
class ConvergenceError : public Error {
 public:
  ConvergenceError(double best_value, const std::string& what)
      : Error(Errc::convergence, what), best_value_(best_value) {}
  double best_value() const noexcept { return best_value_; }

 private:
  double best_value_;
};

}  // namespace specmc
