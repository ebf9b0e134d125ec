#pragma once

#include <stdexcept>
#include <string>

namespace sqlab {

// Requested combination of domain / boundary condition / parameters is not supported.
class UnsupportedConfiguration : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class DimensionMismatch : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class IndexOutOfRange : public std::out_of_range {
 public:
  using std::out_of_range::out_of_range;
};

// Negative operator power requested on a basis with a zero eigenvalue.
class SingularPower : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// Importance weights all vanish or overflow.
class NumericalDegeneracy : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Truncation of an auxiliary basis is too small for the requested accuracy.
class RefinementError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DivergenceError : public std::runtime_error {
 public:
  DivergenceError(int mode, double time)
      : std::runtime_error("non-finite state in mode " + std::to_string(mode) +
                           " at t = " + std::to_string(time)),
        mode_(mode), time_(time) {}
  int mode() const noexcept { return mode_; }
  double time() const noexcept { return time_; }

 private:
  int mode_;
  double time_;
};

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace sqlab
