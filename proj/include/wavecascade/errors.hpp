#pragma once

#include <stdexcept>
#include <string>

namespace wavecascade {

// Each error class maps to one CLI exit code (see cli.hpp).

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class KalmanError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Rank verdict and coefficient verdict disagree, or the two Θ tests disagree.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DivergenceError : public std::runtime_error {
 public:
  DivergenceError(const std::string& what, double t)
      : std::runtime_error(what), time_(t) {}
  double time() const { return time_; }

 private:
  double time_;
};

}  // namespace wavecascade
