#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace tlsspec {

// Bad argument or configuration value (non-finite rate, zero linewidth, ...).
class InvalidParameter : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Input data that cannot be processed (too few points, malformed file, ...).
class InvalidInput : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class MitigationUnstable : public std::runtime_error {
 public:
  MitigationUnstable(const std::string& what, double condition_number)
      : std::runtime_error(what), condition_number_(condition_number) {}
  double condition_number() const noexcept { return condition_number_; }

 private:
  double condition_number_;
};

class UndefinedCorrelation : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

class InvalidObjective : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// Thrown by the least-squares solver when the residual becomes non-finite.
class Diverged : public std::runtime_error {
 public:
  Diverged(const std::string& what, std::vector<double> last_good)
      : std::runtime_error(what), last_good_(std::move(last_good)) {}
  const std::vector<double>& last_good() const noexcept { return last_good_; }

 private:
  std::vector<double> last_good_;
};

}  // namespace tlsspec
