#ifndef PBO_ERRORS_HPP
#define PBO_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace pbo {

// Invalid static configuration: layer sizes, meta-parameters, unknown names.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Runtime argument with the wrong shape or outside its admissible box.
class InputError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Mathematical domain violation (angles outside [0, pi], non-positive stddev).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// Non-finite values or a factorization that failed after regularization.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// ODE state became non-finite; carries the time at which it happened.
class IntegrationError : public std::runtime_error {
 public:
  IntegrationError(const std::string& what, double blowup_time)
      : std::runtime_error(what), blowup_time_(blowup_time) {}
  double blowup_time() const noexcept { return blowup_time_; }

 private:
  double blowup_time_;
};

}  // namespace pbo

#endif  // PBO_ERRORS_HPP
