#ifndef EGSW_ERROR_HPP_
#define EGSW_ERROR_HPP_

#include <stdexcept>
#include <string>

namespace egsw {

// Precondition violated by the caller (bad token id, empty list, K < 2, ...).
class InputError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Non-finite values encountered while training; the run must halt.
class TrainingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Verification tooling could not produce a trustworthy answer.
class OracleError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid experiment configuration. `what()` carries a line-anchored message.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace egsw

#endif  // EGSW_ERROR_HPP_
