#pragma once

#include <stdexcept>
#include <string>

namespace tlasso {

// Bad arguments: wrong sizes, non-positive rates, malformed configs.
class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Factorization failures, NaNs in iterates.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Inputs that are well-formed but carry no information (all-zero samples,
// zero-variance data, zero scale parameters).
class DegenerateInput : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// Missing or unreadable files, malformed CSV/JSON.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline void require(bool cond, const std::string& msg) {
  if (!cond) throw InvalidArgument(msg);
}

}  // namespace tlasso
