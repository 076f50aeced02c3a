#pragma once

#include <stdexcept>
#include <string>

namespace sarfuse {

/// Input violates a documented contract (bad argument, malformed file,
/// invariant breach). The CLI maps this to exit status 2.
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Failure while running an otherwise valid request (I/O, untrained model).
/// The CLI maps this to exit status 3.
class RuntimeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace sarfuse
