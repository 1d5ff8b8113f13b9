#pragma once

#include <stdexcept>
#include <string>

namespace wps {

// Input violates an operation's documented precondition (grid mismatch,
// undersampled grid, broken ellipticity, ...).
class PreconditionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// A numerical procedure could not meet its own accuracy contract
// (step-halving certification failed, bracketing failed, ...).
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline void require(bool ok, const std::string& what) {
  if (!ok) throw PreconditionError(what);
}

}  // namespace wps
