#pragma once

#include <stdexcept>
#include <string>

namespace tcc {

// Precondition broken by the caller (bad dimensions, non-positive variance, ...).
class ContractViolation : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Malformed or inconsistent input data (files, streams, id mismatches).
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Internal bookkeeping went wrong; a sampler bug, never a user error.
class InvariantViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

inline void require(bool ok, const std::string& what) {
  if (!ok) throw ContractViolation(what);
}

}  // namespace tcc
