#pragma once

#include <stdexcept>
#include <string>

namespace raddich {

/// Error classes. The CLI maps each to its own exit code.
enum class ErrorKind {
  precondition,  ///< caller violated a documented precondition
  config,        ///< malformed or invalid run configuration
  dichotomy,     ///< dichotomy construction failed
  solver,        ///< integrator or nonlinear solver did not converge
  io             ///< file could not be read or written
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) {
  throw Error(kind, what);
}

inline void require(bool cond, const std::string& what) {
  if (!cond) fail(ErrorKind::precondition, what);
}

}  // namespace raddich
