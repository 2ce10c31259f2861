#pragma once

#include <stdexcept>
#include <string>

namespace p6d {

/// Broad failure classes. The CLI maps them onto process exit codes.
enum class ErrorKind {
  Usage,      // bad arguments or configuration
  Data,       // malformed or out-of-contract input data
  Numerical,  // degenerate geometry, divergence
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void throw_data(const std::string& what) {
  throw Error(ErrorKind::Data, what);
}

[[noreturn]] inline void throw_numerical(const std::string& what) {
  throw Error(ErrorKind::Numerical, what);
}

[[noreturn]] inline void throw_usage(const std::string& what) {
  throw Error(ErrorKind::Usage, what);
}

}  // namespace p6d
