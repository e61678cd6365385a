#pragma once

#include <stdexcept>
#include <string>

namespace igniter {

/// Base class for all igniter failures.
class error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input data (bad line in a raw file, bad archive header, ...).
class parse_error : public error {
 public:
  using error::error;
};

/// Invalid configuration or usage (maps to CLI exit code 2).
class config_error : public error {
 public:
  using error::error;
};

/// Filesystem failures: missing file, short read, failed write.
class io_error : public error {
 public:
  using error::error;
};

/// Numerical failure during training (divergence, non-finite values).
class numeric_error : public error {
 public:
  using error::error;
};

}  // namespace igniter
