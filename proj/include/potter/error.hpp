// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace potter {

enum class ErrorCode {
  invalid_argument = 1,
  shape_mismatch,
  io,
  format,
  config,
  diverged,
  internal,
};

/// Single exception type of the library. The code maps one-to-one onto the
/// status values returned by the C API.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) {
  throw Error(code, what);
}

}  // namespace potter
