// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace edgecloud {

enum class ErrorKind : std::uint8_t {
  Shape,
  Input,
  Numeric,
  State,
  Protocol,
  Parse,
  Config,
  File,
  Network,
};

/**
 * @brief Single exception type for the whole pipeline. The kind decides the
 * process exit code in the CLI (see exit_code()).
 */
class Error : public std::runtime_error {
public:
  Error(ErrorKind kind, const std::string &what)
    : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string &what) {
  throw Error(kind, what);
}

/// 0 success, 2 config, 3 protocol, 4 numeric, 1 everything else.
inline int exit_code(ErrorKind kind) noexcept {
  switch (kind) {
  case ErrorKind::Config:
    return 2;
  case ErrorKind::Protocol:
    return 3;
  case ErrorKind::Numeric:
    return 4;
  default:
    return 1;
  }
}

const char *to_string(ErrorKind kind) noexcept;

} // namespace edgecloud
