// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace slu {

enum class ErrorKind {
  kDimension,
  kDomain,
  kConfig,
  kParse,
  kIo,
  kUnsupported,
  kVocabMismatch,
  kNumeric,
};

/// Single exception type for the library; the C API maps `kind()` onto its
/// status codes.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void throw_error(ErrorKind kind, const std::string& what) {
  throw Error(kind, what);
}

}  // namespace slu
