// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The aeskd Authors

#pragma once

#include <stdexcept>
#include <string>

namespace aeskd {

enum class ErrorKind {
  validation,
  shape,
  argument,
  range,
  degenerate,
  composition,
  config,
  io,
  numerical,
  unsupported,
  integrity,
};

const char* to_string(ErrorKind kind) noexcept;

/// Base of every error raised by the toolkit. The kind is what the CLI maps
/// onto exit codes.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

#define AESKD_DEFINE_ERROR(Name, Kind)                                        \
  class Name : public Error {                                                 \
   public:                                                                    \
    explicit Name(const std::string& what) : Error(ErrorKind::Kind, what) {} \
  }

AESKD_DEFINE_ERROR(ValidationError, validation);
AESKD_DEFINE_ERROR(ShapeError, shape);
AESKD_DEFINE_ERROR(ArgumentError, argument);
AESKD_DEFINE_ERROR(RangeError, range);
AESKD_DEFINE_ERROR(DegenerateInputError, degenerate);
AESKD_DEFINE_ERROR(CompositionError, composition);
AESKD_DEFINE_ERROR(ConfigError, config);
AESKD_DEFINE_ERROR(IoError, io);
AESKD_DEFINE_ERROR(NumericalError, numerical);
AESKD_DEFINE_ERROR(UnsupportedError, unsupported);
AESKD_DEFINE_ERROR(IntegrityError, integrity);

#undef AESKD_DEFINE_ERROR

}  // namespace aeskd
