// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The aeskd Authors

#include "aeskd/errors.hpp"

namespace aeskd {

const char* to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::validation: return "validation";
    case ErrorKind::shape: return "shape";
    case ErrorKind::argument: return "argument";
    case ErrorKind::range: return "range";
    case ErrorKind::degenerate: return "degenerate";
    case ErrorKind::composition: return "composition";
    case ErrorKind::config: return "config";
    case ErrorKind::io: return "io";
    case ErrorKind::numerical: return "numerical";
    case ErrorKind::unsupported: return "unsupported";
    case ErrorKind::integrity: return "integrity";
  }
  return "unknown";
}

}  // namespace aeskd
