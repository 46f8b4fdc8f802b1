// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace fp4stream {

enum class ErrorCode {
  NonFinite,
  Truncated,
  BadMagic,
  BadVersion,
  BadDtype,
  TruncatedPayload,
  BlockMisalignment,
  ShapeMismatch,
  OutOfRange,
  MissingChunk,
  InvalidArgument,
  HaloTooSmall,
  ForeignPosition,
  InconsistentMeasurements,
  Io,
};

std::string_view to_string(ErrorCode code);

/// Domain error raised by every fp4stream operation. The code is stable and
/// meant for programmatic dispatch; the message is for humans.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace fp4stream
