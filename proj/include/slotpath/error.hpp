#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace slotpath {

enum class Errc {
  WrongLength,
  VersionMismatch,
  WrongPayloadLength,
  BadMagic,
  UnsupportedVersion,
  TruncatedFile,
  NonMonotonicTime,
  SizeMismatch,
  DimensionMismatch,
  EmptyBank,
  SlotOutOfRange,
  SinkFailure,
  ControlChannelFailure,
  NonFiniteLoss,
  DegenerateParams,
  BadBoundary,
  InvalidArgument,
  Io,
};

std::string_view to_string(Errc code) noexcept;

/// Operational error carrying a machine-readable code. Hot-path operations
/// (frame parsing, slot resolution) report failures by value instead.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace slotpath
