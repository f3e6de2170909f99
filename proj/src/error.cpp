#include "slotpath/error.hpp"

namespace slotpath {

std::string_view to_string(Errc code) noexcept {
  switch (code) {
    case Errc::WrongLength: return "WrongLength";
    case Errc::VersionMismatch: return "VersionMismatch";
    case Errc::WrongPayloadLength: return "WrongPayloadLength";
    case Errc::BadMagic: return "BadMagic";
    case Errc::UnsupportedVersion: return "UnsupportedVersion";
    case Errc::TruncatedFile: return "TruncatedFile";
    case Errc::NonMonotonicTime: return "NonMonotonicTime";
    case Errc::SizeMismatch: return "SizeMismatch";
    case Errc::DimensionMismatch: return "DimensionMismatch";
    case Errc::EmptyBank: return "EmptyBank";
    case Errc::SlotOutOfRange: return "SlotOutOfRange";
    case Errc::SinkFailure: return "SinkFailure";
    case Errc::ControlChannelFailure: return "ControlChannelFailure";
    case Errc::NonFiniteLoss: return "NonFiniteLoss";
    case Errc::DegenerateParams: return "DegenerateParams";
    case Errc::BadBoundary: return "BadBoundary";
    case Errc::InvalidArgument: return "InvalidArgument";
    case Errc::Io: return "Io";
  }
  return "Unknown";
}

}  // namespace slotpath
