#pragma once

// Fixed 1088-byte packet representation: seventeen 64-byte blocks, where
// block 0 carries control metadata and blocks 1..16 carry the 1024-byte
// inference payload. Also defines the trace container used for replay.

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include "slotpath/error.hpp"

namespace slotpath {

inline constexpr std::size_t kBlockBytes = 64;
inline constexpr std::size_t kBlockCount = 17;
inline constexpr std::size_t kFrameBytes = kBlockBytes * kBlockCount;  // 1088
inline constexpr std::size_t kMetadataBytes = kBlockBytes;
inline constexpr std::size_t kPayloadBytes = kFrameBytes - kMetadataBytes;  // 1024
inline constexpr std::size_t kPayloadBits = kPayloadBytes * 8;              // 8192

// reg0 layout. All integers little-endian.
inline constexpr std::size_t kSlotIdOffset = 0;
inline constexpr std::size_t kFormatVersionOffset = 4;
inline constexpr std::size_t kControlOffset = 8;
inline constexpr std::size_t kControlBytes = 8;
inline constexpr std::size_t kPaddingOffset = 16;
inline constexpr std::size_t kPaddingBytes = 48;

inline constexpr std::uint32_t kFormatVersion = 1;

using ControlField = std::array<std::uint8_t, kControlBytes>;

/// One packet sample. Always exactly kFrameBytes long.
class PacketFrame {
 public:
  PacketFrame() noexcept = default;
  /// Copies `bytes`; throws Error(WrongLength) unless it is exactly 1088 bytes.
  explicit PacketFrame(std::span<const std::uint8_t> bytes);

  std::span<const std::uint8_t, kFrameBytes> bytes() const noexcept { return bytes_; }
  std::span<std::uint8_t, kFrameBytes> mutable_bytes() noexcept { return bytes_; }

  std::span<const std::uint8_t, kMetadataBytes> metadata() const noexcept {
    return std::span<const std::uint8_t, kFrameBytes>(bytes_).first<kMetadataBytes>();
  }
  std::span<const std::uint8_t, kPayloadBytes> payload() const noexcept {
    return std::span<const std::uint8_t, kFrameBytes>(bytes_).last<kPayloadBytes>();
  }

  friend bool operator==(const PacketFrame&, const PacketFrame&) = default;

 private:
  alignas(kBlockBytes) std::array<std::uint8_t, kFrameBytes> bytes_{};
};

struct Reg0Metadata {
  std::uint32_t slot_id = 0;
  std::uint32_t format_version = 0;
  ControlField control{};
  std::array<std::uint8_t, kPaddingBytes> padding{};

  friend bool operator==(const Reg0Metadata&, const Reg0Metadata&) = default;
};

/// Read-only ±1 view over packed input bits. Bit j of byte i is input
/// i*8 + j; a set bit reads as +1 and a clear bit as -1.
class PayloadView {
 public:
  PayloadView() noexcept = default;
  explicit PayloadView(std::span<const std::uint8_t> packed) noexcept : bytes_(packed) {}

  std::span<const std::uint8_t> bytes() const noexcept { return bytes_; }
  std::size_t bit_count() const noexcept { return bytes_.size() * 8; }

  unsigned bit(std::size_t index) const noexcept {
    return (bytes_[index >> 3] >> (index & 7u)) & 1u;
  }
  int value(std::size_t index) const noexcept { return bit(index) != 0 ? 1 : -1; }

 private:
  std::span<const std::uint8_t> bytes_;
};

struct ParsedFrame {
  std::optional<Errc> error;  // WrongLength or VersionMismatch
  Reg0Metadata meta;
  PayloadView payload;

  bool ok() const noexcept { return !error.has_value(); }
};

/// Decodes reg0 from fixed offsets. Does not check the format version.
Reg0Metadata decode_metadata(std::span<const std::uint8_t, kMetadataBytes> block) noexcept;
void encode_metadata(const Reg0Metadata& meta, std::span<std::uint8_t, kMetadataBytes> block) noexcept;

/// Splits a raw frame into metadata and a payload view that aliases `bytes`.
ParsedFrame parse_frame(std::span<const std::uint8_t> bytes,
                        std::uint32_t expected_version = kFormatVersion) noexcept;

/// Throws Error(WrongPayloadLength) unless payload is exactly 1024 bytes.
PacketFrame build_frame(std::uint32_t slot_id, std::span<const std::uint8_t> payload,
                        const ControlField& control = {},
                        std::uint32_t format_version = kFormatVersion);

// Trace container: "BSWT" | u32 version | u64 count | count * (u64 emit_ns, frame).
inline constexpr std::array<std::uint8_t, 4> kTraceMagic{'B', 'S', 'W', 'T'};
inline constexpr std::uint32_t kTraceVersion = 1;
inline constexpr std::size_t kTraceHeaderBytes = 16;
inline constexpr std::size_t kTraceRecordBytes = 8 + kFrameBytes;

struct TraceRecord {
  std::uint64_t emit_time_ns = 0;
  PacketFrame frame;

  friend bool operator==(const TraceRecord&, const TraceRecord&) = default;
};

constexpr std::uint64_t trace_file_bytes(std::uint64_t count) noexcept {
  return kTraceHeaderBytes + count * kTraceRecordBytes;
}

std::vector<std::uint8_t> encode_trace(std::span<const TraceRecord> records);
std::vector<TraceRecord> decode_trace(std::span<const std::uint8_t> bytes);

void write_trace(const std::filesystem::path& path, std::span<const TraceRecord> records);
std::vector<TraceRecord> read_trace(const std::filesystem::path& path);

}  // namespace slotpath
