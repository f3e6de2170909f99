#include "slotpath/packet_format.hpp"

#include <algorithm>
#include <string>

#include "slotpath/bytes.hpp"

namespace slotpath {

PacketFrame::PacketFrame(std::span<const std::uint8_t> bytes) {
  if (bytes.size() != kFrameBytes) {
    throw Error(Errc::WrongLength, "frame must be " + std::to_string(kFrameBytes) +
                                       " bytes, got " + std::to_string(bytes.size()));
  }
  std::copy(bytes.begin(), bytes.end(), bytes_.begin());
}

Reg0Metadata decode_metadata(std::span<const std::uint8_t, kMetadataBytes> block) noexcept {
  Reg0Metadata meta;
  meta.slot_id = load_le32(block.data() + kSlotIdOffset);
  meta.format_version = load_le32(block.data() + kFormatVersionOffset);
  std::copy_n(block.data() + kControlOffset, kControlBytes, meta.control.begin());
  std::copy_n(block.data() + kPaddingOffset, kPaddingBytes, meta.padding.begin());
  return meta;
}

void encode_metadata(const Reg0Metadata& meta,
                     std::span<std::uint8_t, kMetadataBytes> block) noexcept {
  store_le32(block.data() + kSlotIdOffset, meta.slot_id);
  store_le32(block.data() + kFormatVersionOffset, meta.format_version);
  std::copy(meta.control.begin(), meta.control.end(), block.data() + kControlOffset);
  std::copy(meta.padding.begin(), meta.padding.end(), block.data() + kPaddingOffset);
}

ParsedFrame parse_frame(std::span<const std::uint8_t> bytes,
                        std::uint32_t expected_version) noexcept {
  ParsedFrame parsed;
  if (bytes.size() != kFrameBytes) {
    parsed.error = Errc::WrongLength;
    return parsed;
  }
  parsed.meta = decode_metadata(bytes.first<kMetadataBytes>());
  if (parsed.meta.format_version != expected_version) {
    parsed.error = Errc::VersionMismatch;
    return parsed;
  }
  parsed.payload = PayloadView(bytes.subspan(kMetadataBytes, kPayloadBytes));
  return parsed;
}

PacketFrame build_frame(std::uint32_t slot_id, std::span<const std::uint8_t> payload,
                        const ControlField& control, std::uint32_t format_version) {
  if (payload.size() != kPayloadBytes) {
    throw Error(Errc::WrongPayloadLength, "payload must be " + std::to_string(kPayloadBytes) +
                                              " bytes, got " + std::to_string(payload.size()));
  }
  PacketFrame frame;
  auto out = frame.mutable_bytes();
  Reg0Metadata meta;
  meta.slot_id = slot_id;
  meta.format_version = format_version;
  meta.control = control;
  encode_metadata(meta, out.first<kMetadataBytes>());
  std::copy(payload.begin(), payload.end(), out.begin() + kMetadataBytes);
  return frame;
}

std::vector<std::uint8_t> encode_trace(std::span<const TraceRecord> records) {
  std::vector<std::uint8_t> out(trace_file_bytes(records.size()));
  std::uint8_t* p = out.data();
  std::copy(kTraceMagic.begin(), kTraceMagic.end(), p);
  store_le32(p + 4, kTraceVersion);
  store_le64(p + 8, records.size());
  p += kTraceHeaderBytes;
  std::uint64_t last = 0;
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& r = records[i];
    if (i > 0 && r.emit_time_ns < last) {
      throw Error(Errc::NonMonotonicTime,
                  "trace record " + std::to_string(i) + " goes back in time");
    }
    last = r.emit_time_ns;
    store_le64(p, r.emit_time_ns);
    const auto frame = r.frame.bytes();
    std::copy(frame.begin(), frame.end(), p + 8);
    p += 8 + kFrameBytes;
  }
  return out;
}

std::vector<TraceRecord> decode_trace(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < kTraceHeaderBytes) {
    throw Error(Errc::TruncatedFile, "trace shorter than its 16-byte header");
  }
  if (!std::equal(kTraceMagic.begin(), kTraceMagic.end(), bytes.begin())) {
    throw Error(Errc::BadMagic, "trace magic is not BSWT");
  }
  const auto version = load_le32(bytes.data() + 4);
  if (version != kTraceVersion) {
    throw Error(Errc::UnsupportedVersion, "trace version " + std::to_string(version));
  }
  const auto count = load_le64(bytes.data() + 8);
  const auto max_count = (bytes.size() - kTraceHeaderBytes) / kTraceRecordBytes;
  if (count > max_count || trace_file_bytes(count) != bytes.size()) {
    throw Error(Errc::TruncatedFile, "trace declares " + std::to_string(count) +
                                         " records but holds " + std::to_string(bytes.size()) +
                                         " bytes");
  }
  std::vector<TraceRecord> records(count);
  const std::uint8_t* p = bytes.data() + kTraceHeaderBytes;
  for (std::uint64_t i = 0; i < count; ++i, p += kTraceRecordBytes) {
    records[i].emit_time_ns = load_le64(p);
    if (i > 0 && records[i].emit_time_ns < records[i - 1].emit_time_ns) {
      throw Error(Errc::NonMonotonicTime,
                  "trace record " + std::to_string(i) + " goes back in time");
    }
    std::copy_n(p + 8, kFrameBytes, records[i].frame.mutable_bytes().begin());
  }
  return records;
}

void write_trace(const std::filesystem::path& path, std::span<const TraceRecord> records) {
  write_file(path, encode_trace(records));
}

std::vector<TraceRecord> read_trace(const std::filesystem::path& path) {
  return decode_trace(read_file(path));
}

}  // namespace slotpath
