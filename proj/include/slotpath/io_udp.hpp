#pragma once

// Loopback demonstration transport: one 1088-byte frame per UDP datagram.

#include <array>
#include <cstdint>
#include <span>
#include <string>

#include "slotpath/pipeline.hpp"

namespace slotpath {

class UdpSocket {
 public:
  UdpSocket();
  ~UdpSocket();
  UdpSocket(UdpSocket&& other) noexcept;
  UdpSocket& operator=(UdpSocket&& other) noexcept;
  UdpSocket(const UdpSocket&) = delete;
  UdpSocket& operator=(const UdpSocket&) = delete;

  int fd() const noexcept { return fd_; }

 private:
  int fd_ = -1;
};

/// Receives datagrams on host:port. Ends after `max_packets` datagrams (0 =
/// unlimited) or when nothing arrives for `idle_timeout_ms`.
class UdpSource : public PacketSource {
 public:
  UdpSource(const std::string& host, std::uint16_t port, int idle_timeout_ms = 500,
            std::uint64_t max_packets = 0);
  bool next(Arrival& out) override;
  /// Port actually bound (useful when constructed with port 0).
  std::uint16_t port() const noexcept { return port_; }

 private:
  UdpSocket socket_;
  std::uint16_t port_ = 0;
  int idle_timeout_ms_;
  std::uint64_t max_packets_;
  std::uint64_t received_ = 0;
  // One byte larger than a frame so oversized datagrams are seen as such.
  std::array<std::uint8_t, kFrameBytes + 1> buffer_{};
};

/// Sends forwarded frames to host:port; drops are not emitted.
class UdpSink : public PacketSink {
 public:
  UdpSink(const std::string& host, std::uint16_t port);
  void accept(std::span<const std::uint8_t> frame, const Action& action) override;
  std::uint64_t sent() const noexcept { return sent_; }

 private:
  UdpSocket socket_;
  std::uint64_t sent_ = 0;
};

/// Emitter helper: sends each frame as one datagram, optionally pacing by
/// the records' emit times.
void send_udp_frames(const std::string& host, std::uint16_t port,
                     std::span<const TraceRecord> records, bool paced);

}  // namespace slotpath
