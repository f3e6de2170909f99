#include "slotpath/io_udp.hpp"

#include <arpa/inet.h>
#include <netinet/in.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>

namespace slotpath {
namespace {

sockaddr_in make_address(const std::string& host, std::uint16_t port) {
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(port);
  if (::inet_pton(AF_INET, host.c_str(), &addr.sin_addr) != 1) {
    throw Error(Errc::InvalidArgument, "not an IPv4 address: " + host);
  }
  return addr;
}

std::string errno_text() { return std::strerror(errno); }

}  // namespace

UdpSocket::UdpSocket() : fd_(::socket(AF_INET, SOCK_DGRAM, 0)) {
  if (fd_ < 0) throw Error(Errc::Io, "socket: " + errno_text());
}

UdpSocket::~UdpSocket() {
  if (fd_ >= 0) ::close(fd_);
}

UdpSocket::UdpSocket(UdpSocket&& other) noexcept : fd_(other.fd_) { other.fd_ = -1; }

UdpSocket& UdpSocket::operator=(UdpSocket&& other) noexcept {
  if (this != &other) {
    if (fd_ >= 0) ::close(fd_);
    fd_ = other.fd_;
    other.fd_ = -1;
  }
  return *this;
}

UdpSource::UdpSource(const std::string& host, std::uint16_t port, int idle_timeout_ms,
                     std::uint64_t max_packets)
    : idle_timeout_ms_(idle_timeout_ms), max_packets_(max_packets) {
  const auto addr = make_address(host, port);
  if (::bind(socket_.fd(), reinterpret_cast<const sockaddr*>(&addr), sizeof addr) != 0) {
    throw Error(Errc::Io, "bind " + host + ":" + std::to_string(port) + ": " + errno_text());
  }
  sockaddr_in bound{};
  socklen_t len = sizeof bound;
  ::getsockname(socket_.fd(), reinterpret_cast<sockaddr*>(&bound), &len);
  port_ = ntohs(bound.sin_port);
}

bool UdpSource::next(Arrival& out) {
  if (max_packets_ != 0 && received_ >= max_packets_) return false;
  pollfd pfd{socket_.fd(), POLLIN, 0};
  const int ready = ::poll(&pfd, 1, idle_timeout_ms_);
  if (ready <= 0) return false;
  const auto n = ::recv(socket_.fd(), buffer_.data(), buffer_.size(), 0);
  if (n < 0) throw Error(Errc::Io, "recv: " + errno_text());
  ++received_;
  out.arrival_ns = now_ns();
  out.bytes = std::span<const std::uint8_t>(buffer_.data(), static_cast<std::size_t>(n));
  return true;
}

UdpSink::UdpSink(const std::string& host, std::uint16_t port) {
  const auto addr = make_address(host, port);
  if (::connect(socket_.fd(), reinterpret_cast<const sockaddr*>(&addr), sizeof addr) != 0) {
    throw Error(Errc::Io, "connect " + host + ":" + std::to_string(port) + ": " + errno_text());
  }
}

void UdpSink::accept(std::span<const std::uint8_t> frame, const Action& action) {
  if (action.verdict != Verdict::Forward) return;
  if (::send(socket_.fd(), frame.data(), frame.size(), 0) < 0) {
    throw Error(Errc::SinkFailure, "udp send: " + errno_text());
  }
  ++sent_;
}

void send_udp_frames(const std::string& host, std::uint16_t port,
                     std::span<const TraceRecord> records, bool paced) {
  UdpSocket sock;
  const auto addr = make_address(host, port);
  const auto origin = now_ns();
  for (const auto& r : records) {
    if (paced) wait_until_ns(origin + (r.emit_time_ns - records.front().emit_time_ns));
    const auto bytes = r.frame.bytes();
    if (::sendto(sock.fd(), bytes.data(), bytes.size(), 0, reinterpret_cast<const sockaddr*>(&addr),
                 sizeof addr) < 0) {
      throw Error(Errc::Io, "sendto: " + errno_text());
    }
  }
}

}  // namespace slotpath
