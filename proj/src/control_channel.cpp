#include "slotpath/control_channel.hpp"

#include <poll.h>
#include <sys/socket.h>
#include <sys/un.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>

#include "slotpath/bytes.hpp"
#include "slotpath/stats.hpp"

namespace slotpath {
namespace {

[[noreturn]] void fail(const std::string& what) {
  throw Error(Errc::ControlChannelFailure, what + ": " + std::strerror(errno));
}

sockaddr_un unix_address(const std::filesystem::path& path) {
  sockaddr_un addr{};
  addr.sun_family = AF_UNIX;
  const auto s = path.string();
  if (s.size() >= sizeof(addr.sun_path)) {
    throw Error(Errc::ControlChannelFailure, "socket path too long: " + s);
  }
  std::memcpy(addr.sun_path, s.c_str(), s.size() + 1);
  return addr;
}

bool read_exact(int fd, std::uint8_t* out, std::size_t n) {
  while (n > 0) {
    const auto got = ::read(fd, out, n);
    if (got < 0 && errno == EINTR) continue;
    if (got <= 0) return false;
    out += got;
    n -= static_cast<std::size_t>(got);
  }
  return true;
}

void write_exact(int fd, const std::uint8_t* data, std::size_t n) {
  while (n > 0) {
    const auto put = ::write(fd, data, n);
    if (put < 0 && errno == EINTR) continue;
    if (put <= 0) fail("control write");
    data += put;
    n -= static_cast<std::size_t>(put);
  }
}

struct Fd {
  int fd;
  ~Fd() {
    if (fd >= 0) ::close(fd);
  }
};

}  // namespace

std::vector<std::uint8_t> encode_control_message(std::uint32_t target_slot,
                                                 std::span<const std::uint8_t> weights) {
  std::vector<std::uint8_t> out;
  out.reserve(weights.size() + 8);
  append_le32(out, static_cast<std::uint32_t>(weights.size()));
  out.insert(out.end(), weights.begin(), weights.end());
  append_le32(out, target_slot);
  return out;
}

ControlMessage decode_control_message(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 8) throw Error(Errc::ControlChannelFailure, "control message too short");
  const auto len = load_le32(bytes.data());
  if (len > kMaxControlPayload || bytes.size() != 8 + static_cast<std::size_t>(len)) {
    throw Error(Errc::ControlChannelFailure, "control message length field disagrees with size");
  }
  ControlMessage msg;
  msg.weights.assign(bytes.begin() + 4, bytes.begin() + 4 + len);
  msg.target_slot = load_le32(bytes.data() + 4 + len);
  return msg;
}

std::filesystem::path make_control_socket_path() {
  static std::atomic<unsigned> counter{0};
  return std::filesystem::temp_directory_path() /
         ("slotpath-" + std::to_string(::getpid()) + "-" + std::to_string(counter++) + ".sock");
}

ControlListener::ControlListener(ModelBank& bank, std::filesystem::path socket_path)
    : bank_(bank), path_(std::move(socket_path)) {
  const auto addr = unix_address(path_);
  std::filesystem::remove(path_);
  listen_fd_ = ::socket(AF_UNIX, SOCK_STREAM, 0);
  if (listen_fd_ < 0) fail("control socket");
  if (::bind(listen_fd_, reinterpret_cast<const sockaddr*>(&addr), sizeof addr) != 0 ||
      ::listen(listen_fd_, 4) != 0) {
    const int saved = errno;
    ::close(listen_fd_);
    errno = saved;
    fail("control bind " + path_.string());
  }
  thread_ = std::thread([this] { serve(); });
}

ControlListener::~ControlListener() {
  stop_.store(true);
  if (thread_.joinable()) thread_.join();
  ::close(listen_fd_);
  std::error_code ec;
  std::filesystem::remove(path_, ec);
}

void ControlListener::serve() {
  while (!stop_.load()) {
    pollfd pfd{listen_fd_, POLLIN, 0};
    if (::poll(&pfd, 1, 20) <= 0) continue;
    Fd conn{::accept(listen_fd_, nullptr, nullptr)};
    if (conn.fd < 0) continue;
    handle(conn.fd);
  }
}

void ControlListener::handle(int conn) {
  auto record_error = [this](std::string what) {
    std::lock_guard lock(mu_);
    errors_.push_back(std::move(what));
  };
  std::uint8_t word[4];
  if (!read_exact(conn, word, 4)) return record_error("connection closed before length prefix");
  const auto len = load_le32(word);
  if (len > kMaxControlPayload) return record_error("weight payload too large");
  std::vector<std::uint8_t> body(len);
  if (!read_exact(conn, body.data(), len) || !read_exact(conn, word, 4)) {
    return record_error("connection closed mid-message");
  }
  const auto received = now_ns();
  const auto slot = load_le32(word);
  try {
    auto model = deserialize_model(body, bank_.shape());
    bank_.swap_slot(SlotIndex{slot}, std::move(model));
  } catch (const Error& e) {
    return record_error(std::string(to_string(e.code())) + ": " + e.what());
  }
  const auto effective = now_ns();
  {
    std::lock_guard lock(mu_);
    applied_.push_back(Applied{slot, received, effective, bank_.generation()});
  }
  cv_.notify_all();
}

std::optional<ControlListener::Applied> ControlListener::wait_applied(std::chrono::milliseconds timeout) {
  std::unique_lock lock(mu_);
  if (!cv_.wait_for(lock, timeout, [this] { return !applied_.empty(); })) return std::nullopt;
  const auto a = applied_.front();
  applied_.pop_front();
  return a;
}

std::vector<std::string> ControlListener::errors() const {
  std::lock_guard lock(mu_);
  return errors_;
}

SendTiming send_weights(const std::filesystem::path& socket_path, std::uint32_t target_slot,
                        std::span<const std::uint8_t> weights,
                        std::chrono::microseconds transfer_delay) {
  SendTiming timing;
  timing.send_start_ns = now_ns();
  const auto addr = unix_address(socket_path);
  Fd fd{::socket(AF_UNIX, SOCK_STREAM, 0)};
  if (fd.fd < 0) fail("control socket");
  if (::connect(fd.fd, reinterpret_cast<const sockaddr*>(&addr), sizeof addr) != 0) {
    fail("control connect " + socket_path.string());
  }
  const auto msg = encode_control_message(target_slot, weights);
  write_exact(fd.fd, msg.data(), 4);
  if (transfer_delay.count() > 0) std::this_thread::sleep_for(transfer_delay);
  write_exact(fd.fd, msg.data() + 4, msg.size() - 4);
  timing.send_done_ns = now_ns();
  return timing;
}

}  // namespace slotpath
