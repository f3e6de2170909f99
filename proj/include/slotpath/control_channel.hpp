#pragma once

// Control-plane weight delivery over a local stream socket.
// Message: u32 LE length | `length` weight-file bytes | u32 LE target slot.

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "slotpath/model_bank.hpp"

namespace slotpath {

inline constexpr std::uint32_t kMaxControlPayload = 64u << 20;

struct ControlMessage {
  std::uint32_t target_slot = 0;
  std::vector<std::uint8_t> weights;
};

std::vector<std::uint8_t> encode_control_message(std::uint32_t target_slot,
                                                 std::span<const std::uint8_t> weights);
/// Throws Error(ControlChannelFailure) on a malformed message.
ControlMessage decode_control_message(std::span<const std::uint8_t> bytes);

/// A fresh socket path under the system temp directory.
std::filesystem::path make_control_socket_path();

/// Accepts control connections on a background thread and applies each
/// received weight file to the bank with swap_slot.
class ControlListener {
 public:
  struct Applied {
    std::uint32_t target_slot = 0;
    std::uint64_t received_ns = 0;   // last byte read
    std::uint64_t effective_ns = 0;  // swap published
    std::uint64_t generation = 0;
  };

  /// Binds and starts listening; throws Error(ControlChannelFailure).
  ControlListener(ModelBank& bank, std::filesystem::path socket_path);
  ~ControlListener();
  ControlListener(const ControlListener&) = delete;
  ControlListener& operator=(const ControlListener&) = delete;

  const std::filesystem::path& socket_path() const noexcept { return path_; }

  /// Next applied update, or nullopt after `timeout`.
  std::optional<Applied> wait_applied(std::chrono::milliseconds timeout);
  std::vector<std::string> errors() const;

 private:
  void serve();
  void handle(int conn);

  ModelBank& bank_;
  std::filesystem::path path_;
  int listen_fd_ = -1;
  std::atomic<bool> stop_{false};
  std::thread thread_;

  mutable std::mutex mu_;
  std::condition_variable cv_;
  std::deque<Applied> applied_;
  std::vector<std::string> errors_;
};

struct SendTiming {
  std::uint64_t send_start_ns = 0;
  std::uint64_t send_done_ns = 0;
};

/// Connects and sends one update. `transfer_delay` is inserted between the
/// length prefix and the body to model a slow delivery path.
/// Throws Error(ControlChannelFailure).
SendTiming send_weights(const std::filesystem::path& socket_path, std::uint32_t target_slot,
                        std::span<const std::uint8_t> weights,
                        std::chrono::microseconds transfer_delay = std::chrono::microseconds{0});

}  // namespace slotpath
