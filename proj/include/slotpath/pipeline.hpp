#pragma once

// The shared forwarding path. Every packet runs the same six steps through
// the same parser, executor, and action-logic objects:
//   parse reg0 -> slot index -> resident slot -> score -> action -> emit
// Only the resolved slot differs between packets.

#include <array>
#include <atomic>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "slotpath/bnn.hpp"
#include "slotpath/model_bank.hpp"
#include "slotpath/packet_format.hpp"
#include "slotpath/stats.hpp"

namespace slotpath {

enum class Verdict : std::uint8_t { Forward, Drop };
enum class Reason : std::uint8_t { Inference, SlotOutOfRange, VersionMismatch, WrongLength };
inline constexpr std::size_t kReasonCount = 4;

std::string_view to_string(Verdict v) noexcept;
std::string_view to_string(Reason r) noexcept;

struct Action {
  Verdict verdict = Verdict::Forward;
  Reason reason = Reason::Inference;
  friend bool operator==(const Action&, const Action&) = default;
};

/// Default policy: a positive score marks the packet malicious and drops it;
/// zero and negative scores forward. Metadata is available but unused.
Action decide_action(const Reg0Metadata& meta, Score score) noexcept;

enum Stage : std::size_t { kIngress = 0, kPostParse, kPostResolve, kPostInfer, kEgress, kStageCount };

struct PacketRecord {
  std::uint64_t sequence_no = 0;
  std::optional<SlotIndex> slot_used;
  std::optional<Score> score;
  Action action;
  std::uint64_t model_generation = 0;  // generation of the slot object that scored the packet
  std::uint8_t stages_run = 0;         // parse, resolve, infer, act+emit
  std::array<std::uint64_t, kStageCount> timestamps_ns{};
};

class FrameParser {
 public:
  explicit FrameParser(std::uint32_t expected_version = kFormatVersion) noexcept;
  FrameParser(const FrameParser&) = delete;
  FrameParser& operator=(const FrameParser&) = delete;

  ParsedFrame parse(std::span<const std::uint8_t> bytes) const noexcept {
    return parse_frame(bytes, expected_version_);
  }
  std::uint32_t expected_version() const noexcept { return expected_version_; }
  static std::uint64_t instances_constructed() noexcept;

 private:
  std::uint32_t expected_version_;
};

class Executor {
 public:
  Executor() noexcept;
  Executor(const Executor&) = delete;
  Executor& operator=(const Executor&) = delete;

  Score run(const ModelWeights& model, PayloadView payload) const { return infer_fast(model, payload); }
  static std::uint64_t instances_constructed() noexcept;
};

class ActionLogic {
 public:
  ActionLogic() noexcept;
  ActionLogic(const ActionLogic&) = delete;
  ActionLogic& operator=(const ActionLogic&) = delete;

  Action decide(const Reg0Metadata& meta, Score score) const noexcept { return decide_action(meta, score); }
  static std::uint64_t instances_constructed() noexcept;
};

struct Arrival {
  std::uint64_t arrival_ns = 0;
  std::span<const std::uint8_t> bytes;  // valid until the next call to next()
};

class PacketSource {
 public:
  virtual ~PacketSource() = default;
  /// Returns false when the source is exhausted.
  virtual bool next(Arrival& out) = 0;
};

class PacketSink {
 public:
  virtual ~PacketSink() = default;
  /// Throws Error(SinkFailure) when the packet cannot be emitted.
  virtual void accept(std::span<const std::uint8_t> frame, const Action& action) = 0;
};

class Pipeline {
 public:
  explicit Pipeline(const ModelBank& bank, std::uint32_t expected_version = kFormatVersion) noexcept;
  Pipeline(const Pipeline&) = delete;
  Pipeline& operator=(const Pipeline&) = delete;

  /// Runs one packet end to end. Malformed input becomes a counted Drop; the
  /// only exception that can escape is a SinkFailure from `sink`.
  PacketRecord process(std::span<const std::uint8_t> frame, std::uint64_t sequence_no,
                       PacketSink* sink = nullptr) const;

  const ModelBank& bank() const noexcept { return bank_; }
  const FrameParser& parser() const noexcept { return parser_; }
  const Executor& executor() const noexcept { return executor_; }
  const ActionLogic& action_logic() const noexcept { return action_logic_; }

 private:
  const ModelBank& bank_;
  FrameParser parser_;
  Executor executor_;
  ActionLogic action_logic_;
};

/// Preloaded in-memory ring. With pacing on, each record is released no
/// earlier than its emit time relative to the first next() call.
class RingSource : public PacketSource {
 public:
  explicit RingSource(std::vector<TraceRecord> records, bool paced = false);
  static RingSource from_frames(std::vector<PacketFrame> frames);

  bool next(Arrival& out) override;
  void rewind() noexcept;
  std::size_t size() const noexcept { return records_.size(); }
  const std::vector<TraceRecord>& records() const noexcept { return records_; }

 private:
  std::vector<TraceRecord> records_;
  std::size_t cursor_ = 0;
  bool paced_ = false;
  std::uint64_t origin_ns_ = 0;
};

class TraceFileSource : public RingSource {
 public:
  explicit TraceFileSource(const std::filesystem::path& path, bool paced = false)
      : RingSource(read_trace(path), paced) {}
};

class NullSink : public PacketSink {
 public:
  void accept(std::span<const std::uint8_t>, const Action&) override {}
};

class CountingSink : public PacketSink {
 public:
  void accept(std::span<const std::uint8_t>, const Action& action) override {
    (action.verdict == Verdict::Forward ? forwarded : dropped)++;
  }
  std::uint64_t forwarded = 0;
  std::uint64_t dropped = 0;
};

class CallbackSink : public PacketSink {
 public:
  using Callback = std::function<void(std::span<const std::uint8_t>, const Action&)>;
  explicit CallbackSink(Callback cb) : cb_(std::move(cb)) {}
  void accept(std::span<const std::uint8_t> frame, const Action& action) override { cb_(frame, action); }

 private:
  Callback cb_;
};

/// Collects forwarded frames with their emit times; flush() writes the trace.
class TraceFileSink : public PacketSink {
 public:
  explicit TraceFileSink(std::filesystem::path path) : path_(std::move(path)) {}
  void accept(std::span<const std::uint8_t> frame, const Action& action) override;
  void flush();
  std::size_t size() const noexcept { return records_.size(); }

 private:
  std::filesystem::path path_;
  std::vector<TraceRecord> records_;
  std::uint64_t origin_ns_ = 0;
};

struct RunOptions {
  std::uint64_t packet_limit = 0;  // 0 = until the source is exhausted
  std::size_t warmup_prefix = 0;   // excluded from latency statistics only
  bool keep_records = true;
};

struct RunReport {
  std::uint64_t offered = 0;
  std::uint64_t processed = 0;
  bool complete = true;
  std::string error;
  std::uint64_t forwarded = 0;
  std::uint64_t dropped = 0;
  std::array<std::uint64_t, kReasonCount> by_reason{};

  // Stage latencies in ns over inference-path records after the warm-up prefix.
  LatencySummary parse;
  LatencySummary select;
  LatencySummary infer;
  LatencySummary act;
  LatencySummary end_to_end;

  double clock_overhead_ns = 0.0;
  double wall_seconds = 0.0;
  double packets_per_second = 0.0;

  std::vector<PacketRecord> records;
};

/// Stage latency summaries from a record set (records before `warmup` skipped).
void summarize_stages(RunReport& report, std::span<const PacketRecord> records, std::size_t warmup);

RunReport run_pipeline(const Pipeline& pipeline, PacketSource& source, PacketSink& sink,
                       const RunOptions& options = {});

}  // namespace slotpath
