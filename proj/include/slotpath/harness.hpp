#pragma once

// Scripted experiments: runtime breakdown, resident-bank scaling, boundary
// switching continuity, and the control-plane replacement comparison.

#include <array>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "slotpath/bnn.hpp"
#include "slotpath/model_bank.hpp"
#include "slotpath/pipeline.hpp"
#include "slotpath/stats.hpp"

namespace slotpath {

using Payload = std::array<std::uint8_t, kPayloadBytes>;

struct AccessPattern {
  enum class Kind { Fixed, RoundRobin, Random, Hotspot };

  Kind kind = Kind::RoundRobin;
  std::uint32_t slot = 0;  // fixed slot, or the hot slot
  std::uint64_t seed = 1;
  double hot_fraction = 0.9;

  static AccessPattern fixed(std::uint32_t slot) { return {Kind::Fixed, slot, 1, 0.9}; }
  static AccessPattern round_robin() { return {Kind::RoundRobin, 0, 1, 0.9}; }
  static AccessPattern random(std::uint64_t seed) { return {Kind::Random, 0, seed, 0.9}; }
  static AccessPattern hotspot(std::uint32_t hot, double fraction = 0.9, std::uint64_t seed = 1) {
    return {Kind::Hotspot, hot, seed, fraction};
  }

  std::string name() const;
};

/// Parses "fixed:K", "round_robin", "random[:SEED]", "hotspot[:K[:FRACTION[:SEED]]]".
AccessPattern parse_access_pattern(const std::string& text);

/// Deterministic slot-id sequence. Hotspot emits the hot slot with
/// probability hot_fraction and otherwise a uniform pick among the others.
/// Throws Error(SlotOutOfRange) when a fixed/hot slot is outside the bank.
std::vector<std::uint32_t> generate_slot_ids(const AccessPattern& pattern, std::size_t slot_count,
                                             std::size_t n);

/// Seeded uniformly random payloads.
std::vector<Payload> random_payloads(std::size_t count, std::uint64_t seed);

/// Cycles a frame pool for a fixed number of arrivals without copying frames.
class CyclingSource : public PacketSource {
 public:
  CyclingSource(std::span<const PacketFrame> pool, std::uint64_t count) : pool_(pool), count_(count) {}
  bool next(Arrival& out) override;

 private:
  std::span<const PacketFrame> pool_;
  std::uint64_t count_;
  std::uint64_t cursor_ = 0;
};

struct SelectionTiming {
  double mean_ns = 0.0;       // total time / total resolutions
  LatencySummary chunk_ns;    // per-resolution mean of each timed chunk
  std::uint64_t operations = 0;
};

/// Times resolve+fetch over pre-parsed metadata in chunks of `chunk` calls.
SelectionTiming time_selection(const ModelBank& bank, std::span<const Reg0Metadata> metas,
                               std::size_t chunk = 1024);

struct BreakdownReport {
  std::uint64_t n_packets = 0;
  SelectionTiming select;
  LatencySummary infer;  // per call, includes one clock read
  RunReport full;        // process_packet through run_pipeline
  CostModel cost;
  double select_to_infer_ratio = 0.0;
};

BreakdownReport bench_breakdown(const ModelBank& bank, std::size_t n_packets,
                                std::span<const PacketFrame> frames);

struct ScalingRow {
  std::size_t slots = 0;
  std::string pattern;
  double mean_select_ns = 0.0;        // median over rounds of the round mean
  double mean_select_infer_ns = 0.0;
  std::vector<std::uint64_t> hits;  // per slot
  std::uint64_t misresolved = 0;
};

struct ScalingReport {
  std::uint64_t n_packets = 0;
  std::size_t rounds = 0;
  std::vector<ScalingRow> rows;
  bool slot_contents_verified = false;  // bank16 slot k holds bank2 slot k % 2
  std::size_t distinct_ids_verified = 0;
  double max_relative_select_delta = 0.0;  // over patterns, |K16 - K2| / K2
};

/// Both banks see the same patterns; rows are ordered (pattern, K=2), (pattern, K=16).
/// Rounds are rounded up to an even count and alternate which bank goes first.
ScalingReport bench_scaling(const ModelBank& bank2, const ModelBank& bank16,
                            std::span<const AccessPattern> patterns, std::size_t n_packets,
                            std::span<const Payload> payloads, std::size_t rounds = 20);

inline constexpr std::uint64_t kDefaultPacingNs = 10'000;

/// Records [0, boundary) carry `before_slot`, the rest `after_slot`; payload
/// i is payloads[i % size]. Throws Error(BadBoundary).
std::vector<TraceRecord> gen_boundary_trace(std::size_t n_packets, std::size_t boundary_index,
                                            std::span<const Payload> payloads,
                                            std::uint64_t pacing_ns = kDefaultPacingNs,
                                            std::uint32_t before_slot = 0, std::uint32_t after_slot = 1);

struct ContinuityOptions {
  bool paced = true;
  std::size_t warmup_prefix = 64;
  std::size_t rate_window = 512;
};

struct ContinuityReport {
  std::uint64_t offered = 0;
  std::uint64_t processed = 0;
  double processed_fraction = 0.0;
  std::uint64_t wrong_slot_hits = 0;
  std::uint64_t wrong_verdicts = 0;
  std::uint64_t post_boundary_offered = 0;
  std::uint64_t post_boundary_delivered = 0;  // scored by the post-boundary slot
  std::array<std::uint64_t, kReasonCount> by_reason{};
  std::size_t boundary_index = 0;
  std::size_t warmup_prefix = 0;  // effective prefix excluded from gap statistics
  double configured_pacing_ns = 0.0;
  double median_gap_ns = 0.0;
  double boundary_gap_ns = 0.0;
  double rate_before_kpps = 0.0;
  double rate_after_kpps = 0.0;
  RunReport run;
};

/// Oracle verdict per record (reference inference with the intended slot's
/// model, then the default action rule); nullopt when the slot id is invalid.
std::vector<std::optional<Verdict>> oracle_verdicts(std::span<const TraceRecord> trace,
                                                    std::span<const ModelWeights* const> intended);

/// First index carrying the final record's slot id after a different one.
std::size_t find_boundary(std::span<const TraceRecord> trace);

ContinuityReport run_continuity(const ModelBank& bank, std::span<const TraceRecord> trace,
                                const ContinuityOptions& options = {});

struct ControlOptions {
  std::chrono::microseconds delivery_latency{2000};
  std::size_t warmup_prefix = 64;
  std::filesystem::path socket_path;  // empty: a fresh temp path
};

struct ControlCompareReport {
  std::size_t boundary_index = 0;
  double delivery_latency_us = 0.0;
  bool effective = false;  // update applied
  double switch_latency_us = 0.0;
  double boundary_to_effective_us = 0.0;
  double median_gap_us = 0.0;
  std::uint64_t post_boundary_packets = 0;
  std::uint64_t post_boundary_wrong_model = 0;
  std::uint64_t post_boundary_wrong_verdicts = 0;
  std::uint64_t expected_wrong_model = 0;  // floor(boundary_to_effective / median_gap)
  std::uint64_t weight_bytes_sent = 0;
  // Resident switching on the same trace.
  double resident_switch_latency_us = 0.0;
  std::uint64_t resident_wrong_slot_hits = 0;
  std::uint64_t resident_wrong_verdicts = 0;
  RunReport control_run;
};

/// Forwarder starts with slot 1 holding a copy of `slot0`. On the first
/// post-boundary packet a sender thread ships `slot1` over the control
/// socket and the listener swaps it in. Throws Error(ControlChannelFailure).
ControlCompareReport run_control_compare(const ModelWeights& slot0, const ModelWeights& slot1,
                                         std::span<const TraceRecord> trace,
                                         const ControlOptions& options = {});

}  // namespace slotpath
