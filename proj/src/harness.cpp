#include "slotpath/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <random>
#include <string>
#include <thread>
#include <unordered_map>

#include "slotpath/bytes.hpp"
#include "slotpath/control_channel.hpp"

namespace slotpath {
namespace {

std::uint32_t slot_field(const PacketFrame& frame) noexcept {
  return load_le32(frame.bytes().data() + kSlotIdOffset);
}

std::vector<Reg0Metadata> parse_metas(std::span<const PacketFrame> frames, std::size_t n) {
  std::vector<Reg0Metadata> metas(n);
  for (std::size_t i = 0; i < n; ++i) metas[i] = decode_metadata(frames[i % frames.size()].metadata());
  return metas;
}

// Gaps between consecutive sink-side timestamps, starting after `warmup`.
std::vector<double> egress_gaps(std::span<const PacketRecord> records, std::size_t warmup) {
  std::vector<double> gaps;
  for (std::size_t i = std::max<std::size_t>(warmup, 0) + 1; i < records.size(); ++i) {
    gaps.push_back(static_cast<double>(records[i].timestamps_ns[kEgress] -
                                       records[i - 1].timestamps_ns[kEgress]));
  }
  return gaps;
}

double window_rate_kpps(std::span<const PacketRecord> records, std::size_t first, std::size_t last) {
  if (last <= first + 1) return 0.0;
  const auto span_ns = records[last - 1].timestamps_ns[kEgress] - records[first].timestamps_ns[kEgress];
  if (span_ns == 0) return 0.0;
  return static_cast<double>(last - first - 1) / static_cast<double>(span_ns) * 1e6;
}

constexpr std::size_t kCombinedPerRound = 4096;

}  // namespace

std::string AccessPattern::name() const {
  switch (kind) {
    case Kind::Fixed: return "fixed";
    case Kind::RoundRobin: return "round_robin";
    case Kind::Random: return "random";
    case Kind::Hotspot: return "hotspot";
  }
  return "unknown";
}

AccessPattern parse_access_pattern(const std::string& text) {
  std::vector<std::string> parts;
  std::size_t start = 0;
  while (true) {
    const auto colon = text.find(':', start);
    parts.push_back(text.substr(start, colon - start));
    if (colon == std::string::npos) break;
    start = colon + 1;
  }
  try {
    const auto& kind = parts[0];
    if (kind == "fixed" && parts.size() == 2) {
      return AccessPattern::fixed(static_cast<std::uint32_t>(std::stoul(parts[1])));
    }
    if ((kind == "round_robin" || kind == "rr") && parts.size() == 1) return AccessPattern::round_robin();
    if (kind == "random" && parts.size() <= 2) {
      return AccessPattern::random(parts.size() == 2 ? std::stoull(parts[1]) : 1);
    }
    if (kind == "hotspot" && parts.size() <= 4) {
      const auto hot = parts.size() > 1 ? static_cast<std::uint32_t>(std::stoul(parts[1])) : 0u;
      const double frac = parts.size() > 2 ? std::stod(parts[2]) : 0.9;
      const std::uint64_t seed = parts.size() > 3 ? std::stoull(parts[3]) : 1;
      return AccessPattern::hotspot(hot, frac, seed);
    }
  } catch (const std::logic_error&) {
  }
  throw Error(Errc::InvalidArgument, "bad access pattern '" + text + "'");
}

std::vector<std::uint32_t> generate_slot_ids(const AccessPattern& pattern, std::size_t slot_count,
                                             std::size_t n) {
  if (slot_count == 0) throw Error(Errc::EmptyBank, "no slots to generate ids for");
  const auto k_max = static_cast<std::uint32_t>(slot_count);
  std::vector<std::uint32_t> ids(n);
  std::mt19937_64 rng(pattern.seed);
  switch (pattern.kind) {
    case AccessPattern::Kind::Fixed:
      if (pattern.slot >= k_max) throw Error(Errc::SlotOutOfRange, "fixed slot outside bank");
      std::fill(ids.begin(), ids.end(), pattern.slot);
      break;
    case AccessPattern::Kind::RoundRobin:
      for (std::size_t i = 0; i < n; ++i) ids[i] = static_cast<std::uint32_t>(i % slot_count);
      break;
    case AccessPattern::Kind::Random: {
      std::uniform_int_distribution<std::uint32_t> pick(0, k_max - 1);
      for (auto& id : ids) id = pick(rng);
      break;
    }
    case AccessPattern::Kind::Hotspot: {
      if (pattern.slot >= k_max) throw Error(Errc::SlotOutOfRange, "hot slot outside bank");
      if (pattern.hot_fraction < 0.0 || pattern.hot_fraction > 1.0) {
        throw Error(Errc::InvalidArgument, "hot_fraction must lie in [0, 1]");
      }
      std::bernoulli_distribution hot(pattern.hot_fraction);
      std::uniform_int_distribution<std::uint32_t> other(0, k_max > 1 ? k_max - 2 : 0);
      for (auto& id : ids) {
        if (k_max == 1 || hot(rng)) {
          id = pattern.slot;
        } else {
          const auto o = other(rng);
          id = o >= pattern.slot ? o + 1 : o;
        }
      }
      break;
    }
  }
  return ids;
}

std::vector<Payload> random_payloads(std::size_t count, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<Payload> out(count);
  for (auto& p : out) {
    for (std::size_t i = 0; i < p.size(); i += 8) store_le64(p.data() + i, rng());
  }
  return out;
}

bool CyclingSource::next(Arrival& out) {
  if (cursor_ >= count_ || pool_.empty()) return false;
  out.arrival_ns = now_ns();
  out.bytes = pool_[cursor_ % pool_.size()].bytes();
  ++cursor_;
  return true;
}

SelectionTiming time_selection(const ModelBank& bank, std::span<const Reg0Metadata> metas,
                               std::size_t chunk) {
  SelectionTiming timing;
  if (metas.empty() || chunk == 0) return timing;
  std::vector<double> per_chunk;
  std::uint64_t total_ns = 0;
  std::uintptr_t sink = 0;
  for (std::size_t start = 0; start < metas.size(); start += chunk) {
    const auto stop = std::min(metas.size(), start + chunk);
    const auto t0 = now_ns();
    for (std::size_t i = start; i < stop; ++i) {
      if (const auto k = bank.try_resolve(metas[i].slot_id)) {
        sink += reinterpret_cast<std::uintptr_t>(&bank.fetch(*k));
      }
    }
    const auto t1 = now_ns();
    do_not_optimize(sink);
    total_ns += t1 - t0;
    per_chunk.push_back(static_cast<double>(t1 - t0) / static_cast<double>(stop - start));
  }
  timing.operations = metas.size();
  timing.mean_ns = static_cast<double>(total_ns) / static_cast<double>(metas.size());
  timing.chunk_ns = summarize(std::move(per_chunk));
  return timing;
}

BreakdownReport bench_breakdown(const ModelBank& bank, std::size_t n_packets,
                                std::span<const PacketFrame> frames) {
  BreakdownReport report;
  report.n_packets = n_packets;
  report.cost = cost_model(bank.shape());
  if (n_packets == 0 || frames.empty()) return report;

  const auto metas = parse_metas(frames, n_packets);
  // Warm the slots and the metadata before timing.
  time_selection(bank, std::span(metas).first(std::min<std::size_t>(metas.size(), 4096)));
  report.select = time_selection(bank, metas);

  std::vector<const ResidentModel*> models(frames.size(), nullptr);
  for (std::size_t f = 0; f < frames.size(); ++f) {
    if (const auto k = bank.try_resolve(slot_field(frames[f]))) models[f] = &bank.fetch(*k);
  }
  std::vector<double> infer;
  infer.reserve(n_packets);
  double sink = 0.0;
  for (std::size_t i = 0; i < n_packets; ++i) {
    const auto f = i % frames.size();
    if (models[f] == nullptr) continue;
    const PayloadView x(frames[f].payload());
    const auto t0 = now_ns();
    sink += infer_fast(models[f]->weights, x).value;
    const auto t1 = now_ns();
    infer.push_back(static_cast<double>(t1 - t0));
  }
  do_not_optimize(sink);
  report.infer = summarize(std::move(infer));

  const Pipeline pipeline(bank);
  CyclingSource source(frames, n_packets);
  NullSink null_sink;
  report.full = run_pipeline(pipeline, source, null_sink, RunOptions{0, 0, false});

  if (report.infer.mean > 0.0) report.select_to_infer_ratio = report.select.mean_ns / report.infer.mean;
  return report;
}

ScalingReport bench_scaling(const ModelBank& bank2, const ModelBank& bank16,
                            std::span<const AccessPattern> patterns, std::size_t n_packets,
                            std::span<const Payload> payloads, std::size_t rounds) {
  ScalingReport report;
  report.n_packets = n_packets;
  if (payloads.empty()) throw Error(Errc::InvalidArgument, "bench_scaling needs payloads");
  rounds = std::max<std::size_t>(rounds + rounds % 2, 2);
  report.rounds = rounds;

  report.slot_contents_verified = bank2.size() >= 2;
  for (std::size_t k = 0; k < bank16.size() && report.slot_contents_verified; ++k) {
    report.slot_contents_verified =
        bank16.fetch(SlotIndex{static_cast<std::uint32_t>(k)}).weights ==
        bank2.fetch(SlotIndex{static_cast<std::uint32_t>(k % bank2.size())}).weights;
  }

  const std::array<const ModelBank*, 2> banks{&bank2, &bank16};
  std::vector<bool> id_seen(bank16.size(), false);

  for (const auto& pattern : patterns) {
    std::array<ScalingRow, 2> rows;
    std::array<std::vector<std::uint32_t>, 2> ids;
    std::array<std::vector<double>, 2> select_means, combined_means;
    for (std::size_t b = 0; b < 2; ++b) {
      const auto& bank = *banks[b];
      rows[b].slots = bank.size();
      rows[b].pattern = pattern.name();
      rows[b].hits.assign(bank.size(), 0);
      // A fixed or hot slot beyond a small bank wraps into it.
      AccessPattern p = pattern;
      p.slot = static_cast<std::uint32_t>(pattern.slot % bank.size());
      ids[b] = generate_slot_ids(p, bank.size(), n_packets);
      for (const auto id : ids[b]) {
        const auto k = bank.try_resolve(id);
        if (!k || k->value != id) {
          ++rows[b].misresolved;
          continue;
        }
        ++rows[b].hits[k->value];
        if (b == 1) id_seen[k->value] = true;
      }
    }

    // Both banks are timed over the same metadata buffer so that memory
    // placement cannot differ between them.
    std::vector<Reg0Metadata> metas(n_packets, Reg0Metadata{0, kFormatVersion, {}});
    for (std::size_t r = 0; r < rounds; ++r) {
      for (std::size_t step = 0; step < 2; ++step) {
        const std::size_t b = (r % 2 == 0) ? step : 1 - step;
        const auto& bank = *banks[b];
        for (std::size_t i = 0; i < n_packets; ++i) metas[i].slot_id = ids[b][i];
        const auto sel = time_selection(bank, metas);
        select_means[b].push_back(sel.mean_ns);

        const auto combined = std::min<std::size_t>(n_packets, kCombinedPerRound);
        double sink = 0.0;
        const auto t0 = now_ns();
        for (std::size_t i = 0; i < combined; ++i) {
          if (const auto k = bank.try_resolve(metas[i].slot_id)) {
            sink += infer_fast(bank.fetch(*k).weights, PayloadView(payloads[i % payloads.size()])).value;
          }
        }
        const auto t1 = now_ns();
        do_not_optimize(sink);
        if (combined > 0) combined_means[b].push_back(static_cast<double>(t1 - t0) / static_cast<double>(combined));
      }
    }
    for (std::size_t b = 0; b < 2; ++b) {
      rows[b].mean_select_ns = median_of(select_means[b]);
      rows[b].mean_select_infer_ns = median_of(combined_means[b]);
    }
    if (rows[0].mean_select_ns > 0.0) {
      report.max_relative_select_delta =
          std::max(report.max_relative_select_delta,
                   std::abs(rows[1].mean_select_ns - rows[0].mean_select_ns) / rows[0].mean_select_ns);
    }
    report.rows.push_back(std::move(rows[0]));
    report.rows.push_back(std::move(rows[1]));
  }
  report.distinct_ids_verified =
      static_cast<std::size_t>(std::count(id_seen.begin(), id_seen.end(), true));
  return report;
}

std::vector<TraceRecord> gen_boundary_trace(std::size_t n_packets, std::size_t boundary_index,
                                            std::span<const Payload> payloads, std::uint64_t pacing_ns,
                                            std::uint32_t before_slot, std::uint32_t after_slot) {
  if (boundary_index == 0 || boundary_index >= n_packets) {
    throw Error(Errc::BadBoundary, "boundary " + std::to_string(boundary_index) +
                                       " must lie strictly inside (0, " + std::to_string(n_packets) + ")");
  }
  if (payloads.empty()) throw Error(Errc::InvalidArgument, "no payloads for the trace");
  std::vector<TraceRecord> trace(n_packets);
  for (std::size_t i = 0; i < n_packets; ++i) {
    trace[i].emit_time_ns = static_cast<std::uint64_t>(i) * pacing_ns;
    trace[i].frame = build_frame(i < boundary_index ? before_slot : after_slot, payloads[i % payloads.size()]);
  }
  return trace;
}

std::vector<std::optional<Verdict>> oracle_verdicts(std::span<const TraceRecord> trace,
                                                    std::span<const ModelWeights* const> intended) {
  std::vector<std::optional<Verdict>> out(trace.size());
  std::unordered_map<std::string, Verdict> memo;
  for (std::size_t i = 0; i < trace.size(); ++i) {
    const auto parsed = parse_frame(trace[i].frame.bytes());
    if (!parsed.ok() || parsed.meta.slot_id >= intended.size() || intended[parsed.meta.slot_id] == nullptr) {
      continue;
    }
    const auto payload = trace[i].frame.payload();
    std::string key(4 + payload.size(), '\0');
    std::copy_n(trace[i].frame.bytes().data(), 4, key.begin());
    std::copy(payload.begin(), payload.end(), key.begin() + 4);
    auto it = memo.find(key);
    if (it == memo.end()) {
      const Score s = infer_reference(*intended[parsed.meta.slot_id], parsed.payload);
      it = memo.emplace(std::move(key), decide_action(parsed.meta, s).verdict).first;
    }
    out[i] = it->second;
  }
  return out;
}

std::size_t find_boundary(std::span<const TraceRecord> trace) {
  if (trace.empty()) return 0;
  const auto first = slot_field(trace.front().frame);
  const auto last = slot_field(trace.back().frame);
  if (first == last) return 0;
  for (std::size_t i = 1; i < trace.size(); ++i) {
    if (slot_field(trace[i].frame) == last) return i;
  }
  return 0;
}

ContinuityReport run_continuity(const ModelBank& bank, std::span<const TraceRecord> trace,
                                const ContinuityOptions& options) {
  ContinuityReport report;
  const auto n = trace.size();
  report.boundary_index = find_boundary(trace);
  report.warmup_prefix = std::min(options.warmup_prefix, n / 4);

  std::vector<const ModelWeights*> intended(bank.size());
  for (std::size_t k = 0; k < bank.size(); ++k) {
    intended[k] = &bank.fetch(SlotIndex{static_cast<std::uint32_t>(k)}).weights;
  }
  const auto oracle = oracle_verdicts(trace, intended);

  std::vector<double> emit_gaps;
  for (std::size_t i = 1; i < n; ++i) {
    emit_gaps.push_back(static_cast<double>(trace[i].emit_time_ns - trace[i - 1].emit_time_ns));
  }
  report.configured_pacing_ns = median_of(std::move(emit_gaps));

  const Pipeline pipeline(bank);
  RingSource source(std::vector<TraceRecord>(trace.begin(), trace.end()), options.paced);
  NullSink sink;
  report.run = run_pipeline(pipeline, source, sink, RunOptions{0, report.warmup_prefix, true});
  const auto& records = report.run.records;

  report.offered = n;
  report.processed = records.size();
  report.processed_fraction = n == 0 ? 0.0 : static_cast<double>(records.size()) / static_cast<double>(n);
  report.by_reason = report.run.by_reason;
  const auto after_slot = n == 0 ? 0u : slot_field(trace.back().frame);

  for (const auto& rec : records) {
    const auto i = rec.sequence_no;
    const auto expected = bank.try_resolve(slot_field(trace[i].frame));
    if (expected != rec.slot_used) ++report.wrong_slot_hits;
    if (rec.action.reason == Reason::Inference && oracle[i] && rec.action.verdict != *oracle[i]) {
      ++report.wrong_verdicts;
    }
    if (report.boundary_index > 0 && i >= report.boundary_index && rec.slot_used &&
        rec.slot_used->value == after_slot && rec.action.reason == Reason::Inference) {
      ++report.post_boundary_delivered;
    }
  }
  if (report.boundary_index > 0) report.post_boundary_offered = n - report.boundary_index;

  if (records.size() >= 2) {
    report.median_gap_ns = median_of(egress_gaps(records, report.warmup_prefix));
    const auto b = report.boundary_index;
    if (b > 0 && b < records.size()) {
      report.boundary_gap_ns = static_cast<double>(records[b].timestamps_ns[kEgress] -
                                                   records[b - 1].timestamps_ns[kEgress]);
      const auto before_first = std::max(report.warmup_prefix, b > options.rate_window ? b - options.rate_window : 0);
      report.rate_before_kpps = window_rate_kpps(records, before_first, b);
      report.rate_after_kpps = window_rate_kpps(records, b, std::min(records.size(), b + options.rate_window));
    }
  }
  return report;
}

ControlCompareReport run_control_compare(const ModelWeights& slot0, const ModelWeights& slot1,
                                         std::span<const TraceRecord> trace,
                                         const ControlOptions& options) {
  ControlCompareReport report;
  report.delivery_latency_us = static_cast<double>(options.delivery_latency.count());
  report.boundary_index = find_boundary(trace);
  const auto b = report.boundary_index;
  if (b == 0) throw Error(Errc::BadBoundary, "trace has no slot boundary");
  const auto target = slot_field(trace.back().frame);
  if (target > 1) throw Error(Errc::SlotOutOfRange, "post-boundary slot must be 0 or 1");
  const auto warmup = std::min(options.warmup_prefix, trace.size() / 4);

  // Resident switching: both models preloaded.
  {
    ModelBank resident(std::vector<ModelWeights>{slot0, slot1});
    const auto cont = run_continuity(resident, trace, ContinuityOptions{true, options.warmup_prefix, 512});
    report.resident_wrong_slot_hits = cont.wrong_slot_hits;
    report.resident_wrong_verdicts = cont.wrong_verdicts;
    std::vector<Reg0Metadata> metas;
    metas.reserve(trace.size() * 16);
    for (int rep = 0; rep < 16; ++rep) {
      for (const auto& r : trace) metas.push_back(decode_metadata(r.frame.metadata()));
    }
    time_selection(resident, metas);
    report.resident_switch_latency_us = time_selection(resident, metas).mean_ns * 1e-3;
  }

  const std::array<const ModelWeights*, 2> intended{&slot0, &slot1};
  const auto oracle = oracle_verdicts(trace, intended);

  ModelBank control(std::vector<ModelWeights>{slot0, slot0});
  const auto path = options.socket_path.empty() ? make_control_socket_path() : options.socket_path;
  ControlListener listener(control, path);
  const auto weights = serialize_model(slot1);
  report.weight_bytes_sent = weights.size();

  constexpr std::uint64_t kAbort = ~std::uint64_t{0};
  std::atomic<std::uint64_t> trigger{0};
  SendTiming timing;
  std::exception_ptr send_error;
  std::thread sender([&] {
    trigger.wait(0);
    if (trigger.load() == kAbort) return;
    try {
      timing = send_weights(path, target, weights, options.delivery_latency);
    } catch (...) {
      send_error = std::current_exception();
    }
  });

  const Pipeline pipeline(control);
  RingSource source(std::vector<TraceRecord>(trace.begin(), trace.end()), true);
  CallbackSink sink([&](std::span<const std::uint8_t> frame, const Action&) {
    if (trigger.load(std::memory_order_relaxed) != 0 || frame.size() != kFrameBytes) return;
    if (load_le32(frame.data() + kSlotIdOffset) == target) {
      trigger.store(now_ns());
      trigger.notify_one();
    }
  });
  report.control_run = run_pipeline(pipeline, source, sink, RunOptions{0, warmup, true});
  if (trigger.load() == 0) {
    trigger.store(kAbort);
    trigger.notify_one();
  }
  sender.join();
  if (send_error) {
    try {
      std::rethrow_exception(send_error);
    } catch (const Error& e) {
      throw Error(Errc::ControlChannelFailure, e.what());
    }
  }

  const auto applied = listener.wait_applied(std::chrono::milliseconds(5000));
  if (!applied) {
    const auto errors = listener.errors();
    throw Error(Errc::ControlChannelFailure,
                errors.empty() ? std::string("update was never applied") : errors.front());
  }
  report.effective = true;

  const auto& records = report.control_run.records;
  if (records.size() <= b) throw Error(Errc::ControlChannelFailure, "run ended before the boundary");
  const auto boundary_ns = records[b].timestamps_ns[kIngress];
  report.switch_latency_us = static_cast<double>(applied->effective_ns - timing.send_start_ns) * 1e-3;
  report.boundary_to_effective_us = static_cast<double>(applied->effective_ns - boundary_ns) * 1e-3;
  report.median_gap_us = median_of(egress_gaps(records, warmup)) * 1e-3;

  for (std::size_t i = b; i < records.size(); ++i) {
    const auto& rec = records[i];
    ++report.post_boundary_packets;
    if (rec.slot_used && rec.model_generation < applied->generation) ++report.post_boundary_wrong_model;
    if (rec.action.reason == Reason::Inference && oracle[i] && rec.action.verdict != *oracle[i]) {
      ++report.post_boundary_wrong_verdicts;
    }
  }
  if (report.median_gap_us > 0.0) {
    report.expected_wrong_model =
        static_cast<std::uint64_t>(std::floor(report.boundary_to_effective_us / report.median_gap_us));
  }
  return report;
}

}  // namespace slotpath
