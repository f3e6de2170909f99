#include "slotpath/pipeline.hpp"

#include <atomic>

namespace slotpath {
namespace {

std::atomic<std::uint64_t> g_parsers{0};
std::atomic<std::uint64_t> g_executors{0};
std::atomic<std::uint64_t> g_action_logics{0};

Reason reason_for(Errc e) noexcept {
  return e == Errc::WrongLength ? Reason::WrongLength : Reason::VersionMismatch;
}

}  // namespace

std::string_view to_string(Verdict v) noexcept { return v == Verdict::Forward ? "forward" : "drop"; }

std::string_view to_string(Reason r) noexcept {
  switch (r) {
    case Reason::Inference: return "inference";
    case Reason::SlotOutOfRange: return "slot_out_of_range";
    case Reason::VersionMismatch: return "version_mismatch";
    case Reason::WrongLength: return "wrong_length";
  }
  return "unknown";
}

Action decide_action(const Reg0Metadata& /*meta*/, Score score) noexcept {
  return Action{score.value > 0.0 ? Verdict::Drop : Verdict::Forward, Reason::Inference};
}

FrameParser::FrameParser(std::uint32_t expected_version) noexcept
    : expected_version_(expected_version) {
  g_parsers.fetch_add(1, std::memory_order_relaxed);
}
std::uint64_t FrameParser::instances_constructed() noexcept { return g_parsers.load(); }

Executor::Executor() noexcept { g_executors.fetch_add(1, std::memory_order_relaxed); }
std::uint64_t Executor::instances_constructed() noexcept { return g_executors.load(); }

ActionLogic::ActionLogic() noexcept { g_action_logics.fetch_add(1, std::memory_order_relaxed); }
std::uint64_t ActionLogic::instances_constructed() noexcept { return g_action_logics.load(); }

Pipeline::Pipeline(const ModelBank& bank, std::uint32_t expected_version) noexcept
    : bank_(bank), parser_(expected_version) {}

PacketRecord Pipeline::process(std::span<const std::uint8_t> frame, std::uint64_t sequence_no,
                               PacketSink* sink) const {
  PacketRecord rec;
  rec.sequence_no = sequence_no;
  auto& ts = rec.timestamps_ns;
  ts[kIngress] = now_ns();

  auto finish_drop = [&](Stage last, Reason reason) {
    for (std::size_t s = last + 1; s < kEgress; ++s) ts[s] = ts[last];
    rec.action = Action{Verdict::Drop, reason};
    ++rec.stages_run;  // act + emit
    if (sink != nullptr) sink->accept(frame, rec.action);
    ts[kEgress] = now_ns();
    return rec;
  };

  // 1. parse reg0
  const ParsedFrame parsed = parser_.parse(frame);
  ts[kPostParse] = now_ns();
  rec.stages_run = 1;
  if (!parsed.ok()) return finish_drop(kPostParse, reason_for(*parsed.error));

  // 2-3. slot index and resident slot
  const auto slot = bank_.try_resolve(parsed.meta.slot_id);
  ts[kPostResolve] = now_ns();
  rec.stages_run = 2;
  if (!slot) return finish_drop(kPostResolve, Reason::SlotOutOfRange);
  const ResidentModel& resident = bank_.fetch(*slot);
  rec.slot_used = slot;
  rec.model_generation = resident.generation;

  // 4. score
  const Score score = executor_.run(resident.weights, parsed.payload);
  ts[kPostInfer] = now_ns();
  rec.stages_run = 3;
  rec.score = score;

  // 5-6. action and emit
  rec.action = action_logic_.decide(parsed.meta, score);
  rec.stages_run = 4;
  if (sink != nullptr) sink->accept(frame, rec.action);
  ts[kEgress] = now_ns();
  return rec;
}

RingSource::RingSource(std::vector<TraceRecord> records, bool paced)
    : records_(std::move(records)), paced_(paced) {}

RingSource RingSource::from_frames(std::vector<PacketFrame> frames) {
  std::vector<TraceRecord> records(frames.size());
  for (std::size_t i = 0; i < frames.size(); ++i) records[i].frame = frames[i];
  return RingSource(std::move(records), false);
}

bool RingSource::next(Arrival& out) {
  if (cursor_ >= records_.size()) return false;
  const auto& rec = records_[cursor_];
  if (paced_) {
    if (cursor_ == 0) origin_ns_ = now_ns();
    wait_until_ns(origin_ns_ + (rec.emit_time_ns - records_.front().emit_time_ns));
  }
  out.arrival_ns = now_ns();
  out.bytes = rec.frame.bytes();
  ++cursor_;
  return true;
}

void RingSource::rewind() noexcept { cursor_ = 0; }

void TraceFileSink::accept(std::span<const std::uint8_t> frame, const Action& action) {
  if (action.verdict != Verdict::Forward) return;
  const auto t = now_ns();
  if (records_.empty()) origin_ns_ = t;
  try {
    records_.push_back(TraceRecord{t - origin_ns_, PacketFrame(frame)});
  } catch (const Error& e) {
    throw Error(Errc::SinkFailure, e.what());
  }
}

void TraceFileSink::flush() {
  try {
    write_trace(path_, records_);
  } catch (const Error& e) {
    throw Error(Errc::SinkFailure, e.what());
  }
}

void summarize_stages(RunReport& report, std::span<const PacketRecord> records, std::size_t warmup) {
  std::vector<double> parse, select, infer, act, e2e;
  for (std::size_t i = warmup; i < records.size(); ++i) {
    const auto& r = records[i];
    if (r.action.reason != Reason::Inference) continue;
    const auto& t = r.timestamps_ns;
    parse.push_back(static_cast<double>(t[kPostParse] - t[kIngress]));
    select.push_back(static_cast<double>(t[kPostResolve] - t[kPostParse]));
    infer.push_back(static_cast<double>(t[kPostInfer] - t[kPostResolve]));
    act.push_back(static_cast<double>(t[kEgress] - t[kPostInfer]));
    e2e.push_back(static_cast<double>(t[kEgress] - t[kIngress]));
  }
  report.parse = summarize(std::move(parse));
  report.select = summarize(std::move(select));
  report.infer = summarize(std::move(infer));
  report.act = summarize(std::move(act));
  report.end_to_end = summarize(std::move(e2e));
}

RunReport run_pipeline(const Pipeline& pipeline, PacketSource& source, PacketSink& sink,
                       const RunOptions& options) {
  RunReport report;
  report.clock_overhead_ns = measure_clock_overhead_ns(10000);

  std::vector<PacketRecord> records;
  Arrival arrival;
  const auto start = now_ns();
  std::uint64_t first_ingress = 0;
  std::uint64_t last_egress = 0;
  while (options.packet_limit == 0 || report.offered < options.packet_limit) {
    if (!source.next(arrival)) break;
    ++report.offered;
    PacketRecord rec;
    try {
      rec = pipeline.process(arrival.bytes, report.offered - 1, &sink);
    } catch (const Error& e) {
      report.complete = false;
      report.error = std::string(to_string(e.code())) + ": " + e.what();
      break;
    }
    if (report.processed == 0) first_ingress = rec.timestamps_ns[kIngress];
    last_egress = rec.timestamps_ns[kEgress];
    ++report.processed;
    (rec.action.verdict == Verdict::Forward ? report.forwarded : report.dropped)++;
    ++report.by_reason[static_cast<std::size_t>(rec.action.reason)];
    records.push_back(rec);
  }
  const auto stop = now_ns();
  report.wall_seconds = static_cast<double>(stop - start) * 1e-9;
  if (report.processed > 0 && last_egress > first_ingress) {
    report.packets_per_second =
        static_cast<double>(report.processed) / (static_cast<double>(last_egress - first_ingress) * 1e-9);
  }

  summarize_stages(report, records, options.warmup_prefix);
  if (options.keep_records) report.records = std::move(records);
  return report;
}

}  // namespace slotpath
