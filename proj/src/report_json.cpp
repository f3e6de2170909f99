#include "slotpath/report_json.hpp"

#include <fstream>

namespace slotpath {

using nlohmann::json;

void to_json(json& j, const LatencySummary& s) {
  j = json{{"count", s.count}, {"min", s.min},   {"mean", s.mean},
           {"median", s.median}, {"p99", s.p99}, {"max", s.max}};
}

void to_json(json& j, const CostModel& c) {
  j = json{{"selection_ops", c.selection_ops}, {"hidden_ops", c.hidden_ops}, {"output_ops", c.output_ops}};
}

void to_json(json& j, const ModelShape& s) {
  j = json{{"input_bits", s.input_bits}, {"hidden_width", s.hidden_width},
           {"serialized_bytes", s.serialized_bytes()}};
}

void to_json(json& j, const RunReport& r) {
  json reasons = json::object();
  for (std::size_t i = 0; i < kReasonCount; ++i) {
    reasons[std::string(to_string(static_cast<Reason>(i)))] = r.by_reason[i];
  }
  j = json{{"offered", r.offered},
           {"processed", r.processed},
           {"complete", r.complete},
           {"forwarded", r.forwarded},
           {"dropped", r.dropped},
           {"by_reason", reasons},
           {"latency_ns",
            {{"parse", r.parse}, {"select", r.select}, {"infer", r.infer}, {"act", r.act},
             {"end_to_end", r.end_to_end}}},
           {"clock_overhead_ns", r.clock_overhead_ns},
           {"wall_seconds", r.wall_seconds},
           {"packets_per_second", r.packets_per_second}};
  if (!r.error.empty()) j["error"] = r.error;
}

void to_json(json& j, const SelectionTiming& t) {
  j = json{{"mean_ns", t.mean_ns}, {"chunk_ns", t.chunk_ns}, {"operations", t.operations}};
}

void to_json(json& j, const BreakdownReport& r) {
  j = json{{"n_packets", r.n_packets},
           {"select", r.select},
           {"infer_ns", r.infer},
           {"pipeline", r.full},
           {"cost_model", r.cost},
           {"select_to_infer_ratio", r.select_to_infer_ratio}};
}

void to_json(json& j, const ScalingRow& r) {
  j = json{{"slots", r.slots},
           {"pattern", r.pattern},
           {"mean_select_ns", r.mean_select_ns},
           {"mean_select_infer_ns", r.mean_select_infer_ns},
           {"hits", r.hits},
           {"misresolved", r.misresolved}};
}

void to_json(json& j, const ScalingReport& r) {
  j = json{{"n_packets", r.n_packets},
           {"rounds", r.rounds},
           {"rows", r.rows},
           {"slot_contents_verified", r.slot_contents_verified},
           {"distinct_ids_verified", r.distinct_ids_verified},
           {"max_relative_select_delta", r.max_relative_select_delta}};
}

void to_json(json& j, const ContinuityReport& r) {
  j = json{{"offered", r.offered},
           {"processed", r.processed},
           {"processed_fraction", r.processed_fraction},
           {"wrong_slot_hits", r.wrong_slot_hits},
           {"wrong_verdicts", r.wrong_verdicts},
           {"post_boundary_offered", r.post_boundary_offered},
           {"post_boundary_delivered", r.post_boundary_delivered},
           {"boundary_index", r.boundary_index},
           {"warmup_prefix", r.warmup_prefix},
           {"configured_pacing_ns", r.configured_pacing_ns},
           {"median_gap_ns", r.median_gap_ns},
           {"boundary_gap_ns", r.boundary_gap_ns},
           {"rate_before_kpps", r.rate_before_kpps},
           {"rate_after_kpps", r.rate_after_kpps},
           {"run", r.run}};
}

void to_json(json& j, const ControlCompareReport& r) {
  j = json{{"boundary_index", r.boundary_index},
           {"control",
            {{"delivery_latency_us", r.delivery_latency_us},
             {"effective", r.effective},
             {"switch_latency_us", r.switch_latency_us},
             {"boundary_to_effective_us", r.boundary_to_effective_us},
             {"median_gap_us", r.median_gap_us},
             {"post_boundary_packets", r.post_boundary_packets},
             {"post_boundary_wrong_model", r.post_boundary_wrong_model},
             {"expected_wrong_model", r.expected_wrong_model},
             {"post_boundary_wrong_verdicts", r.post_boundary_wrong_verdicts},
             {"weight_bytes_sent", r.weight_bytes_sent},
             {"run", r.control_run}}},
           {"resident",
            {{"switch_latency_us", r.resident_switch_latency_us},
             {"wrong_slot_hits", r.resident_wrong_slot_hits},
             {"wrong_verdicts", r.resident_wrong_verdicts}}}};
}

void to_json(json& j, const EvalMetrics& m) {
  j = json{{"tp", m.tp},
           {"fp", m.fp},
           {"tn", m.tn},
           {"fn", m.fn},
           {"precision", m.precision},
           {"recall", m.recall},
           {"f1", m.f1},
           {"accuracy", m.accuracy}};
}

void to_json(json& j, const EpochLog& e) {
  j = json{{"epoch", e.epoch}, {"train_loss", e.train_loss}, {"validation", e.validation}};
}

json make_report(const std::string& command, json config, json result) {
  return json{{"schema", kReportSchema}, {"command", command}, {"config", std::move(config)},
              {"result", std::move(result)}};
}

void write_records_csv(const std::filesystem::path& path, std::span<const PacketRecord> records) {
  std::ofstream out(path);
  if (!out) throw Error(Errc::Io, "cannot open " + path.string());
  out << "sequence_no,slot,score,verdict,reason,generation,stages_run,"
         "t_ingress_ns,t_parse_ns,t_resolve_ns,t_infer_ns,t_egress_ns\n";
  for (const auto& r : records) {
    out << r.sequence_no << ',';
    if (r.slot_used) out << r.slot_used->value;
    out << ',';
    if (r.score) out << r.score->value;
    out << ',' << to_string(r.action.verdict) << ',' << to_string(r.action.reason) << ','
        << r.model_generation << ',' << static_cast<unsigned>(r.stages_run);
    for (const auto t : r.timestamps_ns) out << ',' << t;
    out << '\n';
  }
  if (!out) throw Error(Errc::Io, "write failed: " + path.string());
}

}  // namespace slotpath
