#pragma once

// JSON views of the experiment reports and a CSV dump of per-packet records.

#include <filesystem>
#include <span>
#include <string>

#include <json.hpp>

#include "slotpath/harness.hpp"
#include "slotpath/trainer.hpp"

namespace slotpath {

inline constexpr const char* kReportSchema = "slotpath.report/1";

void to_json(nlohmann::json& j, const LatencySummary& s);
void to_json(nlohmann::json& j, const CostModel& c);
void to_json(nlohmann::json& j, const ModelShape& s);
void to_json(nlohmann::json& j, const RunReport& r);  // records omitted
void to_json(nlohmann::json& j, const SelectionTiming& t);
void to_json(nlohmann::json& j, const BreakdownReport& r);
void to_json(nlohmann::json& j, const ScalingRow& r);
void to_json(nlohmann::json& j, const ScalingReport& r);
void to_json(nlohmann::json& j, const ContinuityReport& r);
void to_json(nlohmann::json& j, const ControlCompareReport& r);
void to_json(nlohmann::json& j, const EvalMetrics& m);
void to_json(nlohmann::json& j, const EpochLog& e);

/// Envelope shared by every CLI report.
nlohmann::json make_report(const std::string& command, nlohmann::json config, nlohmann::json result);

/// One row per record: sequence, slot, score, verdict, reason, generation,
/// stages and the five timestamps.
void write_records_csv(const std::filesystem::path& path, std::span<const PacketRecord> records);

}  // namespace slotpath
