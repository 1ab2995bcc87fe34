// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The routing-audit Authors

#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "routing_audit/audit.hpp"
#include "routing_audit/channel_lab.hpp"
#include "routing_audit/stage_metrics.hpp"
#include "routing_audit/taskgen.hpp"

namespace routing_audit {

using Json = nlohmann::ordered_json;

Json to_json(const WilsonInterval& ci);
Json to_json(const LogprobRecord& record);
Json to_json(const StageOutcome& outcome);
Json to_json(const StageSummary& summary);
Json to_json(const TaskInstance& instance);
Json to_json(const BudgetCertificate& certificate);
Json to_json(const TraceAudit& audit);
Json to_json(const AuditSummary& summary);
Json to_json(const ContractionReport& report);

LogprobRecord record_from_json(const Json& j);
StageOutcome outcome_from_json(const Json& j);
TaskInstance instance_from_json(const Json& j);
Trace trace_from_json(const Json& j);

/// Divergence as a number, or the string "inf".
Json divergence_json(const Divergence& d);

/// One JSON document per line; blank lines are skipped. Parse errors name
/// the file and line and throw Error(kIo).
std::vector<Json> read_jsonl(const std::filesystem::path& path);
std::string to_jsonl(const std::vector<Json>& docs);

std::string read_file(const std::filesystem::path& path);
/// Write to a temporary beside `path`, then rename over it.
void write_file_atomic(const std::filesystem::path& path, std::string_view data);

}  // namespace routing_audit
