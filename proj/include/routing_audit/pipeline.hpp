// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The routing-audit Authors

/**
 * @file pipeline.hpp
 * @brief Command orchestration shared by the C API and the CLI.
 *
 * Each command takes a JSON config object, writes its outputs plus a
 * `<command>.manifest.json` (effective config, version, input and output
 * digests; no timestamps) into `outdir`, and returns a JSON summary.
 * Unknown config keys are rejected.
 */

#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "routing_audit/error.hpp"
#include "routing_audit/provider.hpp"
#include "routing_audit/serialize.hpp"

namespace routing_audit {

enum class ExitCode : int {
  kOk = 0,
  kOther = 1,
  kConfig = 2,
  kIo = 3,
  kProvider = 4,
  kInvariant = 5,
};

ExitCode exit_code_for(ErrorKind kind);

struct CommandResult {
  ExitCode exit_code = ExitCode::kOk;
  /// Command-specific summary; carries "error" on failure.
  Json summary;
};

/// Commands: gen, stage, checkpoint, budget, audit, simulate, report,
/// replay. Never throws; errors become exit codes.
CommandResult run_command(std::string_view command, const Json& config);

const std::vector<std::string>& command_names();

/// Provider section of a command config (provider, endpoint, model,
/// max_parallel, cache_dir, cache_file, bias, ...). Unknown keys are
/// rejected.
ProviderSpec provider_spec_from_json(const Json& config);

/// Human-readable description of every file format the commands use.
std::string_view schema_help();

}  // namespace routing_audit
