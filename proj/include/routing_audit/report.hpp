// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The routing-audit Authors

/**
 * @file report.hpp
 * @brief Table emitters for stage, checkpoint and budget results.
 *
 * Output is a pure function of the input rows: rows are stably sorted by
 * their ConditionKey, columns are fixed, rates carry 3 decimals, logit gaps
 * 2 and percentages 1. Absent values are empty cells.
 */

#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "routing_audit/audit.hpp"
#include "routing_audit/serialize.hpp"
#include "routing_audit/stage_metrics.hpp"

namespace routing_audit {

inline constexpr int kReportSchemaVersion = 1;

struct ConditionKey {
  std::string provider;
  std::string task;
  std::size_t k = 0;
  std::string filler;
  /// "none" or "<mode>-<every>".
  std::string checkpoint = "none";
  /// Seed set, e.g. "0x400" for base seed 0 and 400 trials.
  std::string seeds;

  /// Sort key; k is zero padded so string order equals numeric order.
  std::string to_string() const;
  /// The key without k, naming one curve of a series.
  std::string series_label() const;

  friend bool operator==(const ConditionKey&, const ConditionKey&) = default;
  friend bool operator<(const ConditionKey& a, const ConditionKey& b) {
    return a.to_string() < b.to_string();
  }
};

struct ReportRow {
  int schema_version = kReportSchemaVersion;
  ConditionKey key;
  StageSummary summary;
  /// Candidate-set size used for the Fano bound on used information.
  std::size_t alphabet_size = 0;
};

struct CheckpointRow {
  int schema_version = kReportSchemaVersion;
  /// Key of the checkpointed condition.
  ConditionKey key;
  StageSummary baseline;
  StageSummary checkpointed;

  double delta_acc() const { return checkpointed.acc - baseline.acc; }
};

struct BudgetRow {
  int schema_version = kReportSchemaVersion;
  std::string label;
  double tau = kDefaultTau;
  /// Null family names joined by '+'.
  std::string nulls;
  AuditSummary summary;
};

std::string emit_stage_table(std::span<const ReportRow> rows);
std::string emit_checkpoint_table(std::span<const CheckpointRow> rows);
std::string emit_budget_table(std::span<const BudgetRow> rows);

/// Inverse of emit_stage_table to formatting precision.
std::vector<ReportRow> parse_stage_table(std::string_view csv);

enum class SeriesQuantity { kAccuracy, kCandidateAccuracy };

std::string_view to_string(SeriesQuantity q);
SeriesQuantity series_quantity_from_string(std::string_view s);

/// Plot-ready series: one curve per series_label(), points sorted by k,
/// each carrying estimate, Wilson bounds and n.
Json emit_series(std::span<const ReportRow> rows, SeriesQuantity quantity);

/// Fixed-point formatting; never prints "-0".
std::string format_fixed(double value, int decimals);

}  // namespace routing_audit
