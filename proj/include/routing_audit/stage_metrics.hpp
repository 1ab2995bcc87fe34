// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The routing-audit Authors

#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "routing_audit/info_core.hpp"

namespace routing_audit {

using TokenId = std::int64_t;

/// Scores at the readout position. Values may be logits or log-probs;
/// every derived quantity is a difference or an argmax, so the two are
/// interchangeable.
struct LogprobRecord {
  std::string request_id;
  std::map<TokenId, double> entries;
  std::vector<TokenId> candidate_ids;
  TokenId target_id = 0;
  bool is_logit = false;

  bool operator==(const LogprobRecord&) const = default;
};

enum class Verdict { kCorrect, kStage2A, kStage2B };

std::string_view to_string(Verdict v);
Verdict verdict_from_string(std::string_view s);

struct StageOutcome {
  std::string request_id;
  TokenId target = 0;
  TokenId top_token = 0;       // argmax over all scored tokens
  TokenId best_candidate = 0;  // argmax over the candidate set
  /// Unavailable when the record holds no non-candidate token.
  std::optional<double> gate_gap;
  /// Unavailable when |C| == 1.
  std::optional<double> value_gap;
  Verdict verdict = Verdict::kCorrect;
  /// An argmax (global or over candidates) was decided by the token-id
  /// tie-break.
  bool tie = false;

  bool operator==(const StageOutcome&) const = default;
};

struct StageSummary {
  std::uint64_t n = 0;
  std::uint64_t correct = 0;
  std::uint64_t candidate_correct = 0;
  std::uint64_t errors = 0;
  std::uint64_t stage_2a = 0;
  std::uint64_t stage_2b = 0;
  std::uint64_t ties = 0;
  std::uint64_t gate_unavailable = 0;

  double acc = 0.0;
  WilsonInterval acc_ci;
  double cand_acc = 0.0;
  WilsonInterval cand_acc_ci;
  /// Fractions of errors; absent when there are no errors.
  std::optional<double> frac_2a;
  std::optional<double> frac_2b;
  std::optional<double> mean_gate_gap;
  std::optional<double> mean_value_gap;
};

/// Ties at an argmax go to the lowest token id.
StageOutcome classify(const LogprobRecord& record);

StageSummary aggregate(std::span<const StageOutcome> outcomes,
                       double confidence = 0.95);

/// Fano lower bound on I(V;Y) from candidate accuracy; 0 below chance.
Nats mi_bound_from_cand_acc(double cand_acc, std::size_t alphabet_size);

}  // namespace routing_audit
