// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The routing-audit Authors

#include "routing_audit/stage_metrics.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "routing_audit/error.hpp"

namespace routing_audit {

std::string_view to_string(Verdict v) {
  switch (v) {
    case Verdict::kCorrect: return "correct";
    case Verdict::kStage2A: return "stage_2a";
    case Verdict::kStage2B: return "stage_2b";
  }
  return "unknown";
}

Verdict verdict_from_string(std::string_view s) {
  if (s == "correct") return Verdict::kCorrect;
  if (s == "stage_2a") return Verdict::kStage2A;
  if (s == "stage_2b") return Verdict::kStage2B;
  throw_domain("unknown verdict '" + std::string(s) + "'");
}

namespace {

struct Argmax {
  TokenId id = 0;
  double value = -INFINITY;
  bool found = false;
  bool tie = false;

  // Entries arrive in ascending id order, so a strict '>' keeps the lowest
  // id on ties.
  void offer(TokenId token, double v) {
    if (!found || v > value) {
      id = token;
      value = v;
      found = true;
      tie = false;
    } else if (v == value) {
      tie = true;
    }
  }
};

}  // namespace

StageOutcome classify(const LogprobRecord& record) {
  if (record.candidate_ids.empty()) throw_domain("candidate set is empty");
  const std::set<TokenId> candidates(record.candidate_ids.begin(),
                                     record.candidate_ids.end());
  if (candidates.size() != record.candidate_ids.size()) {
    throw_domain("candidate ids are not unique");
  }
  if (!candidates.contains(record.target_id)) {
    throw_domain("target is not in the candidate set");
  }
  for (TokenId c : candidates) {
    if (!record.entries.contains(c)) {
      throw_domain("record '" + record.request_id + "' has no score for candidate " +
                   std::to_string(c));
    }
  }

  Argmax global, best_cand, best_non_cand, best_wrong;
  for (const auto& [token, z] : record.entries) {
    if (!std::isfinite(z)) {
      throw_domain("record '" + record.request_id + "' has a non-finite score");
    }
    global.offer(token, z);
    if (candidates.contains(token)) {
      best_cand.offer(token, z);
      if (token != record.target_id) best_wrong.offer(token, z);
    } else {
      best_non_cand.offer(token, z);
    }
  }

  StageOutcome out;
  out.request_id = record.request_id;
  out.target = record.target_id;
  out.top_token = global.id;
  out.best_candidate = best_cand.id;
  out.tie = global.tie || best_cand.tie;
  if (best_non_cand.found) out.gate_gap = best_cand.value - best_non_cand.value;
  if (best_wrong.found) {
    out.value_gap = record.entries.at(record.target_id) - best_wrong.value;
  }

  if (out.top_token == record.target_id) {
    out.verdict = Verdict::kCorrect;
  } else if (candidates.contains(out.top_token)) {
    out.verdict = Verdict::kStage2B;
  } else {
    out.verdict = Verdict::kStage2A;
  }
  return out;
}

StageSummary aggregate(std::span<const StageOutcome> outcomes,
                       double confidence) {
  if (outcomes.empty()) throw_domain("cannot aggregate an empty outcome set");
  StageSummary s;
  s.n = outcomes.size();
  double gate_sum = 0.0, value_sum = 0.0;
  std::uint64_t gate_n = 0, value_n = 0;
  for (const auto& o : outcomes) {
    if (o.top_token == o.target) ++s.correct;
    if (o.best_candidate == o.target) ++s.candidate_correct;
    switch (o.verdict) {
      case Verdict::kCorrect: break;
      case Verdict::kStage2A: ++s.stage_2a; break;
      case Verdict::kStage2B: ++s.stage_2b; break;
    }
    if (o.tie) ++s.ties;
    if (o.gate_gap) {
      gate_sum += *o.gate_gap;
      ++gate_n;
    } else {
      ++s.gate_unavailable;
    }
    if (o.value_gap) {
      value_sum += *o.value_gap;
      ++value_n;
    }
  }
  s.errors = s.stage_2a + s.stage_2b;
  if (s.errors + s.correct != s.n) {
    throw Error(ErrorKind::kInvariant, "verdicts disagree with top-token accuracy");
  }
  s.acc_ci = wilson_interval(s.correct, s.n, confidence);
  s.acc = s.acc_ci.estimate;
  s.cand_acc_ci = wilson_interval(s.candidate_correct, s.n, confidence);
  s.cand_acc = s.cand_acc_ci.estimate;
  if (s.errors > 0) {
    s.frac_2a = static_cast<double>(s.stage_2a) / static_cast<double>(s.errors);
    s.frac_2b = static_cast<double>(s.stage_2b) / static_cast<double>(s.errors);
  }
  if (gate_n > 0) s.mean_gate_gap = gate_sum / static_cast<double>(gate_n);
  if (value_n > 0) s.mean_value_gap = value_sum / static_cast<double>(value_n);
  return s;
}

Nats mi_bound_from_cand_acc(double cand_acc, std::size_t alphabet_size) {
  if (!(cand_acc >= 0.0 && cand_acc <= 1.0)) {
    throw_domain("candidate accuracy must lie in [0,1]");
  }
  if (alphabet_size < 2) throw_domain("alphabet size must be >= 2");
  if (cand_acc < 1.0 / static_cast<double>(alphabet_size)) return Nats(0.0);
  return fano_lower_bound(alphabet_size, 1.0 - cand_acc);
}

}  // namespace routing_audit
