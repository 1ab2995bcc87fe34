// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The routing-audit Authors

/**
 * @file taskgen.hpp
 * @brief Deterministic long-context key/value binding prompts.
 *
 * A prompt has a binding region, k filler tokens between bindings, and a
 * bracket-style query whose last token is the readout position:
 *
 *   competing_vars:    KEY1 = [apple] <k> KEY2 = [banana] <k> What is KEY1? KEY1 = [
 *   primacy_recency:   KEY = [alpha] <k> KEY = [beta] <k> KEY = [gamma] <k>
 *                      What was the FIRST value of KEY? KEY = [
 *   decoy_injection:   KEY = [apple] <k> What is KEY? KEY = [
 *
 * Everything is a pure function of the parameters and seed.
 */

#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "routing_audit/stage_metrics.hpp"

namespace routing_audit {

enum class TaskKind { kCompetingVars, kPrimacyRecency, kDecoyInjection };
enum class FillerKind { kRepeat, kCoherent, kRandom, kDecoyHeavy };
enum class CheckpointMode { kOracle, kSham, kWrong };
enum class NullOperator { kRedactSpan, kDeleteSpan, kMaskSameLen, kNoEvidence };
enum class SpanKind { kBinding, kCheckpoint };

std::string_view to_string(TaskKind t);
std::string_view to_string(FillerKind f);
std::string_view to_string(CheckpointMode m);
std::string_view to_string(NullOperator op);
std::string_view to_string(SpanKind k);
TaskKind task_from_string(std::string_view s);
FillerKind filler_from_string(std::string_view s);
CheckpointMode checkpoint_mode_from_string(std::string_view s);
NullOperator null_operator_from_string(std::string_view s);
SpanKind span_kind_from_string(std::string_view s);

inline constexpr std::size_t kDefaultPoolSize = 56;
inline constexpr std::size_t kDefaultDistractors = 48;
inline constexpr std::size_t kDefaultDecoyReps = 12;
inline constexpr std::size_t kDefaultCheckpointEvery = 128;
/// One sprinkled random token per this many DECOY_HEAVY filler positions (2%).
inline constexpr std::size_t kSprinklePeriod = 50;

struct CandidatePool {
  std::uint64_t seed = 0;
  std::vector<TokenId> tokens;

  bool operator==(const CandidatePool&) const = default;
};

/// Deterministic pool drawn from the bundled word list.
CandidatePool build_pool(std::uint64_t seed, std::size_t size = kDefaultPoolSize);

/// A binding statement or checkpoint inside the token sequence. Indices are
/// half-open token positions; [value_start, value_end) is the bound content.
struct EvidenceSpan {
  std::string label;
  SpanKind kind = SpanKind::kBinding;
  std::size_t start = 0;
  std::size_t end = 0;
  std::size_t value_start = 0;
  std::size_t value_end = 0;
  std::string content;

  bool operator==(const EvidenceSpan&) const = default;
};

struct FillerSegment {
  std::size_t start = 0;
  std::size_t end = 0;

  bool operator==(const FillerSegment&) const = default;
};

struct CheckpointPlan {
  std::size_t every = kDefaultCheckpointEvery;
  CheckpointMode mode = CheckpointMode::kOracle;

  bool operator==(const CheckpointPlan&) const = default;
};

struct InstanceMetadata {
  std::size_t base_length = 0;
  std::size_t decoys_placed = 0;
  std::size_t sprinkled = 0;
  std::size_t checkpoints_inserted = 0;
  std::optional<NullOperator> scrubbed_with;
  std::vector<std::string> warnings;

  bool operator==(const InstanceMetadata&) const = default;
};

struct TaskInstance {
  std::string id;
  TaskKind task = TaskKind::kCompetingVars;
  std::size_t k = 0;
  FillerKind filler = FillerKind::kRepeat;
  std::size_t decoy_reps = 0;
  std::uint64_t seed = 0;

  std::vector<TokenId> tokens;
  std::vector<EvidenceSpan> spans;
  /// Filler segments in order; the last one is the tail next to the query.
  std::vector<FillerSegment> filler_segments;
  std::size_t query_start = 0;

  TokenId target = 0;
  TokenId competitor = 0;
  std::vector<TokenId> candidates;
  std::optional<CheckpointPlan> checkpoint_plan;
  InstanceMetadata metadata;

  std::string rendered() const;
  std::vector<std::string> token_texts() const;
  const EvidenceSpan* find_span(std::string_view label) const;
  /// Labels of spans whose bound content is the target.
  std::vector<std::string> target_span_labels() const;

  bool operator==(const TaskInstance&) const = default;
};

struct GenerateParams {
  TaskKind task = TaskKind::kCompetingVars;
  std::size_t k = 0;
  FillerKind filler = FillerKind::kDecoyHeavy;
  std::size_t decoy_reps = kDefaultDecoyReps;
  std::size_t n_distractors = kDefaultDistractors;
  std::uint64_t seed = 0;
};

TaskInstance generate(const CandidatePool& pool, const GenerateParams& params);

/// Per-trial seed shared by every condition, so conditions are paired.
std::uint64_t trial_seed(std::uint64_t base_seed, std::size_t trial);

/// Insert checkpoint statements every `plan.every` tokens of the tail filler.
TaskInstance insert_checkpoints(const TaskInstance& instance,
                                const CheckpointPlan& plan);

/// Structure-preserving evidence removal. An empty label list selects every
/// span; NO_EVIDENCE always removes every span.
TaskInstance scrub(const TaskInstance& instance, NullOperator op,
                   const std::vector<std::string>& labels = {});

}  // namespace routing_audit
