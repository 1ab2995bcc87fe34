// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The routing-audit Authors

/**
 * @file audit.hpp
 * @brief Pseudo-priors, null-family envelopes and bits-to-trust budget tests.
 *
 * A budget test asks whether the evidence moved the success probability far
 * enough: with p1 measured on the full context and p0 after a null operator
 * removes the evidence, a step passes against null ν when
 *
 *     KL(Ber(p1) || Ber(p0_ν)) >= KL(Ber(t) || Ber(p0_ν))
 *
 * where t is either a reliability target τ or the step's own claimed
 * confidence. Certification is worst case over the whole null family.
 */

#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "routing_audit/info_core.hpp"
#include "routing_audit/provider.hpp"
#include "routing_audit/taskgen.hpp"

namespace routing_audit {

inline constexpr double kDefaultTau = 0.75;

enum class PriorMode { kGreedy, kRenormalized };
enum class BudgetVerdict { kPass, kFlag };
enum class ThresholdKind { kTau, kConfidence };
enum class ConfidenceMode { kAuto, kTau, kConfidence };

std::string_view to_string(PriorMode m);
std::string_view to_string(BudgetVerdict v);
std::string_view to_string(ThresholdKind k);
std::string_view to_string(ConfidenceMode m);
PriorMode prior_mode_from_string(std::string_view s);
BudgetVerdict budget_verdict_from_string(std::string_view s);
ThresholdKind threshold_kind_from_string(std::string_view s);
ConfidenceMode confidence_mode_from_string(std::string_view s);

/// Nonempty set of structure-preserving null operators.
class NullFamily {
 public:
  explicit NullFamily(std::set<NullOperator> operators);
  static NullFamily all();
  /// Comma or space separated operator names.
  static NullFamily parse(std::string_view names);

  const std::set<NullOperator>& operators() const { return operators_; }
  std::vector<std::string> names() const;

 private:
  std::set<NullOperator> operators_;
};

struct PseudoPrior {
  double value = 0.0;
  PriorMode mode = PriorMode::kGreedy;
  std::size_t n = 0;
  /// Wilson interval, greedy batches only.
  std::optional<WilsonInterval> ci;
};

/// Target probability of the provider's candidate decision after scrubbing
/// every evidence span with `op`. GREEDY returns 0 or 1; RENORMALIZED
/// returns the softmax mass of the target over the candidate set.
PseudoPrior pseudo_prior(Provider& provider, const TaskInstance& instance,
                         NullOperator op, PriorMode mode = PriorMode::kGreedy);

/// Batch form: empirical greedy rate with a Wilson interval, or the mean
/// renormalized probability.
PseudoPrior pseudo_prior(Provider& provider, std::span<const TaskInstance> instances,
                         NullOperator op, PriorMode mode = PriorMode::kGreedy,
                         std::size_t max_parallel = 1);

struct Envelope {
  std::map<std::string, double> p0_by_null;
  double p0_min = 0.0;
  double p0_max = 0.0;
  /// Set when any operator failed; failures are listed, never dropped.
  bool incomplete = false;
  std::map<std::string, std::string> failures;
};

Envelope envelope(Provider& provider, const TaskInstance& instance,
                  const NullFamily& family, PriorMode mode = PriorMode::kGreedy);
Envelope envelope(Provider& provider, std::span<const TaskInstance> instances,
                  const NullFamily& family, PriorMode mode = PriorMode::kGreedy,
                  std::size_t max_parallel = 1);
/// Envelope of already measured pseudo-priors.
Envelope envelope_of(const std::map<std::string, double>& p0_by_null);

struct NullBits {
  Divergence req_bits;
  Divergence obs_bits;
  bool pass = false;

  bool operator==(const NullBits&) const = default;
};

struct BudgetCertificate {
  double p1 = 0.0;
  std::map<std::string, double> p0_by_null;
  double p0_min = 0.0;
  double p0_max = 0.0;
  double threshold = kDefaultTau;
  ThresholdKind threshold_kind = ThresholdKind::kTau;
  std::map<std::string, NullBits> bits;
  /// Null with the smallest ObsBits - ReqBits margin, failing nulls first.
  std::string worst_null;
  Divergence req_bits;
  Divergence obs_bits;
  BudgetVerdict verdict = BudgetVerdict::kFlag;
  bool incomplete = false;
};

/// PASS iff every null passes. Per null: ObsBits >= ReqBits, and the
/// evidence must move toward the threshold (p1 on the same side of p0 as
/// the threshold; nothing is required when the threshold equals p0).
BudgetCertificate budget_test(double p1, const std::map<std::string, double>& p0_by_null,
                              double threshold,
                              ThresholdKind kind = ThresholdKind::kTau);

struct TraceStep {
  std::string claim;
  std::vector<std::string> cited_spans;
  std::optional<double> confidence;
  std::optional<double> p1;
  std::map<std::string, double> p0_by_null;
};

/// A structured reasoning trace. `context` and `span_text` are only needed
/// when probabilities are fetched live.
struct Trace {
  std::string trace_id;
  std::vector<TraceStep> steps;
  std::optional<bool> outcome_label;
  std::string context;
  std::map<std::string, std::string> span_text;
};

struct StepAudit {
  std::size_t index = 0;
  std::optional<BudgetCertificate> certificate;
  /// Empty when the step was auditable.
  std::string unauditable_reason;
};

struct TraceAudit {
  std::string trace_id;
  std::vector<StepAudit> steps;
  std::size_t audited = 0;
  std::size_t flagged_steps = 0;
  /// A trace passes when it has an audited step and no flagged step.
  bool pass = false;
  std::optional<bool> outcome_label;
};

struct AuditSummary {
  std::size_t n = 0;  // traces with at least one audited step
  std::size_t passed = 0;
  std::size_t unauditable_traces = 0;
  double pass_rate = 0.0;
  std::optional<double> acc_pass;
  std::optional<double> acc_flag;
  std::optional<double> lift_pp;
  std::optional<double> mean_p1;
  std::map<std::string, double> mean_p0;
  std::optional<double> mean_p0_min;
};

/// 100 * (acc_pass - acc_flag).
double lift_pp(double acc_pass, double acc_flag);

/// Audit one trace. AUTO uses a step's confidence when present and `tau`
/// otherwise; TAU ignores confidences; CONFIDENCE requires them. A step
/// without p1, p0 or a usable threshold is reported as unauditable.
TraceAudit audit_trace(const Trace& trace, ConfidenceMode mode, double tau,
                       const std::optional<NullFamily>& family = std::nullopt);

AuditSummary summarize(std::span<const TraceAudit> audits);

/// Structure-preserving removal of the named span texts from a context.
std::string scrub_context(std::string_view context,
                          const std::map<std::string, std::string>& span_text,
                          const std::vector<std::string>& labels, NullOperator op);

/// Fill missing p1 / p0 values by querying the provider's verifier.
void fetch_probabilities(Provider& provider, Trace& trace, const NullFamily& family);

struct ProbeCertificate {
  /// Lower bound on I(V;f(H)) - I(V;Y), in nats.
  double unused_lower = 0.0;
  /// Positive bound: information present in the state but not used.
  bool certified = false;
  /// Inputs came from error-conditioned probes and are not formal bounds.
  bool proxy = false;
};

ProbeCertificate probe_comparator(Nats probe_mi_lower, Nats used_mi_lower,
                                  bool proxy = false);

}  // namespace routing_audit
