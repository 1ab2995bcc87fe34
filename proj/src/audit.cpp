// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The routing-audit Authors

#include "routing_audit/audit.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "routing_audit/error.hpp"

namespace routing_audit {

std::string_view to_string(PriorMode m) {
  return m == PriorMode::kGreedy ? "greedy" : "renormalized";
}
std::string_view to_string(BudgetVerdict v) {
  return v == BudgetVerdict::kPass ? "PASS" : "FLAG";
}
std::string_view to_string(ThresholdKind k) {
  return k == ThresholdKind::kTau ? "tau" : "confidence";
}
std::string_view to_string(ConfidenceMode m) {
  switch (m) {
    case ConfidenceMode::kAuto: return "auto";
    case ConfidenceMode::kTau: return "tau";
    case ConfidenceMode::kConfidence: return "confidence";
  }
  return "unknown";
}

PriorMode prior_mode_from_string(std::string_view s) {
  if (s == "greedy") return PriorMode::kGreedy;
  if (s == "renormalized") return PriorMode::kRenormalized;
  throw_config("unknown pseudo-prior mode '" + std::string(s) + "'");
}
BudgetVerdict budget_verdict_from_string(std::string_view s) {
  if (s == "PASS") return BudgetVerdict::kPass;
  if (s == "FLAG") return BudgetVerdict::kFlag;
  throw_config("unknown verdict '" + std::string(s) + "'");
}
ThresholdKind threshold_kind_from_string(std::string_view s) {
  if (s == "tau") return ThresholdKind::kTau;
  if (s == "confidence") return ThresholdKind::kConfidence;
  throw_config("unknown threshold kind '" + std::string(s) + "'");
}
ConfidenceMode confidence_mode_from_string(std::string_view s) {
  if (s == "auto") return ConfidenceMode::kAuto;
  if (s == "tau") return ConfidenceMode::kTau;
  if (s == "confidence") return ConfidenceMode::kConfidence;
  throw_config("unknown confidence mode '" + std::string(s) + "'");
}

// ---------------------------------------------------------------------------

NullFamily::NullFamily(std::set<NullOperator> operators) : operators_(std::move(operators)) {
  if (operators_.empty()) throw_config("null family must not be empty");
}

NullFamily NullFamily::all() {
  return NullFamily({NullOperator::kRedactSpan, NullOperator::kDeleteSpan,
                     NullOperator::kMaskSameLen, NullOperator::kNoEvidence});
}

NullFamily NullFamily::parse(std::string_view names) {
  std::set<NullOperator> ops;
  std::string current;
  const auto flush = [&] {
    if (!current.empty()) ops.insert(null_operator_from_string(current));
    current.clear();
  };
  for (char c : names) {
    if (c == ',' || c == ' ') {
      flush();
    } else {
      current.push_back(c);
    }
  }
  flush();
  return NullFamily(std::move(ops));
}

std::vector<std::string> NullFamily::names() const {
  std::vector<std::string> out;
  for (auto op : operators_) out.emplace_back(to_string(op));
  return out;
}

// ---------------------------------------------------------------------------

namespace {

double target_probability(const LogprobRecord& rec, PriorMode mode) {
  if (mode == PriorMode::kGreedy) {
    return classify(rec).best_candidate == rec.target_id ? 1.0 : 0.0;
  }
  double peak = -std::numeric_limits<double>::infinity();
  for (TokenId c : rec.candidate_ids) {
    const auto it = rec.entries.find(c);
    if (it == rec.entries.end()) {
      throw_domain("record '" + rec.request_id + "' has no score for candidate " +
                   std::to_string(c));
    }
    peak = std::max(peak, it->second);
  }
  double total = 0.0;
  for (TokenId c : rec.candidate_ids) total += std::exp(rec.entries.at(c) - peak);
  return std::exp(rec.entries.at(rec.target_id) - peak) / total;
}

void check_probability(double p, const std::string& what) {
  if (!(p >= 0.0 && p <= 1.0)) throw_domain(what + " must lie in [0,1]");
}

}  // namespace

PseudoPrior pseudo_prior(Provider& provider, const TaskInstance& instance,
                         NullOperator op, PriorMode mode) {
  const TaskInstance scrubbed = scrub(instance, op);
  LogprobRecord rec;
  try {
    rec = provider.score(scrubbed);
  } catch (const std::exception& e) {
    throw Error(ErrorKind::kProvider,
                "pseudo-prior for instance '" + instance.id + "' failed: " + e.what());
  }
  return PseudoPrior{target_probability(rec, mode), mode, 1, std::nullopt};
}

PseudoPrior pseudo_prior(Provider& provider, std::span<const TaskInstance> instances,
                         NullOperator op, PriorMode mode, std::size_t max_parallel) {
  if (instances.empty()) throw_domain("pseudo-prior needs at least one instance");
  std::vector<TaskInstance> scrubbed;
  scrubbed.reserve(instances.size());
  for (const auto& inst : instances) scrubbed.push_back(scrub(inst, op));
  const BatchResult batch = score_batch(provider, scrubbed, max_parallel);
  if (!batch.failures.empty()) {
    const auto& f = batch.failures.front();
    throw Error(ErrorKind::kProvider, "pseudo-prior for instance '" +
                                          instances[f.index].id + "' failed: " + f.message);
  }
  double sum = 0.0;
  for (const auto& rec : batch.records) sum += target_probability(*rec, mode);
  PseudoPrior out;
  out.mode = mode;
  out.n = instances.size();
  if (mode == PriorMode::kGreedy) {
    out.ci = wilson_interval(static_cast<std::uint64_t>(std::llround(sum)), out.n);
    out.value = out.ci->estimate;
  } else {
    out.value = sum / static_cast<double>(out.n);
  }
  return out;
}

Envelope envelope_of(const std::map<std::string, double>& p0_by_null) {
  if (p0_by_null.empty()) throw_domain("envelope needs at least one null");
  Envelope env;
  env.p0_by_null = p0_by_null;
  env.p0_min = std::numeric_limits<double>::infinity();
  env.p0_max = -std::numeric_limits<double>::infinity();
  for (const auto& [name, p] : p0_by_null) {
    check_probability(p, "p0 for null '" + name + "'");
    env.p0_min = std::min(env.p0_min, p);
    env.p0_max = std::max(env.p0_max, p);
  }
  return env;
}

namespace {

template <class Measure>
Envelope envelope_impl(const NullFamily& family, Measure measure) {
  std::map<std::string, double> values;
  std::map<std::string, std::string> failures;
  for (auto op : family.operators()) {
    const std::string name(to_string(op));
    try {
      values[name] = measure(op);
    } catch (const std::exception& e) {
      failures[name] = e.what();
    }
  }
  Envelope env;
  if (!values.empty()) env = envelope_of(values);
  env.failures = std::move(failures);
  env.incomplete = !env.failures.empty();
  return env;
}

}  // namespace

Envelope envelope(Provider& provider, const TaskInstance& instance,
                  const NullFamily& family, PriorMode mode) {
  return envelope_impl(family, [&](NullOperator op) {
    return pseudo_prior(provider, instance, op, mode).value;
  });
}

Envelope envelope(Provider& provider, std::span<const TaskInstance> instances,
                  const NullFamily& family, PriorMode mode, std::size_t max_parallel) {
  return envelope_impl(family, [&](NullOperator op) {
    return pseudo_prior(provider, instances, op, mode, max_parallel).value;
  });
}

// ---------------------------------------------------------------------------

namespace {

int sign(double x) { return (x > 0.0) - (x < 0.0); }

// Budget comparison for one null.
bool null_passes(double p1, double p0, double threshold, const NullBits& b) {
  if (threshold == p0) return true;
  if (sign(p1 - p0) != sign(threshold - p0)) return false;
  if (b.obs_bits.is_infinite() && b.req_bits.is_infinite()) {
    return p0 == 0.0 ? p1 >= threshold : p1 <= threshold;
  }
  return b.obs_bits >= b.req_bits;
}

// ObsBits - ReqBits, with the infinite cases ordered consistently.
double margin(const NullBits& b) {
  constexpr double inf = std::numeric_limits<double>::infinity();
  if (b.obs_bits.is_infinite() && b.req_bits.is_infinite()) return 0.0;
  if (b.obs_bits.is_infinite()) return inf;
  if (b.req_bits.is_infinite()) return -inf;
  return b.obs_bits.nats().value() - b.req_bits.nats().value();
}

}  // namespace

BudgetCertificate budget_test(double p1, const std::map<std::string, double>& p0_by_null,
                              double threshold, ThresholdKind kind) {
  check_probability(p1, "p1");
  if (kind == ThresholdKind::kTau) {
    if (!(threshold > 0.0 && threshold < 1.0)) throw_domain("tau must lie in (0,1)");
  } else {
    check_probability(threshold, "claimed confidence");
  }
  const Envelope env = envelope_of(p0_by_null);

  BudgetCertificate cert;
  cert.p1 = p1;
  cert.p0_by_null = p0_by_null;
  cert.p0_min = env.p0_min;
  cert.p0_max = env.p0_max;
  cert.threshold = threshold;
  cert.threshold_kind = kind;

  bool all_pass = true;
  std::optional<std::pair<bool, double>> worst;
  for (const auto& [name, p0] : p0_by_null) {
    NullBits b{bits_to_trust(threshold, p0), kl_bernoulli(p1, p0), false};
    b.pass = null_passes(p1, p0, threshold, b);
    all_pass = all_pass && b.pass;
    const std::pair<bool, double> key{b.pass, margin(b)};
    if (!worst || key < *worst) {
      worst = key;
      cert.worst_null = name;
      cert.req_bits = b.req_bits;
      cert.obs_bits = b.obs_bits;
    }
    cert.bits.emplace(name, b);
  }
  cert.verdict = all_pass ? BudgetVerdict::kPass : BudgetVerdict::kFlag;
  return cert;
}

// ---------------------------------------------------------------------------

double lift_pp(double acc_pass, double acc_flag) { return 100.0 * (acc_pass - acc_flag); }

TraceAudit audit_trace(const Trace& trace, ConfidenceMode mode, double tau,
                       const std::optional<NullFamily>& family) {
  TraceAudit out;
  out.trace_id = trace.trace_id;
  out.outcome_label = trace.outcome_label;
  std::set<std::string> allowed;
  if (family) {
    for (auto& n : family->names()) allowed.insert(n);
  }

  for (std::size_t i = 0; i < trace.steps.size(); ++i) {
    const TraceStep& step = trace.steps[i];
    StepAudit sa;
    sa.index = i;

    std::map<std::string, double> p0;
    for (const auto& [name, p] : step.p0_by_null) {
      if (!family || allowed.contains(name)) p0.emplace(name, p);
    }
    std::optional<double> threshold;
    ThresholdKind kind = ThresholdKind::kTau;
    switch (mode) {
      case ConfidenceMode::kAuto:
        if (step.confidence) {
          threshold = step.confidence;
          kind = ThresholdKind::kConfidence;
        } else {
          threshold = tau;
        }
        break;
      case ConfidenceMode::kTau:
        threshold = tau;
        break;
      case ConfidenceMode::kConfidence:
        threshold = step.confidence;
        kind = ThresholdKind::kConfidence;
        break;
    }

    if (step.cited_spans.empty()) {
      sa.unauditable_reason = "no cited spans";
    } else if (!step.p1) {
      sa.unauditable_reason = "missing p1";
    } else if (p0.empty()) {
      sa.unauditable_reason = family ? "no p0 for any null in the family" : "missing p0";
    } else if (!threshold) {
      sa.unauditable_reason = "missing confidence and no tau";
    } else {
      try {
        sa.certificate = budget_test(*step.p1, p0, *threshold, kind);
      } catch (const Error& e) {
        if (e.kind() != ErrorKind::kDomain) throw;
        sa.unauditable_reason = e.what();
      }
    }
    if (sa.certificate) {
      ++out.audited;
      if (sa.certificate->verdict == BudgetVerdict::kFlag) ++out.flagged_steps;
    }
    out.steps.push_back(std::move(sa));
  }
  out.pass = out.audited > 0 && out.flagged_steps == 0;
  return out;
}

AuditSummary summarize(std::span<const TraceAudit> audits) {
  AuditSummary s;
  std::size_t pass_labelled = 0, pass_correct = 0, flag_labelled = 0, flag_correct = 0;
  std::size_t steps = 0;
  double p1_sum = 0.0, p0_min_sum = 0.0;
  std::map<std::string, std::pair<double, std::size_t>> p0_sums;

  for (const auto& a : audits) {
    if (a.audited == 0) {
      ++s.unauditable_traces;
      continue;
    }
    ++s.n;
    if (a.pass) ++s.passed;
    if (a.outcome_label) {
      auto& labelled = a.pass ? pass_labelled : flag_labelled;
      auto& correct = a.pass ? pass_correct : flag_correct;
      ++labelled;
      if (*a.outcome_label) ++correct;
    }
    for (const auto& step : a.steps) {
      if (!step.certificate) continue;
      ++steps;
      p1_sum += step.certificate->p1;
      p0_min_sum += step.certificate->p0_min;
      for (const auto& [name, p] : step.certificate->p0_by_null) {
        auto& [sum, count] = p0_sums[name];
        sum += p;
        ++count;
      }
    }
  }
  if (s.n > 0) s.pass_rate = static_cast<double>(s.passed) / static_cast<double>(s.n);
  if (pass_labelled > 0) {
    s.acc_pass = static_cast<double>(pass_correct) / static_cast<double>(pass_labelled);
  }
  if (flag_labelled > 0) {
    s.acc_flag = static_cast<double>(flag_correct) / static_cast<double>(flag_labelled);
  }
  if (s.acc_pass && s.acc_flag) s.lift_pp = lift_pp(*s.acc_pass, *s.acc_flag);
  if (steps > 0) {
    s.mean_p1 = p1_sum / static_cast<double>(steps);
    s.mean_p0_min = p0_min_sum / static_cast<double>(steps);
  }
  for (const auto& [name, sc] : p0_sums) {
    s.mean_p0[name] = sc.first / static_cast<double>(sc.second);
  }
  return s;
}

// ---------------------------------------------------------------------------

std::string scrub_context(std::string_view context,
                          const std::map<std::string, std::string>& span_text,
                          const std::vector<std::string>& labels, NullOperator op) {
  std::vector<std::string> selected;
  if (labels.empty() || op == NullOperator::kNoEvidence) {
    for (const auto& [label, text] : span_text) selected.push_back(label);
  } else {
    selected = labels;
  }
  std::string out(context);
  for (const auto& label : selected) {
    const auto it = span_text.find(label);
    if (it == span_text.end()) throw_domain("trace has no text for span '" + label + "'");
    const std::string& text = it->second;
    if (text.empty()) throw_domain("span '" + label + "' has empty text");
    std::string replacement;
    switch (op) {
      case NullOperator::kRedactSpan:
        replacement = "REDACTED";
        break;
      case NullOperator::kMaskSameLen: {
        std::size_t words = 0;
        bool in_word = false;
        for (char c : text) {
          const bool space = c == ' ' || c == '\n' || c == '\t' || c == '\r';
          if (!space && !in_word) ++words;
          in_word = !space;
        }
        for (std::size_t w = 0; w < words; ++w) replacement += w ? " MASK" : "MASK";
        break;
      }
      case NullOperator::kDeleteSpan:
      case NullOperator::kNoEvidence:
        break;
    }
    std::size_t pos = out.find(text);
    if (pos == std::string::npos) {
      throw_domain("span '" + label + "' text does not occur in the context");
    }
    while (pos != std::string::npos) {
      out.replace(pos, text.size(), replacement);
      pos = out.find(text, pos + replacement.size());
    }
  }
  return out;
}

void fetch_probabilities(Provider& provider, Trace& trace, const NullFamily& family) {
  for (auto& step : trace.steps) {
    if (step.cited_spans.empty()) continue;
    if (trace.context.empty()) {
      throw_config("trace '" + trace.trace_id + "' needs a context for live verification");
    }
    if (!step.p1) step.p1 = provider.verify(step.claim, trace.context);
    for (auto op : family.operators()) {
      const std::string name(to_string(op));
      if (step.p0_by_null.contains(name)) continue;
      const std::string scrubbed =
          scrub_context(trace.context, trace.span_text, step.cited_spans, op);
      step.p0_by_null[name] = provider.verify(step.claim, scrubbed);
    }
  }
}

ProbeCertificate probe_comparator(Nats probe_mi_lower, Nats used_mi_lower, bool proxy) {
  ProbeCertificate c;
  c.unused_lower = probe_mi_lower.value() - used_mi_lower.value();
  c.certified = c.unused_lower > 0.0;
  c.proxy = proxy;
  return c;
}

}  // namespace routing_audit
