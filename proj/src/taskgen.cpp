// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The routing-audit Authors

#include "routing_audit/taskgen.hpp"

#include <algorithm>
#include <array>
#include <utility>

#include "routing_audit/error.hpp"
#include "routing_audit/rng.hpp"
#include "routing_audit/vocabulary.hpp"

namespace routing_audit {

namespace {

template <class E, std::size_t N>
E parse_enum(std::string_view s, const std::array<std::pair<std::string_view, E>, N>& names,
             const char* what) {
  for (const auto& [name, value] : names) {
    if (name == s) return value;
  }
  throw_config(std::string("unknown ") + what + " '" + std::string(s) + "'");
}

template <class E, std::size_t N>
std::string_view enum_name(E e, const std::array<std::pair<std::string_view, E>, N>& names) {
  for (const auto& [name, value] : names) {
    if (value == e) return name;
  }
  return "unknown";
}

constexpr std::array<std::pair<std::string_view, TaskKind>, 3> kTaskNames{{
    {"competing_vars", TaskKind::kCompetingVars},
    {"primacy_recency", TaskKind::kPrimacyRecency},
    {"decoy_injection", TaskKind::kDecoyInjection},
}};
constexpr std::array<std::pair<std::string_view, FillerKind>, 4> kFillerNames{{
    {"repeat", FillerKind::kRepeat},
    {"coherent", FillerKind::kCoherent},
    {"random", FillerKind::kRandom},
    {"decoy_heavy", FillerKind::kDecoyHeavy},
}};
constexpr std::array<std::pair<std::string_view, CheckpointMode>, 3> kModeNames{{
    {"oracle", CheckpointMode::kOracle},
    {"sham", CheckpointMode::kSham},
    {"wrong", CheckpointMode::kWrong},
}};
constexpr std::array<std::pair<std::string_view, NullOperator>, 4> kNullNames{{
    {"redact_span", NullOperator::kRedactSpan},
    {"delete_span", NullOperator::kDeleteSpan},
    {"mask_same_len", NullOperator::kMaskSameLen},
    {"no_evidence", NullOperator::kNoEvidence},
}};
constexpr std::array<std::pair<std::string_view, SpanKind>, 2> kSpanKindNames{{
    {"binding", SpanKind::kBinding},
    {"checkpoint", SpanKind::kCheckpoint},
}};

const Vocabulary& vocab() { return Vocabulary::standard(); }

TokenId tok(std::string_view text) { return vocab().id(text); }

// Key tokens as they appear in statements and checkpoints.
std::vector<TokenId> query_key(TaskKind task) {
  switch (task) {
    case TaskKind::kCompetingVars: return {tok("KEY1")};
    case TaskKind::kPrimacyRecency: return {tok("FIRST"), tok("KEY")};
    case TaskKind::kDecoyInjection: return {tok("KEY")};
  }
  return {};
}

// Replace tokens [pos, pos+erase) by `insert`, keeping every index in the
// instance consistent. Spans fully inside the erased range must be removed
// by the caller first.
void splice(TaskInstance& inst, std::size_t pos, std::size_t erase,
            const std::vector<TokenId>& insert) {
  const auto delta = static_cast<std::ptrdiff_t>(insert.size()) -
                     static_cast<std::ptrdiff_t>(erase);
  const std::size_t cut_end = pos + erase;
  const auto shift = [delta](std::size_t& i) {
    i = static_cast<std::size_t>(static_cast<std::ptrdiff_t>(i) + delta);
  };

  inst.tokens.erase(inst.tokens.begin() + static_cast<std::ptrdiff_t>(pos),
                    inst.tokens.begin() + static_cast<std::ptrdiff_t>(cut_end));
  inst.tokens.insert(inst.tokens.begin() + static_cast<std::ptrdiff_t>(pos),
                     insert.begin(), insert.end());

  for (auto& s : inst.spans) {
    if (s.start >= cut_end) {
      shift(s.start);
      shift(s.end);
      shift(s.value_start);
      shift(s.value_end);
    } else if (s.start <= pos && s.end >= cut_end && s.end > pos) {
      shift(s.end);
      if (s.value_start <= pos && s.value_end >= cut_end) shift(s.value_end);
    } else if (s.end > pos) {
      throw Error(ErrorKind::kInvariant, "edit straddles span '" + s.label + "'");
    }
  }
  for (auto& seg : inst.filler_segments) {
    if (seg.start >= cut_end) {
      shift(seg.start);
      shift(seg.end);
    } else if (seg.start <= pos && seg.end >= cut_end) {
      shift(seg.end);
    }
  }
  if (inst.query_start >= cut_end) shift(inst.query_start);
}

struct FillerResult {
  std::vector<TokenId> tokens;
  std::size_t decoys = 0;
  std::size_t sprinkled = 0;
};

FillerResult make_filler(FillerKind kind, std::size_t k, bool tail,
                         TokenId competitor, std::size_t decoy_reps,
                         const std::vector<TokenId>& outside_pool,
                         const std::set<TokenId>& candidates, Rng& rng) {
  FillerResult r;
  const TokenId base = tok("the");
  switch (kind) {
    case FillerKind::kRepeat:
      r.tokens.assign(k, base);
      break;
    case FillerKind::kCoherent: {
      const auto para = vocab().paragraph();
      for (std::size_t i = 0; i < k; ++i) r.tokens.push_back(para[i % para.size()]);
      break;
    }
    case FillerKind::kRandom: {
      std::vector<TokenId> choices(vocab().filler_words().begin(),
                                   vocab().filler_words().end());
      for (TokenId w : vocab().candidate_words()) {
        if (!candidates.contains(w)) choices.push_back(w);
      }
      for (std::size_t i = 0; i < k; ++i) r.tokens.push_back(choices[rng.below(choices.size())]);
      break;
    }
    case FillerKind::kDecoyHeavy: {
      r.tokens.assign(k, base);
      std::vector<bool> taken(k, false);
      if (tail && k > 0) {
        const std::size_t reps = std::min(decoy_reps, k);
        for (std::size_t i = 0; i < reps; ++i) {
          const std::size_t at = (2 * i + 1) * k / (2 * reps);
          r.tokens[at] = competitor;
          taken[at] = true;
        }
        r.decoys = reps;
      }
      std::vector<std::size_t> free_positions;
      for (std::size_t i = 0; i < k; ++i) {
        if (!taken[i]) free_positions.push_back(i);
      }
      rng.shuffle(free_positions);
      const std::size_t sprinkle = std::min(k / kSprinklePeriod, free_positions.size());
      std::vector<TokenId> sprinkle_from = outside_pool;
      if (sprinkle_from.empty()) {
        sprinkle_from.assign(vocab().filler_words().begin(), vocab().filler_words().end());
      }
      for (std::size_t i = 0; i < sprinkle; ++i) {
        r.tokens[free_positions[i]] = sprinkle_from[rng.below(sprinkle_from.size())];
      }
      r.sprinkled = sprinkle;
      break;
    }
  }
  return r;
}

class Builder {
 public:
  explicit Builder(TaskInstance& inst) : inst_(inst) {}

  void words(std::initializer_list<std::string_view> ws) {
    for (auto w : ws) inst_.tokens.push_back(tok(w));
  }

  void binding(std::string label, std::vector<TokenId> key, TokenId value,
               SpanKind kind = SpanKind::kBinding) {
    EvidenceSpan s;
    s.label = std::move(label);
    s.kind = kind;
    s.start = inst_.tokens.size();
    inst_.tokens.insert(inst_.tokens.end(), key.begin(), key.end());
    words({"=", "["});
    s.value_start = inst_.tokens.size();
    inst_.tokens.push_back(value);
    s.value_end = inst_.tokens.size();
    words({"]"});
    s.end = inst_.tokens.size();
    s.content = vocab().text(value);
    inst_.spans.push_back(std::move(s));
  }

  void filler(const FillerResult& f) {
    FillerSegment seg{inst_.tokens.size(), 0};
    inst_.tokens.insert(inst_.tokens.end(), f.tokens.begin(), f.tokens.end());
    seg.end = inst_.tokens.size();
    inst_.filler_segments.push_back(seg);
    inst_.metadata.decoys_placed += f.decoys;
    inst_.metadata.sprinkled += f.sprinkled;
  }

  void query_start() { inst_.query_start = inst_.tokens.size(); }

 private:
  TaskInstance& inst_;
};

std::vector<TokenId> checkpoint_statement(const TaskInstance& inst,
                                          CheckpointMode mode) {
  std::vector<TokenId> out{tok("CHECKPOINT:")};
  std::vector<TokenId> key = query_key(inst.task);
  TokenId value = inst.target;
  if (mode == CheckpointMode::kSham) {
    key = {tok("NOTE")};
    value = tok("noted");
  } else if (mode == CheckpointMode::kWrong) {
    value = inst.competitor;
  }
  out.insert(out.end(), key.begin(), key.end());
  out.push_back(tok("="));
  out.push_back(tok("["));
  out.push_back(value);
  out.push_back(tok("]"));
  return out;
}

}  // namespace

// ---------------------------------------------------------------------------

std::string_view to_string(TaskKind t) { return enum_name(t, kTaskNames); }
std::string_view to_string(FillerKind f) { return enum_name(f, kFillerNames); }
std::string_view to_string(CheckpointMode m) { return enum_name(m, kModeNames); }
std::string_view to_string(NullOperator op) { return enum_name(op, kNullNames); }
std::string_view to_string(SpanKind k) { return enum_name(k, kSpanKindNames); }
TaskKind task_from_string(std::string_view s) { return parse_enum(s, kTaskNames, "task"); }
FillerKind filler_from_string(std::string_view s) {
  return parse_enum(s, kFillerNames, "filler type");
}
CheckpointMode checkpoint_mode_from_string(std::string_view s) {
  return parse_enum(s, kModeNames, "checkpoint mode");
}
NullOperator null_operator_from_string(std::string_view s) {
  return parse_enum(s, kNullNames, "null operator");
}
SpanKind span_kind_from_string(std::string_view s) {
  return parse_enum(s, kSpanKindNames, "span kind");
}

CandidatePool build_pool(std::uint64_t seed, std::size_t size) {
  const auto words = vocab().candidate_words();
  if (size < 2) throw_domain("candidate pool needs at least 2 entries");
  if (size > words.size()) {
    throw_domain("candidate pool of " + std::to_string(size) +
                 " exceeds the bundled word list (" + std::to_string(words.size()) + ")");
  }
  std::vector<TokenId> all(words.begin(), words.end());
  Rng rng(Rng::derive(seed, 0x706f6f6cULL));
  rng.shuffle(all);
  all.resize(size);
  return CandidatePool{seed, std::move(all)};
}

std::uint64_t trial_seed(std::uint64_t base_seed, std::size_t trial) {
  return Rng::derive(base_seed, trial);
}

std::string TaskInstance::rendered() const { return detokenize(token_texts()); }

std::vector<std::string> TaskInstance::token_texts() const {
  std::vector<std::string> out;
  out.reserve(tokens.size());
  for (TokenId t : tokens) out.push_back(vocab().text(t));
  return out;
}

const EvidenceSpan* TaskInstance::find_span(std::string_view label) const {
  for (const auto& s : spans) {
    if (s.label == label) return &s;
  }
  return nullptr;
}

std::vector<std::string> TaskInstance::target_span_labels() const {
  std::vector<std::string> out;
  const std::string& t = vocab().text(target);
  for (const auto& s : spans) {
    if (s.content == t) out.push_back(s.label);
  }
  return out;
}

TaskInstance generate(const CandidatePool& pool, const GenerateParams& p) {
  const std::size_t required = p.task == TaskKind::kPrimacyRecency ? 3 : 2;
  if (p.n_distractors + required > pool.tokens.size()) {
    throw_domain("need " + std::to_string(p.n_distractors + required) +
                 " candidates but the pool has " + std::to_string(pool.tokens.size()));
  }

  TaskInstance inst;
  inst.task = p.task;
  inst.k = p.k;
  inst.filler = p.filler;
  inst.decoy_reps = p.decoy_reps;
  inst.seed = p.seed;
  inst.id = std::string(to_string(p.task)) + "/k" + std::to_string(p.k) + "/" +
            std::string(to_string(p.filler)) + "/d" + std::to_string(p.decoy_reps) +
            "/s" + std::to_string(p.seed);

  Rng choice(Rng::derive(p.seed, 0));
  std::vector<TokenId> order = pool.tokens;
  choice.shuffle(order);
  inst.target = order[0];
  inst.competitor = order[1];
  const TokenId middle = order[2];  // primacy_recency's second assignment
  const std::size_t picked = required + p.n_distractors;
  inst.candidates.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(picked));
  choice.shuffle(inst.candidates);
  const std::set<TokenId> cand_set(inst.candidates.begin(), inst.candidates.end());
  const std::vector<TokenId> outside(order.begin() + static_cast<std::ptrdiff_t>(picked),
                                     order.end());

  std::size_t segment = 0;
  const auto filler = [&](bool tail) {
    Rng rng(Rng::derive(p.seed, 1 + segment++));
    return make_filler(p.filler, p.k, tail, inst.competitor, p.decoy_reps, outside,
                       cand_set, rng);
  };

  Builder b(inst);
  switch (p.task) {
    case TaskKind::kCompetingVars:
      b.binding("KEY1", {tok("KEY1")}, inst.target);
      b.filler(filler(false));
      b.binding("KEY2", {tok("KEY2")}, inst.competitor);
      b.filler(filler(true));
      b.query_start();
      b.words({"What", "is", "KEY1", "?", "KEY1", "=", "["});
      break;
    case TaskKind::kPrimacyRecency:
      b.binding("KEY#1", {tok("KEY")}, inst.target);
      b.filler(filler(false));
      b.binding("KEY#2", {tok("KEY")}, middle);
      b.filler(filler(false));
      b.binding("KEY#3", {tok("KEY")}, inst.competitor);
      b.filler(filler(true));
      b.query_start();
      b.words({"What", "was", "the", "FIRST", "value", "of", "KEY", "?", "KEY", "=", "["});
      break;
    case TaskKind::kDecoyInjection:
      b.binding("KEY", {tok("KEY")}, inst.target);
      b.filler(filler(true));
      b.query_start();
      b.words({"What", "is", "KEY", "?", "KEY", "=", "["});
      break;
  }
  if (p.filler == FillerKind::kDecoyHeavy && p.decoy_reps > p.k) {
    inst.metadata.warnings.push_back("decoy_reps exceeds k; placed " +
                                     std::to_string(inst.metadata.decoys_placed));
  }
  inst.metadata.base_length = inst.tokens.size();
  return inst;
}

TaskInstance insert_checkpoints(const TaskInstance& instance,
                                const CheckpointPlan& plan) {
  if (plan.every == 0) throw_domain("checkpoint interval must be positive");
  if (instance.filler_segments.empty()) {
    throw_domain("instance has no filler to checkpoint");
  }
  TaskInstance out = instance;
  const FillerSegment tail = out.filler_segments.back();
  const std::size_t length = tail.end - tail.start;
  const std::size_t count = length / plan.every;
  if (count == 0) {
    out.metadata.warnings.push_back("checkpoint interval " + std::to_string(plan.every) +
                                    " exceeds tail filler length " +
                                    std::to_string(length) + "; none inserted");
  }
  const auto statement = checkpoint_statement(out, plan.mode);
  for (std::size_t j = count; j >= 1; --j) {
    const std::size_t pos = tail.start + j * plan.every;
    splice(out, pos, 0, statement);
    EvidenceSpan s;
    s.label = "CHK" + std::to_string(j);
    s.kind = SpanKind::kCheckpoint;
    s.start = pos;
    s.end = pos + statement.size();
    s.value_start = s.end - 2;
    s.value_end = s.end - 1;
    s.content = vocab().text(statement[s.value_start - pos]);
    out.spans.push_back(std::move(s));
  }
  std::sort(out.spans.begin(), out.spans.end(),
            [](const EvidenceSpan& a, const EvidenceSpan& b) { return a.start < b.start; });
  out.checkpoint_plan = plan;
  out.metadata.checkpoints_inserted += count;
  out.id += "/chk-" + std::string(to_string(plan.mode)) + "-" + std::to_string(plan.every);
  return out;
}

TaskInstance scrub(const TaskInstance& instance, NullOperator op,
                   const std::vector<std::string>& labels) {
  TaskInstance out = instance;
  std::vector<std::string> selected;
  if (op == NullOperator::kNoEvidence || labels.empty()) {
    for (const auto& s : out.spans) selected.push_back(s.label);
  } else {
    for (const auto& l : labels) {
      if (!out.find_span(l)) {
        throw_domain("instance '" + out.id + "' has no span labelled '" + l + "'");
      }
      selected.push_back(l);
    }
  }

  // Right-to-left so earlier indices stay valid.
  std::vector<EvidenceSpan> targets;
  for (const auto& l : selected) targets.push_back(*out.find_span(l));
  std::sort(targets.begin(), targets.end(),
            [](const EvidenceSpan& a, const EvidenceSpan& b) { return a.start > b.start; });

  for (const auto& t : targets) {
    switch (op) {
      case NullOperator::kRedactSpan:
      case NullOperator::kMaskSameLen: {
        const bool redact = op == NullOperator::kRedactSpan;
        const std::size_t n = t.value_end - t.value_start;
        const std::vector<TokenId> placeholder =
            redact ? std::vector<TokenId>{tok("REDACTED")}
                   : std::vector<TokenId>(n, tok("MASK"));
        splice(out, t.value_start, n, placeholder);
        for (auto& s : out.spans) {
          if (s.label != t.label) continue;
          s.value_end = s.value_start + placeholder.size();
          s.content.clear();
          for (std::size_t i = 0; i < placeholder.size(); ++i) {
            s.content += (i ? " " : "") + vocab().text(placeholder[i]);
          }
        }
        break;
      }
      case NullOperator::kDeleteSpan:
      case NullOperator::kNoEvidence:
        std::erase_if(out.spans, [&](const EvidenceSpan& s) { return s.label == t.label; });
        splice(out, t.start, t.end - t.start, {});
        break;
    }
  }
  out.metadata.scrubbed_with = op;
  out.id += "/" + std::string(to_string(op));
  return out;
}

}  // namespace routing_audit
