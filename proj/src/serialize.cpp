// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The routing-audit Authors

#include "routing_audit/serialize.hpp"

#include <fstream>
#include <sstream>
#include <system_error>

#include "routing_audit/error.hpp"
#include "routing_audit/vocabulary.hpp"

namespace routing_audit {

namespace {

template <class T>
Json opt_json(const std::optional<T>& v) {
  return v ? Json(*v) : Json(nullptr);
}

template <class T>
std::optional<T> opt_from(const Json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  return j.at(key).get<T>();
}

}  // namespace

Json divergence_json(const Divergence& d) {
  return d.is_infinite() ? Json("inf") : Json(d.nats().value());
}

Json to_json(const WilsonInterval& ci) {
  return Json{{"successes", ci.successes}, {"n", ci.n},         {"estimate", ci.estimate},
              {"lower", ci.lower},         {"upper", ci.upper}, {"confidence", ci.confidence}};
}

Json to_json(const LogprobRecord& r) {
  Json entries = Json::array();
  for (const auto& [id, z] : r.entries) entries.push_back(Json::array({id, z}));
  return Json{{"request_id", r.request_id},
              {"target_id", r.target_id},
              {"candidate_ids", r.candidate_ids},
              {"is_logit", r.is_logit},
              {"entries", std::move(entries)}};
}

LogprobRecord record_from_json(const Json& j) {
  LogprobRecord r;
  r.request_id = j.at("request_id").get<std::string>();
  r.target_id = j.at("target_id").get<TokenId>();
  r.candidate_ids = j.at("candidate_ids").get<std::vector<TokenId>>();
  r.is_logit = j.value("is_logit", false);
  for (const auto& e : j.at("entries")) {
    r.entries[e.at(0).get<TokenId>()] = e.at(1).get<double>();
  }
  return r;
}

Json to_json(const StageOutcome& o) {
  return Json{{"request_id", o.request_id},
              {"target", o.target},
              {"top_token", o.top_token},
              {"best_candidate", o.best_candidate},
              {"gate_gap", opt_json(o.gate_gap)},
              {"value_gap", opt_json(o.value_gap)},
              {"verdict", std::string(to_string(o.verdict))},
              {"tie", o.tie}};
}

StageOutcome outcome_from_json(const Json& j) {
  StageOutcome o;
  o.request_id = j.at("request_id").get<std::string>();
  o.target = j.at("target").get<TokenId>();
  o.top_token = j.at("top_token").get<TokenId>();
  o.best_candidate = j.at("best_candidate").get<TokenId>();
  o.gate_gap = opt_from<double>(j, "gate_gap");
  o.value_gap = opt_from<double>(j, "value_gap");
  o.verdict = verdict_from_string(j.at("verdict").get<std::string>());
  o.tie = j.value("tie", false);
  return o;
}

Json to_json(const StageSummary& s) {
  return Json{{"n", s.n},
              {"correct", s.correct},
              {"candidate_correct", s.candidate_correct},
              {"errors", s.errors},
              {"stage_2a", s.stage_2a},
              {"stage_2b", s.stage_2b},
              {"ties", s.ties},
              {"gate_unavailable", s.gate_unavailable},
              {"acc", to_json(s.acc_ci)},
              {"cand_acc", to_json(s.cand_acc_ci)},
              {"frac_2a", opt_json(s.frac_2a)},
              {"frac_2b", opt_json(s.frac_2b)},
              {"mean_gate_gap", opt_json(s.mean_gate_gap)},
              {"mean_value_gap", opt_json(s.mean_value_gap)}};
}

Json to_json(const TaskInstance& inst) {
  const auto& vocab = Vocabulary::standard();
  const auto texts = [&](const std::vector<TokenId>& ids) {
    std::vector<std::string> out;
    for (TokenId t : ids) out.push_back(vocab.text(t));
    return out;
  };
  Json spans = Json::array();
  for (const auto& s : inst.spans) {
    spans.push_back(Json{{"label", s.label},
                         {"kind", std::string(to_string(s.kind))},
                         {"start", s.start},
                         {"end", s.end},
                         {"value_start", s.value_start},
                         {"value_end", s.value_end},
                         {"content", s.content}});
  }
  Json segments = Json::array();
  for (const auto& seg : inst.filler_segments) {
    segments.push_back(Json::array({seg.start, seg.end}));
  }
  Json plan = nullptr;
  if (inst.checkpoint_plan) {
    plan = Json{{"every", inst.checkpoint_plan->every},
                {"mode", std::string(to_string(inst.checkpoint_plan->mode))}};
  }
  Json meta{{"base_length", inst.metadata.base_length},
            {"decoys_placed", inst.metadata.decoys_placed},
            {"sprinkled", inst.metadata.sprinkled},
            {"checkpoints_inserted", inst.metadata.checkpoints_inserted},
            {"scrubbed_with", inst.metadata.scrubbed_with
                                  ? Json(std::string(to_string(*inst.metadata.scrubbed_with)))
                                  : Json(nullptr)},
            {"warnings", inst.metadata.warnings}};
  return Json{{"id", inst.id},
              {"task", std::string(to_string(inst.task))},
              {"k", inst.k},
              {"filler", std::string(to_string(inst.filler))},
              {"decoy_reps", inst.decoy_reps},
              {"seed", inst.seed},
              {"rendered", inst.rendered()},
              {"spans", std::move(spans)},
              {"target", vocab.text(inst.target)},
              {"competitor", vocab.text(inst.competitor)},
              {"candidates", texts(inst.candidates)},
              {"checkpoint_plan", std::move(plan)},
              {"tokens", inst.tokens},
              {"filler_segments", std::move(segments)},
              {"query_start", inst.query_start},
              {"metadata", std::move(meta)}};
}

TaskInstance instance_from_json(const Json& j) {
  const auto& vocab = Vocabulary::standard();
  TaskInstance inst;
  inst.id = j.at("id").get<std::string>();
  inst.task = task_from_string(j.at("task").get<std::string>());
  inst.k = j.at("k").get<std::size_t>();
  inst.filler = filler_from_string(j.at("filler").get<std::string>());
  inst.decoy_reps = j.value("decoy_reps", std::size_t{0});
  inst.seed = j.at("seed").get<std::uint64_t>();
  if (j.contains("tokens")) {
    inst.tokens = j.at("tokens").get<std::vector<TokenId>>();
  } else {
    for (const auto& t : tokenize(j.at("rendered").get<std::string>())) {
      inst.tokens.push_back(vocab.id(t));
    }
  }
  for (const auto& s : j.at("spans")) {
    EvidenceSpan e;
    e.label = s.at("label").get<std::string>();
    e.kind = span_kind_from_string(s.at("kind").get<std::string>());
    e.start = s.at("start").get<std::size_t>();
    e.end = s.at("end").get<std::size_t>();
    e.value_start = s.at("value_start").get<std::size_t>();
    e.value_end = s.at("value_end").get<std::size_t>();
    e.content = s.at("content").get<std::string>();
    if (e.end > inst.tokens.size() || e.value_end > e.end || e.value_start < e.start) {
      throw_domain("span '" + e.label + "' of instance '" + inst.id + "' is out of range");
    }
    inst.spans.push_back(std::move(e));
  }
  if (j.contains("filler_segments")) {
    for (const auto& seg : j.at("filler_segments")) {
      inst.filler_segments.push_back({seg.at(0).get<std::size_t>(), seg.at(1).get<std::size_t>()});
    }
  }
  inst.query_start = j.value("query_start", std::size_t{0});
  inst.target = vocab.id(j.at("target").get<std::string>());
  inst.competitor = vocab.id(j.at("competitor").get<std::string>());
  for (const auto& c : j.at("candidates")) inst.candidates.push_back(vocab.id(c.get<std::string>()));
  if (j.contains("checkpoint_plan") && !j.at("checkpoint_plan").is_null()) {
    const auto& p = j.at("checkpoint_plan");
    inst.checkpoint_plan = CheckpointPlan{p.at("every").get<std::size_t>(),
                                          checkpoint_mode_from_string(p.at("mode").get<std::string>())};
  }
  if (j.contains("metadata")) {
    const auto& m = j.at("metadata");
    inst.metadata.base_length = m.value("base_length", std::size_t{0});
    inst.metadata.decoys_placed = m.value("decoys_placed", std::size_t{0});
    inst.metadata.sprinkled = m.value("sprinkled", std::size_t{0});
    inst.metadata.checkpoints_inserted = m.value("checkpoints_inserted", std::size_t{0});
    if (m.contains("scrubbed_with") && !m.at("scrubbed_with").is_null()) {
      inst.metadata.scrubbed_with =
          null_operator_from_string(m.at("scrubbed_with").get<std::string>());
    }
    inst.metadata.warnings = m.value("warnings", std::vector<std::string>{});
  }
  return inst;
}

namespace {

Json certificate_json(const BudgetCertificate& c) {
  Json bits = Json::object();
  for (const auto& [name, b] : c.bits) {
    bits[name] = Json{{"req_bits", divergence_json(b.req_bits)},
                      {"obs_bits", divergence_json(b.obs_bits)},
                      {"verdict", b.pass ? "PASS" : "FLAG"}};
  }
  Json p0 = Json::object();
  for (const auto& [name, p] : c.p0_by_null) p0[name] = p;
  return Json{{"p1", c.p1},
              {"p0_by_null", std::move(p0)},
              {"p0_min", c.p0_min},
              {"p0_max", c.p0_max},
              {"threshold", c.threshold},
              {"threshold_kind", std::string(to_string(c.threshold_kind))},
              {"bits", std::move(bits)},
              {"worst_null", c.worst_null},
              {"req_bits", divergence_json(c.req_bits)},
              {"obs_bits", divergence_json(c.obs_bits)},
              {"verdict", std::string(to_string(c.verdict))},
              {"incomplete", c.incomplete}};
}

}  // namespace

Json to_json(const BudgetCertificate& c) { return certificate_json(c); }

Json to_json(const TraceAudit& a) {
  Json steps = Json::array();
  for (const auto& s : a.steps) {
    Json step{{"index", s.index}};
    if (s.certificate) {
      step["certificate"] = certificate_json(*s.certificate);
    } else {
      step["unauditable"] = s.unauditable_reason;
    }
    steps.push_back(std::move(step));
  }
  return Json{{"trace_id", a.trace_id},
              {"verdict", a.audited == 0 ? "UNAUDITABLE" : (a.pass ? "PASS" : "FLAG")},
              {"audited", a.audited},
              {"flagged_steps", a.flagged_steps},
              {"outcome_label", opt_json(a.outcome_label)},
              {"steps", std::move(steps)}};
}

Json to_json(const AuditSummary& s) {
  Json p0 = Json::object();
  for (const auto& [name, v] : s.mean_p0) p0[name] = v;
  return Json{{"n", s.n},
              {"passed", s.passed},
              {"unauditable_traces", s.unauditable_traces},
              {"pass_rate", s.pass_rate},
              {"acc_pass", opt_json(s.acc_pass)},
              {"acc_flag", opt_json(s.acc_flag)},
              {"lift_pp", opt_json(s.lift_pp)},
              {"mean_p1", opt_json(s.mean_p1)},
              {"mean_p0", std::move(p0)},
              {"mean_p0_min", opt_json(s.mean_p0_min)}};
}

Json to_json(const ContractionReport& r) {
  Json profile = Json::array();
  for (const auto& v : r.profile) profile.push_back(v.value());
  return Json{{"initial_mi", r.initial_mi.value()},
              {"final_mi", r.final_mi.value()},
              {"profile", std::move(profile)},
              {"suffix_start", r.suffix_start},
              {"sdpi_mode", r.sdpi_mode},
              {"alpha_product", r.alpha_product},
              {"bound_holds", r.bound_holds},
              {"equality_expected", r.equality_expected},
              {"equality_holds", r.equality_holds},
              {"dpi_monotone", r.dpi_monotone},
              {"detail", r.detail}};
}

Trace trace_from_json(const Json& j) {
  Trace t;
  t.trace_id = j.at("trace_id").get<std::string>();
  t.outcome_label = opt_from<bool>(j, "outcome_label");
  t.context = j.value("context", std::string());
  if (j.contains("span_text")) {
    t.span_text = j.at("span_text").get<std::map<std::string, std::string>>();
  }
  for (const auto& s : j.at("steps")) {
    TraceStep step;
    step.claim = s.value("claim", std::string());
    if (s.contains("spans")) step.cited_spans = s.at("spans").get<std::vector<std::string>>();
    step.confidence = opt_from<double>(s, "confidence");
    step.p1 = opt_from<double>(s, "p1");
    if (s.contains("p0") && !s.at("p0").is_null()) {
      step.p0_by_null = s.at("p0").get<std::map<std::string, double>>();
    }
    t.steps.push_back(std::move(step));
  }
  return t;
}

// ---------------------------------------------------------------------------

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::kIo, "cannot open " + path.string());
  std::ostringstream os;
  os << in.rdbuf();
  if (in.bad()) throw Error(ErrorKind::kIo, "cannot read " + path.string());
  return os.str();
}

void write_file_atomic(const std::filesystem::path& path, std::string_view data) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorKind::kIo, "cannot write " + tmp.string());
    out.write(data.data(), static_cast<std::streamsize>(data.size()));
    out.flush();
    if (!out) throw Error(ErrorKind::kIo, "cannot write " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw Error(ErrorKind::kIo, "cannot replace " + path.string() + ": " + ec.message());
}

std::vector<Json> read_jsonl(const std::filesystem::path& path) {
  const std::string text = read_file(path);
  std::vector<Json> docs;
  std::size_t pos = 0, line_no = 0;
  while (pos < text.size()) {
    std::size_t nl = text.find('\n', pos);
    if (nl == std::string::npos) nl = text.size();
    ++line_no;
    const std::string_view line(text.data() + pos, nl - pos);
    pos = nl + 1;
    if (line.find_first_not_of(" \t\r") == std::string_view::npos) continue;
    try {
      docs.push_back(Json::parse(line));
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorKind::kIo, path.string() + ":" + std::to_string(line_no) +
                                      ": invalid JSON: " + e.what());
    }
  }
  return docs;
}

std::string to_jsonl(const std::vector<Json>& docs) {
  std::string out;
  for (const auto& d : docs) {
    out += d.dump();
    out += '\n';
  }
  return out;
}

}  // namespace routing_audit
