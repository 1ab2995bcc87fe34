// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The routing-audit Authors

#include "routing_audit/pipeline.hpp"

#include <cstdio>
#include <filesystem>
#include <functional>
#include <map>
#include <set>

#include "routing_audit/audit.hpp"
#include "routing_audit/channel_lab.hpp"
#include "routing_audit/provider.hpp"
#include "routing_audit/report.hpp"
#include "routing_audit/rng.hpp"
#include "routing_audit/stage_metrics.hpp"
#include "routing_audit/taskgen.hpp"

#ifndef ROUTING_AUDIT_VERSION
#define ROUTING_AUDIT_VERSION "unknown"
#endif

namespace routing_audit {

namespace fs = std::filesystem;

ExitCode exit_code_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kDomain:
    case ErrorKind::kConfig: return ExitCode::kConfig;
    case ErrorKind::kIo: return ExitCode::kIo;
    case ErrorKind::kProvider: return ExitCode::kProvider;
    case ErrorKind::kInvariant: return ExitCode::kInvariant;
  }
  return ExitCode::kOther;
}

namespace {

// Reads typed keys with defaults, records the effective value of every key
// and rejects keys nobody asked for.
class Config {
 public:
  explicit Config(const Json& in) : in_(in) {
    if (!in_.is_object()) throw_config("config must be a JSON object");
  }

  bool has(const std::string& key) const {
    return in_.contains(key) && !in_.at(key).is_null();
  }

  template <class T>
  T get(const std::string& key, T fallback) {
    used_.insert(key);
    T value = fallback;
    if (has(key)) value = convert<T>(key, in_.at(key));
    effective_[key] = value;
    return value;
  }

  template <class T>
  std::optional<T> opt(const std::string& key) {
    used_.insert(key);
    if (!has(key)) return std::nullopt;
    T value = convert<T>(key, in_.at(key));
    effective_[key] = value;
    return value;
  }

  /// Accepts an array, a scalar, or a space/comma separated string.
  template <class T>
  std::vector<T> list(const std::string& key, std::vector<T> fallback) {
    used_.insert(key);
    if (!has(key)) {
      effective_[key] = fallback;
      return fallback;
    }
    Json raw = in_.at(key);
    Json items = Json::array();
    if (raw.is_array()) {
      items = raw;
    } else if (raw.is_string()) {
      std::string cur;
      for (char c : raw.get<std::string>() + ",") {
        if (c == ',' || c == ' ') {
          if (!cur.empty()) items.push_back(cur);
          cur.clear();
        } else {
          cur.push_back(c);
        }
      }
    } else {
      items.push_back(raw);
    }
    std::vector<T> out;
    for (const auto& item : items) {
      if constexpr (std::is_arithmetic_v<T>) {
        if (item.is_string()) {
          try {
            out.push_back(static_cast<T>(std::stod(item.get<std::string>())));
            continue;
          } catch (const std::exception&) {
            throw_config("config key '" + key + "': '" + item.get<std::string>() +
                         "' is not a number");
          }
        }
      }
      out.push_back(convert<T>(key, item));
    }
    if (out.empty()) throw_config("config key '" + key + "' must not be empty");
    effective_[key] = out;
    return out;
  }

  void finish() const {
    for (const auto& [key, value] : in_.items()) {
      if (!used_.contains(key)) throw_config("unknown config key '" + key + "'");
    }
  }

  const Json& effective() const { return effective_; }

 private:
  template <class T>
  static T convert(const std::string& key, const Json& v) {
    try {
      if constexpr (std::is_unsigned_v<T> && !std::is_same_v<T, bool>) {
        if (v.is_number_integer() && v.get<std::int64_t>() < 0) {
          throw_config("config key '" + key + "' must be non-negative");
        }
        if (v.is_number_float()) throw_config("config key '" + key + "' must be an integer");
      }
      return v.get<T>();
    } catch (const nlohmann::json::exception&) {
      throw_config("config key '" + key + "' has the wrong type");
    }
  }

  const Json& in_;
  Json effective_ = Json::object();
  std::set<std::string> used_;
};

std::string hex8(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%08llx", static_cast<unsigned long long>(v & 0xffffffffULL));
  return buf;
}

std::string file_sha256(const fs::path& p) { return sha256_hex(read_file(p)); }

class Outputs {
 public:
  explicit Outputs(fs::path outdir) : outdir_(std::move(outdir)) {
    std::error_code ec;
    fs::create_directories(outdir_, ec);
    if (ec) throw Error(ErrorKind::kIo, "cannot create " + outdir_.string() + ": " + ec.message());
  }

  fs::path resolve(const std::optional<std::string>& explicit_path, std::string_view name) const {
    return explicit_path ? fs::path(*explicit_path) : outdir_ / name;
  }

  void write(const fs::path& path, std::string_view data) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    write_file_atomic(path, data);
    written_.emplace_back(path.generic_string(), sha256_hex(data));
  }

  void input(const fs::path& path) { inputs_.emplace_back(path.generic_string(), file_sha256(path)); }

  void manifest(std::string_view command, const Json& effective) {
    Json m;
    m["command"] = std::string(command);
    m["version"] = ROUTING_AUDIT_VERSION;
    m["config"] = effective;
    Json in = Json::array();
    for (const auto& [p, h] : inputs_) in.push_back(Json{{"path", p}, {"sha256", h}});
    Json out = Json::array();
    for (const auto& [p, h] : written_) out.push_back(Json{{"path", p}, {"sha256", h}});
    m["inputs"] = std::move(in);
    m["outputs"] = std::move(out);
    const fs::path path = outdir_ / (std::string(command) + ".manifest.json");
    write_file_atomic(path, m.dump(2) + "\n");
    manifest_path_ = path.generic_string();
  }

  Json listing() const {
    Json out = Json::array();
    for (const auto& [p, h] : written_) out.push_back(p);
    if (!manifest_path_.empty()) out.push_back(manifest_path_);
    return out;
  }

 private:
  fs::path outdir_;
  std::vector<std::pair<std::string, std::string>> inputs_;
  std::vector<std::pair<std::string, std::string>> written_;
  std::string manifest_path_;
};

// ---------------------------------------------------------------------------
// Provider configuration

struct ProviderSetup {
  ProviderSpec spec;
  std::size_t max_parallel = 4;
  std::string label;
};

ProviderSetup read_provider(Config& c) {
  ProviderSetup s;
  s.spec.kind = provider_kind_from_string(c.get<std::string>("provider", "simulated"));
  s.max_parallel = c.get<std::size_t>("max_parallel", 4);
  if (s.max_parallel == 0) throw_config("max_parallel must be positive");
  const std::string cache_dir = c.get<std::string>("cache_dir", ".routing_audit_cache");

  BiasParams& b = s.spec.bias;
  if (const auto bias = c.opt<Json>("bias")) {
    if (!bias->is_object()) throw_config("config key 'bias' must be an object");
    static const std::set<std::string> known = {
        "target_strength", "decay", "decoy_boost", "gate_offset", "noise",
        "non_candidates", "seed", "verifier_scale", "verifier_offset"};
    for (const auto& [key, value] : bias->items()) {
      if (!known.contains(key)) throw_config("unknown bias parameter '" + key + "'");
    }
    b.target_strength = bias->value("target_strength", b.target_strength);
    b.decay = bias->value("decay", b.decay);
    b.decoy_boost = bias->value("decoy_boost", b.decoy_boost);
    b.gate_offset = bias->value("gate_offset", b.gate_offset);
    b.noise = bias->value("noise", b.noise);
    b.non_candidates = bias->value("non_candidates", b.non_candidates);
    b.seed = bias->value("seed", b.seed);
    b.verifier_scale = bias->value("verifier_scale", b.verifier_scale);
    b.verifier_offset = bias->value("verifier_offset", b.verifier_offset);
  }

  s.spec.cache_file =
      c.get<std::string>("cache_file", (fs::path(cache_dir) / "records.jsonl").generic_string());

  HttpConfig& h = s.spec.http;
  h.endpoint = c.get<std::string>("endpoint", "");
  h.model = c.get<std::string>("model", "");
  h.api_key_env = c.get<std::string>("api_key_env", std::string(kDefaultApiKeyEnv));
  h.timeout_seconds = c.get<int>("timeout_seconds", h.timeout_seconds);
  h.top_logprobs = c.get<int>("top_logprobs", h.top_logprobs);
  h.retry.max_attempts = c.get<int>("max_attempts", h.retry.max_attempts);
  h.retry.initial_backoff_ms = c.get<int>("initial_backoff_ms", h.retry.initial_backoff_ms);
  h.max_parallel = s.max_parallel;
  h.cache_dir = cache_dir;

  switch (s.spec.kind) {
    case ProviderKind::kSimulated: s.label = "simulated"; break;
    case ProviderKind::kFileCache: s.label = "file_cache"; break;
    case ProviderKind::kHttp: s.label = "http:" + h.model; break;
  }
  return s;
}

// ---------------------------------------------------------------------------
// Instance generation

struct GenPlan {
  std::vector<TaskKind> tasks;
  std::vector<std::size_t> ks;
  std::vector<FillerKind> fillers;
  std::size_t trials = 100;
  std::size_t decoy_reps = kDefaultDecoyReps;
  std::size_t n_distractors = kDefaultDistractors;
  std::size_t pool_size = kDefaultPoolSize;
  std::uint64_t seed = 0;
};

GenPlan read_gen(Config& c) {
  GenPlan g;
  for (const auto& t : c.list<std::string>("tasks", {"competing_vars"})) {
    g.tasks.push_back(task_from_string(t));
  }
  g.ks = c.list<std::size_t>("k_values", {0, 256, 1024});
  for (const auto& f : c.list<std::string>("filler_types", {"decoy_heavy"})) {
    g.fillers.push_back(filler_from_string(f));
  }
  g.trials = c.get<std::size_t>("trials_per_condition", g.trials);
  if (g.trials == 0) throw_config("trials_per_condition must be positive");
  g.decoy_reps = c.get<std::size_t>("decoy_reps", g.decoy_reps);
  g.n_distractors = c.get<std::size_t>("n_distractors", g.n_distractors);
  g.pool_size = c.get<std::size_t>("pool_size", g.pool_size);
  g.seed = c.get<std::uint64_t>("seed", g.seed);
  return g;
}

std::vector<TaskInstance> generate_all(const GenPlan& g) {
  const CandidatePool pool = build_pool(g.seed, g.pool_size);
  std::vector<TaskInstance> out;
  for (auto task : g.tasks) {
    for (auto k : g.ks) {
      for (auto filler : g.fillers) {
        for (std::size_t t = 0; t < g.trials; ++t) {
          GenerateParams p;
          p.task = task;
          p.k = k;
          p.filler = filler;
          p.decoy_reps = g.decoy_reps;
          p.n_distractors = g.n_distractors;
          p.seed = trial_seed(g.seed, t);
          out.push_back(generate(pool, p));
        }
      }
    }
  }
  return out;
}

std::vector<TaskInstance> load_instances(const fs::path& path) {
  std::vector<TaskInstance> out;
  for (const auto& doc : read_jsonl(path)) {
    try {
      out.push_back(instance_from_json(doc));
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorKind::kIo, path.string() + ": malformed instance: " + e.what());
    }
  }
  if (out.empty()) throw Error(ErrorKind::kIo, path.string() + " holds no instances");
  return out;
}

std::string checkpoint_label(const TaskInstance& inst) {
  if (!inst.checkpoint_plan) return "none";
  return std::string(to_string(inst.checkpoint_plan->mode)) + "-" +
         std::to_string(inst.checkpoint_plan->every);
}

// Instances sharing task, k, filler and checkpointing form one condition.
struct Condition {
  ConditionKey key;
  std::size_t alphabet = 0;
  std::vector<std::size_t> members;
};

std::vector<Condition> group_conditions(const std::vector<TaskInstance>& instances,
                                        const std::string& provider_label) {
  std::map<std::string, Condition> by_key;
  std::vector<std::string> order;
  for (std::size_t i = 0; i < instances.size(); ++i) {
    const auto& inst = instances[i];
    ConditionKey key{provider_label, std::string(to_string(inst.task)), inst.k,
                     std::string(to_string(inst.filler)), checkpoint_label(inst), ""};
    const std::string id = key.to_string();
    auto [it, inserted] = by_key.try_emplace(id);
    if (inserted) {
      it->second.key = key;
      it->second.alphabet = inst.candidates.size();
      order.push_back(id);
    }
    it->second.members.push_back(i);
  }
  std::vector<Condition> out;
  for (const auto& id : order) {
    Condition c = by_key.at(id);
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (std::size_t i : c.members) h = Rng::derive(h, instances[i].seed);
    c.key.seeds = "n" + std::to_string(c.members.size()) + "-" + hex8(h);
    out.push_back(std::move(c));
  }
  return out;
}

Json condition_json(const ConditionKey& k, std::size_t alphabet) {
  return Json{{"provider", k.provider}, {"task", k.task},         {"k", k.k},
              {"filler", k.filler},     {"checkpoint", k.checkpoint}, {"seeds", k.seeds},
              {"m", alphabet}};
}

// ---------------------------------------------------------------------------
// Scoring and aggregation

struct ScoredRun {
  std::vector<ReportRow> rows;
  std::vector<Json> outcome_lines;
  std::vector<Json> record_lines;
  std::vector<BatchFailure> failures;
  std::map<std::string, std::vector<StageOutcome>> outcomes_by_key;
};

ScoredRun score_conditions(Provider& provider, const std::vector<TaskInstance>& instances,
                           const std::vector<Condition>& conditions, std::size_t max_parallel) {
  ScoredRun run;
  const BatchResult batch = score_batch(provider, instances, max_parallel);
  run.failures = batch.failures;
  for (const auto& cond : conditions) {
    std::vector<StageOutcome> outcomes;
    for (std::size_t i : cond.members) {
      if (!batch.records[i]) continue;
      const LogprobRecord& rec = *batch.records[i];
      run.record_lines.push_back(Json{{"key", score_cache_key(instances[i])},
                                      {"request_id", instances[i].id},
                                      {"record", to_json(rec)}});
      StageOutcome o = classify(rec);
      run.outcome_lines.push_back(
          Json{{"condition", condition_json(cond.key, cond.alphabet)}, {"outcome", to_json(o)}});
      outcomes.push_back(std::move(o));
    }
    if (outcomes.empty()) continue;
    run.rows.push_back(ReportRow{kReportSchemaVersion, cond.key, aggregate(outcomes), cond.alphabet});
    run.outcomes_by_key[cond.key.to_string()] = std::move(outcomes);
  }
  return run;
}

Json failures_json(const std::vector<BatchFailure>& failures) {
  Json out = Json::array();
  for (const auto& f : failures) {
    out.push_back(Json{{"index", f.index}, {"instance_id", f.instance_id}, {"message", f.message}});
  }
  return out;
}

Json rows_summary(const std::vector<ReportRow>& rows) {
  Json out = Json::array();
  for (const auto& r : rows) {
    Json j = condition_json(r.key, r.alphabet_size);
    j["summary"] = to_json(r.summary);
    out.push_back(std::move(j));
  }
  return out;
}

// Writes partial results and turns batch failures into a provider error.
void finish_with_failures(CommandResult& result, Outputs& out, const fs::path& outdir,
                          const std::vector<BatchFailure>& failures) {
  if (failures.empty()) return;
  std::vector<Json> lines;
  for (const auto& f : failures_json(failures)) lines.push_back(f);
  out.write(outdir / "failures.jsonl", to_jsonl(lines));
  result.exit_code = ExitCode::kProvider;
  result.summary["partial"] = true;
  result.summary["failures"] = failures_json(failures);
  result.summary["error"] = std::to_string(failures.size()) + " instance(s) failed to score; first: " +
                            failures.front().message;
}

// ---------------------------------------------------------------------------
// Commands

CommandResult cmd_gen(Config& c) {
  const GenPlan g = read_gen(c);
  const auto every = c.opt<std::size_t>("checkpoint_every");
  const auto mode = c.opt<std::string>("checkpoint_mode");
  const std::string outdir = c.get<std::string>("outdir", ".");
  const auto out_jsonl = c.opt<std::string>("out_jsonl");
  c.finish();

  std::vector<TaskInstance> instances = generate_all(g);
  if (every || mode) {
    const CheckpointPlan plan{every.value_or(kDefaultCheckpointEvery),
                              checkpoint_mode_from_string(mode.value_or("oracle"))};
    for (auto& inst : instances) inst = insert_checkpoints(inst, plan);
  }
  Outputs out(outdir);
  std::vector<Json> lines;
  for (const auto& inst : instances) lines.push_back(to_json(inst));
  const fs::path path = out.resolve(out_jsonl, "instances.jsonl");
  out.write(path, to_jsonl(lines));
  out.manifest("gen", c.effective());

  CommandResult r;
  r.summary = Json{{"instances", instances.size()}, {"outputs", out.listing()}};
  return r;
}

CommandResult cmd_stage(Config& c) {
  const auto instances_path = c.opt<std::string>("instances");
  std::optional<GenPlan> plan;
  if (!instances_path) plan = read_gen(c);
  const ProviderSetup ps = read_provider(c);
  const std::string outdir = c.get<std::string>("outdir", ".");
  const auto out_csv = c.opt<std::string>("out_csv");
  const auto out_json = c.opt<std::string>("out_json");
  const auto quantity = series_quantity_from_string(c.get<std::string>("quantity", "acc"));
  c.finish();

  Outputs out(outdir);
  std::vector<TaskInstance> instances;
  if (instances_path) {
    instances = load_instances(*instances_path);
    out.input(*instances_path);
  } else {
    instances = generate_all(*plan);
  }
  if (ps.spec.kind == ProviderKind::kFileCache) out.input(ps.spec.cache_file);

  auto provider = make_provider(ps.spec);
  const auto conditions = group_conditions(instances, ps.label);
  ScoredRun run = score_conditions(*provider, instances, conditions, ps.max_parallel);

  out.write(out.resolve(std::nullopt, "records.jsonl"), to_jsonl(run.record_lines));
  out.write(out.resolve(std::nullopt, "outcomes.jsonl"), to_jsonl(run.outcome_lines));
  out.write(out.resolve(out_csv, "stage.csv"), emit_stage_table(run.rows));
  if (out_json) out.write(*out_json, emit_series(run.rows, quantity).dump(2) + "\n");

  CommandResult r;
  r.summary = Json{{"provider", provider->describe()},
                   {"instances", instances.size()},
                   {"conditions", rows_summary(run.rows)}};
  finish_with_failures(r, out, outdir, run.failures);
  out.manifest("stage", c.effective());
  r.summary["outputs"] = out.listing();
  return r;
}

CommandResult cmd_checkpoint(Config& c) {
  const GenPlan plan = read_gen(c);
  const std::size_t every = c.get<std::size_t>("checkpoint_every", kDefaultCheckpointEvery);
  std::vector<CheckpointMode> modes;
  for (const auto& m : c.list<std::string>("checkpoint_mode", {"oracle", "sham", "wrong"})) {
    modes.push_back(checkpoint_mode_from_string(m));
  }
  const ProviderSetup ps = read_provider(c);
  const std::string outdir = c.get<std::string>("outdir", ".");
  const auto out_csv = c.opt<std::string>("out_csv");
  const auto out_json = c.opt<std::string>("out_json");
  c.finish();

  std::vector<TaskInstance> instances = generate_all(plan);
  const std::size_t base_count = instances.size();
  for (auto mode : modes) {
    for (std::size_t i = 0; i < base_count; ++i) {
      instances.push_back(insert_checkpoints(instances[i], CheckpointPlan{every, mode}));
    }
  }
  auto provider = make_provider(ps.spec);
  const auto conditions = group_conditions(instances, ps.label);
  ScoredRun run = score_conditions(*provider, instances, conditions, ps.max_parallel);

  // Pair each checkpointed condition with its baseline.
  std::map<std::string, const ReportRow*> baselines;
  for (const auto& row : run.rows) {
    if (row.key.checkpoint != "none") continue;
    ConditionKey k = row.key;
    k.seeds.clear();
    baselines[k.to_string()] = &row;
  }
  std::vector<CheckpointRow> paired;
  for (const auto& row : run.rows) {
    if (row.key.checkpoint == "none") continue;
    ConditionKey k = row.key;
    k.checkpoint = "none";
    k.seeds.clear();
    const auto it = baselines.find(k.to_string());
    if (it == baselines.end()) continue;
    paired.push_back(CheckpointRow{kReportSchemaVersion, row.key, it->second->summary, row.summary});
  }

  Outputs out(outdir);
  out.write(out.resolve(std::nullopt, "outcomes.jsonl"), to_jsonl(run.outcome_lines));
  out.write(out.resolve(std::nullopt, "stage.csv"), emit_stage_table(run.rows));
  out.write(out.resolve(out_csv, "checkpoint.csv"), emit_checkpoint_table(paired));
  if (out_json) {
    out.write(*out_json, emit_series(run.rows, SeriesQuantity::kAccuracy).dump(2) + "\n");
  }

  Json deltas = Json::array();
  for (const auto& p : paired) {
    deltas.push_back(Json{{"condition", p.key.to_string()},
                          {"baseline_acc", p.baseline.acc},
                          {"checkpoint_acc", p.checkpointed.acc},
                          {"delta_acc", p.delta_acc()}});
  }
  CommandResult r;
  r.summary = Json{{"provider", provider->describe()}, {"pairs", std::move(deltas)}};
  finish_with_failures(r, out, outdir, run.failures);
  out.manifest("checkpoint", c.effective());
  r.summary["outputs"] = out.listing();
  return r;
}

struct BudgetSettings {
  std::vector<double> taus;
  std::optional<NullFamily> family;
  ConfidenceMode mode = ConfidenceMode::kTau;
  std::string family_label = "all";
};

BudgetSettings read_budget_settings(Config& c, ConfidenceMode default_mode) {
  BudgetSettings s;
  s.taus = c.list<double>("tau", {kDefaultTau});
  for (double t : s.taus) {
    if (!(t > 0.0 && t < 1.0)) throw_config("tau must lie in (0,1)");
  }
  if (c.has("nulls")) {
    std::string joined;
    for (const auto& n : c.list<std::string>("nulls", {})) joined += (joined.empty() ? "" : ",") + n;
    s.family = NullFamily::parse(joined);
    s.family_label.clear();
    for (const auto& n : s.family->names()) s.family_label += (s.family_label.empty() ? "" : "+") + n;
  } else {
    c.opt<std::string>("nulls");
  }
  s.mode = confidence_mode_from_string(
      c.get<std::string>("confidence_mode", std::string(to_string(default_mode))));
  return s;
}

CommandResult audit_like(std::string_view command, Config& c, std::vector<Trace> traces,
                         const BudgetSettings& s, Outputs& out, const std::string& label,
                         const std::optional<std::string>& out_csv, std::string_view csv_name,
                         std::string_view jsonl_name) {
  std::vector<BudgetRow> rows;
  std::vector<Json> lines;
  Json summaries = Json::array();
  for (double tau : s.taus) {
    std::vector<TraceAudit> audits;
    for (const auto& t : traces) {
      audits.push_back(audit_trace(t, s.mode, tau, s.family));
      Json line = to_json(audits.back());
      line["tau"] = tau;
      line["confidence_mode"] = std::string(to_string(s.mode));
      lines.push_back(std::move(line));
    }
    const AuditSummary summary = summarize(audits);
    rows.push_back(BudgetRow{kReportSchemaVersion, label, tau, s.family_label, summary});
    Json js = to_json(summary);
    js["tau"] = tau;
    summaries.push_back(std::move(js));
  }
  out.write(out.resolve(std::nullopt, jsonl_name), to_jsonl(lines));
  out.write(out.resolve(out_csv, csv_name), emit_budget_table(rows));
  out.manifest(command, c.effective());
  CommandResult r;
  r.summary = Json{{"summaries", std::move(summaries)}, {"outputs", out.listing()}};
  return r;
}

CommandResult cmd_budget(Config& c) {
  const auto input = c.opt<std::string>("input");
  if (!input) throw_config("budget needs an input JSONL of p1/p0 records");
  const BudgetSettings s = read_budget_settings(c, ConfidenceMode::kTau);
  const std::string label = c.get<std::string>("label", fs::path(*input).stem().string());
  const std::string outdir = c.get<std::string>("outdir", ".");
  const auto out_csv = c.opt<std::string>("out_csv");
  c.finish();

  Outputs out(outdir);
  out.input(*input);
  std::vector<Trace> traces;
  std::size_t line = 0;
  for (const auto& doc : read_jsonl(*input)) {
    ++line;
    try {
      Trace t;
      t.trace_id = doc.contains("id") ? doc.at("id").get<std::string>() : std::to_string(line);
      if (doc.contains("outcome_label") && !doc.at("outcome_label").is_null()) {
        t.outcome_label = doc.at("outcome_label").get<bool>();
      }
      TraceStep step;
      step.claim = t.trace_id;
      step.cited_spans = {"evidence"};
      if (doc.contains("p1") && !doc.at("p1").is_null()) step.p1 = doc.at("p1").get<double>();
      if (doc.contains("confidence") && !doc.at("confidence").is_null()) {
        step.confidence = doc.at("confidence").get<double>();
      }
      if (doc.contains("p0")) {
        const auto& p0 = doc.at("p0");
        if (p0.is_number()) {
          step.p0_by_null["p0"] = p0.get<double>();
        } else {
          step.p0_by_null = p0.get<std::map<std::string, double>>();
        }
      }
      t.steps.push_back(std::move(step));
      traces.push_back(std::move(t));
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorKind::kIo, *input + ":" + std::to_string(line) + ": " + e.what());
    }
  }
  return audit_like("budget", c, std::move(traces), s, out, label, out_csv, "budget.csv",
                    "certificates.jsonl");
}

CommandResult cmd_audit(Config& c) {
  const auto input = c.opt<std::string>("input");
  if (!input) throw_config("audit needs an input trace JSONL");
  const BudgetSettings s = read_budget_settings(c, ConfidenceMode::kAuto);
  const bool live = c.get<bool>("live", false);
  std::optional<ProviderSetup> ps;
  if (live) ps = read_provider(c);
  const std::string label = c.get<std::string>("label", fs::path(*input).stem().string());
  const std::string outdir = c.get<std::string>("outdir", ".");
  const auto out_csv = c.opt<std::string>("out_csv");
  c.finish();

  Outputs out(outdir);
  out.input(*input);
  std::vector<Trace> traces;
  std::size_t line = 0;
  for (const auto& doc : read_jsonl(*input)) {
    ++line;
    try {
      traces.push_back(trace_from_json(doc));
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorKind::kIo, *input + ":" + std::to_string(line) + ": " + e.what());
    }
  }
  if (ps) {
    auto provider = make_provider(ps->spec);
    const NullFamily family = s.family.value_or(NullFamily::all());
    for (auto& t : traces) fetch_probabilities(*provider, t, family);
  }
  return audit_like("audit", c, std::move(traces), s, out, label, out_csv, "audit.csv",
                    "audit_certificates.jsonl");
}

ChainSpec erasure_chain(double alpha, std::size_t m, std::size_t length) {
  ChainSpec chain;
  chain.prior.assign(m + 1, 1.0 / static_cast<double>(m));
  chain.prior[m] = 0.0;
  const auto stage = ChainStage::from(erasure_copy_or_noise(alpha, m), m + 1);
  chain.stages.assign(length, stage);
  return chain;
}

DiscreteChannel random_channel(Rng& rng, std::size_t m) {
  std::vector<double> data(m * m);
  for (std::size_t x = 0; x < m; ++x) {
    double total = 0.0;
    for (std::size_t y = 0; y < m; ++y) {
      data[x * m + y] = -std::log(1.0 - rng.uniform());
      total += data[x * m + y];
    }
    for (std::size_t y = 0; y < m; ++y) data[x * m + y] /= total;
  }
  return DiscreteChannel(m, m, std::move(data));
}

CommandResult cmd_simulate(Config& c) {
  const auto alphas = c.list<double>("alphas", {0.5, 0.8, 0.95});
  const std::size_t max_length = c.get<std::size_t>("max_length", 12);
  const std::size_t m = c.get<std::size_t>("alphabet", 4);
  const std::size_t n_random = c.get<std::size_t>("random_chains", 1000);
  const std::uint64_t seed = c.get<std::uint64_t>("seed", 0);
  const std::string outdir = c.get<std::string>("outdir", ".");
  const auto out_csv = c.opt<std::string>("out_csv");
  const auto out_json = c.opt<std::string>("out_json");
  c.finish();
  if (m < 2) throw_config("alphabet must be at least 2");
  if (max_length == 0) throw_config("max_length must be positive");

  std::string csv = "alpha,length,final_mi,mi_ratio,alpha_product,abs_error,equality_holds\n";
  std::size_t equality_failures = 0;
  for (double alpha : alphas) {
    if (!(alpha > 0.0 && alpha <= 1.0)) throw_config("alphas must lie in (0,1]");
    for (std::size_t len = 1; len <= max_length; ++len) {
      const ContractionReport rep = verify_sdpi_contraction(erasure_chain(alpha, m, len));
      const double ratio = rep.final_mi.value() / rep.initial_mi.value();
      if (!rep.equality_holds) ++equality_failures;
      csv += format_fixed(alpha, 2) + "," + std::to_string(len) + "," +
             format_fixed(rep.final_mi.value(), 9) + "," + format_fixed(ratio, 9) + "," +
             format_fixed(rep.alpha_product, 9) + "," +
             format_fixed(std::abs(ratio - rep.alpha_product), 12) + "," +
             (rep.equality_holds ? "true" : "false") + "\n";
    }
  }

  // Checkpoint sweep: final MI equals the value of the suffix after j.
  Json sweep = Json::array();
  double worst_gap = 0.0;
  for (std::size_t j = 0; j <= max_length; ++j) {
    ChainSpec chain = erasure_chain(alphas.front(), m, max_length);
    chain.checkpoints = {j};
    const double final_mi = mi_profile(chain).back().value();
    const double suffix = mi_profile(erasure_chain(alphas.front(), m, max_length - j)).back().value();
    worst_gap = std::max(worst_gap, std::abs(final_mi - suffix));
    sweep.push_back(Json{{"checkpoint", j}, {"final_mi", final_mi}, {"suffix_mi", suffix}});
  }

  // Noise on the input alphabet contracts strictly more than alpha.
  ChainSpec uniform;
  uniform.prior.assign(m, 1.0 / static_cast<double>(m));
  uniform.stages.push_back(ChainStage::from(
      CopyOrNoiseChannel{alphas.front(), std::vector<double>(m, 1.0 / static_cast<double>(m))}, m));
  const ContractionReport uni = verify_sdpi_contraction(uniform);

  Rng rng(Rng::derive(seed, 0x73696d));
  std::size_t violations = 0;
  for (std::size_t i = 0; i < n_random; ++i) {
    const std::size_t size = 2 + rng.below(4);
    ChainSpec chain;
    double total = 0.0;
    for (std::size_t v = 0; v < size; ++v) {
      chain.prior.push_back(-std::log(1.0 - rng.uniform()));
      total += chain.prior.back();
    }
    for (auto& p : chain.prior) p /= total;
    const std::size_t len = 1 + rng.below(6);
    for (std::size_t s = 0; s < len; ++s) {
      chain.stages.push_back(ChainStage::arbitrary(random_channel(rng, size)));
    }
    if (!verify_sdpi_contraction(chain).dpi_monotone) ++violations;
  }

  Outputs out(outdir);
  out.write(out.resolve(out_csv, "simulate.csv"), csv);
  Json report{{"alphabet", m},
              {"equality_failures", equality_failures},
              {"checkpoint_sweep", std::move(sweep)},
              {"checkpoint_max_abs_gap", worst_gap},
              {"uniform_noise", Json{{"alpha", alphas.front()},
                                     {"mi_ratio", uni.final_mi.value() / uni.initial_mi.value()},
                                     {"equality_expected", uni.equality_expected}}},
              {"random_chains", n_random},
              {"dpi_violations", violations}};
  out.write(out.resolve(out_json, "simulate.json"), report.dump(2) + "\n");
  out.manifest("simulate", c.effective());
  CommandResult r;
  r.summary = report;
  r.summary["outputs"] = out.listing();
  if (violations > 0 || equality_failures > 0) {
    r.exit_code = ExitCode::kInvariant;
    r.summary["error"] = "channel invariants violated";
  }
  return r;
}

CommandResult cmd_report(Config& c) {
  const auto inputs = c.list<std::string>("inputs", {});
  const std::string outdir = c.get<std::string>("outdir", ".");
  const auto out_csv = c.opt<std::string>("out_csv");
  const auto out_json = c.opt<std::string>("out_json");
  const auto quantity = series_quantity_from_string(c.get<std::string>("quantity", "acc"));
  c.finish();

  Outputs out(outdir);
  std::map<std::string, std::pair<ConditionKey, std::size_t>> keys;
  std::map<std::string, std::vector<StageOutcome>> grouped;
  for (const auto& in : inputs) {
    out.input(in);
    std::size_t line = 0;
    for (const auto& doc : read_jsonl(in)) {
      ++line;
      try {
        const auto& cj = doc.at("condition");
        ConditionKey key{cj.at("provider").get<std::string>(), cj.at("task").get<std::string>(),
                         cj.at("k").get<std::size_t>(),        cj.at("filler").get<std::string>(),
                         cj.at("checkpoint").get<std::string>(), cj.at("seeds").get<std::string>()};
        const std::string id = key.to_string();
        keys.try_emplace(id, key, cj.at("m").get<std::size_t>());
        grouped[id].push_back(outcome_from_json(doc.at("outcome")));
      } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::kIo, in + ":" + std::to_string(line) + ": " + e.what());
      }
    }
  }
  std::vector<ReportRow> rows;
  for (const auto& [id, outcomes] : grouped) {
    const auto& [key, m] = keys.at(id);
    rows.push_back(ReportRow{kReportSchemaVersion, key, aggregate(outcomes), m});
  }
  out.write(out.resolve(out_csv, "report.csv"), emit_stage_table(rows));
  if (out_json) out.write(*out_json, emit_series(rows, quantity).dump(2) + "\n");
  out.manifest("report", c.effective());
  CommandResult r;
  r.summary = Json{{"conditions", rows_summary(rows)}, {"outputs", out.listing()}};
  return r;
}

CommandResult cmd_replay(Config& c) {
  const auto manifest = c.opt<std::string>("manifest");
  c.finish();
  if (!manifest) throw_config("replay needs a manifest path");
  Json m;
  try {
    m = Json::parse(read_file(*manifest));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::kIo, *manifest + ": " + e.what());
  }
  if (!m.contains("command") || !m.contains("config")) {
    throw Error(ErrorKind::kIo, *manifest + " is not a manifest");
  }
  const std::string command = m.at("command").get<std::string>();
  if (command == "replay") throw_config("a replay manifest cannot be replayed");
  return run_command(command, m.at("config"));
}

}  // namespace

ProviderSpec provider_spec_from_json(const Json& config) {
  Config c(config);
  ProviderSpec spec = read_provider(c).spec;
  c.finish();
  return spec;
}

const std::vector<std::string>& command_names() {
  static const std::vector<std::string> names = {"gen",    "stage",    "checkpoint", "budget",
                                                 "audit",  "simulate", "report",     "replay"};
  return names;
}

CommandResult run_command(std::string_view command, const Json& config) {
  static const std::map<std::string, std::function<CommandResult(Config&)>, std::less<>> table = {
      {"gen", cmd_gen},           {"stage", cmd_stage},       {"checkpoint", cmd_checkpoint},
      {"budget", cmd_budget},     {"audit", cmd_audit},       {"simulate", cmd_simulate},
      {"report", cmd_report},     {"replay", cmd_replay}};
  CommandResult result;
  const auto fail = [&](ExitCode code, const std::string& what) {
    result.exit_code = code;
    result.summary = Json{{"error", what}};
  };
  try {
    const auto it = table.find(command);
    if (it == table.end()) throw_config("unknown command '" + std::string(command) + "'");
    Config c(config);
    result = it->second(c);
  } catch (const Error& e) {
    fail(exit_code_for(e.kind()), e.what());
  } catch (const fs::filesystem_error& e) {
    fail(ExitCode::kIo, e.what());
  } catch (const nlohmann::json::exception& e) {
    fail(ExitCode::kIo, e.what());
  } catch (const std::exception& e) {
    fail(ExitCode::kOther, e.what());
  }
  result.summary["command"] = std::string(command);
  result.summary["exit_code"] = static_cast<int>(result.exit_code);
  return result;
}

std::string_view schema_help() {
  return R"(File formats (one JSON document per line unless noted):

instances.jsonl   {id, task, k, filler, decoy_reps, seed, rendered, spans:[{label,
                  kind, start, end, value_start, value_end, content}], target,
                  competitor, candidates:[token text], checkpoint_plan:{every,mode}|null,
                  tokens:[id], filler_segments:[[start,end]], query_start, metadata}
records.jsonl     {key, request_id, record:{request_id, target_id, candidate_ids:[id],
                  is_logit, entries:[[token_id, score]]}}   (also the file_cache format;
                  HTTP cache lines carry top_logprobs:{token: logprob} instead)
outcomes.jsonl    {condition:{provider, task, k, filler, checkpoint, seeds, m},
                  outcome:{request_id, target, top_token, best_candidate, gate_gap|null,
                  value_gap|null, verdict: correct|stage_2a|stage_2b, tie}}
budget input      {id, p1, p0: number | {null_name: p0}, confidence?, outcome_label?}
trace input       {trace_id, steps:[{claim, spans:[label], confidence?, p1?,
                  p0?:{null_name: p0}}], outcome_label?, context?, span_text?:{label: text}}
certificates      trace audit per line: {trace_id, verdict, audited, flagged_steps,
                  outcome_label, tau, confidence_mode, steps:[{index, certificate |
                  unauditable}]}; certificate = {p1, p0_by_null, p0_min, p0_max, threshold,
                  threshold_kind, bits:{null:{req_bits, obs_bits, verdict}}, worst_null,
                  req_bits, obs_bits, verdict}
stage.csv         provider,task,k,filler,checkpoint,seeds,n,acc,acc_lo,acc_hi,cand_acc,
                  cand_acc_lo,cand_acc_hi,errors,frac_2a,frac_2b,gate_gap,value_gap,ties,
                  gate_unavailable,m,mi_used_lb   (rates 3 dp, gaps 2 dp, nats 3 dp)
checkpoint.csv    provider,task,k,filler,checkpoint,seeds,n,baseline,baseline_lo,
                  baseline_hi,checkpointed,checkpointed_lo,checkpointed_hi,delta_acc,
                  value_gap_base,value_gap_chk
budget.csv        label,tau,nulls,n,pass_pct,acc_pass_pct,acc_flag_pct,lift_pp,mean_p1,
                  mean_p0_min,unauditable   (percentages 1 dp)
series JSON       {quantity, confidence, series:[{label, points:[{k, estimate, ci_lower,
                  ci_upper, n}]}]}
*.manifest.json   {command, version, config, inputs:[{path,sha256}],
                  outputs:[{path,sha256}]}   (replay with: routing-audit replay <file>)
)";
}

}  // namespace routing_audit
