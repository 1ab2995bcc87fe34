// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The routing-audit Authors

#include "routing_audit/provider.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>
#include <thread>

#include "routing_audit/error.hpp"
#include "routing_audit/rng.hpp"
#include "routing_audit/serialize.hpp"
#include "routing_audit/vocabulary.hpp"

namespace routing_audit {

double verifier_probability(std::span<const std::optional<double>> label_logprobs) {
  if (label_logprobs.size() != kVerifierLabels.size()) {
    throw Error(ErrorKind::kProvider, "verifier response needs exactly 4 label scores");
  }
  double peak = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < label_logprobs.size(); ++i) {
    if (!label_logprobs[i]) {
      throw Error(ErrorKind::kProvider, "verifier response is missing label " +
                                            std::string(kVerifierLabels[i]));
    }
    const double v = *label_logprobs[i];
    if (std::isnan(v) || v == std::numeric_limits<double>::infinity()) {
      throw Error(ErrorKind::kProvider, "verifier label score is not a log-probability");
    }
    peak = std::max(peak, v);
  }
  if (!std::isfinite(peak)) {
    throw Error(ErrorKind::kProvider, "all verifier labels have zero probability");
  }
  double total = 0.0;
  for (const auto& v : label_logprobs) total += std::exp(*v - peak);
  return std::exp(*label_logprobs[0] - peak) / total;
}

std::string verifier_prompt(std::string_view claim, std::string_view context) {
  std::string out;
  out += "Context:\n";
  out += context;
  out += "\n\nClaim: ";
  out += claim;
  out += "\n\nAnswer with exactly one label: ENTAILED, CONTRADICTED, NOT_IN_CONTEXT, "
         "or UNVERIFIABLE.\nLabel:";
  return out;
}

BatchResult score_batch(Provider& provider, std::span<const TaskInstance> instances,
                        std::size_t max_parallel) {
  BatchResult result;
  result.records.resize(instances.size());
  if (instances.empty()) return result;
  const std::size_t workers = std::clamp<std::size_t>(max_parallel, 1, instances.size());

  std::atomic<std::size_t> next{0};
  std::vector<std::optional<BatchFailure>> failed(instances.size());
  const auto run = [&] {
    for (std::size_t i = next++; i < instances.size(); i = next++) {
      try {
        result.records[i] = provider.score(instances[i]);
      } catch (const std::exception& e) {
        failed[i] = BatchFailure{i, instances[i].id, e.what()};
      }
    }
  };
  if (workers == 1) {
    run();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(run);
  }
  for (auto& f : failed) {
    if (f) result.failures.push_back(std::move(*f));
  }
  return result;
}

// ---------------------------------------------------------------------------
// Simulated bias model

namespace {

// Tokens that carry no content for the simulated verifier.
bool is_punctuation(std::string_view t) {
  return t == "=" || t == "[" || t == "]" || t == "?" || t == "." || t == ",";
}

}  // namespace

LogprobRecord SimulatedProvider::score(const TaskInstance& instance) {
  const auto& vocab = Vocabulary::standard();
  const std::uint64_t stream = Rng::derive(params_.seed, instance.seed);
  const auto noise = [&](TokenId t) {
    Rng rng(Rng::derive(stream, static_cast<std::uint64_t>(t)));
    return params_.noise * rng.normal();
  };

  std::map<TokenId, std::size_t> counts;
  for (TokenId t : instance.tokens) ++counts[t];

  // Evidence for the target: the most recent span whose bound value is the
  // target token.
  const std::size_t readout = instance.tokens.empty() ? 0 : instance.tokens.size() - 1;
  std::optional<std::size_t> last_evidence;
  for (const auto& s : instance.spans) {
    if (s.value_end != s.value_start + 1) continue;
    if (instance.tokens[s.value_start] != instance.target) continue;
    if (!last_evidence || s.value_start > *last_evidence) last_evidence = s.value_start;
  }

  LogprobRecord rec;
  rec.request_id = instance.id;
  rec.candidate_ids = instance.candidates;
  rec.target_id = instance.target;
  rec.is_logit = true;
  for (TokenId c : instance.candidates) {
    double z = params_.decoy_boost * static_cast<double>(counts[c]) + noise(c);
    if (c == instance.target && last_evidence) {
      const double d = static_cast<double>(readout - *last_evidence);
      z += params_.target_strength * std::pow(params_.decay, d);
    }
    rec.entries[c] = z;
  }
  const std::set<TokenId> cands(instance.candidates.begin(), instance.candidates.end());
  std::size_t added = 0;
  for (TokenId w : vocab.filler_words()) {
    if (added == params_.non_candidates) break;
    if (cands.contains(w)) continue;
    rec.entries[w] = params_.gate_offset + noise(w);
    ++added;
  }
  return rec;
}

double SimulatedProvider::verify(std::string_view claim, std::string_view context) {
  std::set<std::string> present;
  for (auto& t : tokenize(context)) present.insert(std::move(t));
  std::size_t total = 0, found = 0;
  for (const auto& t : tokenize(claim)) {
    if (is_punctuation(t)) continue;
    ++total;
    if (present.contains(t)) ++found;
  }
  const double support = total == 0 ? 0.0 : static_cast<double>(found) / static_cast<double>(total);
  const double z = params_.verifier_scale * support - params_.verifier_offset;
  const std::array<std::optional<double>, 4> logits = {z, 0.0, 0.0, 0.0};
  return verifier_probability(logits);
}

std::string SimulatedProvider::describe() const {
  std::ostringstream os;
  os.precision(17);
  os << "simulated(target_strength=" << params_.target_strength
     << ",decay=" << params_.decay << ",decoy_boost=" << params_.decoy_boost
     << ",gate_offset=" << params_.gate_offset << ",noise=" << params_.noise
     << ",non_candidates=" << params_.non_candidates << ",seed=" << params_.seed << ")";
  return os.str();
}

// ---------------------------------------------------------------------------
// Response cache

namespace {

Json response_json(const ScoreResponse& r) {
  Json j;
  j["key"] = r.key;
  j["request_id"] = r.request_id;
  if (r.record) j["record"] = to_json(*r.record);
  if (r.probability) j["probability"] = *r.probability;
  if (r.top_logprobs) j["top_logprobs"] = *r.top_logprobs;
  return j;
}

ScoreResponse response_from_json(const Json& j) {
  ScoreResponse r;
  r.key = j.at("key").get<std::string>();
  r.request_id = j.value("request_id", std::string());
  if (j.contains("record")) r.record = record_from_json(j.at("record"));
  if (j.contains("probability")) r.probability = j.at("probability").get<double>();
  if (j.contains("top_logprobs")) {
    r.top_logprobs = j.at("top_logprobs").get<std::map<std::string, double>>();
  }
  return r;
}

}  // namespace

ResponseCache::ResponseCache(std::filesystem::path path) : path_(std::move(path)) {
  load();
}

void ResponseCache::load() {
  if (!std::filesystem::exists(path_)) return;
  for (const auto& doc : read_jsonl(path_)) {
    try {
      auto r = response_from_json(doc);
      if (!entries_.contains(r.key)) order_.push_back(r.key);
      entries_[r.key] = std::move(r);
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorKind::kIo, "malformed cache entry in " + path_.string() + ": " + e.what());
    }
  }
}

std::optional<ScoreResponse> ResponseCache::find(const std::string& key) const {
  std::shared_lock lock(mutex_);
  const auto it = entries_.find(key);
  if (it == entries_.end()) return std::nullopt;
  return it->second;
}

void ResponseCache::put(const ScoreResponse& response) {
  std::unique_lock lock(mutex_);
  if (!entries_.contains(response.key)) order_.push_back(response.key);
  entries_[response.key] = response;
  std::string data;
  for (const auto& key : order_) {
    data += response_json(entries_.at(key)).dump();
    data += '\n';
  }
  if (path_.has_parent_path()) std::filesystem::create_directories(path_.parent_path());
  write_file_atomic(path_, data);
}

std::size_t ResponseCache::size() const {
  std::shared_lock lock(mutex_);
  return entries_.size();
}

std::string score_cache_key(const TaskInstance& instance) { return instance.id; }

std::string verify_cache_key(std::string_view claim, std::string_view context) {
  std::string payload(claim);
  payload.push_back('\0');
  payload.append(context);
  return "verify:" + sha256_hex(payload);
}

LogprobRecord FileCacheProvider::score(const TaskInstance& instance) {
  const auto hit = cache_.find(score_cache_key(instance));
  if (!hit || !hit->record) {
    throw Error(ErrorKind::kProvider, "missing cached record for instance '" + instance.id +
                                          "' in " + cache_.path().string());
  }
  return *hit->record;
}

double FileCacheProvider::verify(std::string_view claim, std::string_view context) {
  const auto hit = cache_.find(verify_cache_key(claim, context));
  if (!hit || !hit->probability) {
    throw Error(ErrorKind::kProvider, "missing cached verification for claim '" +
                                          std::string(claim) + "' in " +
                                          cache_.path().string());
  }
  return *hit->probability;
}

std::string FileCacheProvider::describe() const {
  return "file_cache(" + cache_.path().string() + ")";
}

void FileCacheProvider::store(const TaskInstance& instance, const LogprobRecord& record) {
  ScoreResponse r;
  r.key = score_cache_key(instance);
  r.request_id = instance.id;
  r.record = record;
  cache_.put(r);
}

void FileCacheProvider::store_verification(std::string_view claim, std::string_view context,
                                           double probability) {
  ScoreResponse r;
  r.key = verify_cache_key(claim, context);
  r.request_id = std::string(claim);
  r.probability = probability;
  cache_.put(r);
}

// ---------------------------------------------------------------------------

std::unique_ptr<Provider> make_provider(const ProviderSpec& spec) {
  switch (spec.kind) {
    case ProviderKind::kSimulated:
      return std::make_unique<SimulatedProvider>(spec.bias);
    case ProviderKind::kFileCache:
      if (spec.cache_file.empty()) throw_config("file_cache provider needs a cache file");
      return std::make_unique<FileCacheProvider>(spec.cache_file);
    case ProviderKind::kHttp:
      return std::make_unique<HttpProvider>(spec.http);
  }
  throw_config("unknown provider kind");
}

std::string_view to_string(ProviderKind k) {
  switch (k) {
    case ProviderKind::kSimulated: return "simulated";
    case ProviderKind::kFileCache: return "file_cache";
    case ProviderKind::kHttp: return "http";
  }
  return "unknown";
}

ProviderKind provider_kind_from_string(std::string_view s) {
  if (s == "simulated") return ProviderKind::kSimulated;
  if (s == "file_cache") return ProviderKind::kFileCache;
  if (s == "http") return ProviderKind::kHttp;
  throw_config("unknown provider '" + std::string(s) + "'");
}

}  // namespace routing_audit
