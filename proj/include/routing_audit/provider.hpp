// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The routing-audit Authors

/**
 * @file provider.hpp
 * @brief Sources of readout-position scores and verifier probabilities.
 *
 * Three backends share one interface:
 *
 *  - SimulatedProvider: a synthetic recency/decoy bias model. It is not a
 *    model of any real LLM; it only reproduces the qualitative regimes
 *    (binding failures under decoys, recovery under checkpoints).
 *  - FileCacheProvider: replays ScoreResponse JSONL written earlier.
 *  - HttpProvider: a completion endpoint that exposes top-N logprobs, with
 *    an on-disk response cache so reruns are reproducible.
 *
 * All backends are safe to call concurrently.
 */

#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "routing_audit/stage_metrics.hpp"
#include "routing_audit/taskgen.hpp"

namespace routing_audit {

/// Verifier label set, in request order.
inline constexpr std::array<std::string_view, 4> kVerifierLabels = {
    "ENTAILED", "CONTRADICTED", "NOT_IN_CONTEXT", "UNVERIFIABLE"};

inline constexpr std::string_view kDefaultApiKeyEnv = "ROUTING_AUDIT_API_KEY";

/// Probability of ENTAILED after renormalising the four label logprobs.
/// `label_logprobs` is indexed like kVerifierLabels; missing labels are an
/// error.
double verifier_probability(std::span<const std::optional<double>> label_logprobs);

/// Exact request text sent to an HTTP verifier.
std::string verifier_prompt(std::string_view claim, std::string_view context);

class Provider {
 public:
  virtual ~Provider() = default;

  virtual LogprobRecord score(const TaskInstance& instance) = 0;
  /// P(ENTAILED | claim, context).
  virtual double verify(std::string_view claim, std::string_view context) = 0;
  virtual std::string describe() const = 0;
};

struct BatchFailure {
  std::size_t index = 0;
  std::string instance_id;
  std::string message;
};

struct BatchResult {
  std::vector<std::optional<LogprobRecord>> records;
  std::vector<BatchFailure> failures;
};

/// Score every instance with at most `max_parallel` calls in flight.
/// Results are in input order regardless of completion order.
BatchResult score_batch(Provider& provider, std::span<const TaskInstance> instances,
                        std::size_t max_parallel);

// ---------------------------------------------------------------------------

struct BiasParams {
  /// Target logit right after its binding.
  double target_strength = 10.0;
  /// Per-token decay of the target signal with distance to the query.
  double decay = 0.998;
  /// Logit added to a wrong candidate per occurrence in the context.
  double decoy_boost = 0.5;
  /// Logit level of the non-candidate tokens (answer-mode gate).
  double gate_offset = 0.0;
  /// Standard deviation of the seeded per-token noise.
  double noise = 0.25;
  /// Non-candidate tokens scored alongside the candidates.
  std::size_t non_candidates = 8;
  std::uint64_t seed = 0;
  /// Simulated verifier: ENTAILED logit = scale * support - offset.
  double verifier_scale = 6.0;
  double verifier_offset = 3.0;
};

class SimulatedProvider final : public Provider {
 public:
  explicit SimulatedProvider(BiasParams params = {}) : params_(params) {}

  LogprobRecord score(const TaskInstance& instance) override;
  /// Support is the fraction of the claim's content words present in the
  /// context; removing cited evidence lowers it.
  double verify(std::string_view claim, std::string_view context) override;
  std::string describe() const override;

  const BiasParams& params() const { return params_; }

 private:
  BiasParams params_;
};

// ---------------------------------------------------------------------------

/// One cached response. `key` is the request hash; `request_id` the
/// instance id (score) or claim id (verify).
struct ScoreResponse {
  std::string key;
  std::string request_id;
  std::optional<LogprobRecord> record;
  std::optional<double> probability;
  /// Raw top-N token logprobs (HTTP responses).
  std::optional<std::map<std::string, double>> top_logprobs;
};

/// Append-only response store backed by a JSONL file. Each write rewrites
/// the file to a temporary and renames it over the original.
class ResponseCache {
 public:
  explicit ResponseCache(std::filesystem::path path);

  std::optional<ScoreResponse> find(const std::string& key) const;
  void put(const ScoreResponse& response);
  std::size_t size() const;
  const std::filesystem::path& path() const { return path_; }

 private:
  void load();

  std::filesystem::path path_;
  mutable std::shared_mutex mutex_;
  std::map<std::string, ScoreResponse> entries_;
  std::vector<std::string> order_;
};

/// Cache key for a scored instance: its id.
std::string score_cache_key(const TaskInstance& instance);
/// Cache key for a verification: hash of claim and context.
std::string verify_cache_key(std::string_view claim, std::string_view context);

class FileCacheProvider final : public Provider {
 public:
  explicit FileCacheProvider(std::filesystem::path path) : cache_(std::move(path)) {}

  /// Throws Error(kProvider) naming the instance when no record exists.
  LogprobRecord score(const TaskInstance& instance) override;
  double verify(std::string_view claim, std::string_view context) override;
  std::string describe() const override;

  void store(const TaskInstance& instance, const LogprobRecord& record);
  void store_verification(std::string_view claim, std::string_view context,
                          double probability);

 private:
  ResponseCache cache_;
};

// ---------------------------------------------------------------------------

struct RetryPolicy {
  int max_attempts = 3;
  int initial_backoff_ms = 200;
  double multiplier = 2.0;
};

struct HttpConfig {
  std::string endpoint;  // e.g. http://127.0.0.1:8080/v1/completions
  std::string model;
  std::string api_key_env = std::string(kDefaultApiKeyEnv);
  int timeout_seconds = 60;
  std::size_t max_parallel = 4;
  int top_logprobs = 20;
  RetryPolicy retry;
  std::filesystem::path cache_dir = ".routing_audit_cache";
};

class HttpProvider final : public Provider {
 public:
  explicit HttpProvider(HttpConfig config);
  ~HttpProvider() override;

  LogprobRecord score(const TaskInstance& instance) override;
  double verify(std::string_view claim, std::string_view context) override;
  std::string describe() const override;

  const HttpConfig& config() const { return config_; }
  /// Requests actually sent over the network (cache hits excluded).
  std::size_t requests_sent() const;

 private:
  struct Impl;
  /// Top-logprob map for a prompt: from cache, or POSTed and cached.
  std::map<std::string, double> top_logprobs(const std::string& prompt,
                                             const std::string& request_id);

  HttpConfig config_;
  std::unique_ptr<Impl> impl_;
};

/// Parse the first choice's top_logprobs from a completion response.
/// Accepts both {"token": logprob} maps and [{"token":..,"logprob":..}]
/// lists.
std::map<std::string, double> parse_top_logprobs(std::string_view response_body);

/// SHA-256 hex digest.
std::string sha256_hex(std::string_view data);

// ---------------------------------------------------------------------------

enum class ProviderKind { kSimulated, kFileCache, kHttp };

std::string_view to_string(ProviderKind k);
ProviderKind provider_kind_from_string(std::string_view s);

struct ProviderSpec {
  ProviderKind kind = ProviderKind::kSimulated;
  BiasParams bias;
  std::filesystem::path cache_file;
  HttpConfig http;
};

std::unique_ptr<Provider> make_provider(const ProviderSpec& spec);

}  // namespace routing_audit
