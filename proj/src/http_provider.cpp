// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The routing-audit Authors

#define CPPHTTPLIB_OPENSSL_SUPPORT
#include "httplib.h"

#include <openssl/evp.h>

#include <atomic>
#include <chrono>
#include <cmath>
#include <condition_variable>
#include <cstdlib>
#include <iomanip>
#include <sstream>
#include <thread>

#include "routing_audit/error.hpp"
#include "routing_audit/provider.hpp"
#include "routing_audit/serialize.hpp"
#include "routing_audit/vocabulary.hpp"

namespace routing_audit {

std::string sha256_hex(std::string_view data) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    throw Error(ErrorKind::kInvariant, "SHA-256 failed");
  }
  std::ostringstream os;
  os << std::hex << std::setfill('0');
  for (unsigned int i = 0; i < len; ++i) os << std::setw(2) << static_cast<int>(digest[i]);
  return os.str();
}

namespace {

std::map<std::string, double> parse_entry_list(const Json& list) {
  std::map<std::string, double> out;
  for (const auto& e : list) {
    const auto token = e.at("token").get<std::string>();
    const double lp = e.at("logprob").get<double>();
    const auto [it, inserted] = out.emplace(token, lp);
    if (!inserted) it->second = std::max(it->second, lp);
  }
  return out;
}

std::map<std::string, double> parse_position(const Json& pos) {
  if (pos.is_object()) return pos.get<std::map<std::string, double>>();
  if (pos.is_array()) return parse_entry_list(pos);
  throw Error(ErrorKind::kProvider, "top_logprobs entry is neither a map nor a list");
}

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\n\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\n\r");
  return std::string(s.substr(b, e - b + 1));
}

}  // namespace

std::map<std::string, double> parse_top_logprobs(std::string_view response_body) {
  Json body;
  try {
    body = Json::parse(response_body);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::kProvider, std::string("response is not JSON: ") + e.what());
  }
  try {
    const auto& lp = body.at("choices").at(0).at("logprobs");
    if (lp.contains("top_logprobs") && !lp.at("top_logprobs").is_null()) {
      const auto& top = lp.at("top_logprobs");
      if (top.is_array() && !top.empty() &&
          (top.at(0).is_object() && !top.at(0).contains("token"))) {
        return parse_position(top.at(0));
      }
      if (top.is_array() && !top.empty() && top.at(0).is_array()) {
        return parse_position(top.at(0));
      }
      return parse_position(top);
    }
    if (lp.contains("content")) {
      return parse_position(lp.at("content").at(0).at("top_logprobs"));
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::kProvider, std::string("unexpected response shape: ") + e.what());
  }
  throw Error(ErrorKind::kProvider, "response carries no top_logprobs");
}

struct HttpProvider::Impl {
  std::string scheme_host_port;
  std::string path;
  std::unique_ptr<ResponseCache> cache;

  std::mutex slot_mutex;
  std::condition_variable slot_cv;
  std::size_t in_flight = 0;
  std::atomic<std::size_t> sent{0};
};

HttpProvider::HttpProvider(HttpConfig config)
    : config_(std::move(config)), impl_(std::make_unique<Impl>()) {
  if (config_.endpoint.empty()) throw_config("http provider needs an endpoint");
  if (config_.model.empty()) throw_config("http provider needs a model name");
  if (config_.api_key_env.empty()) {
    throw_config("http provider needs the name of the API key environment variable");
  }
  if (config_.max_parallel == 0) throw_config("max_parallel must be positive");
  if (config_.retry.max_attempts < 1) throw_config("retry attempts must be positive");
  const auto scheme_end = config_.endpoint.find("://");
  if (scheme_end == std::string::npos) {
    throw_config("endpoint '" + config_.endpoint + "' has no scheme");
  }
  const auto path_start = config_.endpoint.find('/', scheme_end + 3);
  impl_->scheme_host_port = config_.endpoint.substr(0, path_start);
  impl_->path = path_start == std::string::npos ? "/" : config_.endpoint.substr(path_start);
  impl_->cache = std::make_unique<ResponseCache>(config_.cache_dir / "http_cache.jsonl");
}

HttpProvider::~HttpProvider() = default;

std::size_t HttpProvider::requests_sent() const { return impl_->sent.load(); }

std::string HttpProvider::describe() const {
  return "http(endpoint=" + config_.endpoint + ",model=" + config_.model +
         ",top_logprobs=" + std::to_string(config_.top_logprobs) + ")";
}

std::map<std::string, double> HttpProvider::top_logprobs(const std::string& prompt,
                                                         const std::string& request_id) {
  const std::string key =
      "http:" + sha256_hex(config_.endpoint + '\n' + config_.model + '\n' +
                           std::to_string(config_.top_logprobs) + '\n' + prompt);
  if (auto hit = impl_->cache->find(key); hit && hit->top_logprobs) return *hit->top_logprobs;

  Json body;
  body["model"] = config_.model;
  body["prompt"] = prompt;
  body["max_tokens"] = 1;
  body["logprobs"] = config_.top_logprobs;
  body["echo"] = false;
  const std::string payload = body.dump();

  httplib::Headers headers;
  if (const char* api_key = std::getenv(config_.api_key_env.c_str()); api_key && *api_key) {
    headers.emplace("Authorization", std::string("Bearer ") + api_key);
  }

  std::string transcript;
  double backoff_ms = config_.retry.initial_backoff_ms;
  for (int attempt = 1; attempt <= config_.retry.max_attempts; ++attempt) {
    {
      std::unique_lock lock(impl_->slot_mutex);
      impl_->slot_cv.wait(lock, [&] { return impl_->in_flight < config_.max_parallel; });
      ++impl_->in_flight;
    }
    httplib::Result res;
    {
      httplib::Client client(impl_->scheme_host_port);
      client.set_connection_timeout(config_.timeout_seconds, 0);
      client.set_read_timeout(config_.timeout_seconds, 0);
      client.set_write_timeout(config_.timeout_seconds, 0);
      ++impl_->sent;
      res = client.Post(impl_->path, headers, payload, "application/json");
    }
    {
      std::lock_guard lock(impl_->slot_mutex);
      --impl_->in_flight;
    }
    impl_->slot_cv.notify_one();

    std::string failure;
    if (!res) {
      failure = "transport error: " + httplib::to_string(res.error());
    } else if (res->status != 200) {
      failure = "HTTP " + std::to_string(res->status) + ": " + res->body.substr(0, 200);
    } else {
      try {
        auto top = parse_top_logprobs(res->body);
        ScoreResponse entry;
        entry.key = key;
        entry.request_id = request_id;
        entry.top_logprobs = top;
        impl_->cache->put(entry);
        return top;
      } catch (const Error& e) {
        failure = e.what();
      }
    }
    transcript += "attempt " + std::to_string(attempt) + ": " + failure + "\n";
    if (attempt < config_.retry.max_attempts) {
      std::this_thread::sleep_for(std::chrono::duration<double, std::milli>(backoff_ms));
      backoff_ms *= config_.retry.multiplier;
    }
  }
  throw Error(ErrorKind::kProvider, "request '" + request_id + "' to " + config_.endpoint +
                                        " failed after " +
                                        std::to_string(config_.retry.max_attempts) +
                                        " attempts\n" + transcript);
}

LogprobRecord HttpProvider::score(const TaskInstance& instance) {
  const auto& vocab = Vocabulary::standard();
  const auto top = top_logprobs(instance.rendered(), instance.id);

  LogprobRecord rec;
  rec.request_id = instance.id;
  rec.candidate_ids = instance.candidates;
  rec.target_id = instance.target;
  rec.is_logit = false;
  for (const auto& [text, lp] : top) {
    const std::string t = trim(text);
    if (t.empty() || !std::isfinite(lp)) continue;
    const TokenId id = vocab.lookup_or_external(t);
    const auto [it, inserted] = rec.entries.emplace(id, lp);
    if (!inserted) it->second = std::max(it->second, lp);
  }
  for (TokenId c : instance.candidates) {
    if (!rec.entries.contains(c)) {
      throw Error(ErrorKind::kProvider,
                  "candidate '" + vocab.text(c) + "' is missing from the top-" +
                      std::to_string(config_.top_logprobs) + " logprobs for instance '" +
                      instance.id + "'; raise top_logprobs or shrink the candidate set");
    }
  }
  return rec;
}

double HttpProvider::verify(std::string_view claim, std::string_view context) {
  const std::string prompt = verifier_prompt(claim, context);
  const auto top = top_logprobs(prompt, verify_cache_key(claim, context));
  std::array<std::optional<double>, 4> label_lp;
  for (const auto& [text, lp] : top) {
    const std::string t = trim(text);
    if (t.empty()) continue;
    for (std::size_t i = 0; i < kVerifierLabels.size(); ++i) {
      if (!kVerifierLabels[i].starts_with(t)) continue;
      if (!label_lp[i] || lp > *label_lp[i]) label_lp[i] = lp;
    }
  }
  return verifier_probability(label_lp);
}

}  // namespace routing_audit
