// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The routing-audit Authors

#include "routing_audit.h"

#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <limits>
#include <map>
#include <memory>
#include <new>
#include <string>

#include "routing_audit/audit.hpp"
#include "routing_audit/channel_lab.hpp"
#include "routing_audit/info_core.hpp"
#include "routing_audit/pipeline.hpp"
#include "routing_audit/provider.hpp"
#include "routing_audit/serialize.hpp"
#include "routing_audit/stage_metrics.hpp"

using namespace routing_audit;

struct ra_chain {
  ChainSpec spec;
};

struct ra_provider {
  std::unique_ptr<Provider> impl;
};

namespace {

thread_local std::string g_last_error;

ra_status status_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kDomain: return RA_ERR_DOMAIN;
    case ErrorKind::kConfig: return RA_ERR_CONFIG;
    case ErrorKind::kIo: return RA_ERR_IO;
    case ErrorKind::kProvider: return RA_ERR_PROVIDER;
    case ErrorKind::kInvariant: return RA_ERR_INVARIANT;
  }
  return RA_ERR_OTHER;
}

template <class F>
ra_status guarded(F&& body) {
  g_last_error.clear();
  try {
    body();
    return RA_OK;
  } catch (const Error& e) {
    g_last_error = e.what();
    return status_for(e.kind());
  } catch (const nlohmann::json::exception& e) {
    g_last_error = e.what();
    return RA_ERR_CONFIG;
  } catch (const std::bad_alloc&) {
    g_last_error = "out of memory";
    return RA_ERR_OTHER;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return RA_ERR_OTHER;
  } catch (...) {
    g_last_error = "unknown error";
    return RA_ERR_OTHER;
  }
}

ra_status bad_argument(const char* what) {
  g_last_error = what;
  return RA_ERR_ARGUMENT;
}

char* duplicate(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

}  // namespace

extern "C" {

const char* ra_version(void) { return ROUTING_AUDIT_VERSION; }

const char* ra_status_string(ra_status status) {
  switch (status) {
    case RA_OK: return "ok";
    case RA_ERR_OTHER: return "error";
    case RA_ERR_CONFIG: return "config error";
    case RA_ERR_IO: return "io error";
    case RA_ERR_PROVIDER: return "provider error";
    case RA_ERR_INVARIANT: return "invariant violation";
    case RA_ERR_DOMAIN: return "domain error";
    case RA_ERR_ARGUMENT: return "invalid argument";
  }
  return "unknown status";
}

const char* ra_last_error(void) { return g_last_error.c_str(); }

void ra_string_free(char* s) { std::free(s); }

ra_status ra_binary_entropy(double p, double* out) {
  if (!out) return bad_argument("out is null");
  return guarded([&] { *out = binary_entropy(p).value(); });
}

ra_status ra_kl_bernoulli(double p, double q, double* out, int* is_infinite) {
  if (!out || !is_infinite) return bad_argument("output pointer is null");
  return guarded([&] {
    const Divergence d = kl_bernoulli(p, q);
    *is_infinite = d.is_infinite() ? 1 : 0;
    *out = d.is_infinite() ? 0.0 : d.nats().value();
  });
}

ra_status ra_fano_lower_bound(size_t alphabet_size, double epsilon, double* out) {
  if (!out) return bad_argument("out is null");
  return guarded([&] { *out = fano_lower_bound(alphabet_size, epsilon).value(); });
}

ra_status ra_fano_invert(size_t alphabet_size, double info_nats, double* out) {
  if (!out) return bad_argument("out is null");
  return guarded([&] { *out = fano_invert(alphabet_size, Nats(info_nats)); });
}

ra_status ra_mi_bound_from_cand_acc(double cand_acc, size_t alphabet_size, double* out) {
  if (!out) return bad_argument("out is null");
  return guarded([&] { *out = mi_bound_from_cand_acc(cand_acc, alphabet_size).value(); });
}

ra_status ra_wilson_interval(uint64_t successes, uint64_t n, double confidence, double* lower,
                             double* upper) {
  if (!lower || !upper) return bad_argument("output pointer is null");
  return guarded([&] {
    const WilsonInterval ci = wilson_interval(successes, n, confidence);
    *lower = ci.lower;
    *upper = ci.upper;
  });
}

ra_status ra_routing_efficiency(double used_nats, double available_nats, double* eta,
                                int* dpi_violation) {
  if (!eta || !dpi_violation) return bad_argument("output pointer is null");
  return guarded([&] {
    const RoutingEfficiency r = routing_efficiency(Nats(used_nats), Nats(available_nats));
    *eta = r.eta;
    *dpi_violation = r.dpi_violation ? 1 : 0;
  });
}

ra_status ra_mutual_information(const double* joint, size_t rows, size_t cols, double* out) {
  if (!joint || !out) return bad_argument("pointer argument is null");
  return guarded([&] {
    JointDistribution j(rows, cols, std::vector<double>(joint, joint + rows * cols));
    *out = mutual_information(j).value();
  });
}

ra_status ra_slack_decompose(const double* joint, size_t m, ra_slack* out) {
  if (!joint || !out) return bad_argument("pointer argument is null");
  return guarded([&] {
    JointDistribution j(m, m, std::vector<double>(joint, joint + m * m));
    const SlackDecomposition s = slack_decompose(j);
    out->error_rate = s.error_rate;
    out->fano_bound = s.fano_bound.value();
    out->jensen_slack = s.jensen_slack.value();
    out->confusion_slack = s.confusion_slack.value();
    out->mutual_information = s.mutual_information.value();
  });
}

ra_status ra_budget_test(double p1, const double* p0, size_t n, double threshold,
                         int threshold_is_confidence, int* pass, double* req_bits,
                         double* obs_bits) {
  if (!p0 || !pass || !req_bits || !obs_bits) return bad_argument("pointer argument is null");
  return guarded([&] {
    std::map<std::string, double> nulls;
    for (size_t i = 0; i < n; ++i) {
      char name[32];
      std::snprintf(name, sizeof name, "null%03zu", i);
      nulls[name] = p0[i];
    }
    const BudgetCertificate c = budget_test(
        p1, nulls, threshold,
        threshold_is_confidence ? ThresholdKind::kConfidence : ThresholdKind::kTau);
    *pass = c.verdict == BudgetVerdict::kPass ? 1 : 0;
    *req_bits = c.req_bits.value_or_inf();
    *obs_bits = c.obs_bits.value_or_inf();
  });
}

// ---------------------------------------------------------------------------

ra_status ra_chain_create(const double* prior, size_t m, ra_chain** out) {
  if (!prior || !out) return bad_argument("pointer argument is null");
  *out = nullptr;
  return guarded([&] {
    auto chain = std::make_unique<ra_chain>();
    chain->spec.prior.assign(prior, prior + m);
    push_joint(chain->spec);  // validates the prior
    *out = chain.release();
  });
}

void ra_chain_destroy(ra_chain* chain) { delete chain; }

ra_status ra_chain_add_stage(ra_chain* chain, const double* matrix, size_t inputs,
                             size_t outputs) {
  if (!chain || !matrix) return bad_argument("pointer argument is null");
  return guarded([&] {
    DiscreteChannel k(inputs, outputs, std::vector<double>(matrix, matrix + inputs * outputs));
    chain->spec.stages.push_back(ChainStage::arbitrary(std::move(k)));
  });
}

ra_status ra_chain_add_copy_or_noise(ra_chain* chain, double alpha, const double* noise,
                                     size_t m) {
  if (!chain || !noise) return bad_argument("pointer argument is null");
  return guarded([&] {
    CopyOrNoiseChannel c{alpha, std::vector<double>(noise, noise + m)};
    chain->spec.stages.push_back(ChainStage::from(c, m));
  });
}

ra_status ra_chain_add_checkpoint(ra_chain* chain, size_t position) {
  if (!chain) return bad_argument("chain is null");
  return guarded([&] {
    if (position > chain->spec.stages.size()) {
      throw_domain("checkpoint position is past the end of the chain");
    }
    chain->spec.checkpoints.insert(position);
  });
}

ra_status ra_chain_final_mi(const ra_chain* chain, double* out) {
  if (!chain || !out) return bad_argument("pointer argument is null");
  return guarded([&] { *out = mi_profile(chain->spec).back().value(); });
}

ra_status ra_chain_mi_profile(const ra_chain* chain, double* out, size_t capacity,
                              size_t* count) {
  if (!chain || !count) return bad_argument("pointer argument is null");
  std::vector<Nats> profile;
  const ra_status st = guarded([&] { profile = mi_profile(chain->spec); });
  if (st != RA_OK) return st;
  *count = profile.size();
  if (!out || capacity < profile.size()) return bad_argument("output buffer is too small");
  for (size_t i = 0; i < profile.size(); ++i) out[i] = profile[i].value();
  return RA_OK;
}

ra_status ra_chain_verify(const ra_chain* chain, int* bound_holds, int* equality_expected,
                          int* equality_holds, double* alpha_product) {
  if (!chain || !bound_holds || !equality_expected || !equality_holds || !alpha_product) {
    return bad_argument("pointer argument is null");
  }
  return guarded([&] {
    const ContractionReport r = verify_sdpi_contraction(chain->spec);
    *bound_holds = r.bound_holds ? 1 : 0;
    *equality_expected = r.equality_expected ? 1 : 0;
    *equality_holds = r.equality_holds ? 1 : 0;
    *alpha_product = r.alpha_product;
  });
}

// ---------------------------------------------------------------------------

ra_status ra_provider_create(const char* spec_json, ra_provider** out) {
  if (!spec_json || !out) return bad_argument("pointer argument is null");
  *out = nullptr;
  return guarded([&] {
    const ProviderSpec spec = provider_spec_from_json(Json::parse(spec_json));
    auto p = std::make_unique<ra_provider>();
    p->impl = make_provider(spec);
    *out = p.release();
  });
}

void ra_provider_destroy(ra_provider* provider) { delete provider; }

ra_status ra_provider_score(ra_provider* provider, const char* instance_json,
                            char** record_json) {
  if (!provider || !instance_json || !record_json) return bad_argument("pointer argument is null");
  *record_json = nullptr;
  return guarded([&] {
    const TaskInstance inst = instance_from_json(Json::parse(instance_json));
    *record_json = duplicate(to_json(provider->impl->score(inst)).dump());
  });
}

ra_status ra_provider_verify(ra_provider* provider, const char* claim, const char* context,
                             double* probability) {
  if (!provider || !claim || !context || !probability) {
    return bad_argument("pointer argument is null");
  }
  return guarded([&] { *probability = provider->impl->verify(claim, context); });
}

// ---------------------------------------------------------------------------

ra_status ra_run(const char* command, const char* config_json, char** result_json) {
  if (!command || !config_json) return bad_argument("pointer argument is null");
  if (result_json) *result_json = nullptr;
  ra_status status = RA_OK;
  const ra_status parse = guarded([&] {
    Json config;
    try {
      config = Json::parse(config_json);
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorKind::kConfig, std::string("config is not valid JSON: ") + e.what());
    }
    const CommandResult r = run_command(command, config);
    status = static_cast<ra_status>(static_cast<int>(r.exit_code));
    if (r.summary.contains("error")) g_last_error = r.summary.at("error").get<std::string>();
    if (result_json) *result_json = duplicate(r.summary.dump(2));
  });
  return parse != RA_OK ? parse : status;
}

const char* ra_schema_help(void) {
  static const std::string text(schema_help());
  return text.c_str();
}

}  // extern "C"
