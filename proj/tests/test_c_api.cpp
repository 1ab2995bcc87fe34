// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The routing-audit Authors

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <regex>
#include <string>

#include "routing_audit.h"

namespace {

std::string take(char* s) {
  std::string out = s ? s : "";
  ra_string_free(s);
  return out;
}

}  // namespace

TEST(CApi, VersionAndStatusStrings) {
  EXPECT_STRNE(ra_version(), "");
  EXPECT_STREQ(ra_status_string(RA_OK), "ok");
  EXPECT_STRNE(ra_status_string(RA_ERR_DOMAIN), ra_status_string(RA_ERR_IO));
}

TEST(CApi, InformationQuantities) {
  double v = 0.0;
  ASSERT_EQ(ra_binary_entropy(0.5, &v), RA_OK);
  EXPECT_NEAR(v, std::log(2.0), 1e-15);
  ASSERT_EQ(ra_fano_lower_bound(50, 0.745, &v), RA_OK);
  EXPECT_NEAR(v, 0.444855, 1e-6);
  double eps = 0.0;
  ASSERT_EQ(ra_fano_invert(50, v, &eps), RA_OK);
  EXPECT_NEAR(eps, 0.745, 1e-6);
  ASSERT_EQ(ra_mi_bound_from_cand_acc(0.01, 50, &v), RA_OK);
  EXPECT_EQ(v, 0.0);

  int inf = -1;
  ASSERT_EQ(ra_kl_bernoulli(0.9, 0.05, &v, &inf), RA_OK);
  EXPECT_EQ(inf, 0);
  EXPECT_NEAR(v, 2.3762, 1e-4);
  ASSERT_EQ(ra_kl_bernoulli(0.5, 0.0, &v, &inf), RA_OK);
  EXPECT_EQ(inf, 1);
  EXPECT_EQ(v, 0.0);

  double lo = 0.0;
  double hi = 0.0;
  ASSERT_EQ(ra_wilson_interval(399, 400, 0.95, &lo, &hi), RA_OK);
  EXPECT_NEAR(lo, 0.98598, 1e-5);
  EXPECT_LE(hi, 1.0);

  double eta = 0.0;
  int violation = -1;
  ASSERT_EQ(ra_routing_efficiency(0.5, 2.0, &eta, &violation), RA_OK);
  EXPECT_DOUBLE_EQ(eta, 0.25);
  EXPECT_EQ(violation, 0);
}

TEST(CApi, ErrorsSetLastError) {
  double v = 0.0;
  EXPECT_EQ(ra_binary_entropy(1.5, &v), RA_ERR_DOMAIN);
  EXPECT_STRNE(ra_last_error(), "");
  EXPECT_EQ(ra_binary_entropy(0.5, nullptr), RA_ERR_ARGUMENT);
  EXPECT_EQ(ra_fano_lower_bound(1, 0.1, &v), RA_ERR_DOMAIN);
  const double unnormalized[] = {0.5, 0.5, 0.5, 0.5};
  EXPECT_EQ(ra_mutual_information(unnormalized, 2, 2, &v), RA_ERR_DOMAIN);
}

TEST(CApi, JointQuantities) {
  const double ident[] = {0.5, 0.0, 0.0, 0.5};
  double v = 0.0;
  ASSERT_EQ(ra_mutual_information(ident, 2, 2, &v), RA_OK);
  EXPECT_NEAR(v, std::log(2.0), 1e-15);
  ra_slack s{};
  ASSERT_EQ(ra_slack_decompose(ident, 2, &s), RA_OK);
  EXPECT_NEAR(s.mutual_information, s.fano_bound + s.jensen_slack + s.confusion_slack, 1e-12);
  EXPECT_EQ(s.error_rate, 0.0);
}

TEST(CApi, BudgetTest) {
  const double p0[] = {0.05};
  int pass = -1;
  double req = 0.0;
  double obs = 0.0;
  ASSERT_EQ(ra_budget_test(0.95, p0, 1, 0.75, 0, &pass, &req, &obs), RA_OK);
  EXPECT_EQ(pass, 1);
  EXPECT_NEAR(obs, 2.6500, 1e-4);
  EXPECT_NEAR(req, 1.6973, 1e-4);
  const double p0b[] = {0.036};
  ASSERT_EQ(ra_budget_test(0.398, p0b, 1, 0.75, 0, &pass, &req, &obs), RA_OK);
  EXPECT_EQ(pass, 0);
  EXPECT_EQ(ra_budget_test(0.9, p0, 0, 0.75, 0, &pass, &req, &obs), RA_ERR_DOMAIN);
}

TEST(CApi, ChainHandle) {
  const double prior[] = {0.25, 0.25, 0.25, 0.25};
  ra_chain* chain = nullptr;
  ASSERT_EQ(ra_chain_create(prior, 4, &chain), RA_OK);
  const double noise[] = {0.25, 0.25, 0.25, 0.25};
  for (int i = 0; i < 3; ++i) ASSERT_EQ(ra_chain_add_copy_or_noise(chain, 0.8, noise, 4), RA_OK);
  double profile[8];
  size_t count = 0;
  ASSERT_EQ(ra_chain_mi_profile(chain, profile, 8, &count), RA_OK);
  EXPECT_EQ(count, 4u);
  for (size_t i = 1; i < count; ++i) EXPECT_LE(profile[i], profile[i - 1] + 1e-12);
  EXPECT_EQ(ra_chain_mi_profile(chain, profile, 2, &count), RA_ERR_ARGUMENT);
  EXPECT_EQ(count, 4u);

  int bound = 0;
  int expected = 0;
  int holds = 0;
  double alpha = 0.0;
  ASSERT_EQ(ra_chain_verify(chain, &bound, &expected, &holds, &alpha), RA_OK);
  EXPECT_EQ(bound, 1);
  EXPECT_NEAR(alpha, 0.512, 1e-12);

  ASSERT_EQ(ra_chain_add_checkpoint(chain, 3), RA_OK);
  double final_mi = 0.0;
  ASSERT_EQ(ra_chain_final_mi(chain, &final_mi), RA_OK);
  EXPECT_NEAR(final_mi, std::log(4.0), 1e-12);

  const double bad[] = {0.5, 0.4};
  EXPECT_EQ(ra_chain_add_stage(chain, bad, 1, 2), RA_ERR_DOMAIN);
  ra_chain_destroy(chain);
  ra_chain_destroy(nullptr);
}

TEST(CApi, SimulatedProviderHandle) {
  ra_provider* p = nullptr;
  ASSERT_EQ(ra_provider_create("{\"provider\":\"simulated\"}", &p), RA_OK);
  double prob = 0.0;
  ASSERT_EQ(ra_provider_verify(p, "KEY = [ apple ]", "KEY = [ apple ]", &prob), RA_OK);
  EXPECT_GT(prob, 0.5);
  ASSERT_EQ(ra_provider_verify(p, "KEY = [ apple ]", "nothing here", &prob), RA_OK);
  EXPECT_LT(prob, 0.5);
  char* record = nullptr;
  EXPECT_NE(ra_provider_score(p, "{not json", &record), RA_OK);
  EXPECT_EQ(record, nullptr);
  ra_provider_destroy(p);
  EXPECT_EQ(ra_provider_create("{\"provider\":\"telepathy\"}", &p), RA_ERR_CONFIG);
}

TEST(CApi, RunCommands) {
  const auto dir = std::filesystem::temp_directory_path() / "ra_c_api_run";
  std::filesystem::remove_all(dir);
  const std::string gen = "{\"k_values\":[0],\"trials_per_condition\":3,\"outdir\":\"" +
                          dir.string() + "\"}";
  char* result = nullptr;
  ASSERT_EQ(ra_run("gen", gen.c_str(), &result), RA_OK);
  EXPECT_TRUE(std::regex_search(take(result), std::regex("\"instances\":\\s*3")));

  // Score the generated instances through the provider handle.
  ra_provider* p = nullptr;
  ASSERT_EQ(ra_provider_create("{\"provider\":\"simulated\"}", &p), RA_OK);
  std::ifstream in(dir / "instances.jsonl");
  std::string line;
  ASSERT_TRUE(std::getline(in, line));
  char* record = nullptr;
  ASSERT_EQ(ra_provider_score(p, line.c_str(), &record), RA_OK);
  EXPECT_NE(take(record).find("\"candidate_ids\""), std::string::npos);
  ra_provider_destroy(p);

  result = nullptr;
  EXPECT_EQ(ra_run("gen", "{\"tasks\":[\"nope\"]}", &result), RA_ERR_CONFIG);
  EXPECT_NE(take(result).find("error"), std::string::npos);
  EXPECT_EQ(ra_run("gen", "not json", nullptr), RA_ERR_CONFIG);
  EXPECT_EQ(ra_run(nullptr, "{}", nullptr), RA_ERR_ARGUMENT);
  EXPECT_NE(std::string(ra_schema_help()).find("stage.csv"), std::string::npos);
  std::filesystem::remove_all(dir);
}
