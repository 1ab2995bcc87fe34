// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The routing-audit Authors

// Acceptance gate. Prints one PASS/FAIL line per criterion and exits
// nonzero if any criterion fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "routing_audit/audit.hpp"
#include "routing_audit/channel_lab.hpp"
#include "routing_audit/info_core.hpp"
#include "routing_audit/pipeline.hpp"
#include "routing_audit/provider.hpp"
#include "routing_audit/rng.hpp"
#include "routing_audit/stage_metrics.hpp"
#include "routing_audit/taskgen.hpp"

namespace fs = std::filesystem;
namespace ra = routing_audit;
using Clock = std::chrono::steady_clock;

namespace {

// Pinned tolerances.
constexpr double kFanoTableTol = 0.005;
constexpr double kFanoRuntimeMs = 1.0;
constexpr double kEqualityTol = 1e-9;
constexpr double kSlackZeroTol = 1e-10;
constexpr double kIdentityTol = 1e-10;
constexpr double kSlackFloor = -1e-12;
constexpr double kChainTol = 1e-9;
constexpr double kInvertTol = 1e-6;
constexpr double kKlTol = 1e-4;
constexpr double kAuditTol = 1e-3;
constexpr double kLiftTol = 0.05;
constexpr double kSimRuntimeS = 60.0;

struct Check {
  bool ok = true;
  std::string detail;

  void require(bool cond, const std::string& what) {
    if (!cond) {
      ok = false;
      if (!detail.empty()) detail += "; ";
      detail += what;
    }
  }
};

std::string fmt(double v, int prec = 6) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", prec, v);
  return buf;
}

std::vector<double> uniform(std::size_t m) {
  return std::vector<double>(m, 1.0 / static_cast<double>(m));
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

ra::ChainSpec erasure_chain(double alpha, std::size_t m, std::size_t length) {
  ra::ChainSpec c;
  c.prior = uniform(m);
  c.prior.push_back(0.0);
  for (std::size_t i = 0; i < length; ++i) {
    c.stages.push_back(ra::ChainStage::from(ra::erasure_copy_or_noise(alpha, m), m + 1));
  }
  return c;
}

ra::JointDistribution random_uniform_v_joint(ra::Rng& rng, std::size_t m) {
  std::vector<double> p(m * m);
  for (std::size_t x = 0; x < m; ++x) {
    double total = 0.0;
    for (std::size_t y = 0; y < m; ++y) total += p[x * m + y] = -std::log(1.0 - rng.uniform());
    for (std::size_t y = 0; y < m; ++y) p[x * m + y] /= total * static_cast<double>(m);
  }
  return ra::JointDistribution(m, m, std::move(p));
}

Check fano_table() {
  Check c;
  const auto t0 = Clock::now();
  const double hi = ra::fano_lower_bound(50, 1.0 - 0.255).value();
  const double lo = ra::fano_lower_bound(50, 1.0 - 0.739).value();
  const double at_chance = ra::fano_lower_bound(50, 49.0 / 50.0).value();
  const double below_chance = ra::mi_bound_from_cand_acc(0.01, 50).value();
  const double ms = std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
  c.require(std::abs(hi - 0.45) <= kFanoTableTol, "phi(0.745)=" + fmt(hi));
  c.require(std::abs(lo - 2.32) <= kFanoTableTol, "phi(0.261)=" + fmt(lo));
  c.require(at_chance == 0.0 && below_chance == 0.0, "clamped rows not exactly 0");
  c.require(ms < kFanoRuntimeMs, "runtime " + fmt(ms, 3) + " ms");
  const std::string numbers = "phi50(0.745)=" + fmt(hi) + " phi50(0.261)=" + fmt(lo) +
                              " clamped=" + fmt(at_chance, 1) + "," + fmt(below_chance, 1) +
                              " in " + fmt(ms, 4) + " ms";
  c.detail = c.ok ? numbers : c.detail + " [" + numbers + "]";
  return c;
}

// Rows of the M-ary symmetric channel. Built directly because the library
// constructor rejects eps > 1 - 1/M, which the (M=2, 0.745) cell needs.
std::vector<std::vector<double>> symmetric_rows(std::size_t m, double eps) {
  std::vector<std::vector<double>> rows(m, std::vector<double>(m, eps / static_cast<double>(m - 1)));
  for (std::size_t i = 0; i < m; ++i) rows[i][i] = 1.0 - eps;
  return rows;
}

Check equality_certification() {
  Check c;
  double worst_mi = 0.0;
  double worst_slack = 0.0;
  for (std::size_t m : {2u, 5u, 50u}) {
    for (double eps : {0.1, 0.3, 0.745}) {
      const auto k = ra::DiscreteChannel::from_rows(symmetric_rows(m, eps));
      const auto j = ra::JointDistribution::from_prior_and_channel(uniform(m), m, k.data());
      const auto s = ra::slack_decompose(j);
      const double mi = ra::mutual_information(j).value();
      // Phi_M(eps) as evaluated by the decomposition (unclamped; it is
      // positive on every cell here).
      worst_mi = std::max(worst_mi, std::abs(mi - s.fano_bound.value()));
      if (eps <= 1.0 - 1.0 / static_cast<double>(m)) {
        worst_mi = std::max(worst_mi, std::abs(mi - ra::fano_lower_bound(m, eps).value()));
      }
      worst_slack = std::max({worst_slack, std::abs(s.jensen_slack.value()),
                              std::abs(s.confusion_slack.value())});
    }
  }
  c.require(worst_mi < kEqualityTol, "max |MI-phi|=" + fmt(worst_mi, 12));
  c.require(worst_slack < kSlackZeroTol, "max slack=" + fmt(worst_slack, 12));
  if (c.ok) {
    c.detail = "9 cells, max |MI-phi|=" + fmt(worst_mi, 14) + " max slack=" + fmt(worst_slack, 14);
  }
  return c;
}

Check slack_identity() {
  Check c;
  ra::Rng rng(20260301);
  double worst = 0.0;
  double min_slack = 0.0;
  for (int t = 0; t < 1000; ++t) {
    const std::size_t m = 2 + rng.below(7);
    const auto s = ra::slack_decompose(random_uniform_v_joint(rng, m));
    worst = std::max(worst, std::abs(s.mutual_information.value() -
                                     (s.fano_bound + s.jensen_slack + s.confusion_slack).value()));
    min_slack = std::min({min_slack, s.jensen_slack.value(), s.confusion_slack.value()});
  }
  c.require(worst < kIdentityTol, "identity residual " + fmt(worst, 14));
  c.require(min_slack >= kSlackFloor, "min slack " + fmt(min_slack, 14));
  if (c.ok) c.detail = "residual=" + fmt(worst, 14) + " min slack=" + fmt(min_slack, 14);
  return c;
}

Check copy_or_noise() {
  Check c;
  double worst_ratio = 0.0;
  double worst_ckpt = 0.0;
  for (double alpha : {0.5, 0.8, 0.95}) {
    for (std::size_t k = 1; k <= 12; ++k) {
      const auto rep = ra::verify_sdpi_contraction(erasure_chain(alpha, 4, k));
      worst_ratio = std::max(worst_ratio, std::abs(rep.final_mi.value() / rep.initial_mi.value() -
                                                   std::pow(alpha, static_cast<double>(k))));
      for (std::size_t j = 0; j <= k; ++j) {
        auto chain = erasure_chain(alpha, 4, k);
        chain.checkpoints.insert(j);
        const double suffix = ra::mi_profile(erasure_chain(alpha, 4, k - j)).back().value();
        worst_ckpt = std::max(worst_ckpt, std::abs(ra::mi_profile(chain).back().value() - suffix));
      }
    }
  }
  c.require(worst_ratio < kChainTol, "ratio error " + fmt(worst_ratio, 12));
  c.require(worst_ckpt < kChainTol, "checkpoint error " + fmt(worst_ckpt, 12));

  // Uniform noise over the value alphabet (no erasure symbol) contracts
  // strictly faster than alpha^k; reported, not gated.
  ra::ChainSpec uni;
  uni.prior = uniform(4);
  for (int i = 0; i < 3; ++i) uni.stages.push_back(ra::ChainStage::from({0.8, uniform(4)}, 4));
  const auto u = ra::verify_sdpi_contraction(uni);
  std::printf("NOTE  #4 uniform-noise chain alpha=0.8 k=3: ratio %s vs alpha^k %s\n",
              fmt(u.final_mi.value() / u.initial_mi.value()).c_str(), fmt(0.512).c_str());
  if (c.ok) c.detail = "ratio err=" + fmt(worst_ratio, 14) + " checkpoint err=" + fmt(worst_ckpt, 14);
  return c;
}

Check inversion() {
  Check c;
  double worst = 0.0;
  for (std::size_t m : {2u, 10u, 50u}) {
    const double top = static_cast<double>(m - 1) / static_cast<double>(m);
    for (int i = 0; i < 100; ++i) {
      const double eps = top * static_cast<double>(i) / 100.0;
      const double back = ra::fano_invert(m, ra::fano_lower_bound(m, eps));
      worst = std::max(worst, std::abs(back - eps));
    }
  }
  c.require(worst < kInvertTol, "max error " + fmt(worst, 10));
  if (c.ok) c.detail = "max |eps'-eps|=" + fmt(worst, 12);
  return c;
}

Check bits_to_trust() {
  Check c;
  const double kl = ra::kl_bernoulli(0.9, 0.05).nats().value();
  c.require(std::abs(kl - 2.3762) <= kKlTol, "KL=" + fmt(kl));
  if (c.ok) c.detail = "KL(0.9||0.05)=" + fmt(kl, 5) + " nats (documented 2.25 figure differs)";
  return c;
}

Check stage_invariants() {
  Check c;
  ra::Rng rng(7);
  std::vector<ra::StageOutcome> window;
  int bad_partition = 0;
  int bad_gate = 0;
  int bad_fracs = 0;
  for (int t = 0; t < 10000; ++t) {
    ra::LogprobRecord r;
    r.request_id = "r" + std::to_string(t);
    const std::size_t n_cand = 1 + rng.below(5);
    const std::size_t n_other = rng.below(4);
    for (std::size_t i = 0; i < n_cand; ++i) {
      r.candidate_ids.push_back(static_cast<ra::TokenId>(10 + i));
      r.entries[10 + static_cast<ra::TokenId>(i)] = std::round(rng.normal() * 4.0) / 2.0;
    }
    for (std::size_t i = 0; i < n_other; ++i) {
      r.entries[100 + static_cast<ra::TokenId>(i)] = std::round(rng.normal() * 4.0) / 2.0;
    }
    r.target_id = r.candidate_ids[rng.below(n_cand)];
    const auto o = ra::classify(r);
    const bool top_in_c = std::find(r.candidate_ids.begin(), r.candidate_ids.end(),
                                    o.top_token) != r.candidate_ids.end();
    const int hits = (o.verdict == ra::Verdict::kCorrect) + (o.verdict == ra::Verdict::kStage2A) +
                     (o.verdict == ra::Verdict::kStage2B);
    const bool expected_correct = o.top_token == r.target_id;
    const bool expected_2a = !top_in_c;
    if (hits != 1 || (expected_correct != (o.verdict == ra::Verdict::kCorrect)) ||
        (expected_2a != (o.verdict == ra::Verdict::kStage2A))) {
      ++bad_partition;
    }
    if (o.gate_gap && ((*o.gate_gap >= 0.0) != top_in_c)) ++bad_gate;
    if (!o.gate_gap && n_other > 0) ++bad_gate;
    window.push_back(o);
    if (window.size() == 25) {
      const auto s = ra::aggregate(window);
      if (s.errors > 0 && std::abs(*s.frac_2a + *s.frac_2b - 1.0) > 1e-12) ++bad_fracs;
      if (s.errors == 0 && (s.frac_2a || s.frac_2b)) ++bad_fracs;
      window.clear();
    }
  }
  c.require(bad_partition == 0, std::to_string(bad_partition) + " partition violations");
  c.require(bad_gate == 0, std::to_string(bad_gate) + " gate-sign violations");
  c.require(bad_fracs == 0, std::to_string(bad_fracs) + " aggregate fraction violations");
  if (c.ok) c.detail = "10000 records, 400 aggregates, 0 violations";
  return c;
}

Check audit_arithmetic() {
  Check c;
  const auto cert = ra::budget_test(0.398, {{"pseudo_prior", 0.036}}, 0.75);
  const double obs = cert.obs_bits.nats().value();
  const double req = cert.req_bits.nats().value();
  c.require(cert.verdict == ra::BudgetVerdict::kFlag, "verdict is not FLAG");
  c.require(std::abs(obs - 1.258) <= kAuditTol, "ObsBits " + fmt(obs, 4) + " != 1.258");
  c.require(std::abs(req - 2.219) <= kAuditTol, "ReqBits " + fmt(req, 4) + " != 2.219");
  const double lift = ra::lift_pp(0.833, 0.615);
  c.require(std::abs(lift - 21.8) <= kLiftTol, "lift " + fmt(lift, 2));

  // Envelope monotonicity: adding nulls never turns FLAG into PASS, and the
  // envelope verdict equals the verdict against its hardest member.
  ra::Rng rng(88);
  int violations = 0;
  for (int t = 0; t < 1000; ++t) {
    const double p1 = 0.01 + 0.98 * rng.uniform();
    const double tau = 0.05 + 0.9 * rng.uniform();
    std::map<std::string, double> nulls;
    const std::size_t n = 1 + rng.below(4);
    for (std::size_t i = 0; i < n; ++i) nulls["n" + std::to_string(i)] = 0.01 + 0.98 * rng.uniform();
    std::map<std::string, double> more = nulls;
    more["extra"] = 0.01 + 0.98 * rng.uniform();
    const auto a = ra::budget_test(p1, nulls, tau);
    const auto b = ra::budget_test(p1, more, tau);
    if (a.verdict == ra::BudgetVerdict::kFlag && b.verdict == ra::BudgetVerdict::kPass) ++violations;
    bool all_pass = true;
    for (const auto& [name, p0] : more) {
      all_pass = all_pass && ra::budget_test(p1, {{name, p0}}, tau).verdict == ra::BudgetVerdict::kPass;
    }
    if (all_pass != (b.verdict == ra::BudgetVerdict::kPass)) ++violations;
  }
  c.require(violations == 0, std::to_string(violations) + " envelope violations");
  const std::string numbers = "ObsBits=" + fmt(obs, 4) + " ReqBits=" + fmt(req, 4) +
                              " verdict=" + std::string(ra::to_string(cert.verdict)) +
                              " lift=" + fmt(lift, 1) + " envelope violations=" +
                              std::to_string(violations);
  c.detail = c.ok ? numbers : c.detail + " [" + numbers + "]";
  return c;
}

ra::StageSummary run_condition(ra::SimulatedProvider& sim, const ra::CandidatePool& pool,
                               std::size_t k, ra::FillerKind filler,
                               std::optional<ra::CheckpointMode> mode, std::size_t n) {
  std::vector<ra::StageOutcome> out;
  for (std::size_t t = 0; t < n; ++t) {
    ra::GenerateParams p;
    p.k = k;
    p.filler = filler;
    p.seed = ra::trial_seed(0, t);
    auto inst = ra::generate(pool, p);
    if (mode) inst = ra::insert_checkpoints(inst, {ra::kDefaultCheckpointEvery, *mode});
    out.push_back(ra::classify(sim.score(inst)));
  }
  return ra::aggregate(out);
}

std::string ci(const ra::WilsonInterval& w) {
  return fmt(w.estimate, 3) + " [" + fmt(w.lower, 3) + "," + fmt(w.upper, 3) + "]";
}

Check simulated_properties() {
  Check c;
  constexpr std::size_t n = 400;
  constexpr std::size_t large_k = 1024;
  const auto t0 = Clock::now();
  ra::SimulatedProvider sim;
  const auto pool = ra::build_pool(0);
  const auto k0 = run_condition(sim, pool, 0, ra::FillerKind::kDecoyHeavy, std::nullopt, n);
  const auto base = run_condition(sim, pool, large_k, ra::FillerKind::kDecoyHeavy, std::nullopt, n);
  const auto oracle =
      run_condition(sim, pool, large_k, ra::FillerKind::kDecoyHeavy, ra::CheckpointMode::kOracle, n);
  const auto sham =
      run_condition(sim, pool, large_k, ra::FillerKind::kDecoyHeavy, ra::CheckpointMode::kSham, n);
  const auto wrong =
      run_condition(sim, pool, large_k, ra::FillerKind::kDecoyHeavy, ra::CheckpointMode::kWrong, n);
  const double secs = std::chrono::duration<double>(Clock::now() - t0).count();

  const double frac_2b = base.frac_2b.value_or(0.0);
  c.require(k0.acc >= 0.99, "acc(k=0)=" + fmt(k0.acc, 3));
  c.require(base.errors > 0 && frac_2b >= 0.9, "frac_2b=" + fmt(frac_2b, 3));
  c.require(oracle.acc - base.acc >= 0.5, "oracle dAcc=" + fmt(oracle.acc - base.acc, 3));
  c.require(std::abs(sham.acc - base.acc) <= 0.05, "sham dAcc=" + fmt(sham.acc - base.acc, 3));
  c.require(wrong.acc - base.acc <= 0.0, "wrong dAcc=" + fmt(wrong.acc - base.acc, 3));
  c.require(secs < kSimRuntimeS, "runtime " + fmt(secs, 1) + " s");
  const std::string numbers =
      "acc(k=0)=" + ci(k0.acc_ci) + " frac_2b=" + fmt(frac_2b, 3) + " acc(base)=" + ci(base.acc_ci) +
      " oracle=" + ci(oracle.acc_ci) + " sham=" + ci(sham.acc_ci) + " wrong=" + ci(wrong.acc_ci) +
      " n=" + std::to_string(n) + " " + fmt(secs, 2) + " s";
  c.detail = c.ok ? numbers : c.detail + " [" + numbers + "]";
  return c;
}

Check determinism() {
  Check c;
  const fs::path root = fs::temp_directory_path() / "ra_acceptance_determinism";
  fs::remove_all(root);
  std::vector<std::string> csvs;
  std::vector<std::string> series;
  for (const char* run : {"first", "second"}) {
    const std::string d = (root / run).string();
    const ra::Json gen{{"tasks", {"competing_vars"}},
                       {"k_values", {0, 256}},
                       {"filler_types", {"decoy_heavy", "repeat"}},
                       {"trials_per_condition", 20},
                       {"seed", 7},
                       {"outdir", d}};
    const auto g = ra::run_command("gen", gen);
    const auto s = ra::run_command(
        "stage", ra::Json{{"instances", d + "/instances.jsonl"}, {"provider", "simulated"},
                          {"outdir", d}});
    const auto r = ra::run_command("report", ra::Json{{"inputs", {d + "/outcomes.jsonl"}},
                                                      {"out_json", d + "/series.json"},
                                                      {"outdir", d}});
    c.require(g.exit_code == ra::ExitCode::kOk && s.exit_code == ra::ExitCode::kOk &&
                  r.exit_code == ra::ExitCode::kOk,
              std::string(run) + " run failed");
    csvs.push_back(slurp(root / run / "report.csv"));
    series.push_back(slurp(root / run / "series.json"));
    c.require(slurp(root / run / "stage.csv") == csvs.back(), "stage.csv differs from report.csv");
  }
  c.require(!csvs[0].empty() && csvs[0] == csvs[1], "report.csv differs between runs");
  c.require(series[0] == series[1], "series.json differs between runs");
  const fs::path golden = fs::path(RA_FIXTURE_DIR) / "golden";
  c.require(csvs[0] == slurp(golden / "report.csv"), "report.csv differs from golden fixture");
  c.require(series[0] == slurp(golden / "series.json"), "series.json differs from golden fixture");
  fs::remove_all(root);
  if (c.ok) c.detail = "two runs byte-identical and equal to golden fixtures";
  return c;
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Check()>>> criteria = {
      {"Fano conversion table values", fano_table},
      {"Equality certification on symmetric channels", equality_certification},
      {"Slack identity on random joints", slack_identity},
      {"Copy-or-noise exactness and checkpoints", copy_or_noise},
      {"Fano inversion round trip", inversion},
      {"Bits-to-trust KL value", bits_to_trust},
      {"Stage metric invariants", stage_invariants},
      {"Audit arithmetic", audit_arithmetic},
      {"Simulated bias provider properties", simulated_properties},
      {"End-to-end determinism", determinism},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Check c;
    try {
      c = criteria[i].second();
    } catch (const std::exception& e) {
      c.ok = false;
      c.detail = std::string("exception: ") + e.what();
    }
    if (!c.ok) ++failed;
    std::printf("%s  #%zu %s: %s\n", c.ok ? "PASS" : "FAIL", i + 1, criteria[i].first.c_str(),
                c.detail.c_str());
  }
  std::printf("%d of %zu criteria failed\n", failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
