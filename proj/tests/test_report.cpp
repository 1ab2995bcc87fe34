// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The routing-audit Authors

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "routing_audit/audit.hpp"
#include "routing_audit/error.hpp"
#include "routing_audit/provider.hpp"
#include "routing_audit/report.hpp"
#include "routing_audit/taskgen.hpp"

namespace ra = routing_audit;

namespace {

ra::StageSummary simulate(std::size_t k, ra::FillerKind filler,
                          std::optional<ra::CheckpointMode> mode = std::nullopt,
                          std::size_t n = 60) {
  ra::SimulatedProvider sim;
  const auto pool = ra::build_pool(0);
  std::vector<ra::StageOutcome> out;
  for (std::size_t t = 0; t < n; ++t) {
    ra::GenerateParams p;
    p.k = k;
    p.filler = filler;
    p.seed = ra::trial_seed(0, t);
    auto inst = ra::generate(pool, p);
    if (mode) inst = ra::insert_checkpoints(inst, {128, *mode});
    out.push_back(ra::classify(sim.score(inst)));
  }
  return ra::aggregate(out);
}

ra::ReportRow row(std::size_t k, ra::FillerKind filler, const std::string& chk = "none") {
  ra::ReportRow r;
  r.key = {"simulated", "competing_vars", k, std::string(ra::to_string(filler)), chk, "n60"};
  r.summary = simulate(k, filler, chk == "none" ? std::nullopt
                                                : std::optional(ra::CheckpointMode::kOracle));
  r.alphabet_size = 50;
  return r;
}

std::vector<std::string> lines(const std::string& csv) {
  std::vector<std::string> out;
  std::size_t pos = 0;
  while (pos < csv.size()) {
    const auto nl = csv.find('\n', pos);
    out.push_back(csv.substr(pos, nl - pos));
    pos = nl + 1;
  }
  return out;
}

std::vector<std::string> fields(const std::string& line) {
  std::vector<std::string> out(1);
  for (char c : line) {
    if (c == ',') {
      out.emplace_back();
    } else {
      out.back() += c;
    }
  }
  return out;
}

ra::Trace trace(const std::string& id, bool pass, bool label) {
  ra::Trace t;
  t.trace_id = id;
  t.outcome_label = label;
  ra::TraceStep s;
  s.claim = "c";
  s.cited_spans = {"S"};
  s.p1 = pass ? 0.95 : 0.4;
  s.p0_by_null = {{"redact_span", 0.05}};
  t.steps.push_back(s);
  return t;
}

}  // namespace

TEST(FormatFixed, NoNegativeZero) {
  EXPECT_EQ(ra::format_fixed(-0.0001, 3), "0.000");
  EXPECT_EQ(ra::format_fixed(0.9995, 3), "1.000");
  EXPECT_EQ(ra::format_fixed(-1.236, 2), "-1.24");
  EXPECT_THROW(ra::format_fixed(NAN, 2), ra::Error);
}

TEST(ConditionKey, SortsNumericallyByK) {
  ra::ConditionKey a{"p", "t", 64, "f", "none", "s"};
  ra::ConditionKey b{"p", "t", 1024, "f", "none", "s"};
  EXPECT_LT(a, b);
  EXPECT_EQ(a.series_label(), b.series_label());
}

TEST(StageTable, HeaderOnlyWhenEmpty) {
  const std::string csv = ra::emit_stage_table({});
  EXPECT_EQ(lines(csv).size(), 1u);
  EXPECT_TRUE(csv.ends_with("\n"));
}

TEST(StageTable, FractionsSumToOne) {
  const std::vector<ra::ReportRow> rows{row(1024, ra::FillerKind::kDecoyHeavy)};
  const auto l = lines(ra::emit_stage_table(rows));
  ASSERT_EQ(l.size(), 2u);
  const auto header = fields(l[0]);
  const auto f = fields(l[1]);
  ASSERT_EQ(f.size(), header.size());
  const auto col = [&](const std::string& name) {
    return f[std::find(header.begin(), header.end(), name) - header.begin()];
  };
  EXPECT_EQ(ra::format_fixed(std::stod(col("frac_2a")) + std::stod(col("frac_2b")), 3), "1.000");
}

TEST(StageTable, DeterministicAndSorted) {
  std::vector<ra::ReportRow> rows{row(1024, ra::FillerKind::kRepeat), row(0, ra::FillerKind::kRepeat),
                                  row(256, ra::FillerKind::kDecoyHeavy)};
  const std::string a = ra::emit_stage_table(rows);
  std::reverse(rows.begin(), rows.end());
  EXPECT_EQ(ra::emit_stage_table(rows), a);
  const auto parsed = ra::parse_stage_table(a);
  ASSERT_EQ(parsed.size(), 3u);
  for (std::size_t i = 1; i < parsed.size(); ++i) EXPECT_LT(parsed[i - 1].key, parsed[i].key);
  EXPECT_EQ(parsed.front().key.k, 0u);
}

TEST(StageTable, RoundTripAndCiBrackets) {
  const std::vector<ra::ReportRow> rows{row(0, ra::FillerKind::kRepeat),
                                        row(1024, ra::FillerKind::kDecoyHeavy),
                                        row(1024, ra::FillerKind::kRepeat)};
  const std::string csv = ra::emit_stage_table(rows);
  const auto parsed = ra::parse_stage_table(csv);
  ASSERT_EQ(parsed.size(), rows.size());
  EXPECT_EQ(ra::emit_stage_table(parsed), csv);
  for (const auto& r : parsed) {
    EXPECT_LE(r.summary.acc_ci.lower, r.summary.acc);
    EXPECT_GE(r.summary.acc_ci.upper, r.summary.acc);
    EXPECT_LE(r.summary.cand_acc_ci.lower, r.summary.cand_acc);
    EXPECT_GE(r.summary.cand_acc_ci.upper, r.summary.cand_acc);
    const auto& orig = *std::find_if(rows.begin(), rows.end(),
                                     [&](const auto& o) { return o.key == r.key; });
    EXPECT_NEAR(r.summary.acc, orig.summary.acc, 5e-4);
    EXPECT_EQ(r.summary.errors, orig.summary.errors);
  }
  EXPECT_THROW(ra::parse_stage_table("bad,header\n"), ra::Error);
}

TEST(StageTable, RejectsMixedSchemaAndDuplicates) {
  std::vector<ra::ReportRow> rows{row(0, ra::FillerKind::kRepeat), row(64, ra::FillerKind::kRepeat)};
  rows[1].schema_version = 2;
  EXPECT_THROW(ra::emit_stage_table(rows), ra::Error);
  rows[1] = rows[0];
  EXPECT_THROW(ra::emit_stage_table(rows), ra::Error);
}

TEST(CheckpointTable, DeltaAcc) {
  ra::CheckpointRow r;
  r.key = {"simulated", "competing_vars", 1024, "decoy_heavy", "oracle-128", "n60"};
  r.baseline = simulate(1024, ra::FillerKind::kDecoyHeavy);
  r.checkpointed = simulate(1024, ra::FillerKind::kDecoyHeavy, ra::CheckpointMode::kOracle);
  EXPECT_NEAR(r.delta_acc(), r.checkpointed.acc - r.baseline.acc, 1e-15);
  const auto l = lines(ra::emit_checkpoint_table(std::vector<ra::CheckpointRow>{r}));
  ASSERT_EQ(l.size(), 2u);
  EXPECT_EQ(fields(l[1])[13], ra::format_fixed(r.delta_acc(), 3));
}

TEST(BudgetTable, AllPass) {
  std::vector<ra::TraceAudit> audits;
  for (int i = 0; i < 4; ++i) {
    audits.push_back(ra::audit_trace(trace("t" + std::to_string(i), true, true),
                                     ra::ConfidenceMode::kTau, 0.75));
  }
  ra::BudgetRow r;
  r.label = "synthetic";
  r.nulls = "redact_span";
  r.summary = ra::summarize(audits);
  const auto l = lines(ra::emit_budget_table(std::vector<ra::BudgetRow>{r}));
  const auto f = fields(l[1]);
  EXPECT_EQ(f[4], "100.0");
  EXPECT_EQ(f[6], "");
  EXPECT_EQ(f[7], "");
}

TEST(BudgetTable, LiftEqualsAccuracyDifference) {
  std::vector<ra::TraceAudit> audits;
  for (int i = 0; i < 4; ++i) {
    audits.push_back(ra::audit_trace(trace("p" + std::to_string(i), true, i < 3),
                                     ra::ConfidenceMode::kTau, 0.75));
    audits.push_back(ra::audit_trace(trace("f" + std::to_string(i), false, i < 1),
                                     ra::ConfidenceMode::kTau, 0.75));
  }
  ra::BudgetRow r;
  r.label = "two-class";
  r.nulls = "redact_span";
  r.summary = ra::summarize(audits);
  const auto f = fields(lines(ra::emit_budget_table(std::vector<ra::BudgetRow>{r}))[1]);
  EXPECT_EQ(f[5], "75.0");
  EXPECT_EQ(f[6], "25.0");
  EXPECT_EQ(f[7], "50.0");
}

TEST(BudgetTable, TauSweepStanzas) {
  std::vector<ra::BudgetRow> rows;
  for (double tau : {0.80, 0.65, 0.75, 0.70}) {
    std::vector<ra::TraceAudit> audits{
        ra::audit_trace(trace("a", true, true), ra::ConfidenceMode::kTau, tau)};
    ra::BudgetRow r;
    r.label = "sweep";
    r.tau = tau;
    r.nulls = "redact_span";
    r.summary = ra::summarize(audits);
    rows.push_back(r);
  }
  const auto l = lines(ra::emit_budget_table(rows));
  ASSERT_EQ(l.size(), 5u);
  EXPECT_EQ(fields(l[1])[1], "0.65");
  EXPECT_EQ(fields(l[2])[1], "0.70");
  EXPECT_EQ(fields(l[3])[1], "0.75");
  EXPECT_EQ(fields(l[4])[1], "0.80");
}

TEST(Series, SinglePoint) {
  const std::vector<ra::ReportRow> rows{row(0, ra::FillerKind::kRepeat)};
  const auto s = ra::emit_series(rows, ra::SeriesQuantity::kAccuracy);
  ASSERT_EQ(s["series"].size(), 1u);
  ASSERT_EQ(s["series"][0]["points"].size(), 1u);
  const auto& p = s["series"][0]["points"][0];
  EXPECT_LE(p["ci_lower"].get<double>(), p["estimate"].get<double>());
  EXPECT_GE(p["ci_upper"].get<double>(), p["estimate"].get<double>());
  EXPECT_EQ(p["n"].get<int>(), 60);
}

TEST(Series, CheckpointCurveDominatesAtLargeK) {
  std::vector<ra::ReportRow> rows;
  for (std::size_t k : {1024u, 256u}) {
    rows.push_back(row(k, ra::FillerKind::kDecoyHeavy));
    rows.push_back(row(k, ra::FillerKind::kDecoyHeavy, "oracle-128"));
  }
  const auto s = ra::emit_series(rows, ra::SeriesQuantity::kAccuracy);
  ASSERT_EQ(s["series"].size(), 2u);
  const ra::Json* base = nullptr;
  const ra::Json* chk = nullptr;
  for (const auto& c : s["series"]) {
    (c["label"].get<std::string>().find("oracle") != std::string::npos ? chk : base) = &c;
    EXPECT_EQ(c["points"][0]["k"].get<int>(), 256);
    EXPECT_EQ(c["points"][1]["k"].get<int>(), 1024);
  }
  ASSERT_TRUE(base && chk);
  EXPECT_GT((*chk)["points"][1]["estimate"].get<double>(),
            (*base)["points"][1]["ci_upper"].get<double>());
}
