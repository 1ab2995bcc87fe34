// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The routing-audit Authors

#include "routing_audit/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>

#include "routing_audit/error.hpp"

namespace routing_audit {

std::string format_fixed(double value, int decimals) {
  if (!std::isfinite(value)) throw_domain("cannot format a non-finite value");
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, value);
  std::string out(buf);
  if (out.front() == '-' && out.find_first_not_of("-0.") == std::string::npos) out.erase(0, 1);
  return out;
}

std::string ConditionKey::to_string() const {
  char kbuf[32];
  std::snprintf(kbuf, sizeof kbuf, "%010zu", k);
  return provider + "|" + task + "|" + kbuf + "|" + filler + "|" + checkpoint + "|" + seeds;
}

std::string ConditionKey::series_label() const {
  return provider + "/" + task + "/" + filler + "/" + checkpoint + "/" + seeds;
}

namespace {

constexpr int kRate = 3;
constexpr int kGap = 2;
constexpr int kPct = 1;

std::string cell(std::string_view s) {
  if (s.find_first_of(",\"\n") == std::string_view::npos) return std::string(s);
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::string opt(const std::optional<double>& v, int decimals) {
  return v ? format_fixed(*v, decimals) : std::string();
}

template <class Row>
void check_schema(std::span<const Row> rows) {
  for (const auto& r : rows) {
    if (r.schema_version != kReportSchemaVersion) {
      throw_domain("row schema version " + std::to_string(r.schema_version) +
                   " does not match " + std::to_string(kReportSchemaVersion));
    }
  }
}

template <class Row>
std::vector<const Row*> sorted_unique(std::span<const Row> rows) {
  check_schema(rows);
  std::vector<const Row*> out;
  for (const auto& r : rows) out.push_back(&r);
  std::stable_sort(out.begin(), out.end(),
                   [](const Row* a, const Row* b) { return a->key < b->key; });
  for (std::size_t i = 1; i < out.size(); ++i) {
    if (out[i - 1]->key == out[i]->key) {
      throw_domain("duplicate condition " + out[i]->key.to_string());
    }
  }
  return out;
}

std::string key_cells(const ConditionKey& k) {
  return cell(k.provider) + "," + cell(k.task) + "," + std::to_string(k.k) + "," +
         cell(k.filler) + "," + cell(k.checkpoint) + "," + cell(k.seeds);
}

std::vector<std::string> split_csv_line(std::string_view line) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(std::move(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(std::move(cur));
  return out;
}

constexpr std::string_view kStageHeader =
    "provider,task,k,filler,checkpoint,seeds,n,acc,acc_lo,acc_hi,cand_acc,cand_acc_lo,"
    "cand_acc_hi,errors,frac_2a,frac_2b,gate_gap,value_gap,ties,gate_unavailable,m,"
    "mi_used_lb";

}  // namespace

std::string emit_stage_table(std::span<const ReportRow> rows) {
  std::string out(kStageHeader);
  out += '\n';
  for (const ReportRow* r : sorted_unique(rows)) {
    const StageSummary& s = r->summary;
    std::string mi;
    if (r->alphabet_size >= 2) {
      mi = format_fixed(mi_bound_from_cand_acc(s.cand_acc, r->alphabet_size).value(), kRate);
    }
    out += key_cells(r->key) + "," + std::to_string(s.n) + "," +
           format_fixed(s.acc, kRate) + "," + format_fixed(s.acc_ci.lower, kRate) + "," +
           format_fixed(s.acc_ci.upper, kRate) + "," + format_fixed(s.cand_acc, kRate) + "," +
           format_fixed(s.cand_acc_ci.lower, kRate) + "," +
           format_fixed(s.cand_acc_ci.upper, kRate) + "," + std::to_string(s.errors) + "," +
           opt(s.frac_2a, kRate) + "," + opt(s.frac_2b, kRate) + "," +
           opt(s.mean_gate_gap, kGap) + "," + opt(s.mean_value_gap, kGap) + "," +
           std::to_string(s.ties) + "," + std::to_string(s.gate_unavailable) + "," +
           std::to_string(r->alphabet_size) + "," + mi + "\n";
  }
  return out;
}

std::vector<ReportRow> parse_stage_table(std::string_view csv) {
  std::vector<ReportRow> rows;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < csv.size()) {
    const std::size_t nl = csv.find('\n', pos);
    const std::string_view line =
        csv.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
    pos = nl == std::string_view::npos ? csv.size() : nl + 1;
    ++line_no;
    if (line_no == 1) {
      if (line != kStageHeader) throw Error(ErrorKind::kIo, "unexpected stage table header");
      continue;
    }
    if (line.empty()) continue;
    const auto f = split_csv_line(line);
    if (f.size() != 22) {
      throw Error(ErrorKind::kIo, "stage table line " + std::to_string(line_no) + " has " +
                                      std::to_string(f.size()) + " fields");
    }
    try {
      ReportRow r;
      r.key = ConditionKey{f[0], f[1], std::stoull(f[2]), f[3], f[4], f[5]};
      StageSummary& s = r.summary;
      s.n = std::stoull(f[6]);
      s.acc = std::stod(f[7]);
      s.acc_ci = {0, s.n, s.acc, std::stod(f[8]), std::stod(f[9]), 0.95};
      s.cand_acc = std::stod(f[10]);
      s.cand_acc_ci = {0, s.n, s.cand_acc, std::stod(f[11]), std::stod(f[12]), 0.95};
      s.errors = std::stoull(f[13]);
      s.correct = s.n - s.errors;
      s.acc_ci.successes = s.correct;
      s.candidate_correct =
          static_cast<std::uint64_t>(std::llround(s.cand_acc * static_cast<double>(s.n)));
      s.cand_acc_ci.successes = s.candidate_correct;
      if (!f[14].empty()) s.frac_2a = std::stod(f[14]);
      if (!f[15].empty()) s.frac_2b = std::stod(f[15]);
      if (s.frac_2b) {
        s.stage_2b = static_cast<std::uint64_t>(
            std::llround(*s.frac_2b * static_cast<double>(s.errors)));
        s.stage_2a = s.errors - s.stage_2b;
      }
      if (!f[16].empty()) s.mean_gate_gap = std::stod(f[16]);
      if (!f[17].empty()) s.mean_value_gap = std::stod(f[17]);
      s.ties = std::stoull(f[18]);
      s.gate_unavailable = std::stoull(f[19]);
      r.alphabet_size = std::stoull(f[20]);
      rows.push_back(std::move(r));
    } catch (const std::logic_error& e) {
      throw Error(ErrorKind::kIo, "stage table line " + std::to_string(line_no) +
                                      " is malformed: " + e.what());
    }
  }
  if (line_no == 0) throw Error(ErrorKind::kIo, "stage table is empty");
  return rows;
}

std::string emit_checkpoint_table(std::span<const CheckpointRow> rows) {
  std::string out =
      "provider,task,k,filler,checkpoint,seeds,n,baseline,baseline_lo,baseline_hi,"
      "checkpointed,checkpointed_lo,checkpointed_hi,delta_acc,value_gap_base,"
      "value_gap_chk\n";
  for (const CheckpointRow* r : sorted_unique(rows)) {
    const StageSummary& b = r->baseline;
    const StageSummary& c = r->checkpointed;
    out += key_cells(r->key) + "," + std::to_string(c.n) + "," + format_fixed(b.acc, kRate) +
           "," + format_fixed(b.acc_ci.lower, kRate) + "," +
           format_fixed(b.acc_ci.upper, kRate) + "," + format_fixed(c.acc, kRate) + "," +
           format_fixed(c.acc_ci.lower, kRate) + "," + format_fixed(c.acc_ci.upper, kRate) +
           "," + format_fixed(r->delta_acc(), kRate) + "," + opt(b.mean_value_gap, kGap) +
           "," + opt(c.mean_value_gap, kGap) + "\n";
  }
  return out;
}

std::string emit_budget_table(std::span<const BudgetRow> rows) {
  check_schema(rows);
  std::vector<const BudgetRow*> sorted;
  for (const auto& r : rows) sorted.push_back(&r);
  std::stable_sort(sorted.begin(), sorted.end(), [](const BudgetRow* a, const BudgetRow* b) {
    if (a->label != b->label) return a->label < b->label;
    if (a->nulls != b->nulls) return a->nulls < b->nulls;
    return a->tau < b->tau;
  });
  const auto pct = [](const std::optional<double>& v) {
    return v ? format_fixed(100.0 * *v, kPct) : std::string();
  };
  std::string out =
      "label,tau,nulls,n,pass_pct,acc_pass_pct,acc_flag_pct,lift_pp,mean_p1,mean_p0_min,"
      "unauditable\n";
  for (const BudgetRow* r : sorted) {
    const AuditSummary& s = r->summary;
    out += cell(r->label) + "," + format_fixed(r->tau, 2) + "," + cell(r->nulls) + "," +
           std::to_string(s.n) + "," + format_fixed(100.0 * s.pass_rate, kPct) + "," +
           pct(s.acc_pass) + "," + pct(s.acc_flag) + "," + opt(s.lift_pp, kPct) + "," +
           opt(s.mean_p1, kRate) + "," + opt(s.mean_p0_min, kRate) + "," +
           std::to_string(s.unauditable_traces) + "\n";
  }
  return out;
}

std::string_view to_string(SeriesQuantity q) {
  return q == SeriesQuantity::kAccuracy ? "acc" : "cand_acc";
}

SeriesQuantity series_quantity_from_string(std::string_view s) {
  if (s == "acc") return SeriesQuantity::kAccuracy;
  if (s == "cand_acc") return SeriesQuantity::kCandidateAccuracy;
  throw_config("unknown series quantity '" + std::string(s) + "'");
}

Json emit_series(std::span<const ReportRow> rows, SeriesQuantity quantity) {
  check_schema(rows);
  std::map<std::string, std::vector<const ReportRow*>> curves;
  for (const auto& r : rows) curves[r.key.series_label()].push_back(&r);
  Json out;
  out["quantity"] = std::string(to_string(quantity));
  out["confidence"] = 0.95;
  Json series = Json::array();
  for (auto& [label, points] : curves) {
    std::stable_sort(points.begin(), points.end(),
                     [](const ReportRow* a, const ReportRow* b) { return a->key.k < b->key.k; });
    Json curve;
    curve["label"] = label;
    Json pts = Json::array();
    for (const ReportRow* r : points) {
      const WilsonInterval& ci = quantity == SeriesQuantity::kAccuracy
                                     ? r->summary.acc_ci
                                     : r->summary.cand_acc_ci;
      Json p;
      p["k"] = r->key.k;
      p["estimate"] = ci.estimate;
      p["ci_lower"] = ci.lower;
      p["ci_upper"] = ci.upper;
      p["n"] = r->summary.n;
      pts.push_back(std::move(p));
    }
    curve["points"] = std::move(pts);
    series.push_back(std::move(curve));
  }
  out["series"] = std::move(series);
  return out;
}

}  // namespace routing_audit
