// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The routing-audit Authors

// routing-audit: command-line front end over libroutingaudit's C API.

#include <cstdint>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "routing_audit.h"

namespace {

using Json = nlohmann::ordered_json;

struct Command {
  std::string name;
  CLI::App* app = nullptr;
  Json config = Json::object();
  std::string config_file;
};

template <class T>
void opt(Command& cmd, const std::string& flag, const std::string& help) {
  const std::string key = flag.substr(2);
  cmd.app->add_option_function<T>(
      flag, [&cmd, key](const T& v) { cmd.config[key] = v; }, help);
}

void flag(Command& cmd, const std::string& name, const std::string& help) {
  const std::string key = name.substr(2);
  cmd.app->add_flag_function(
      name, [&cmd, key](std::int64_t n) { cmd.config[key] = n > 0; }, help);
}

void generation_options(Command& c) {
  opt<std::vector<std::string>>(c, "--tasks",
                                "competing_vars primacy_recency decoy_injection");
  opt<std::vector<std::size_t>>(c, "--k_values", "filler lengths between bindings");
  opt<std::vector<std::string>>(c, "--filler_types", "repeat coherent random decoy_heavy");
  opt<std::size_t>(c, "--trials_per_condition", "seeded trials per condition");
  opt<std::size_t>(c, "--decoy_reps", "competitor repetitions in DECOY_HEAVY tail filler");
  opt<std::size_t>(c, "--n_distractors", "extra candidates besides target and competitor");
  opt<std::size_t>(c, "--pool_size", "size of the candidate pool drawn from the word list");
  opt<std::uint64_t>(c, "--seed", "base seed; trial seeds are derived from it");
}

void provider_options(Command& c) {
  opt<std::string>(c, "--provider", "simulated | file_cache | http");
  opt<std::string>(c, "--endpoint", "completion endpoint URL (http)");
  opt<std::string>(c, "--model", "model name sent to the endpoint (http)");
  opt<std::string>(c, "--api_key_env", "environment variable holding the API key");
  opt<std::size_t>(c, "--max_parallel", "maximum requests in flight");
  opt<std::string>(c, "--cache_dir", "response cache directory");
  opt<std::string>(c, "--cache_file", "file_cache records (default <cache_dir>/records.jsonl)");
  opt<int>(c, "--timeout_seconds", "HTTP request timeout");
  opt<int>(c, "--top_logprobs", "logprobs requested per position (http)");
  opt<int>(c, "--max_attempts", "HTTP attempts per request, with exponential backoff");
  c.app->add_option_function<std::string>(
      "--bias",
      [&c](const std::string& v) {
        try {
          c.config["bias"] = Json::parse(v);
        } catch (const Json::exception& e) {
          throw CLI::ValidationError("--bias", std::string("not JSON: ") + e.what());
        }
      },
      "simulated bias parameters as JSON, e.g. '{\"decay\":0.998}'");
}

void output_options(Command& c, bool csv, bool json) {
  opt<std::string>(c, "--outdir", "output directory (default .)");
  if (csv) opt<std::string>(c, "--out_csv", "CSV output path");
  if (json) opt<std::string>(c, "--out_json", "JSON output path");
}

void budget_options(Command& c) {
  opt<std::string>(c, "--input", "input JSONL");
  opt<std::vector<double>>(c, "--tau", "reliability target(s); several values give a sweep");
  opt<std::vector<std::string>>(c, "--nulls",
                                "null family: redact_span delete_span mask_same_len no_evidence");
  opt<std::string>(c, "--confidence_mode", "auto | tau | confidence");
  opt<std::string>(c, "--label", "row label in the budget table");
}

Json load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return Json::parse(ss.str());
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"routing-audit: binding-failure diagnostics, information budgets and audits"};
  app.require_subcommand(1);
  app.footer(std::string("\nExit codes: 0 ok, 1 other, 2 config, 3 io, 4 provider, "
                         "5 invariant violation.\n\n") +
             ra_schema_help());
  app.set_version_flag("--version", std::string(ra_version()));

  std::vector<std::unique_ptr<Command>> commands;
  const auto add = [&](const std::string& name, const std::string& help) -> Command& {
    auto cmd = std::make_unique<Command>();
    cmd->name = name;
    cmd->app = app.add_subcommand(name, help);
    cmd->app->add_option("--config", cmd->config_file,
                         "JSON config file; flags given on the command line win");
    commands.push_back(std::move(cmd));
    return *commands.back();
  };

  Command& gen = add("gen", "generate task instances (instances.jsonl)");
  generation_options(gen);
  opt<std::size_t>(gen, "--checkpoint_every", "insert checkpoints every N tail tokens");
  opt<std::string>(gen, "--checkpoint_mode", "oracle | sham | wrong");
  output_options(gen, false, false);
  opt<std::string>(gen, "--out_jsonl", "instances output path");

  Command& stage = add("stage", "score instances and classify binding failures (stage.csv)");
  opt<std::string>(stage, "--instances", "instances.jsonl to score (otherwise generate)");
  generation_options(stage);
  provider_options(stage);
  output_options(stage, true, true);
  opt<std::string>(stage, "--quantity", "series quantity: acc | cand_acc");

  Command& chk = add("checkpoint", "paired baseline / checkpointed runs (checkpoint.csv)");
  generation_options(chk);
  opt<std::size_t>(chk, "--checkpoint_every", "checkpoint spacing in tail tokens");
  opt<std::vector<std::string>>(chk, "--checkpoint_mode", "oracle sham wrong");
  provider_options(chk);
  output_options(chk, true, true);

  Command& budget = add("budget", "bits-to-trust certificates from p1/p0 records (budget.csv)");
  budget_options(budget);
  output_options(budget, true, false);

  Command& audit = add("audit", "audit structured traces step by step (audit.csv)");
  budget_options(audit);
  flag(audit, "--live", "fetch missing p1/p0 through the provider's verifier");
  provider_options(audit);
  output_options(audit, true, false);

  Command& sim = add("simulate", "exact channel-chain experiments (simulate.csv, simulate.json)");
  opt<std::vector<double>>(sim, "--alphas", "copy probabilities");
  opt<std::size_t>(sim, "--max_length", "longest chain");
  opt<std::size_t>(sim, "--alphabet", "value alphabet size");
  opt<std::size_t>(sim, "--random_chains", "random chains checked for DPI");
  opt<std::uint64_t>(sim, "--seed", "seed for random chains");
  output_options(sim, true, true);

  Command& report = add("report", "aggregate outcomes.jsonl files into a stage table");
  opt<std::vector<std::string>>(report, "--inputs", "outcomes.jsonl files");
  opt<std::string>(report, "--quantity", "series quantity: acc | cand_acc");
  output_options(report, true, true);

  Command& replay = add("replay", "rerun a command from its manifest");
  replay.app->add_option_function<std::string>(
      "manifest", [&replay](const std::string& v) { replay.config["manifest"] = v; },
      "path to a *.manifest.json")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  for (auto& cmd : commands) {
    if (!cmd->app->parsed()) continue;
    Json config = Json::object();
    if (!cmd->config_file.empty()) {
      try {
        config = load_config_file(cmd->config_file);
      } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
      }
    }
    for (const auto& [key, value] : cmd->config.items()) config[key] = value;

    char* result = nullptr;
    const ra_status status = ra_run(cmd->name.c_str(), config.dump().c_str(), &result);
    if (result) {
      std::cout << result << "\n";
      ra_string_free(result);
    }
    if (status != RA_OK) {
      std::cerr << "error (" << ra_status_string(status) << "): " << ra_last_error() << "\n";
      switch (status) {
        case RA_ERR_DOMAIN: return 2;
        case RA_ERR_ARGUMENT: return 1;
        default: return static_cast<int>(status);
      }
    }
    return 0;
  }
  return 1;
}
