// Copyright 2026 The LMC Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// lmc: run a language-model council evaluation end to end.
//
//   lmc --config council.json --mock-providers expand
//   lmc --config council.json --mock-providers respond
//   lmc --config council.json --mock-providers judge
//   lmc --config council.json rank --mode majority --subset smalls
//   lmc --config council.json analyze --rankings human.csv
//   lmc --config council.json simulate
//   lmc --config council.json replay-import --input judgments.jsonl
//   lmc --config council.json report

#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "lmc/cli.hpp"
#include "lmc/http_transport.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Language-model council: test-set expansion, pairwise judging and ranking"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(LMC_VERSION));

  std::string config_path = "council.json";
  std::optional<std::uint64_t> seed;
  bool mock = false;
  std::string subset;
  std::string mode;
  std::vector<std::string> inputs;
  std::string responses_in;
  std::string rankings;

  app.add_option("--config", config_path, "Run configuration (JSON)")->capture_default_str();
  app.add_option("--seed", seed, "Override the configured RNG seed");
  app.add_flag("--mock-providers", mock, "Answer every request with the built-in offline council");
  app.add_option("--subset", subset, "Admit only ballots from this named sub-council");
  app.add_option("--mode", mode, "Aggregation mode")
      ->check(CLI::IsMember({"no_aggregation", "majority", "mean_pool"}));

  auto* expand = app.add_subcommand("expand", "Expand seed scenarios into the test set");
  auto* respond = app.add_subcommand("respond", "Collect every member's response to every dilemma");
  auto* judge = app.add_subcommand("judge", "Run position-swapped pairwise judging against the reference");
  auto* rank = app.add_subcommand("rank", "Fit Bradley-Terry scores with bootstrap intervals");
  auto* analyze = app.add_subcommand("analyze", "Judge profiles, affinity and agreement matrices");
  analyze->add_option("--rankings", rankings, "External ranking CSV (member_id, score or rank)");
  auto* simulate = app.add_subcommand("simulate", "Monte Carlo council / test-set sweeps");
  auto* replay = app.add_subcommand("replay-import", "Import released judgment records as ballots");
  replay->add_option("--input", inputs, "Judgment file(s), JSONL or CSV")->required();
  replay->add_option("--responses", responses_in, "Response file, JSONL or CSV");
  auto* report = app.add_subcommand("report", "Summarize existing reports as Markdown");

  CLI11_PARSE(app, argc, argv);

  try {
    lmc::CliOptions opts;
    opts.seed = seed;
    opts.mock_providers = mock;
    if (!subset.empty()) opts.subset = subset;
    if (!mode.empty()) opts.mode = lmc::parse_mode(mode);
    for (const auto& p : inputs) opts.inputs.emplace_back(p);
    if (!responses_in.empty()) opts.responses_in = responses_in;
    if (!rankings.empty()) opts.rankings = rankings;

    lmc::Commands cmd(lmc::load_config(config_path), std::move(opts),
                      [] { return std::make_shared<lmc::HttpTransport>(); });
    if (expand->parsed()) cmd.expand();
    if (respond->parsed()) cmd.respond();
    if (judge->parsed()) cmd.judge();
    if (rank->parsed()) cmd.rank();
    if (analyze->parsed()) cmd.analyze();
    if (simulate->parsed()) cmd.simulate();
    if (replay->parsed()) cmd.replay_import();
    if (report->parsed()) cmd.report();
  } catch (const lmc::Error& e) {
    std::cerr << "lmc: " << lmc::to_string(e.code()) << ": " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "lmc: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
