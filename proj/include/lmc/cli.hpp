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

// Command implementations behind the `lmc` tool. Each command reads its
// inputs from the run directory, writes its outputs atomically and updates
// the manifest.
//
//   <run_dir>/dilemmas/dilemmas.jsonl
//   <run_dir>/responses/responses.jsonl
//   <run_dir>/ballots/ballots.jsonl, review.jsonl
//   <run_dir>/reports/...
//   <run_dir>/manifest.json

#pragma once

#include <functional>
#include <iostream>
#include <memory>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "lmc/analytics.hpp"
#include "lmc/ballots.hpp"
#include "lmc/config.hpp"
#include "lmc/gateway.hpp"
#include "lmc/mock.hpp"
#include "lmc/pipeline.hpp"
#include "lmc/ranking.hpp"
#include "lmc/report.hpp"
#include "lmc/simulate.hpp"

namespace lmc {

struct CliOptions {
  std::optional<std::uint64_t> seed;
  bool mock_providers = false;
  std::optional<std::string> subset;
  std::optional<AggregationMode> mode;
  std::vector<fs::path> inputs;           // replay-import judgment files
  std::optional<fs::path> responses_in;   // replay-import response file
  std::optional<fs::path> rankings;       // analyze: external ranking CSV
};

using TransportFactory = std::function<std::shared_ptr<Transport>()>;

class Commands {
 public:
  Commands(RunConfig cfg, CliOptions opts, TransportFactory network = nullptr, std::ostream& out = std::cout)
      : cfg_(std::move(cfg)), opts_(std::move(opts)), network_(std::move(network)), out_(out) {
    if (opts_.seed) cfg_.rng_seed = *opts_.seed;
  }

  const RunConfig& config() const { return cfg_; }
  int network_calls() const { return gateway_ ? gateway_->network_calls() : 0; }

  void expand() {
    const auto seeds = cfg_.seeds();
    if (seeds.empty()) throw Error(ErrorCode::kMissingStageInput, "no seeds configured (seeds_file or seeds)");
    const auto result = expand_test_set(seeds, cfg_.routed_council(), cfg_.per_member, cfg_.rng_seed, gateway(),
                                        registry(), templates(), cfg_.stages);
    write_records(cfg_.paths.dilemmas(), result.dilemmas);
    std::vector<Json> failures;
    for (const auto& f : result.failures) failures.push_back({{"item", f.item}, {"member_id", f.member_id}, {"error", f.error}});
    update_manifest(cfg_, "expand", cfg_.paths.dilemmas(), stage_extra(failures.size()));
    out_ << "expand: " << result.dilemmas.size() << " dilemma(s), " << failures.size() << " failure(s)\n";
    if (!failures.empty()) write_jsonl(cfg_.paths.dilemmas().parent_path() / "failures.jsonl", failures);
  }

  void respond() {
    const auto dilemmas = load_dilemmas();
    const auto responses = gather_responses(dilemmas, cfg_.routed_council(), cfg_.word_limit, gateway(), registry(),
                                            templates(), cfg_.stages);
    write_records(cfg_.paths.responses(), responses);
    std::size_t missing = 0, flagged = 0;
    for (const auto& r : responses) {
      missing += r.missing;
      flagged += r.truncation_flagged;
    }
    Json extra = stage_extra(missing);
    extra["truncation_flagged"] = flagged;
    update_manifest(cfg_, "respond", cfg_.paths.responses(), extra);
    out_ << "respond: " << responses.size() << " response(s), " << missing << " missing, " << flagged
         << " without a sentence boundary under the limit\n";
  }

  void judge() {
    const auto dilemmas = load_dilemmas();
    const auto responses = load_responses();
    const auto result = run_judging(dilemmas, responses, cfg_.routed_council(), templates(), gateway(), registry(),
                                    cfg_.stages);
    write_records(cfg_.paths.ballots(), result.ballots);
    write_records(cfg_.paths.reviews(), result.reviews);
    Json extra = stage_extra(result.reviews.size());
    extra["skipped_missing"] = result.skipped_missing;
    update_manifest(cfg_, "judge", cfg_.paths.ballots(), extra);
    out_ << "judge: " << result.ballots.size() << " ballot(s), " << result.reviews.size()
         << " routed to manual review\n";
  }

  // Leaderboard, win-rate matrix, battle list and summary per mode.
  std::vector<RankingReport> rank() {
    const auto ballots = admitted_ballots();
    const std::string& ref = cfg_.council.reference_id();
    std::vector<RankingReport> reports;
    for (AggregationMode mode : modes()) {
      const std::string tag = report_tag(mode);
      const auto battles = build_battle_list(ballots, mode, ref);
      if (battles.empty()) throw Error(ErrorCode::kEmptyAfterFilter, "no complete couplets for mode " + tag);
      auto report = bootstrap_cis(battles, ref, cfg_.bootstrap_rounds, cfg_.rng_seed, mode);
      const auto consistency = council_consistency(ballots, ref, mode);
      const fs::path dir = cfg_.paths.reports();
      write_records(dir / ("battles_" + tag + ".jsonl"), battles);
      leaderboard_table(report).write(dir / ("leaderboard_" + tag + ".csv"));
      const auto wr = winrate_matrix(report.model);
      winrate_table(wr).write(dir / ("winrate_" + tag + ".csv"));
      write_file_atomic(dir / ("winrate_" + tag + ".svg"),
                        heatmap_svg(winrate_labeled(wr), {"Estimated win rate (row beats column), " + tag, 0.0, 1.0,
                                                          0.5, 2}));
      Json summary{{"mode", std::string(to_string(mode))},
                   {"subset", opts_.subset.value_or("")},
                   {"reference_id", ref},
                   {"separability", report.separability},
                   {"consistency", consistency.ppc},
                   {"battle_count", report.battle_count},
                   {"bootstrap_rounds", report.rounds_requested},
                   {"bootstrap_rounds_used", report.rounds_used},
                   {"judges", judges_in(ballots)}};
      write_file_atomic(dir / ("rank_" + tag + ".json"), summary.dump(2) + "\n");
      update_manifest(cfg_, "rank_" + tag, dir / ("battles_" + tag + ".jsonl"));
      out_ << "rank [" << tag << "] separability " << fmt_num(100.0 * report.separability, 1) << "%, consistency "
           << fmt_num(100.0 * consistency.ppc, 1) << "%, " << report.battle_count << " battles\n";
      for (const auto& e : report.entries) {
        out_ << "  " << e.rank << ". " << e.member_id << "  " << fmt_num(e.score, 1) << " (" << fmt_num(e.ci_low, 1)
             << ", " << fmt_num(e.ci_high, 1) << ")\n";
      }
      reports.push_back(std::move(report));
    }
    return reports;
  }

  void analyze() {
    if (!fs::exists(cfg_.paths.ballots())) {
      throw Error(ErrorCode::kMissingInputs, "ballots file missing: " + cfg_.paths.ballots().string());
    }
    const std::string tag = report_tag(AggregationMode::kNoAggregation);
    const fs::path dir = cfg_.paths.reports();
    const fs::path lb_path = dir / ("leaderboard_" + tag + ".csv");
    if (!fs::exists(lb_path)) {
      throw Error(ErrorCode::kMissingInputs, "leaderboard missing: " + lb_path.string() + " (run rank first)");
    }
    const auto ballots = admitted_ballots();
    const std::string& ref = cfg_.council.reference_id();
    ProfileInputs in;
    in.reference_id = ref;
    for (const auto& e : leaderboard_from_csv(read_file(lb_path)).entries) in.council_scores[e.member_id] = e.score;
    if (fs::exists(cfg_.paths.responses())) in.avg_lengths = average_lengths(load_responses());
    in.bootstrap_rounds = cfg_.bootstrap_rounds;
    in.rng_seed = cfg_.rng_seed;

    auto profile_all = [&](std::span<const Ballot> bs) {
      std::vector<JudgeProfile> ps;
      for (const auto& j : judges_in(bs)) ps.push_back(build_judge_profile(bs, j, in));
      return ps;
    };
    const auto profiles = profile_all(ballots);
    const auto avg = average_profile(profiles);
    profiles_table(profiles, &avg).write(dir / "judge_profiles.csv");
    const auto consistent = filter_consistent(ballots, ref);
    if (!consistent.empty()) {
      const auto cps = profile_all(consistent);
      const auto cavg = average_profile(cps);
      profiles_table(cps, &cavg).write(dir / "judge_profiles_consistent.csv");
    }

    const auto affinity = build_affinity_matrix(ballots, ref, in.council_scores);
    const auto aff = to_labeled(affinity, false);
    const auto aff_norm = to_labeled(affinity, true);
    const auto agreement = build_agreement_matrix(ballots);
    matrix_table(aff, "judge").write(dir / "affinity.csv");
    matrix_table(aff_norm, "judge").write(dir / "affinity_normalized.csv");
    matrix_table(agreement, "judge").write(dir / "agreement.csv");
    write_file_atomic(dir / "affinity.svg", heatmap_svg(aff, {"Affinity (judge row, respondent column)", 0.0, 100.0,
                                                              std::nullopt, 1}));
    write_file_atomic(dir / "affinity_normalized.svg",
                      heatmap_svg(aff_norm, {"Affinity minus council score", std::nullopt, std::nullopt, 0.0, 1}));
    write_file_atomic(dir / "agreement.svg",
                      heatmap_svg(agreement, {"Cohen's kappa on preferred side", -1.0, 1.0, 0.0, 2}));
    const auto k = static_cast<std::size_t>(std::max(1, cfg_.top_k));
    edges_table(top_k_graph(aff, k)).write(dir / "affinity_top_k.csv");
    edges_table(top_k_graph(agreement, k)).write(dir / "agreement_top_k.csv");

    CsvTable consistency({"mode", "consistency", "bias_first", "bias_second", "couplets"});
    for (AggregationMode mode : {AggregationMode::kNoAggregation, AggregationMode::kMajority,
                                 AggregationMode::kMeanPool}) {
      const auto c = council_consistency(ballots, ref, mode);
      consistency.add({std::string(to_string(mode)), fmt_num(c.ppc), fmt_num(c.bias_first), fmt_num(c.bias_second),
                       std::to_string(c.total)});
    }
    consistency.write(dir / "consistency.csv");

    std::size_t positive_self = 0;
    for (const auto& p : profiles) positive_self += p.self_enhancement && *p.self_enhancement > 0.0;
    Json summary{{"judges", profiles.size()},
                 {"positive_self_enhancement", positive_self},
                 {"average_judge_separability", avg.separability},
                 {"average_judge_consistency", avg.ppc}};

    const auto rankings = opts_.rankings ? opts_.rankings : cfg_.external_rankings;
    if (rankings) {
      CsvTable corr({"method", "members", "coefficient"});
      const auto external = read_external_scores(*rankings);
      std::map<std::string, double> ours, theirs;
      for (const auto& [id, s] : external) {
        if (auto it = in.council_scores.find(id); it != in.council_scores.end()) {
          ours[id] = it->second;
          theirs[id] = s;
        }
      }
      for (auto method : {CorrelationMethod::kSpearman, CorrelationMethod::kKendall}) {
        const double r = rank_correlation(ours, theirs, method);
        const char* name = method == CorrelationMethod::kSpearman ? "spearman" : "kendall";
        corr.add({name, std::to_string(ours.size()), fmt_num(r)});
        summary[name] = r;
      }
      corr.write(dir / "correlation.csv");
    }
    write_file_atomic(dir / "analysis.json", summary.dump(2) + "\n");
    update_manifest(cfg_, "analyze", dir / "judge_profiles.csv");
    out_ << "analyze: " << profiles.size() << " judge profile(s); average judge separability "
         << fmt_num(100.0 * avg.separability, 1) << "%, consistency " << fmt_num(100.0 * avg.ppc, 1) << "%; "
         << positive_self << " judge(s) with positive self-enhancement\n";
  }

  SweepResult simulate() {
    const auto& s = cfg_.simulate;
    BallotStore store;
    if (s.source == "replay") {
      if (!fs::exists(cfg_.paths.ballots())) {
        throw Error(ErrorCode::kMissingStageInput, "ballots file missing: " + cfg_.paths.ballots().string());
      }
      store = BallotStore(admitted_ballots(), cfg_.council.reference_id());
    } else {
      store = synthetic_store();
    }
    SweepSpec spec;
    spec.council_sizes = s.council_sizes;
    spec.test_sizes = s.test_sizes;
    spec.trials = s.trials;
    spec.adversarial_count = s.adversarial_count;
    spec.adversarial_ratio = s.adversarial_ratio;
    spec.rng_seed = cfg_.rng_seed;
    const auto sweep = run_sweep(spec, store);
    const fs::path dir = cfg_.paths.reports();
    sweep_table(sweep).write(dir / "sweep.csv");
    auto emit_gradient = [&](const Grid& grid, const std::string& name, const std::string& title) {
      write_file_atomic(dir / (name + ".svg"), heatmap_svg(grid_matrix(grid, grid.values), titled(title)));
      try {
        const auto g = gradient_map(grid);
        gradient_table(grid, g).write(dir / (name + "_gradient.csv"));
        write_file_atomic(dir / (name + "_gradient.svg"),
                          heatmap_svg(grid_matrix(grid, g.magnitude), titled(title + ": gradient magnitude")));
      } catch (const Error& e) {
        warn(name + " gradient skipped: " + e.what());
      }
    };
    emit_gradient(sweep.merv, "merv", "MERV by council size (rows) and test size (columns)");
    emit_gradient(sweep.separability, "separability", "Mean separability by council size and test size");
    update_manifest(cfg_, "simulate", dir / "sweep.csv");
    out_ << "simulate: " << sweep.cells.size() << " cell(s) x " << s.trials << " trial(s)\n";
    for (const auto& c : sweep.cells) {
      out_ << "  c=" << c.council_size << " t=" << c.test_size << " adversaries=" << c.adversaries
           << " merv=" << fmt_opt(c.stability.merv, 4) << " separability=" << fmt_num(c.stability.mean_separability, 4)
           << "\n";
    }
    return sweep;
  }

  void replay_import() {
    if (opts_.inputs.empty()) throw Error(ErrorCode::kMissingInputs, "replay-import needs --input");
    std::vector<Json> records;
    for (const auto& p : opts_.inputs) {
      auto part = read_records(p);
      records.insert(records.end(), std::make_move_iterator(part.begin()), std::make_move_iterator(part.end()));
    }
    ImportStats stats;
    auto ballots = import_ballots(records, cfg_.replay, cfg_.council, &stats);
    const std::string& ref = cfg_.council.reference_id();
    std::stable_sort(ballots.begin(), ballots.end(), [&](const Ballot& a, const Ballot& b) {
      return std::tie(a.dilemma_id, a.judge_id, a.respondent(ref), a.game) <
             std::tie(b.dilemma_id, b.judge_id, b.respondent(ref), b.game);
    });
    write_records(cfg_.paths.ballots(), ballots);
    update_manifest(cfg_, "judge", cfg_.paths.ballots(),
                    {{"source", "replay-import"},
                     {"input_records", stats.records},
                     {"dropped_unparseable", stats.unparseable},
                     {"dropped_no_reference", stats.no_reference},
                     {"dropped_unknown_member", stats.unknown_member}});
    out_ << "replay-import: " << stats.imported << " of " << stats.records << " record(s) imported ("
         << stats.unparseable << " unparseable, " << stats.no_reference << " without the reference, "
         << stats.unknown_member << " naming non-members)\n";
    if (opts_.responses_in) {
      std::vector<ResponseRecord> responses;
      for (const auto& j : read_records(*opts_.responses_in)) {
        ResponseRecord r;
        r.dilemma_id = field_string(j, cfg_.replay.response_dilemma);
        r.member_id = field_string(j, cfg_.replay.response_member);
        if (!cfg_.council.contains(r.member_id)) continue;
        r.raw_text = r.final_text = field_string(j, cfg_.replay.response_text);
        r.word_count = word_count(r.final_text);
        responses.push_back(std::move(r));
      }
      write_records(cfg_.paths.responses(), responses);
      update_manifest(cfg_, "respond", cfg_.paths.responses(), {{"source", "replay-import"}});
      out_ << "replay-import: " << responses.size() << " response(s) imported\n";
    }
  }

  // Markdown digest of every report present in <run_dir>/reports.
  void report() {
    const fs::path dir = cfg_.paths.reports();
    std::vector<fs::path> summaries;
    if (fs::exists(dir)) {
      for (const auto& e : fs::directory_iterator(dir)) {
        const auto name = e.path().filename().string();
        if (name.rfind("rank_", 0) == 0 && e.path().extension() == ".json") summaries.push_back(e.path());
      }
    }
    if (summaries.empty()) throw Error(ErrorCode::kMissingInputs, "no rank summaries in " + dir.string());
    std::sort(summaries.begin(), summaries.end());
    std::string md = "# Council report\n\n";
    md += "Reference member: `" + cfg_.council.reference_id() + "`\n\n";
    md += "| Ranking | Separability | Consistency | Battles |\n|---|---|---|---|\n";
    for (const auto& p : summaries) {
      const Json j = Json::parse(read_file(p));
      md += "| " + p.stem().string().substr(5) + " | " + fmt_num(100.0 * j.at("separability").get<double>(), 1) +
            "% | " + fmt_num(100.0 * j.at("consistency").get<double>(), 1) + "% | " +
            std::to_string(j.at("battle_count").get<std::size_t>()) + " |\n";
    }
    for (const auto& p : summaries) {
      const std::string tag = p.stem().string().substr(5);
      const fs::path lb = dir / ("leaderboard_" + tag + ".csv");
      if (!fs::exists(lb)) continue;
      md += "\n## Leaderboard: " + tag + "\n\n| Rank | Member | Score | 95% CI |\n|---|---|---|---|\n";
      for (const auto& e : leaderboard_from_csv(read_file(lb)).entries) {
        md += "| " + std::to_string(e.rank) + " | " + e.member_id + " | " + fmt_num(e.score, 1) + " | (" +
              fmt_num(e.ci_low, 1) + ", " + fmt_num(e.ci_high, 1) + ") |\n";
      }
    }
    if (fs::exists(dir / "judge_profiles.csv")) {
      const auto rows = parse_csv(read_file(dir / "judge_profiles.csv"));
      md += "\n## Judge profiles\n\n";
      for (std::size_t i = 0; i < rows.size(); ++i) {
        md += "|";
        for (const auto& c : rows[i]) md += " " + c + " |";
        md += "\n";
        if (i == 0) {
          md += "|";
          for (std::size_t k = 0; k < rows[i].size(); ++k) md += "---|";
          md += "\n";
        }
      }
    }
    if (fs::exists(dir / "sweep.csv")) {
      md += "\n## Simulation sweep\n\nSee `sweep.csv`, `merv.svg` and `separability.svg`.\n";
    }
    write_file_atomic(dir / "summary.md", md);
    out_ << "report: wrote " << (dir / "summary.md").string() << "\n";
  }

 private:
  Gateway& gateway() {
    if (!gateway_) {
      GatewayOptions o;
      o.cache_dir = cfg_.cache_path();
      std::shared_ptr<Transport> t;
      if (opts_.mock_providers) {
        t = std::make_shared<MockCouncilTransport>();
        o.clock = std::make_shared<VirtualClock>();
      } else {
        if (!network_) throw Error(ErrorCode::kConfig, "no network transport available; use --mock-providers");
        t = network_();
      }
      gateway_ = std::make_unique<Gateway>(std::move(t), std::move(o));
    }
    return *gateway_;
  }

  ProviderRegistry registry() const { return cfg_.registry(opts_.mock_providers); }

  PromptTemplates templates() const {
    return cfg_.prompts_dir ? PromptTemplates::load(*cfg_.prompts_dir) : PromptTemplates::defaults();
  }

  Json stage_extra(std::size_t failures) const {
    Json extra{{"failures", failures}};
    if (gateway_) {
      extra["network_calls"] = gateway_->network_calls();
      extra["cache_hits"] = gateway_->cache_hits();
    }
    return extra;
  }

  std::vector<AggregationMode> modes() const {
    if (opts_.mode) return {*opts_.mode};
    return cfg_.modes;
  }

  std::string report_tag(AggregationMode mode) const {
    std::string tag(to_string(mode));
    if (opts_.subset) tag += "_" + *opts_.subset;
    return tag;
  }

  template <class T>
  static void write_records(const fs::path& path, const std::vector<T>& items) {
    std::vector<Json> rows;
    rows.reserve(items.size());
    for (const auto& it : items) rows.push_back(to_json(it));
    write_jsonl(path, rows);
  }

  std::vector<Dilemma> load_dilemmas() const {
    const auto p = cfg_.paths.dilemmas();
    if (!fs::exists(p)) throw Error(ErrorCode::kMissingStageInput, "dilemmas file missing: " + p.string());
    std::vector<Dilemma> out;
    for (const auto& j : read_jsonl(p)) out.push_back(dilemma_from_json(j));
    return out;
  }

  std::vector<ResponseRecord> load_responses() const {
    const auto p = cfg_.paths.responses();
    if (!fs::exists(p)) throw Error(ErrorCode::kMissingStageInput, "responses file missing: " + p.string());
    std::vector<ResponseRecord> out;
    for (const auto& j : read_jsonl(p)) out.push_back(response_from_json(j));
    return out;
  }

  // Ballots restricted to the selected subset's judges; respondents and
  // battle structure are untouched.
  std::vector<Ballot> admitted_ballots() const {
    const auto p = cfg_.paths.ballots();
    if (!fs::exists(p)) throw Error(ErrorCode::kMissingStageInput, "ballots file missing: " + p.string());
    std::optional<std::set<std::string>> judges;
    if (opts_.subset) {
      const auto& ids = cfg_.subset(*opts_.subset);
      judges.emplace(ids.begin(), ids.end());
    }
    std::vector<Ballot> out;
    for (const auto& j : read_jsonl(p)) {
      Ballot b = ballot_from_json(j);
      if (!judges || judges->count(b.judge_id)) out.push_back(std::move(b));
    }
    if (out.empty()) throw Error(ErrorCode::kEmptyAfterFilter, "no ballots left after subset filter");
    return out;
  }

  BallotStore synthetic_store() const {
    const auto& syn = cfg_.simulate.synthetic;
    std::vector<std::string> respondents = cfg_.council.sorted_ids();
    const auto skills = geometric_skills(respondents, syn.skill_spread);
    std::vector<SyntheticJudgeSpec> specs;
    for (int k = 0; k < syn.judges; ++k) {
      specs.push_back({"synthetic-judge-" + std::to_string(k), skills, syn.noise_temperature, syn.position_bias_prob,
                       syn.strong_vote_threshold, false});
    }
    std::vector<std::string> items;
    for (int k = 0; k < syn.items; ++k) items.push_back("item-" + std::to_string(k));
    const std::string& ref = cfg_.council.reference_id();
    return BallotStore(synth_ballots(specs, respondents, items, ref, cfg_.rng_seed), ref);
  }

  // CSV with member_id and either score (higher is better) or rank (1 is
  // best); ranks are negated so both read as "higher is better".
  static std::map<std::string, double> read_external_scores(const fs::path& path) {
    std::map<std::string, double> out;
    for (const auto& j : read_records(path)) {
      const std::string id = field_string(j, "member_id");
      if (id.empty()) continue;
      if (j.contains("score")) {
        out[id] = std::stod(field_string(j, "score"));
      } else if (j.contains("rank")) {
        out[id] = -std::stod(field_string(j, "rank"));
      }
    }
    return out;
  }

  RunConfig cfg_;
  CliOptions opts_;
  TransportFactory network_;
  std::ostream& out_;
  std::unique_ptr<Gateway> gateway_;
};

}  // namespace lmc
