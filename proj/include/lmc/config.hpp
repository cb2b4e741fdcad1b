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

// Run configuration (JSON), run-directory layout and the manifest.
//
// Relative paths in a config file resolve against the file's directory.
// Minimal config:
//
//   {
//     "run_dir": "runs/demo",
//     "providers": [{"provider_id": "openai", "base_endpoint": "https://api.openai.com/v1",
//                    "auth_env_var": "OPENAI_API_KEY", "max_parallel": 4}],
//     "council": [{"member_id": "gpt-4o", "provider": "openai", "model_name": "gpt-4o-2024-05-13",
//                  "reference": true}, ...],
//     "seeds_file": "seeds.jsonl"
//   }

#pragma once

#include <chrono>
#include <ctime>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "lmc/ballots.hpp"
#include "lmc/common.hpp"
#include "lmc/gateway.hpp"
#include "lmc/pipeline.hpp"

namespace lmc {

struct SyntheticSource {
  int judges = 9;
  int items = 100;
  double skill_spread = 8.0;
  double noise_temperature = 0.5;
  double position_bias_prob = 0.0;
  double strong_vote_threshold = 2.0;
};

struct SimulateSettings {
  std::vector<int> council_sizes{1, 3, 5, 7, 9, 11, 13, 15, 17, 19};
  std::vector<int> test_sizes{10, 20, 30, 40, 50, 60, 70, 80, 90, 100};
  int trials = 100;
  int adversarial_count = 0;
  double adversarial_ratio = 0.0;
  std::string source = "replay";  // or "synthetic"
  SyntheticSource synthetic;
};

struct ReplayMapping {
  std::string dilemma = "emobench_id";
  std::string judge = "llm_judge";
  std::string first = "first_completion_by";
  std::string second = "second_completion_by";
  std::string verdict = "pairwise_choice";
  std::string reasoning = "judging_response_string";
  // Optional raw label -> canonical token overrides, e.g. {"A>>B": "A>>B"}.
  std::map<std::string, std::string> labels;
  // Optional response-file columns for length statistics.
  std::string response_dilemma = "emobench_id";
  std::string response_member = "llm_responder";
  std::string response_text = "response_string";
};

struct RunPaths {
  fs::path run_dir;
  fs::path dilemmas() const { return run_dir / "dilemmas" / "dilemmas.jsonl"; }
  fs::path responses() const { return run_dir / "responses" / "responses.jsonl"; }
  fs::path ballots() const { return run_dir / "ballots" / "ballots.jsonl"; }
  fs::path reviews() const { return run_dir / "ballots" / "review.jsonl"; }
  fs::path reports() const { return run_dir / "reports"; }
  fs::path manifest() const { return run_dir / "manifest.json"; }
  fs::path cache() const { return run_dir / "cache"; }
};

struct RunConfig {
  fs::path base_dir;  // directory that relative paths resolve against
  std::string config_digest;
  Council council;
  std::map<std::string, ProviderSpec> providers;   // by provider_id
  std::map<std::string, std::string> model_names;  // member -> provider-side model
  std::size_t word_limit = 250;
  std::size_t per_member = 5;
  int bootstrap_rounds = 100;
  std::uint64_t rng_seed = 0;
  std::vector<AggregationMode> modes{AggregationMode::kNoAggregation, AggregationMode::kMajority,
                                     AggregationMode::kMeanPool};
  std::map<std::string, std::vector<std::string>> subsets;
  std::optional<fs::path> seeds_file;
  std::vector<Seed> inline_seeds;
  std::optional<fs::path> prompts_dir;
  std::optional<fs::path> cache_dir;
  std::optional<fs::path> external_rankings;
  int top_k = 5;
  StageSettings stages;
  RunPaths paths;
  SimulateSettings simulate;
  ReplayMapping replay;

  fs::path cache_path() const { return cache_dir.value_or(paths.cache()); }

  // Per-member provider spec: the provider's limits with the member's model.
  // With `mock`, members without a configured provider get a local one.
  ProviderRegistry registry(bool mock = false) const {
    ProviderRegistry out;
    for (const auto& m : council.members()) {
      auto it = providers.find(m.provider_ref);
      ProviderSpec spec;
      if (it != providers.end()) {
        spec = it->second;
      } else if (mock) {
        spec.provider_id = "mock";
        spec.base_endpoint = "mock://local";
        spec.max_parallel = 8;
        spec.requests_per_minute = 600000;
      } else {
        throw Error(ErrorCode::kConfig, "member " + m.member_id + " names unknown provider " + m.provider_ref);
      }
      if (spec.model_name.empty()) spec.model_name = m.member_id;
      auto name = model_names.find(m.member_id);
      if (name != model_names.end()) spec.model_name = name->second;
      out.emplace(m.member_id, std::move(spec));
    }
    return out;
  }

  // Registry keyed by member id; members refer to it through provider_ref.
  Council routed_council() const {
    std::vector<CouncilMember> ms;
    for (auto m : council.members()) {
      m.provider_ref = m.member_id;
      ms.push_back(std::move(m));
    }
    return Council(std::move(ms));
  }

  const std::vector<std::string>& subset(const std::string& name) const {
    auto it = subsets.find(name);
    if (it == subsets.end()) throw Error(ErrorCode::kUnknownSubset, "unknown subset: " + name);
    return it->second;
  }

  std::vector<Seed> seeds() const {
    std::vector<Seed> out = inline_seeds;
    if (seeds_file) {
      for (const auto& j : read_jsonl(*seeds_file)) {
        out.push_back(Seed{j.at("seed_id").get<std::string>(), j.at("seed_text").get<std::string>()});
      }
    }
    return out;
  }
};

inline fs::path resolve_path(const fs::path& base, const std::string& p) {
  fs::path path(p);
  return path.is_absolute() ? path : base / path;
}

inline RunConfig parse_config(const Json& j, const fs::path& base_dir) {
  RunConfig cfg;
  cfg.base_dir = base_dir;
  cfg.config_digest = sha256_hex(j.dump());
  try {
    for (const auto& p : j.value("providers", Json::array())) {
      ProviderSpec spec;
      spec.provider_id = p.at("provider_id").get<std::string>();
      spec.base_endpoint = p.value("base_endpoint", "");
      spec.model_name = p.value("model_name", "");
      spec.max_parallel = p.value("max_parallel", 1);
      spec.requests_per_minute = p.value("requests_per_minute", 60);
      spec.auth_env_var = p.value("auth_env_var", "");
      if (p.contains("timeout_seconds")) {
        spec.timeout = std::chrono::milliseconds(static_cast<std::int64_t>(p["timeout_seconds"].get<double>() * 1000));
      }
      spec.validate();
      if (!cfg.providers.emplace(spec.provider_id, spec).second) {
        throw Error(ErrorCode::kConfig, "duplicate provider_id " + spec.provider_id);
      }
    }
    std::vector<CouncilMember> members;
    for (const auto& m : j.at("council")) {
      CouncilMember cm;
      cm.member_id = m.at("member_id").get<std::string>();
      cm.display_name = m.value("display_name", cm.member_id);
      cm.provider_ref = m.value("provider", "");
      cm.is_reference = m.value("reference", false);
      if (m.contains("model_name")) cfg.model_names[cm.member_id] = m["model_name"].get<std::string>();
      members.push_back(std::move(cm));
    }
    if (members.empty()) throw Error(ErrorCode::kConfig, "council roster is empty");
    cfg.council = Council(std::move(members));
    cfg.council.validate();

    cfg.word_limit = j.value("word_limit", cfg.word_limit);
    cfg.per_member = j.value("per_member", cfg.per_member);
    cfg.bootstrap_rounds = j.value("bootstrap_rounds", cfg.bootstrap_rounds);
    cfg.rng_seed = j.value("rng_seed", cfg.rng_seed);
    cfg.top_k = j.value("top_k", cfg.top_k);
    if (cfg.word_limit < 1) throw Error(ErrorCode::kConfig, "word_limit must be >= 1");
    if (cfg.bootstrap_rounds < 1) throw Error(ErrorCode::kConfig, "bootstrap_rounds must be >= 1");
    if (j.contains("modes")) {
      cfg.modes.clear();
      for (const auto& m : j["modes"]) cfg.modes.push_back(parse_mode(m.get<std::string>()));
    }
    const Json subsets = j.value("subsets", Json::object());
    for (const auto& [name, ids] : subsets.items()) {
      std::vector<std::string> list = ids.get<std::vector<std::string>>();
      for (const auto& id : list) {
        if (!cfg.council.contains(id)) throw Error(ErrorCode::kConfig, "subset " + name + " names non-member " + id);
      }
      cfg.subsets[name] = std::move(list);
    }
    if (j.contains("seeds_file")) cfg.seeds_file = resolve_path(base_dir, j["seeds_file"].get<std::string>());
    for (const auto& s : j.value("seeds", Json::array())) {
      cfg.inline_seeds.push_back(Seed{s.at("seed_id").get<std::string>(), s.at("seed_text").get<std::string>()});
    }
    if (j.contains("prompts_dir")) cfg.prompts_dir = resolve_path(base_dir, j["prompts_dir"].get<std::string>());
    if (j.contains("cache_dir")) cfg.cache_dir = resolve_path(base_dir, j["cache_dir"].get<std::string>());
    if (j.contains("external_rankings")) {
      cfg.external_rankings = resolve_path(base_dir, j["external_rankings"].get<std::string>());
    }
    cfg.paths.run_dir = resolve_path(base_dir, j.value("run_dir", "run"));

    const Json stages = j.value("stages", Json::object());
    cfg.stages.expand_max_tokens = stages.value("expand_max_tokens", cfg.stages.expand_max_tokens);
    cfg.stages.respond_max_tokens = stages.value("respond_max_tokens", cfg.stages.respond_max_tokens);
    cfg.stages.judge_max_tokens = stages.value("judge_max_tokens", cfg.stages.judge_max_tokens);
    if (stages.contains("expand_temperature")) cfg.stages.expand_temperature = stages["expand_temperature"].get<double>();
    cfg.stages.self_grading = stages.value("self_grading", true);

    const Json sim = j.value("simulate", Json::object());
    auto& s = cfg.simulate;
    s.council_sizes = sim.value("council_sizes", s.council_sizes);
    s.test_sizes = sim.value("test_sizes", s.test_sizes);
    s.trials = sim.value("trials", s.trials);
    s.adversarial_count = sim.value("adversarial_count", s.adversarial_count);
    s.adversarial_ratio = sim.value("adversarial_ratio", s.adversarial_ratio);
    s.source = sim.value("source", s.source);
    if (s.source != "replay" && s.source != "synthetic") {
      throw Error(ErrorCode::kConfig, "simulate.source must be replay or synthetic");
    }
    const Json syn = sim.value("synthetic", Json::object());
    s.synthetic.judges = syn.value("judges", s.synthetic.judges);
    s.synthetic.items = syn.value("items", s.synthetic.items);
    s.synthetic.skill_spread = syn.value("skill_spread", s.synthetic.skill_spread);
    s.synthetic.noise_temperature = syn.value("noise_temperature", s.synthetic.noise_temperature);
    s.synthetic.position_bias_prob = syn.value("position_bias_prob", s.synthetic.position_bias_prob);
    s.synthetic.strong_vote_threshold = syn.value("strong_vote_threshold", s.synthetic.strong_vote_threshold);

    const Json rep = j.value("replay", Json::object());
    auto& r = cfg.replay;
    r.dilemma = rep.value("dilemma", r.dilemma);
    r.judge = rep.value("judge", r.judge);
    r.first = rep.value("first", r.first);
    r.second = rep.value("second", r.second);
    r.verdict = rep.value("verdict", r.verdict);
    r.reasoning = rep.value("reasoning", r.reasoning);
    r.labels = rep.value("labels", r.labels);
    r.response_dilemma = rep.value("response_dilemma", r.response_dilemma);
    r.response_member = rep.value("response_member", r.response_member);
    r.response_text = rep.value("response_text", r.response_text);
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::kConfig, e.what());
  } catch (const Error& e) {
    if (e.code() == ErrorCode::kConfig) throw;
    throw Error(ErrorCode::kConfig, e.what());
  }
  return cfg;
}

inline RunConfig load_config(const fs::path& path) {
  Json j;
  try {
    j = Json::parse(read_file(path));
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::kConfig, "cannot parse " + path.string() + ": " + e.what());
  }
  return parse_config(j, fs::absolute(path).parent_path());
}

// ---------------------------------------------------------------------------
// Manifest

inline std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

#ifndef LMC_VERSION
#define LMC_VERSION "0.0.0"
#endif

// Records per-stage line counts; rewritten atomically after each stage.
inline void update_manifest(const RunConfig& cfg, const std::string& stage, const fs::path& record_file,
                            const Json& extra = Json::object()) {
  const fs::path path = cfg.paths.manifest();
  Json m = fs::exists(path) ? Json::parse(read_file(path)) : Json::object();
  if (!m.contains("run_id")) m["run_id"] = cfg.config_digest.substr(0, 12);
  if (!m.contains("created_at")) m["created_at"] = utc_timestamp();
  m["config_digest"] = cfg.config_digest;
  m["software_version"] = LMC_VERSION;
  m["updated_at"] = utc_timestamp();
  Json entry{{"file", fs::relative(record_file, cfg.paths.run_dir).generic_string()},
             {"records", count_lines(record_file)},
             {"completed_at", utc_timestamp()}};
  for (const auto& [k, v] : extra.items()) entry[k] = v;
  m["stages"][stage] = entry;
  write_file_atomic(path, m.dump(2) + "\n");
}

// ---------------------------------------------------------------------------
// CSV input

// RFC 4180 fields: quoted fields may contain commas, quotes ("") and
// newlines.
inline std::vector<std::vector<std::string>> parse_csv(std::string_view text) {
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> row;
  std::string field;
  bool quoted = false;
  bool any = false;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        field.push_back(c);
      }
      continue;
    }
    if (c == '"') {
      quoted = true;
      any = true;
    } else if (c == ',') {
      row.push_back(std::move(field));
      field.clear();
      any = true;
    } else if (c == '\n' || c == '\r') {
      if (c == '\r' && i + 1 < text.size() && text[i + 1] == '\n') ++i;
      if (any || !field.empty()) {
        row.push_back(std::move(field));
        rows.push_back(std::move(row));
      }
      row.clear();
      field.clear();
      any = false;
    } else {
      field.push_back(c);
      any = true;
    }
  }
  if (quoted) throw Error(ErrorCode::kParse, "unterminated quoted CSV field");
  if (any || !field.empty()) {
    row.push_back(std::move(field));
    rows.push_back(std::move(row));
  }
  return rows;
}

// Reads .csv (header row) or JSONL into JSON objects.
inline std::vector<Json> read_records(const fs::path& path) {
  if (path.extension() != ".csv") return read_jsonl(path);
  const auto rows = parse_csv(read_file(path));
  std::vector<Json> out;
  if (rows.empty()) return out;
  const auto& header = rows.front();
  for (std::size_t r = 1; r < rows.size(); ++r) {
    Json j = Json::object();
    for (std::size_t c = 0; c < header.size() && c < rows[r].size(); ++c) j[header[c]] = rows[r][c];
    out.push_back(std::move(j));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Replay import

struct ImportStats {
  std::size_t records = 0;
  std::size_t imported = 0;
  std::size_t no_reference = 0;
  std::size_t unparseable = 0;
  std::size_t unknown_member = 0;
};

inline std::string field_string(const Json& j, const std::string& key) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return {};
  if (it->is_string()) return it->get<std::string>();
  return it->dump();
}

// Normalizes external judgment records into ballots. The game is inferred
// from which position holds the reference. Records whose label does not
// parse, that do not involve the reference, or that name members outside
// the council are dropped and counted.
inline std::vector<Ballot> import_ballots(std::span<const Json> records, const ReplayMapping& map,
                                          const Council& council, ImportStats* stats = nullptr) {
  ImportStats local;
  ImportStats& st = stats ? *stats : local;
  const std::string& ref = council.reference_id();
  std::vector<Ballot> out;
  for (const auto& r : records) {
    ++st.records;
    Ballot b;
    b.dilemma_id = field_string(r, map.dilemma);
    b.judge_id = field_string(r, map.judge);
    b.first_id = field_string(r, map.first);
    b.second_id = field_string(r, map.second);
    b.reasoning_text = field_string(r, map.reasoning);
    if (!council.contains(b.judge_id) || !council.contains(b.first_id) || !council.contains(b.second_id)) {
      ++st.unknown_member;
      continue;
    }
    if ((b.first_id == ref) == (b.second_id == ref)) {
      ++st.no_reference;
      continue;
    }
    std::string label = trim(field_string(r, map.verdict));
    if (auto it = map.labels.find(label); it != map.labels.end()) label = it->second;
    std::optional<Verdict> v = parse_token(label);
    if (!v || *v == Verdict::kTie) v = extract_verdict(label);
    if (!v) {
      ++st.unparseable;
      continue;
    }
    b.verdict = *v;
    b.game = b.second_id == ref ? Game::kOriginal : Game::kSwapped;
    out.push_back(std::move(b));
    ++st.imported;
  }
  return out;
}

}  // namespace lmc
