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

// The three council stages: balanced test-set expansion, response gathering
// with sentence-boundary truncation, and two-game position-swapped judging of
// every respondent against the reference member.

#pragma once

#include <algorithm>
#include <cctype>
#include <map>
#include <optional>
#include <regex>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

#include "lmc/ballots.hpp"
#include "lmc/common.hpp"
#include "lmc/gateway.hpp"

namespace lmc {

struct CouncilMember {
  std::string member_id;
  std::string display_name;
  std::string provider_ref;
  bool is_reference = false;
};

class Council {
 public:
  Council() = default;
  explicit Council(std::vector<CouncilMember> members) : members_(std::move(members)) { validate(); }

  void validate() const {
    if (members_.empty()) throw Error(ErrorCode::kConfig, "council is empty");
    std::set<std::string> seen;
    int references = 0;
    for (const auto& m : members_) {
      if (m.member_id.empty()) throw Error(ErrorCode::kConfig, "council member without id");
      if (!seen.insert(m.member_id).second) throw Error(ErrorCode::kConfig, "duplicate member id " + m.member_id);
      if (m.is_reference) ++references;
    }
    if (references != 1) {
      throw Error(ErrorCode::kConfig, "council needs exactly one reference member, found " + std::to_string(references));
    }
  }

  const std::vector<CouncilMember>& members() const { return members_; }
  std::size_t size() const { return members_.size(); }

  const CouncilMember& reference() const {
    for (const auto& m : members_) {
      if (m.is_reference) return m;
    }
    throw Error(ErrorCode::kConfig, "council has no reference member");
  }
  const std::string& reference_id() const { return reference().member_id; }

  const CouncilMember& at(std::string_view id) const {
    for (const auto& m : members_) {
      if (m.member_id == id) return m;
    }
    throw Error(ErrorCode::kInvalidArgument, "unknown council member " + std::string(id));
  }
  bool contains(std::string_view id) const {
    return std::any_of(members_.begin(), members_.end(), [&](const auto& m) { return m.member_id == id; });
  }

  std::vector<std::string> sorted_ids() const {
    std::vector<std::string> ids;
    for (const auto& m : members_) ids.push_back(m.member_id);
    std::sort(ids.begin(), ids.end());
    return ids;
  }

 private:
  std::vector<CouncilMember> members_;
};

using ProviderRegistry = std::map<std::string, ProviderSpec>;

inline const ProviderSpec& provider_of(const ProviderRegistry& registry, const CouncilMember& m) {
  auto it = registry.find(m.provider_ref);
  if (it == registry.end()) {
    throw Error(ErrorCode::kConfig, "member " + m.member_id + " references unknown provider " + m.provider_ref);
  }
  return it->second;
}

struct Seed {
  std::string seed_id;
  std::string seed_text;
};

struct Dilemma {
  std::string dilemma_id;
  std::string seed_id;
  std::string seed_text;
  std::string expanded_text;
  std::string expander_id;
};

inline Json to_json(const Dilemma& d) {
  return Json{{"dilemma_id", d.dilemma_id}, {"seed_id", d.seed_id}, {"seed_text", d.seed_text},
              {"expanded_text", d.expanded_text}, {"expander_id", d.expander_id}};
}

inline Dilemma dilemma_from_json(const Json& j) {
  return Dilemma{j.at("dilemma_id").get<std::string>(), j.value("seed_id", ""), j.value("seed_text", ""),
                 j.at("expanded_text").get<std::string>(), j.value("expander_id", "")};
}

struct ResponseRecord {
  std::string dilemma_id;
  std::string member_id;
  std::string raw_text;
  std::string final_text;
  std::size_t word_count = 0;
  bool truncation_flagged = false;  // over the limit with no sentence boundary inside it
  bool missing = false;             // generation failed
  std::string error;
};

inline Json to_json(const ResponseRecord& r) {
  Json j{{"dilemma_id", r.dilemma_id}, {"member_id", r.member_id},   {"raw_text", r.raw_text},
         {"final_text", r.final_text}, {"word_count", r.word_count}, {"truncation_flagged", r.truncation_flagged},
         {"missing", r.missing}};
  if (!r.error.empty()) j["error"] = r.error;
  return j;
}

inline ResponseRecord response_from_json(const Json& j) {
  ResponseRecord r;
  r.dilemma_id = j.at("dilemma_id").get<std::string>();
  r.member_id = j.at("member_id").get<std::string>();
  r.raw_text = j.value("raw_text", "");
  r.final_text = j.value("final_text", r.raw_text);
  r.word_count = j.value("word_count", std::size_t{0});
  r.truncation_flagged = j.value("truncation_flagged", false);
  r.missing = j.value("missing", false);
  r.error = j.value("error", "");
  return r;
}

// ---------------------------------------------------------------------------
// Prompts

inline constexpr std::string_view kResponseAStart = "[The Start of Response A]";
inline constexpr std::string_view kResponseAEnd = "[The End of Response A]";
inline constexpr std::string_view kResponseBStart = "[The Start of Response B]";
inline constexpr std::string_view kResponseBEnd = "[The End of Response B]";

struct PromptTemplates {
  std::string expand;
  std::string respond;
  std::string judge;
  std::optional<std::string> judge_system;

  static PromptTemplates defaults() {
    PromptTemplates t;
    t.expand =
        "Below is a short scenario describing an interpersonal conflict.\n\n"
        "[Scenario]\n{seed}\n[End of Scenario]\n\n"
        "Rewrite it as a detailed first-person account from the point of view of the person facing the "
        "dilemma. Describe the people involved, the history between them, what is at stake and why the "
        "situation is hard. Do not resolve the dilemma and do not add any preamble; output only the account.";
    t.respond =
        "{dilemma}\n\n"
        "Respond to the person above with thoughtful, practical guidance. Keep your response under "
        "{word_limit} words.";
    t.judge =
        "A person has described an emotional dilemma and asked for advice. Two assistants responded.\n\n"
        "[Dilemma]\n{dilemma}\n[End of Dilemma]\n\n"
        "[The Start of Response A]\n{response_a}\n[The End of Response A]\n\n"
        "[The Start of Response B]\n{response_b}\n[The End of Response B]\n\n"
        "Compare the two responses on how well they understand the person's feelings and situation and how "
        "helpful their guidance is. Discuss the strengths and weaknesses of each response first. Then give your "
        "final verdict as exactly one of the following labels:\n"
        "[[A>>B]]: Response A is significantly better\n"
        "[[A>B]]: Response A is slightly better\n"
        "[[B>A]]: Response B is slightly better\n"
        "[[B>>A]]: Response B is significantly better";
    t.judge_system = "You are an impartial judge of advice given to people in difficult interpersonal situations.";
    return t;
  }

  // Reads expand.txt / respond.txt / judge.txt / judge_system.txt from `dir`;
  // missing files keep the built-in default.
  static PromptTemplates load(const fs::path& dir) {
    PromptTemplates t = defaults();
    auto maybe = [&](const char* name, std::string& slot) {
      const auto p = dir / name;
      if (fs::exists(p)) slot = read_file(p);
    };
    maybe("expand.txt", t.expand);
    maybe("respond.txt", t.respond);
    maybe("judge.txt", t.judge);
    if (fs::exists(dir / "judge_system.txt")) t.judge_system = read_file(dir / "judge_system.txt");
    return t;
  }
};

// Replaces every {key} in `tmpl`; single pass, so substituted text is never
// re-expanded.
inline std::string render(std::string_view tmpl, const std::map<std::string, std::string>& vars) {
  std::string out;
  out.reserve(tmpl.size());
  std::size_t i = 0;
  while (i < tmpl.size()) {
    if (tmpl[i] == '{') {
      const auto close = tmpl.find('}', i + 1);
      if (close != std::string_view::npos) {
        auto it = vars.find(std::string(tmpl.substr(i + 1, close - i - 1)));
        if (it != vars.end()) {
          out += it->second;
          i = close + 1;
          continue;
        }
      }
    }
    out.push_back(tmpl[i++]);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Text

inline std::size_t word_count(std::string_view text) {
  std::size_t n = 0;
  bool in_word = false;
  for (char ch : text) {
    const bool space = std::isspace(static_cast<unsigned char>(ch)) != 0;
    if (!space && !in_word) ++n;
    in_word = !space;
  }
  return n;
}

inline std::string trim(std::string_view s) {
  auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

struct Truncation {
  std::string text;
  bool flagged = false;  // over the limit but no sentence boundary fits
};

// Longest prefix ending in a sentence terminator (. ! ?) whose word count is
// within the limit. A terminator run may be followed by closing quotes or
// brackets and must then be followed by whitespace or end of text.
inline Truncation truncate_to_sentence(std::string_view text, std::size_t word_limit) {
  if (word_limit < 1) throw Error(ErrorCode::kInvalidArgument, "word_limit must be >= 1");
  if (word_count(text) <= word_limit) return {std::string(text), false};
  auto is_term = [](char c) { return c == '.' || c == '!' || c == '?'; };
  auto is_closer = [](char c) { return c == '"' || c == '\'' || c == ')' || c == ']'; };
  std::optional<std::size_t> best;
  std::size_t i = 0;
  while (i < text.size()) {
    if (!is_term(text[i])) {
      ++i;
      continue;
    }
    std::size_t end = i;
    while (end < text.size() && is_term(text[end])) ++end;
    while (end < text.size() && is_closer(text[end])) ++end;
    if (end == text.size() || std::isspace(static_cast<unsigned char>(text[end]))) {
      if (word_count(text.substr(0, end)) > word_limit) break;
      best = end;
    }
    i = end;
  }
  if (!best) return {std::string(text), true};
  return {std::string(text.substr(0, *best)), false};
}

// ---------------------------------------------------------------------------
// Stage 1: expansion

struct StageSettings {
  int expand_max_tokens = 2048;
  int respond_max_tokens = 1024;
  int judge_max_tokens = 2048;
  std::optional<double> expand_temperature;
  bool self_grading = true;
};

struct StageFailure {
  std::string item;  // dilemma / seed id
  std::string member_id;
  std::string error;
};

// Seeds are shuffled with rng_seed and dealt round-robin over members sorted
// by id, so every member receives exactly per_member seeds.
inline std::vector<std::pair<Seed, std::string>> assign_expanders(std::span<const Seed> seeds, const Council& council,
                                                                  std::size_t per_member, std::uint64_t rng_seed) {
  if (per_member < 1) throw Error(ErrorCode::kInvalidArgument, "per_member must be >= 1");
  if (seeds.size() != per_member * council.size()) {
    throw Error(ErrorCode::kSizeMismatch, std::to_string(seeds.size()) + " seeds for " +
                                              std::to_string(council.size()) + " members x " +
                                              std::to_string(per_member));
  }
  std::vector<Seed> shuffled(seeds.begin(), seeds.end());
  Rng rng = make_stream(rng_seed);
  shuffle_in_place(shuffled, rng);
  const auto ids = council.sorted_ids();
  std::vector<std::pair<Seed, std::string>> out;
  out.reserve(shuffled.size());
  for (std::size_t k = 0; k < shuffled.size(); ++k) out.emplace_back(shuffled[k], ids[k % ids.size()]);
  return out;
}

struct ExpansionResult {
  std::vector<Dilemma> dilemmas;
  std::vector<StageFailure> failures;
};

inline ExpansionResult expand_test_set(std::span<const Seed> seeds, const Council& council, std::size_t per_member,
                                       std::uint64_t rng_seed, Gateway& gateway, const ProviderRegistry& registry,
                                       const PromptTemplates& templates, const StageSettings& settings = {}) {
  const auto assignment = assign_expanders(seeds, council, per_member, rng_seed);
  std::vector<std::pair<ChatRequest, ProviderSpec>> requests;
  for (const auto& [seed, member] : assignment) {
    ChatRequest req;
    req.member_id = member;
    req.user_text = render(templates.expand, {{"seed", seed.seed_text}});
    req.temperature = settings.expand_temperature;
    req.max_tokens = settings.expand_max_tokens;
    req.purpose = Purpose::kExpand;
    requests.emplace_back(std::move(req), provider_of(registry, council.at(member)));
  }
  auto results = gateway.complete_all(requests);
  ExpansionResult out;
  for (std::size_t k = 0; k < assignment.size(); ++k) {
    const auto& [seed, member] = assignment[k];
    if (!results[k]) {
      out.failures.push_back({seed.seed_id, member, results[k].error().what()});
      warn("expansion of seed " + seed.seed_id + " by " + member + " failed: " + results[k].error().what());
      continue;
    }
    std::string text = trim(results[k]->text);
    if (text.empty()) {
      out.failures.push_back({seed.seed_id, member, "empty expansion"});
      continue;
    }
    out.dilemmas.push_back(Dilemma{"dilemma-" + seed.seed_id, seed.seed_id, seed.seed_text, std::move(text), member});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Stage 2: responses

// Output is ordered by dilemma (input order) then member (council order).
inline std::vector<ResponseRecord> gather_responses(std::span<const Dilemma> dilemmas, const Council& council,
                                                    std::size_t word_limit, Gateway& gateway,
                                                    const ProviderRegistry& registry,
                                                    const PromptTemplates& templates,
                                                    const StageSettings& settings = {}) {
  if (dilemmas.empty()) throw Error(ErrorCode::kEmptyInput, "no dilemmas to respond to");
  if (word_limit < 1) throw Error(ErrorCode::kInvalidArgument, "word_limit must be >= 1");
  std::vector<std::pair<ChatRequest, ProviderSpec>> requests;
  std::vector<std::pair<const Dilemma*, const CouncilMember*>> keys;
  for (const auto& d : dilemmas) {
    for (const auto& m : council.members()) {
      ChatRequest req;
      req.member_id = m.member_id;
      req.user_text = render(templates.respond, {{"dilemma", d.expanded_text}, {"word_limit", std::to_string(word_limit)}});
      req.max_tokens = settings.respond_max_tokens;
      req.purpose = Purpose::kRespond;
      requests.emplace_back(std::move(req), provider_of(registry, m));
      keys.emplace_back(&d, &m);
    }
  }
  auto results = gateway.complete_all(requests);
  std::vector<ResponseRecord> out;
  out.reserve(results.size());
  std::size_t missing = 0;
  for (std::size_t k = 0; k < results.size(); ++k) {
    ResponseRecord r;
    r.dilemma_id = keys[k].first->dilemma_id;
    r.member_id = keys[k].second->member_id;
    if (!results[k]) {
      r.missing = true;
      r.error = results[k].error().what();
      ++missing;
    } else {
      r.raw_text = results[k]->text;
      auto t = truncate_to_sentence(r.raw_text, word_limit);
      r.final_text = std::move(t.text);
      r.truncation_flagged = t.flagged;
      r.word_count = word_count(r.final_text);
    }
    out.push_back(std::move(r));
  }
  if (missing > 0) warn(std::to_string(missing) + " response(s) failed and will be excluded from judging");
  return out;
}

// ---------------------------------------------------------------------------
// Stage 3: judging

// Last occurrence of a double-bracketed verdict label wins; reasoning often
// mentions labels before concluding. Otherwise the final non-empty line may
// be a bare label. Returns nullopt when nothing matches.
inline std::optional<Verdict> extract_verdict(std::string_view judge_output) {
  static const std::regex kToken(R"(\[\[\s*(A>>B|A>B|B>A|B>>A)\s*\]\])");
  std::optional<Verdict> found;
  const std::string text(judge_output);
  for (auto it = std::sregex_iterator(text.begin(), text.end(), kToken); it != std::sregex_iterator(); ++it) {
    found = parse_token((*it)[1].str());
  }
  if (found) return found;
  std::string last_line;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    auto nl = text.find('\n', pos);
    if (nl == std::string::npos) nl = text.size();
    std::string line = trim(std::string_view(text).substr(pos, nl - pos));
    if (!line.empty()) last_line = std::move(line);
    pos = nl + 1;
  }
  const auto strip = last_line.find_first_not_of("*`[ ");
  const auto strip_end = last_line.find_last_not_of("*`]. ");
  if (strip == std::string::npos || strip_end == std::string::npos || strip_end < strip) return std::nullopt;
  const std::string bare = last_line.substr(strip, strip_end - strip + 1);
  if (bare == "A>>B" || bare == "A>B" || bare == "B>A" || bare == "B>>A") return parse_token(bare);
  return std::nullopt;
}

struct ReviewItem {
  std::string dilemma_id;
  std::string judge_id;
  std::string first_id;
  std::string second_id;
  Game game = Game::kOriginal;
  std::string reason;  // "unparseable" or "gateway_error"
  std::string judge_output;
  std::string error;
};

inline Json to_json(const ReviewItem& r) {
  return Json{{"dilemma_id", r.dilemma_id}, {"judge_id", r.judge_id},       {"first_id", r.first_id},
              {"second_id", r.second_id},   {"game_index", to_string(r.game)}, {"reason", r.reason},
              {"judge_output", r.judge_output}, {"error", r.error}};
}

struct JudgingResult {
  std::vector<Ballot> ballots;  // ordered by (dilemma, judge, respondent, game)
  std::vector<ReviewItem> reviews;
  std::size_t skipped_missing = 0;  // battles skipped because a response is missing
};

inline JudgingResult run_judging(std::span<const Dilemma> dilemmas, std::span<const ResponseRecord> responses,
                                 const Council& council, const PromptTemplates& templates, Gateway& gateway,
                                 const ProviderRegistry& registry, const StageSettings& settings = {}) {
  const std::string& ref = council.reference_id();
  std::map<std::pair<std::string, std::string>, const ResponseRecord*> by_key;
  for (const auto& r : responses) {
    if (!r.missing) by_key[{r.dilemma_id, r.member_id}] = &r;
  }
  std::vector<const Dilemma*> order;
  for (const auto& d : dilemmas) order.push_back(&d);
  std::sort(order.begin(), order.end(), [](auto* a, auto* b) { return a->dilemma_id < b->dilemma_id; });
  const auto ids = council.sorted_ids();

  struct Job {
    const Dilemma* dilemma;
    std::string judge;
    std::string respondent;
    Game game;
  };
  std::vector<Job> jobs;
  std::vector<std::pair<ChatRequest, ProviderSpec>> requests;
  JudgingResult out;
  for (const Dilemma* d : order) {
    auto ref_it = by_key.find({d->dilemma_id, ref});
    for (const auto& judge : ids) {
      for (const auto& respondent : ids) {
        if (respondent == ref) continue;
        if (!settings.self_grading && respondent == judge) continue;
        auto resp_it = by_key.find({d->dilemma_id, respondent});
        if (ref_it == by_key.end() || resp_it == by_key.end()) {
          ++out.skipped_missing;
          continue;
        }
        for (Game game : {Game::kOriginal, Game::kSwapped}) {
          const bool original = game == Game::kOriginal;
          ChatRequest req;
          req.member_id = judge;
          req.system_text = templates.judge_system;
          req.user_text = render(templates.judge,
                                 {{"dilemma", d->expanded_text},
                                  {"response_a", original ? resp_it->second->final_text : ref_it->second->final_text},
                                  {"response_b", original ? ref_it->second->final_text : resp_it->second->final_text}});
          req.temperature = 0.0;
          req.max_tokens = settings.judge_max_tokens;
          req.purpose = Purpose::kJudge;
          requests.emplace_back(std::move(req), provider_of(registry, council.at(judge)));
          jobs.push_back({d, judge, respondent, game});
        }
      }
    }
  }
  if (out.skipped_missing > 0) {
    warn("skipped " + std::to_string(out.skipped_missing) + " battle(s) with a missing response");
  }
  auto results = gateway.complete_all(requests);
  for (std::size_t k = 0; k < jobs.size(); ++k) {
    const Job& job = jobs[k];
    const bool original = job.game == Game::kOriginal;
    const std::string& first = original ? job.respondent : ref;
    const std::string& second = original ? ref : job.respondent;
    if (!results[k]) {
      out.reviews.push_back({job.dilemma->dilemma_id, job.judge, first, second, job.game, "gateway_error", "",
                             results[k].error().what()});
      continue;
    }
    auto verdict = extract_verdict(results[k]->text);
    if (!verdict) {
      out.reviews.push_back({job.dilemma->dilemma_id, job.judge, first, second, job.game, "unparseable",
                             results[k]->text, std::string(to_string(ErrorCode::kVerdictUnparseable))});
      continue;
    }
    out.ballots.push_back(Ballot{job.dilemma->dilemma_id, job.judge, first, second, *verdict, results[k]->text, job.game});
  }
  if (!out.reviews.empty()) {
    warn(std::to_string(out.reviews.size()) + " judgment(s) routed to manual review");
  }
  return out;
}

}  // namespace lmc
