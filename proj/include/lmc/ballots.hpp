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

// Vote algebra: the 4-point verdict scale, order-swapped couplet
// classification, per-battle voting aggregation and the conversion of
// ballots into weighted respondent-vs-reference battle outcomes.
//
// Position convention: in a ballot the response shown first is "A". The
// original game always shows the respondent first and the reference second;
// the swapped game shows the reference first.

#pragma once

#include <array>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

#include "lmc/common.hpp"

namespace lmc {

enum class Verdict : int {
  kBMuchBetter = -2,
  kBBetter = -1,
  kTie = 0,
  kABetter = 1,
  kAMuchBetter = 2,
};

inline constexpr std::array<Verdict, 4> kRawVerdicts = {
    Verdict::kAMuchBetter, Verdict::kABetter, Verdict::kBBetter, Verdict::kBMuchBetter};
inline constexpr std::array<Verdict, 5> kAllVerdicts = {
    Verdict::kAMuchBetter, Verdict::kABetter, Verdict::kTie, Verdict::kBBetter,
    Verdict::kBMuchBetter};

constexpr int numeric(Verdict v) { return static_cast<int>(v); }

inline Verdict verdict_from_numeric(int value) {
  if (value < -2 || value > 2) throw Error(ErrorCode::kInvalidArgument, "verdict numeric out of range");
  return static_cast<Verdict>(value);
}

enum class Side { kA, kB, kTie };

constexpr Side side(Verdict v) {
  if (numeric(v) > 0) return Side::kA;
  if (numeric(v) < 0) return Side::kB;
  return Side::kTie;
}

constexpr bool is_strong(Verdict v) { return v == Verdict::kAMuchBetter || v == Verdict::kBMuchBetter; }

// The same preference with positions exchanged.
constexpr Verdict mirror(Verdict v) { return static_cast<Verdict>(-numeric(v)); }

inline std::string_view to_token(Verdict v) {
  switch (v) {
    case Verdict::kAMuchBetter: return "A>>B";
    case Verdict::kABetter: return "A>B";
    case Verdict::kTie: return "A=B";
    case Verdict::kBBetter: return "B>A";
    case Verdict::kBMuchBetter: return "B>>A";
  }
  return "?";
}

inline std::optional<Verdict> parse_token(std::string_view token) {
  for (Verdict v : kAllVerdicts) {
    if (token == to_token(v)) return v;
  }
  if (token == "A~=B" || token == "B=A" || token == "TIE") return Verdict::kTie;
  return std::nullopt;
}

enum class Game { kOriginal = 0, kSwapped = 1 };

inline std::string_view to_string(Game g) { return g == Game::kOriginal ? "original" : "swapped"; }

inline Game parse_game(std::string_view s) {
  if (s == "original") return Game::kOriginal;
  if (s == "swapped") return Game::kSwapped;
  throw Error(ErrorCode::kParse, "unknown game index '" + std::string(s) + "'");
}

struct Ballot {
  std::string dilemma_id;
  std::string judge_id;
  std::string first_id;
  std::string second_id;
  Verdict verdict = Verdict::kTie;
  std::string reasoning_text;
  Game game = Game::kOriginal;

  // The non-reference member in this battle.
  const std::string& respondent(std::string_view reference_id) const {
    return first_id == reference_id ? second_id : first_id;
  }
};

inline Json to_json(const Ballot& b) {
  return Json{{"dilemma_id", b.dilemma_id}, {"judge_id", b.judge_id},
              {"first_id", b.first_id},     {"second_id", b.second_id},
              {"verdict", to_token(b.verdict)}, {"reasoning_text", b.reasoning_text},
              {"game_index", to_string(b.game)}};
}

inline Ballot ballot_from_json(const Json& j) {
  Ballot b;
  b.dilemma_id = j.at("dilemma_id").get<std::string>();
  b.judge_id = j.at("judge_id").get<std::string>();
  b.first_id = j.at("first_id").get<std::string>();
  b.second_id = j.at("second_id").get<std::string>();
  const auto token = j.at("verdict").get<std::string>();
  auto v = parse_token(token);
  if (!v) throw Error(ErrorCode::kParse, "bad verdict token '" + token + "'");
  b.verdict = *v;
  b.reasoning_text = j.value("reasoning_text", "");
  b.game = parse_game(j.value("game_index", "original"));
  return b;
}

// ---------------------------------------------------------------------------
// Couplets

enum class Consistency { kConsistent, kInconsistentFirst, kInconsistentSecond };

inline std::string_view to_string(Consistency c) {
  switch (c) {
    case Consistency::kConsistent: return "consistent";
    case Consistency::kInconsistentFirst: return "biased_first";
    case Consistency::kInconsistentSecond: return "biased_second";
  }
  return "?";
}

// `original` has the respondent in position A, `swapped` has it in B.
struct Couplet {
  Verdict original = Verdict::kTie;
  Verdict swapped = Verdict::kTie;
  std::string judge_id;
  std::string dilemma_id;
  std::string respondent_id;
};

// A couplet is consistent when the preferred side flips with the positions.
// Two votes for the same position (or one vote for a position and one tie)
// are biased toward that position. Strength differences are ignored.
constexpr Consistency classify_couplet(Verdict original, Verdict swapped) {
  const Side a = side(original);
  const Side b = side(swapped);
  if (a == Side::kTie && b == Side::kTie) return Consistency::kConsistent;
  if ((a == Side::kA && b == Side::kB) || (a == Side::kB && b == Side::kA)) {
    return Consistency::kConsistent;
  }
  if (a == Side::kA || b == Side::kA) return Consistency::kInconsistentFirst;
  return Consistency::kInconsistentSecond;
}

constexpr Consistency classify_couplet(const Couplet& c) { return classify_couplet(c.original, c.swapped); }

// ---------------------------------------------------------------------------
// Battle outcomes

enum class BattleResult { kWin, kLoss, kTie };

inline std::string_view to_string(BattleResult r) {
  switch (r) {
    case BattleResult::kWin: return "win";
    case BattleResult::kLoss: return "loss";
    case BattleResult::kTie: return "tie";
  }
  return "?";
}

inline BattleResult parse_battle_result(std::string_view s) {
  if (s == "win") return BattleResult::kWin;
  if (s == "loss") return BattleResult::kLoss;
  if (s == "tie") return BattleResult::kTie;
  throw Error(ErrorCode::kParse, "unknown battle result '" + std::string(s) + "'");
}

inline constexpr double kStrongVoteWeight = 3.0;

// Result is from the respondent's point of view against the reference.
struct BattleOutcome {
  std::string respondent_id;
  std::string dilemma_id;
  std::string judge_tag;
  Game game = Game::kOriginal;
  BattleResult result = BattleResult::kTie;
  double weight = 1.0;
};

inline Json to_json(const BattleOutcome& o) {
  return Json{{"respondent_id", o.respondent_id}, {"dilemma_id", o.dilemma_id},
              {"judge", o.judge_tag},           {"game_index", to_string(o.game)},
              {"result", to_string(o.result)},  {"weight", o.weight}};
}

inline BattleOutcome battle_from_json(const Json& j) {
  BattleOutcome o;
  o.respondent_id = j.at("respondent_id").get<std::string>();
  o.dilemma_id = j.at("dilemma_id").get<std::string>();
  o.judge_tag = j.at("judge").get<std::string>();
  o.game = parse_game(j.value("game_index", "original"));
  o.result = parse_battle_result(j.at("result").get<std::string>());
  o.weight = j.value("weight", 1.0);
  return o;
}

// Strong votes count as three wins, applied per game.
inline std::array<BattleOutcome, 2> resolve_couplet(const Couplet& c) {
  std::array<BattleOutcome, 2> out;
  for (int g = 0; g < 2; ++g) {
    out[g].respondent_id = c.respondent_id;
    out[g].dilemma_id = c.dilemma_id;
    out[g].judge_tag = c.judge_id;
    out[g].game = g == 0 ? Game::kOriginal : Game::kSwapped;
    out[g].result = BattleResult::kTie;
    out[g].weight = 1.0;
  }
  const Side first_game = side(c.original);
  if (classify_couplet(c) != Consistency::kConsistent || first_game == Side::kTie) return out;
  const BattleResult result = first_game == Side::kA ? BattleResult::kWin : BattleResult::kLoss;
  out[0].result = result;
  out[1].result = result;
  out[0].weight = is_strong(c.original) ? kStrongVoteWeight : 1.0;
  out[1].weight = is_strong(c.swapped) ? kStrongVoteWeight : 1.0;
  return out;
}

// ---------------------------------------------------------------------------
// Aggregation

// Modal verdict. Ties between modes go to the modal verdict on the side that
// holds the overall ballot majority (the milder one if both strengths of that
// side are modal); if the sides are level the result is a tie.
inline Verdict aggregate_majority(std::span<const Verdict> votes) {
  if (votes.empty()) throw Error(ErrorCode::kEmptyInput, "aggregate_majority needs at least one ballot");
  std::map<int, int> counts;
  int a_side = 0;
  int b_side = 0;
  for (Verdict v : votes) {
    ++counts[numeric(v)];
    if (side(v) == Side::kA) ++a_side;
    if (side(v) == Side::kB) ++b_side;
  }
  int best = 0;
  for (const auto& [value, n] : counts) best = std::max(best, n);
  std::vector<Verdict> modes;
  for (const auto& [value, n] : counts) {
    if (n == best) modes.push_back(static_cast<Verdict>(value));
  }
  if (modes.size() == 1) return modes.front();
  if (a_side == b_side) return Verdict::kTie;
  const Side winner = a_side > b_side ? Side::kA : Side::kB;
  std::optional<Verdict> pick;
  for (Verdict v : modes) {
    if (side(v) != winner) continue;
    if (!pick || std::abs(numeric(v)) < std::abs(numeric(*pick))) pick = v;
  }
  return pick.value_or(Verdict::kTie);
}

// Mean of the numeric scale rounded half away from zero; a mean strictly
// inside (-0.5, 0.5) is a tie.
inline Verdict aggregate_mean(std::span<const Verdict> votes) {
  if (votes.empty()) throw Error(ErrorCode::kEmptyInput, "aggregate_mean needs at least one ballot");
  double sum = 0.0;
  for (Verdict v : votes) sum += numeric(v);
  const double mean = sum / static_cast<double>(votes.size());
  if (std::abs(mean) < 0.5) return Verdict::kTie;
  const int rounded = static_cast<int>(std::round(mean));
  return verdict_from_numeric(std::clamp(rounded, -2, 2));
}

enum class AggregationMode { kNoAggregation, kMajority, kMeanPool };

inline std::string_view to_string(AggregationMode m) {
  switch (m) {
    case AggregationMode::kNoAggregation: return "no_aggregation";
    case AggregationMode::kMajority: return "majority";
    case AggregationMode::kMeanPool: return "mean_pool";
  }
  return "?";
}

inline AggregationMode parse_mode(std::string_view s) {
  if (s == "no_aggregation") return AggregationMode::kNoAggregation;
  if (s == "majority") return AggregationMode::kMajority;
  if (s == "mean_pool") return AggregationMode::kMeanPool;
  throw Error(ErrorCode::kInvalidArgument, "unknown aggregation mode '" + std::string(s) + "'");
}

// Verdict normalized to the original orientation (respondent in A). A ballot
// whose positions are neither (respondent, reference) nor the swap is
// rejected.
inline std::optional<Game> classify_game(const Ballot& b, std::string_view reference_id) {
  if (b.first_id == b.second_id) return std::nullopt;
  if (b.second_id == reference_id) return Game::kOriginal;
  if (b.first_id == reference_id) return Game::kSwapped;
  return std::nullopt;
}

struct CoupletSet {
  std::vector<Couplet> couplets;
  std::size_t incomplete = 0;  // ballots without a swap partner
  std::size_t invalid = 0;     // ballots not against the reference
};

// Pairs each judge's original and swapped ballots per (dilemma, respondent).
// Repeated ballots for the same key pair up in order of appearance.
// Output is ordered by (judge, dilemma, respondent).
inline CoupletSet form_couplets(std::span<const Ballot> ballots, std::string_view reference_id) {
  using Key = std::tuple<std::string, std::string, std::string>;
  std::map<Key, std::array<std::vector<Verdict>, 2>> grouped;
  CoupletSet out;
  for (const auto& b : ballots) {
    auto game = classify_game(b, reference_id);
    if (!game) {
      ++out.invalid;
      continue;
    }
    grouped[{b.judge_id, b.dilemma_id, b.respondent(reference_id)}][static_cast<int>(*game)].push_back(b.verdict);
  }
  for (const auto& [key, games] : grouped) {
    const std::size_t paired = std::min(games[0].size(), games[1].size());
    for (std::size_t i = 0; i < paired; ++i) {
      out.couplets.push_back(
          Couplet{games[0][i], games[1][i], std::get<0>(key), std::get<1>(key), std::get<2>(key)});
    }
    out.incomplete += games[0].size() + games[1].size() - 2 * paired;
  }
  if (out.incomplete > 0) {
    warn("dropped " + std::to_string(out.incomplete) + " ballot(s) without a position-swapped partner");
  }
  if (out.invalid > 0) {
    warn("ignored " + std::to_string(out.invalid) + " ballot(s) not against the reference member");
  }
  return out;
}

// Pools all judges' verdicts per (dilemma, respondent, game) into one verdict
// and forms one couplet per (dilemma, respondent) tagged with the mode name.
inline CoupletSet pooled_couplets(std::span<const Ballot> ballots, std::string_view reference_id,
                                  AggregationMode mode) {
  if (mode == AggregationMode::kNoAggregation) return form_couplets(ballots, reference_id);
  using Key = std::pair<std::string, std::string>;
  std::map<Key, std::array<std::vector<Verdict>, 2>> grouped;
  CoupletSet out;
  for (const auto& b : ballots) {
    auto game = classify_game(b, reference_id);
    if (!game) {
      ++out.invalid;
      continue;
    }
    grouped[{b.dilemma_id, b.respondent(reference_id)}][static_cast<int>(*game)].push_back(b.verdict);
  }
  const std::string tag(to_string(mode));
  for (const auto& [key, games] : grouped) {
    if (games[0].empty() || games[1].empty()) {
      out.incomplete += games[0].size() + games[1].size();
      continue;
    }
    auto pool = [mode](const std::vector<Verdict>& v) {
      return mode == AggregationMode::kMajority ? aggregate_majority(v) : aggregate_mean(v);
    };
    out.couplets.push_back(Couplet{pool(games[0]), pool(games[1]), tag, key.first, key.second});
  }
  if (out.incomplete > 0) {
    warn("dropped " + std::to_string(out.incomplete) + " ballot(s) in battles missing one game");
  }
  return out;
}

inline std::vector<BattleOutcome> battles_from_couplets(std::span<const Couplet> couplets) {
  std::vector<BattleOutcome> out;
  out.reserve(couplets.size() * 2);
  for (const auto& c : couplets) {
    auto pair = resolve_couplet(c);
    out.push_back(std::move(pair[0]));
    out.push_back(std::move(pair[1]));
  }
  return out;
}

inline std::vector<BattleOutcome> build_battle_list(std::span<const Ballot> ballots, AggregationMode mode,
                                                    std::string_view reference_id) {
  const CoupletSet set = pooled_couplets(ballots, reference_id, mode);
  return battles_from_couplets(set.couplets);
}

}  // namespace lmc
