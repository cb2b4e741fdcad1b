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

// Bradley-Terry skill estimation over respondent-vs-reference battles.
//
// Skills pi_i > 0 with P(i beats j) = pi_i / (pi_i + pi_j). The reference is
// pinned at pi = 1, which makes the maximum-likelihood fit unique, and the
// council score of a member is its expected win rate against the reference
// on a 0-100 scale: 100 * pi / (pi + 1). The reference therefore sits at
// exactly 50.
//
// The log-likelihood maximized is
//
//   sum_decisive  w * log P(winner beats loser)
//   + sum_ties    w * (0.5 * log P(i beats j) + 0.5 * log P(j beats i))
//
// in log-skill space theta = log pi. With every battle against the pinned
// reference the likelihood separates per member. A member with no (fractional) wins or no losses has
// an infinite MLE; its log-skill is clamped to -/+ log_skill_clamp and it is
// reported in BtModel::degenerate.

#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "lmc/ballots.hpp"
#include "lmc/common.hpp"

namespace lmc {

struct BtOptions {
  double tolerance = 1e-8;  // max absolute log-skill update
  int max_iterations = 10000;
  double log_skill_clamp = 10.0;
  bool warn_degenerate = true;
};

inline double council_score(double skill) { return 100.0 * skill / (skill + 1.0); }

struct BtModel {
  std::string reference_id;
  std::map<std::string, double> skills;
  std::map<std::string, double> scores;
  std::vector<std::string> degenerate;
  int iterations = 0;
  bool converged = false;

  double win_probability(const std::string& a, const std::string& b) const {
    const double pa = skills.at(a);
    const double pb = skills.at(b);
    return pa / (pa + pb);
  }
};

// Weighted result totals of one member against the reference; a tie of
// weight w adds w/2 to both sides.
struct MemberTally {
  double wins = 0.0;
  double losses = 0.0;

  void add(BattleResult result, double weight) {
    switch (result) {
      case BattleResult::kWin: wins += weight; break;
      case BattleResult::kLoss: losses += weight; break;
      case BattleResult::kTie:
        wins += 0.5 * weight;
        losses += 0.5 * weight;
        break;
    }
  }
};

namespace detail {

inline double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace detail

// Fit from per-member tallies against the reference. Members are
// conditionally independent given the pinned reference, so each coordinate
// is solved by damped Newton iterations on W - N * sigmoid(theta) = 0.
inline BtModel fit_bt_tallies(const std::map<std::string, MemberTally>& tallies, std::string_view reference_id,
                              const BtOptions& options = {}) {
  if (tallies.empty()) throw Error(ErrorCode::kEmptyBattles, "no battles to fit");
  BtModel model;
  model.reference_id = std::string(reference_id);
  model.converged = true;
  for (const auto& [id, t] : tallies) {
    if (id == reference_id) throw Error(ErrorCode::kInvalidArgument, "battle lists the reference as respondent");
    if (t.wins < 0.0 || t.losses < 0.0 || t.wins + t.losses <= 0.0) {
      throw Error(ErrorCode::kInvalidArgument, "member " + id + " has no positive battle weight");
    }
    double theta = 0.0;
    if (t.wins <= 0.0 || t.losses <= 0.0) {
      theta = t.wins <= 0.0 ? -options.log_skill_clamp : options.log_skill_clamp;
      model.degenerate.push_back(id);
      if (options.warn_degenerate) {
        warn("member '" + id + "' has only " + (t.wins <= 0.0 ? "losses" : "wins") + "; log-skill clamped to " +
             std::to_string(theta));
      }
    } else {
      const double total = t.wins + t.losses;
      bool done = false;
      int iter = 0;
      while (iter < options.max_iterations) {
        ++iter;
        const double p = detail::sigmoid(theta);
        const double grad = t.wins - total * p;
        const double curv = total * p * (1.0 - p);
        const double delta = curv > 0.0 ? std::clamp(grad / curv, -1.0, 1.0) : (grad > 0 ? 1.0 : -1.0);
        theta = std::clamp(theta + delta, -options.log_skill_clamp, options.log_skill_clamp);
        if (std::abs(delta) < options.tolerance) {
          done = true;
          break;
        }
      }
      model.iterations = std::max(model.iterations, iter);
      model.converged = model.converged && done;
    }
    const double skill = std::exp(theta);
    model.skills[id] = skill;
    model.scores[id] = council_score(skill);
  }
  model.skills[std::string(reference_id)] = 1.0;
  model.scores[std::string(reference_id)] = council_score(1.0);
  return model;
}

inline std::map<std::string, MemberTally> tally_battles(std::span<const BattleOutcome> battles) {
  std::map<std::string, MemberTally> tallies;
  for (const auto& b : battles) {
    if (!(b.weight > 0.0)) throw Error(ErrorCode::kInvalidArgument, "battle weight must be positive");
    tallies[b.respondent_id].add(b.result, b.weight);
  }
  return tallies;
}

inline BtModel fit_bt(std::span<const BattleOutcome> battles, std::string_view reference_id,
                      const BtOptions& options = {}) {
  if (battles.empty()) throw Error(ErrorCode::kEmptyBattles, "no battles to fit");
  return fit_bt_tallies(tally_battles(battles), reference_id, options);
}

// Ranks 1..m by descending score; equal scores are ordered by member id.
inline std::map<std::string, int> assign_ranks(const std::map<std::string, double>& scores) {
  std::vector<std::pair<std::string, double>> order(scores.begin(), scores.end());
  std::stable_sort(order.begin(), order.end(),
                   [](const auto& a, const auto& b) {
                     if (a.second != b.second) return a.second > b.second;
                     return a.first < b.first;
                   });
  std::map<std::string, int> ranks;
  for (std::size_t i = 0; i < order.size(); ++i) ranks[order[i].first] = static_cast<int>(i) + 1;
  return ranks;
}

struct Interval {
  double low = 0.0;
  double high = 0.0;
};

inline bool overlaps(const Interval& a, const Interval& b) { return !(a.high < b.low || b.high < a.low); }

// Fraction of unordered pairs whose intervals do not overlap.
inline double separability(std::span<const Interval> intervals) {
  const std::size_t m = intervals.size();
  if (m < 2) return 0.0;
  std::size_t separated = 0;
  std::size_t pairs = 0;
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = i + 1; j < m; ++j) {
      ++pairs;
      if (!overlaps(intervals[i], intervals[j])) ++separated;
    }
  }
  return static_cast<double>(separated) / static_cast<double>(pairs);
}

struct RankingEntry {
  std::string member_id;
  double score = 0.0;
  int rank = 0;
  double ci_low = 0.0;   // delta from score
  double ci_high = 0.0;  // delta from score

  Interval interval() const { return {score + ci_low, score + ci_high}; }
};

struct RankingReport {
  std::vector<RankingEntry> entries;  // ordered by rank
  std::string reference_id;
  double separability = 0.0;
  std::size_t battle_count = 0;
  AggregationMode aggregation_mode = AggregationMode::kNoAggregation;
  int rounds_requested = 0;
  int rounds_used = 0;
  BtModel model;

  const RankingEntry* find(std::string_view id) const {
    for (const auto& e : entries) {
      if (e.member_id == id) return &e;
    }
    return nullptr;
  }
};

inline double separability(const RankingReport& report) {
  std::vector<Interval> intervals;
  intervals.reserve(report.entries.size());
  for (const auto& e : report.entries) intervals.push_back(e.interval());
  return separability(intervals);
}

// Percentile bootstrap: each round resamples the battle list with replacement
// and refits. CI bounds are the 2.5th / 97.5th percentile round scores as
// deltas from the point estimate. Round r draws from make_stream(seed, r).
inline RankingReport bootstrap_cis(std::span<const BattleOutcome> battles, std::string_view reference_id,
                                   int rounds = 100, std::uint64_t rng_seed = 0,
                                   AggregationMode mode = AggregationMode::kNoAggregation,
                                   const BtOptions& options = {}) {
  if (rounds < 1) throw Error(ErrorCode::kInvalidArgument, "bootstrap needs at least one round");
  RankingReport report;
  report.reference_id = std::string(reference_id);
  report.battle_count = battles.size();
  report.aggregation_mode = mode;
  report.rounds_requested = rounds;
  report.model = fit_bt(battles, reference_id, options);
  BtOptions round_options = options;
  round_options.warn_degenerate = false;
  const auto& point = report.model.scores;

  std::vector<std::optional<std::map<std::string, double>>> round_scores(static_cast<std::size_t>(rounds));
  parallel_for(static_cast<std::size_t>(rounds), [&](std::size_t r) {
    Rng rng = make_stream(rng_seed, r);
    std::vector<BattleOutcome> sample;
    sample.reserve(battles.size());
    for (std::size_t k = 0; k < battles.size(); ++k) sample.push_back(battles[uniform_index(rng, battles.size())]);
    std::set<std::string> present;
    for (const auto& b : sample) present.insert(b.respondent_id);
    if (present.size() + 1 != point.size()) return;  // a member vanished from the resample
    try {
      round_scores[r] = fit_bt(sample, reference_id, round_options).scores;
    } catch (const Error&) {
    }
  });

  std::map<std::string, std::vector<double>> samples;
  for (const auto& rs : round_scores) {
    if (!rs) continue;
    ++report.rounds_used;
    for (const auto& [id, s] : *rs) samples[id].push_back(s);
  }
  if (report.rounds_used < rounds) {
    warn("bootstrap skipped " + std::to_string(rounds - report.rounds_used) + " of " +
         std::to_string(rounds) + " round(s)");
  }
  if (report.rounds_used == 0) throw Error(ErrorCode::kDegenerateData, "every bootstrap round failed");

  const auto ranks = assign_ranks(point);
  for (const auto& [id, score] : point) {
    RankingEntry e;
    e.member_id = id;
    e.score = score;
    e.rank = ranks.at(id);
    if (id != reference_id) {
      const auto& s = samples.at(id);
      e.ci_low = quantile(s, 0.025) - score;
      e.ci_high = quantile(s, 0.975) - score;
    }
    report.entries.push_back(e);
  }
  std::sort(report.entries.begin(), report.entries.end(),
            [](const RankingEntry& a, const RankingEntry& b) { return a.rank < b.rank; });
  report.separability = separability(report);
  return report;
}

struct WinRateMatrix {
  std::vector<std::string> ids;  // by descending skill
  std::vector<std::vector<double>> p;
};

inline WinRateMatrix winrate_matrix(const BtModel& model) {
  WinRateMatrix m;
  const auto ranks = assign_ranks(model.scores);
  for (const auto& entry : ranks) m.ids.push_back(entry.first);
  std::sort(m.ids.begin(), m.ids.end(), [&](const auto& a, const auto& b) { return ranks.at(a) < ranks.at(b); });
  const std::size_t n = m.ids.size();
  m.p.assign(n, std::vector<double>(n, 0.5));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (i != j) m.p[i][j] = model.win_probability(m.ids[i], m.ids[j]);
    }
  }
  return m;
}

}  // namespace lmc
