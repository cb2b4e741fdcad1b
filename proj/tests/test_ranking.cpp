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

#include <gtest/gtest.h>

#include <random>

#include "fixtures.hpp"
#include "lmc/ranking.hpp"
#include "oracles.hpp"

namespace lmc {
namespace {

using testing::kRef;

BattleOutcome battle(const std::string& r, BattleResult res, double w = 1.0, const std::string& d = "d") {
  BattleOutcome b;
  b.respondent_id = r;
  b.dilemma_id = d;
  b.judge_tag = "j";
  b.result = res;
  b.weight = w;
  return b;
}

std::vector<BattleOutcome> repeated(const std::string& r, int wins, int losses, int ties) {
  std::vector<BattleOutcome> out;
  for (int i = 0; i < wins; ++i) out.push_back(battle(r, BattleResult::kWin));
  for (int i = 0; i < losses; ++i) out.push_back(battle(r, BattleResult::kLoss));
  for (int i = 0; i < ties; ++i) out.push_back(battle(r, BattleResult::kTie));
  return out;
}

TEST(FitBt, MatchesGridSearchOracle) {
  std::mt19937_64 rng(2026);
  for (int instance = 0; instance < 25; ++instance) {
    const int members = 1 + static_cast<int>(rng() % 3);
    const int count = members + static_cast<int>(rng() % (51 - members));
    const auto battles = oracle::random_battles(rng, members, count);
    BtOptions quiet;
    quiet.warn_degenerate = false;
    const auto model = fit_bt(battles, kRef, quiet);
    const auto expected = oracle::grid_search_scores(battles, kRef);
    ASSERT_EQ(model.scores.size(), expected.size());
    for (const auto& [id, s] : expected) EXPECT_NEAR(model.scores.at(id), s, 1e-3) << "instance " << instance;
  }
}

TEST(FitBt, ReferencePinnedAtFifty) {
  const auto model = fit_bt(repeated("a", 7, 3, 2), kRef);
  EXPECT_DOUBLE_EQ(model.scores.at(kRef), 50.0);
  EXPECT_DOUBLE_EQ(model.skills.at(kRef), 1.0);
}

TEST(FitBt, AllTiesScoreFifty) {
  const auto model = fit_bt(repeated("a", 0, 0, 9), kRef);
  EXPECT_NEAR(model.scores.at("a"), 50.0, 1e-9);
}

TEST(FitBt, TwoToOneWinsGiveTwoThirds) {
  // pi / (pi + 1) = 2/3 at pi = 2.
  const auto model = fit_bt(repeated("a", 20, 10, 0), kRef);
  EXPECT_NEAR(model.scores.at("a"), 100.0 * 2.0 / 3.0, 1e-6);
  EXPECT_NEAR(model.skills.at("a"), 2.0, 1e-6);
}

TEST(FitBt, StrongWinCountsAsThree) {
  std::vector<BattleOutcome> b{battle("a", BattleResult::kWin, 3.0), battle("a", BattleResult::kLoss)};
  EXPECT_NEAR(fit_bt(b, kRef).scores.at("a"), 75.0, 1e-6);
}

TEST(FitBt, MoreWinsNeverLowerScore) {
  double previous = 0.0;
  for (int wins = 1; wins < 15; ++wins) {
    const double s = fit_bt(repeated("a", wins, 5, 1), kRef).scores.at("a");
    EXPECT_GT(s, previous);
    previous = s;
  }
}

TEST(FitBt, DegenerateMemberClampedAndWarned) {
  testing::WarningCapture warnings;
  auto battles = repeated("winner", 4, 0, 0);
  const auto model = fit_bt(battles, kRef);
  ASSERT_EQ(model.degenerate.size(), 1u);
  EXPECT_NEAR(std::log(model.skills.at("winner")), 10.0, 1e-12);
  EXPECT_TRUE(warnings.contains("winner"));
}

TEST(FitBt, Errors) {
  EXPECT_THROW(fit_bt(std::vector<BattleOutcome>{}, kRef), Error);
  EXPECT_THROW(fit_bt(repeated(kRef, 1, 1, 0), kRef), Error);
  std::vector<BattleOutcome> zero{battle("a", BattleResult::kWin, 0.0)};
  EXPECT_THROW(fit_bt(zero, kRef), Error);
}

TEST(AssignRanks, DescendingWithIdTieBreak) {
  const auto r = assign_ranks({{"b", 60.0}, {"a", 60.0}, {"c", 70.0}, {"d", 10.0}});
  EXPECT_EQ(r.at("c"), 1);
  EXPECT_EQ(r.at("a"), 2);
  EXPECT_EQ(r.at("b"), 3);
  EXPECT_EQ(r.at("d"), 4);
}

std::vector<BattleOutcome> three_member_battles(int scale) {
  std::vector<BattleOutcome> all;
  for (int k = 0; k < scale; ++k) {
    for (auto& b : repeated("strong", 8, 2, 1)) all.push_back(b);
    for (auto& b : repeated("even", 5, 5, 1)) all.push_back(b);
    for (auto& b : repeated("weak", 2, 8, 1)) all.push_back(b);
  }
  return all;
}

TEST(Bootstrap, DeterministicForSeed) {
  const auto battles = three_member_battles(3);
  const auto a = bootstrap_cis(battles, kRef, 50, 99);
  const auto b = bootstrap_cis(battles, kRef, 50, 99);
  ASSERT_EQ(a.entries.size(), b.entries.size());
  for (std::size_t i = 0; i < a.entries.size(); ++i) {
    EXPECT_EQ(a.entries[i].member_id, b.entries[i].member_id);
    EXPECT_EQ(a.entries[i].ci_low, b.entries[i].ci_low);
    EXPECT_EQ(a.entries[i].ci_high, b.entries[i].ci_high);
  }
}

TEST(Bootstrap, ReferenceIntervalIsZero) {
  const auto report = bootstrap_cis(three_member_battles(2), kRef, 40, 1);
  const auto* ref = report.find(kRef);
  ASSERT_NE(ref, nullptr);
  EXPECT_DOUBLE_EQ(ref->score, 50.0);
  EXPECT_DOUBLE_EQ(ref->ci_low, 0.0);
  EXPECT_DOUBLE_EQ(ref->ci_high, 0.0);
}

TEST(Bootstrap, IntervalsBracketPointEstimateAndOrdered) {
  const auto report = bootstrap_cis(three_member_battles(4), kRef, 200, 3);
  for (const auto& e : report.entries) {
    EXPECT_LE(e.ci_low, e.ci_high);
    if (e.member_id == kRef) continue;
    EXPECT_LE(e.ci_low, 1e-9);
    EXPECT_GE(e.ci_high, -1e-9);
  }
  EXPECT_EQ(report.entries.front().member_id, "strong");
  EXPECT_EQ(report.entries.back().member_id, "weak");
  EXPECT_EQ(report.rounds_used, 200);
}

TEST(Bootstrap, IntervalsShrinkWithMoreBattles) {
  const auto small = bootstrap_cis(three_member_battles(2), kRef, 200, 7);
  const auto large = bootstrap_cis(three_member_battles(8), kRef, 200, 7);
  for (const char* id : {"strong", "even", "weak"}) {
    const auto* s = small.find(id);
    const auto* l = large.find(id);
    EXPECT_LT(l->ci_high - l->ci_low, s->ci_high - s->ci_low) << id;
  }
}

TEST(Bootstrap, RejectsZeroRounds) { EXPECT_THROW(bootstrap_cis(three_member_battles(1), kRef, 0), Error); }

TEST(Separability, Examples) {
  EXPECT_DOUBLE_EQ(separability(std::vector<Interval>{{0, 1}, {2, 3}, {4, 5}}), 1.0);
  EXPECT_DOUBLE_EQ(separability(std::vector<Interval>{{0, 3}, {2, 4}, {5, 6}}), 2.0 / 3.0);
  EXPECT_DOUBLE_EQ(separability(std::vector<Interval>{{0, 1}, {1, 2}}), 0.0);  // touching overlaps
  EXPECT_DOUBLE_EQ(separability(std::vector<Interval>{{0, 1}}), 0.0);
}

TEST(WinRate, ComplementAndKnownValue) {
  BtModel model;
  model.reference_id = kRef;
  model.skills = {{"a", 4.0}, {kRef, 1.0}, {"c", 0.25}};
  model.scores = {{"a", council_score(4.0)}, {kRef, 50.0}, {"c", council_score(0.25)}};
  const auto m = winrate_matrix(model);
  ASSERT_EQ(m.ids.front(), "a");
  EXPECT_NEAR(m.p[0][1], 0.8, 1e-12);
  for (std::size_t i = 0; i < m.ids.size(); ++i) {
    EXPECT_DOUBLE_EQ(m.p[i][i], 0.5);
    for (std::size_t j = 0; j < m.ids.size(); ++j) {
      if (i != j) {
        EXPECT_NEAR(m.p[i][j] + m.p[j][i], 1.0, 1e-12);
      }
    }
  }
}

}  // namespace
}  // namespace lmc
