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
#include "lmc/ballots.hpp"
#include "oracles.hpp"

namespace lmc {
namespace {

using testing::add_couplet;
using testing::kRef;

TEST(Verdict, TokensRoundTrip) {
  for (Verdict v : kAllVerdicts) EXPECT_EQ(parse_token(to_token(v)), v);
  EXPECT_EQ(parse_token("A~=B"), Verdict::kTie);
  EXPECT_FALSE(parse_token("A>>>B").has_value());
  EXPECT_THROW(verdict_from_numeric(3), Error);
}

TEST(Verdict, MirrorFlipsSideKeepsStrength) {
  for (Verdict v : kAllVerdicts) {
    EXPECT_EQ(mirror(mirror(v)), v);
    EXPECT_EQ(is_strong(mirror(v)), is_strong(v));
    EXPECT_EQ(numeric(mirror(v)), -numeric(v));
  }
}

TEST(ClassifyCouplet, MatchesConsistencyTableOnFullGrid) {
  int checked = 0;
  for (Verdict a : kAllVerdicts) {
    for (Verdict b : kAllVerdicts) {
      const auto& row = oracle::table_row(std::string(to_token(a)), std::string(to_token(b)));
      const Consistency got = classify_couplet(a, b);
      EXPECT_EQ(got == Consistency::kConsistent, row.consistent) << to_token(a) << " / " << to_token(b);
      EXPECT_EQ(got == Consistency::kInconsistentFirst, row.biased_first) << to_token(a) << " / " << to_token(b);
      EXPECT_EQ(got == Consistency::kInconsistentSecond, row.biased_second) << to_token(a) << " / " << to_token(b);
      ++checked;
    }
  }
  EXPECT_EQ(checked, 25);
}

TEST(ClassifyCouplet, TableRowsAreExclusive) {
  for (const auto& row : oracle::kConsistencyTable) {
    EXPECT_EQ(int(row.consistent) + int(row.biased_first) + int(row.biased_second), 1);
  }
}

TEST(ClassifyCouplet, SwappingGamesExchangesBiasDirection) {
  for (Verdict a : kAllVerdicts) {
    for (Verdict b : kAllVerdicts) {
      const Consistency c = classify_couplet(a, b);
      const Consistency m = classify_couplet(mirror(a), mirror(b));
      if (c == Consistency::kConsistent) {
        EXPECT_EQ(m, Consistency::kConsistent);
      } else {
        EXPECT_NE(m, Consistency::kConsistent);
        EXPECT_NE(m, c);
      }
    }
  }
}

Couplet couplet(Verdict o, Verdict s) { return Couplet{o, s, "j", "d", "r"}; }

TEST(ResolveCouplet, ConsistentWinWeightsEachGame) {
  const auto out = resolve_couplet(couplet(Verdict::kAMuchBetter, Verdict::kBBetter));
  EXPECT_EQ(out[0].result, BattleResult::kWin);
  EXPECT_EQ(out[1].result, BattleResult::kWin);
  EXPECT_DOUBLE_EQ(out[0].weight, 3.0);
  EXPECT_DOUBLE_EQ(out[1].weight, 1.0);
  EXPECT_EQ(out[0].game, Game::kOriginal);
  EXPECT_EQ(out[1].game, Game::kSwapped);
}

TEST(ResolveCouplet, ConsistentLoss) {
  const auto out = resolve_couplet(couplet(Verdict::kBBetter, Verdict::kAMuchBetter));
  EXPECT_EQ(out[0].result, BattleResult::kLoss);
  EXPECT_EQ(out[1].result, BattleResult::kLoss);
  EXPECT_DOUBLE_EQ(out[0].weight, 1.0);
  EXPECT_DOUBLE_EQ(out[1].weight, 3.0);
}

TEST(ResolveCouplet, InconsistentAndTiedBecomeUnitTies) {
  for (Verdict a : kAllVerdicts) {
    for (Verdict b : kAllVerdicts) {
      const auto c = couplet(a, b);
      if (classify_couplet(c) == Consistency::kConsistent && a != Verdict::kTie) continue;
      for (const auto& o : resolve_couplet(c)) {
        EXPECT_EQ(o.result, BattleResult::kTie);
        EXPECT_DOUBLE_EQ(o.weight, 1.0);
      }
    }
  }
}

TEST(AggregateMean, FootnoteExample) {
  const std::vector<Verdict> votes{Verdict::kAMuchBetter, Verdict::kABetter, Verdict::kBBetter};
  EXPECT_EQ(aggregate_mean(votes), Verdict::kABetter);
}

TEST(AggregateMean, ZeroMeanIsTie) {
  EXPECT_EQ(aggregate_mean(std::vector<Verdict>{Verdict::kABetter, Verdict::kBBetter}), Verdict::kTie);
  EXPECT_EQ(aggregate_mean(std::vector<Verdict>{Verdict::kAMuchBetter, Verdict::kBMuchBetter, Verdict::kTie}),
            Verdict::kTie);
}

TEST(AggregateMean, RoundsHalfAwayFromZero) {
  EXPECT_EQ(aggregate_mean(std::vector<Verdict>{Verdict::kABetter, Verdict::kTie}), Verdict::kABetter);
  EXPECT_EQ(aggregate_mean(std::vector<Verdict>{Verdict::kBMuchBetter, Verdict::kBBetter}), Verdict::kBMuchBetter);
  EXPECT_EQ(aggregate_mean(std::vector<Verdict>{Verdict::kABetter, Verdict::kTie, Verdict::kTie}), Verdict::kTie);
}

TEST(AggregateMajority, ModalVerdict) {
  EXPECT_EQ(aggregate_majority(std::vector<Verdict>{Verdict::kABetter, Verdict::kABetter, Verdict::kBMuchBetter}),
            Verdict::kABetter);
}

TEST(AggregateMajority, FourWayTieIsTie) {
  const std::vector<Verdict> votes(kRawVerdicts.begin(), kRawVerdicts.end());
  EXPECT_EQ(aggregate_majority(votes), Verdict::kTie);
}

TEST(AggregateMajority, ModeTieGoesToMajoritySideMilderStrength) {
  // A>>B and A>B tie as modes; the A side holds the majority.
  const std::vector<Verdict> votes{Verdict::kAMuchBetter, Verdict::kABetter, Verdict::kBBetter,
                                   Verdict::kAMuchBetter, Verdict::kABetter};
  EXPECT_EQ(aggregate_majority(votes), Verdict::kABetter);
  // A>B and B>A tie as modes, extra strong B vote tips the side count.
  const std::vector<Verdict> tipped{Verdict::kABetter, Verdict::kABetter, Verdict::kBBetter, Verdict::kBBetter,
                                    Verdict::kBMuchBetter};
  EXPECT_EQ(aggregate_majority(tipped), Verdict::kBBetter);
}

TEST(Aggregators, RejectEmpty) {
  EXPECT_THROW(aggregate_majority(std::vector<Verdict>{}), Error);
  EXPECT_THROW(aggregate_mean(std::vector<Verdict>{}), Error);
}

TEST(Aggregators, UnanimityIdentity) {
  std::mt19937_64 rng(11);
  for (int k = 0; k < 1000; ++k) {
    const Verdict v = testing::random_verdict(rng);
    const std::vector<Verdict> votes(1 + rng() % 19, v);
    EXPECT_EQ(aggregate_majority(votes), v);
    EXPECT_EQ(aggregate_mean(votes), v);
  }
}

TEST(Aggregators, OutputWithinVoteRangeAndNeverOpposesConsensusSide) {
  std::mt19937_64 rng(12);
  for (int k = 0; k < 1000; ++k) {
    std::vector<Verdict> votes(1 + rng() % 9);
    for (auto& v : votes) v = testing::random_verdict(rng);
    int lo = 2, hi = -2;
    bool all_a = true;
    for (Verdict v : votes) {
      lo = std::min(lo, numeric(v));
      hi = std::max(hi, numeric(v));
      all_a = all_a && side(v) == Side::kA;
    }
    for (Verdict out : {aggregate_majority(votes), aggregate_mean(votes)}) {
      EXPECT_GE(numeric(out), std::min(lo, 0));
      EXPECT_LE(numeric(out), std::max(hi, 0));
      if (all_a) {
        EXPECT_EQ(side(out), Side::kA);
      }
    }
  }
}

TEST(FormCouplets, PairsGamesPerJudgeAndWarnsOnStragglers) {
  std::vector<Ballot> ballots;
  add_couplet(ballots, "j1", "d1", "r1", Verdict::kABetter, Verdict::kBBetter);
  add_couplet(ballots, "j2", "d1", "r1", Verdict::kABetter, Verdict::kABetter);
  ballots.push_back(Ballot{"d2", "j1", "r1", kRef, Verdict::kABetter, "", Game::kOriginal});
  ballots.push_back(Ballot{"d3", "j1", "r1", "r2", Verdict::kABetter, "", Game::kOriginal});
  testing::WarningCapture warnings;
  const auto set = form_couplets(ballots, kRef);
  ASSERT_EQ(set.couplets.size(), 2u);
  EXPECT_EQ(set.incomplete, 1u);
  EXPECT_EQ(set.invalid, 1u);
  EXPECT_TRUE(warnings.contains("position-swapped partner"));
  EXPECT_EQ(set.couplets[0].judge_id, "j1");
  EXPECT_EQ(set.couplets[0].swapped, Verdict::kBBetter);
  EXPECT_EQ(classify_couplet(set.couplets[1]), Consistency::kInconsistentFirst);
}

TEST(BuildBattleList, CountsPerMode) {
  std::vector<Ballot> ballots;
  for (const char* j : {"j1", "j2", "j3"}) {
    for (const char* d : {"d1", "d2"}) {
      for (const char* r : {"r1", "r2"}) add_couplet(ballots, j, d, r, Verdict::kABetter, Verdict::kBBetter);
    }
  }
  EXPECT_EQ(build_battle_list(ballots, AggregationMode::kNoAggregation, kRef).size(), 3u * 2 * 2 * 2);
  EXPECT_EQ(build_battle_list(ballots, AggregationMode::kMajority, kRef).size(), 2u * 2 * 2);
  EXPECT_EQ(build_battle_list(ballots, AggregationMode::kMeanPool, kRef).size(), 2u * 2 * 2);
}

TEST(BuildBattleList, SingleJudgeAggregationIsIdentity) {
  std::mt19937_64 rng(5);
  std::vector<Ballot> ballots;
  for (int d = 0; d < 20; ++d) {
    add_couplet(ballots, "solo", "d" + std::to_string(d), "r" + std::to_string(d % 3), testing::random_verdict(rng),
                testing::random_verdict(rng));
  }
  const auto base = build_battle_list(ballots, AggregationMode::kNoAggregation, kRef);
  for (auto mode : {AggregationMode::kMajority, AggregationMode::kMeanPool}) {
    const auto pooled = build_battle_list(ballots, mode, kRef);
    ASSERT_EQ(pooled.size(), base.size());
    for (std::size_t i = 0; i < base.size(); ++i) {
      EXPECT_EQ(pooled[i].respondent_id, base[i].respondent_id);
      EXPECT_EQ(pooled[i].result, base[i].result);
      EXPECT_DOUBLE_EQ(pooled[i].weight, base[i].weight);
    }
  }
}

TEST(BallotJson, RoundTrip) {
  Ballot b{"d9", "judge", kRef, "r", Verdict::kBMuchBetter, "because", Game::kSwapped};
  const Ballot c = ballot_from_json(to_json(b));
  EXPECT_EQ(c.dilemma_id, b.dilemma_id);
  EXPECT_EQ(c.verdict, b.verdict);
  EXPECT_EQ(c.game, b.game);
  EXPECT_EQ(c.reasoning_text, b.reasoning_text);
  EXPECT_EQ(c.respondent(kRef), "r");
}

}  // namespace
}  // namespace lmc
