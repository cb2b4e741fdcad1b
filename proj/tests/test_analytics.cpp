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
#include "lmc/analytics.hpp"

namespace lmc {
namespace {

using testing::add_couplet;
using testing::kRef;

Couplet couplet(Verdict o, Verdict s) { return Couplet{o, s, "j", "d", "r"}; }

TEST(Ppc, Examples) {
  const std::vector<Couplet> cs{
      couplet(Verdict::kABetter, Verdict::kBBetter),      // consistent
      couplet(Verdict::kTie, Verdict::kTie),              // consistent
      couplet(Verdict::kAMuchBetter, Verdict::kABetter),  // first
      couplet(Verdict::kBBetter, Verdict::kTie),          // second
  };
  const auto r = compute_ppc(cs);
  EXPECT_DOUBLE_EQ(r.ppc, 0.5);
  EXPECT_DOUBLE_EQ(r.bias_first, 0.25);
  EXPECT_DOUBLE_EQ(r.bias_second, 0.25);
  EXPECT_EQ(r.total, 4u);
  EXPECT_THROW(compute_ppc(std::vector<Couplet>{}), Error);
}

TEST(Ppc, PartsSumToOneExactly) {
  std::mt19937_64 rng(4);
  for (int k = 0; k < 1000; ++k) {
    std::vector<Couplet> cs(1 + rng() % 60);
    for (auto& c : cs) c = couplet(testing::random_verdict(rng), testing::random_verdict(rng));
    const auto r = compute_ppc(cs);
    EXPECT_EQ(r.ppc + r.bias_first + r.bias_second, 1.0);
    EXPECT_GE(r.bias_second, 0.0);
  }
}

TEST(Conviction, FractionOfStrongVotes) {
  std::vector<Ballot> b;
  add_couplet(b, "j", "d1", "r", Verdict::kAMuchBetter, Verdict::kBBetter);
  add_couplet(b, "j", "d2", "r", Verdict::kTie, Verdict::kBMuchBetter);
  EXPECT_DOUBLE_EQ(compute_conviction(b), 0.5);
  EXPECT_THROW(compute_conviction(std::vector<Ballot>{}), Error);
}

TEST(FilterConsistent, KeepsOnlyConsistentCouplets) {
  std::mt19937_64 rng(8);
  std::vector<Ballot> b;
  for (int d = 0; d < 40; ++d) {
    add_couplet(b, "j" + std::to_string(d % 3), "d" + std::to_string(d), "r", testing::random_verdict(rng),
                testing::random_verdict(rng));
  }
  const auto kept = filter_consistent(b, kRef);
  ASSERT_FALSE(kept.empty());
  EXPECT_DOUBLE_EQ(compute_ppc(form_couplets(kept, kRef).couplets).ppc, 1.0);
}

std::vector<Ballot> labeled_ballots(const std::string& judge, const std::string& labels) {
  std::vector<Ballot> out;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const Verdict v = labels[i] == 'A' ? Verdict::kABetter : labels[i] == 'B' ? Verdict::kBMuchBetter : Verdict::kTie;
    out.push_back(Ballot{"d" + std::to_string(i), judge, "r", kRef, v, "", Game::kOriginal});
  }
  return out;
}

TEST(Kappa, MatchesReferenceValue) {
  // Reference value from sklearn.metrics.cohen_kappa_score.
  const auto k = compute_kappa(labeled_ballots("x", "AABTBAAB"), labeled_ballots("y", "ABBTAATB"));
  ASSERT_TRUE(k.kappa.has_value());
  EXPECT_NEAR(*k.kappa, 0.41463414634146345, 1e-12);
  EXPECT_EQ(k.shared, 8u);
}

TEST(Kappa, IdenticalIsOneStrengthIgnored) {
  auto a = labeled_ballots("x", "AABTBAB");
  auto b = a;
  for (auto& ballot : b) {
    ballot.judge_id = "y";
    if (ballot.verdict == Verdict::kABetter) ballot.verdict = Verdict::kAMuchBetter;
  }
  EXPECT_DOUBLE_EQ(*compute_kappa(a, b).kappa, 1.0);
}

TEST(Kappa, IndependentRatersNearZero) {
  std::mt19937_64 rng(21);
  std::string x, y;
  const char labels[] = "ABT";
  for (int i = 0; i < 20000; ++i) {
    x += labels[rng() % 3];
    y += labels[rng() % 3];
  }
  EXPECT_NEAR(*compute_kappa(labeled_ballots("x", x), labeled_ballots("y", y)).kappa, 0.0, 0.03);
}

TEST(Kappa, UndefinedAndNoOverlap) {
  EXPECT_FALSE(compute_kappa(labeled_ballots("x", "AAA"), labeled_ballots("y", "AAA")).kappa.has_value());
  auto other = labeled_ballots("y", "AB");
  for (auto& b : other) b.dilemma_id += "_other";
  try {
    compute_kappa(labeled_ballots("x", "AB"), other);
    FAIL() << "expected NoOverlap";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kNoOverlap);
  }
}

TEST(Agreement, SymmetricWithUnitDiagonal) {
  std::vector<Ballot> all;
  for (const auto& [j, l] : std::vector<std::pair<std::string, std::string>>{
           {"x", "AABTBA"}, {"y", "ABBTBA"}, {"z", "BBATAB"}}) {
    for (auto& b : labeled_ballots(j, l)) all.push_back(b);
  }
  const auto m = build_agreement_matrix(all);
  ASSERT_EQ(m.rows.size(), 3u);
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_DOUBLE_EQ(*m.values[i][i], 1.0);
    for (std::size_t j = 0; j < 3; ++j) EXPECT_EQ(m.values[i][j], m.values[j][i]);
  }
}

TEST(Contrarianism, OpposingJudgeExceedsOne) {
  std::vector<Ballot> all;
  for (const char* j : {"a", "b", "c"}) {
    for (auto& x : labeled_ballots(j, "AABBAB")) all.push_back(x);
  }
  for (auto& x : labeled_ballots("contra", "BBAABA")) all.push_back(x);
  EXPECT_NEAR(*compute_contrarianism(all, "a"), 0.0, 1e-12);
  EXPECT_GT(*compute_contrarianism(all, "contra"), 1.0);
}

TEST(Invariability, ModalFrequency) {
  const std::vector<std::vector<Verdict>> reps{
      {Verdict::kABetter, Verdict::kABetter, Verdict::kABetter, Verdict::kABetter, Verdict::kBBetter}};
  EXPECT_DOUBLE_EQ(compute_invariability(reps), 0.8);
  const std::vector<std::vector<Verdict>> two{{Verdict::kTie, Verdict::kTie},
                                              {Verdict::kABetter, Verdict::kBBetter}};
  EXPECT_DOUBLE_EQ(compute_invariability(two), 0.75);
}

TEST(Calibration, PerfectlyStableConsistentJudge) {
  const std::vector<CalibrationPair> pairs{
      {"p", std::vector<Verdict>(5, Verdict::kABetter), std::vector<Verdict>(5, Verdict::kBBetter)}};
  const auto r = compute_calibration(pairs);
  EXPECT_DOUBLE_EQ(r.invariability, 1.0);
  EXPECT_DOUBLE_EQ(r.ppc, 1.0);
  EXPECT_EQ(r.repetitions, 5u);
}

std::map<std::string, double> as_map(const std::vector<double>& v) {
  std::map<std::string, double> m;
  for (std::size_t i = 0; i < v.size(); ++i) m["m" + std::to_string(i)] = v[i];
  return m;
}

TEST(RankCorrelation, MatchesReferenceValues) {
  // Reference values from scipy.stats.spearmanr / kendalltau (tau-b).
  const auto a = as_map({3.1, 1.0, 4.0, 1.5, 9.2, 2.6, 5.3});
  const auto b = as_map({2.0, 7.0, 1.0, 8.0, 2.0, 8.0, 1.0});
  EXPECT_NEAR(rank_correlation(a, b, CorrelationMethod::kSpearman), -0.7158675207589937, 1e-12);
  EXPECT_NEAR(rank_correlation(a, b, CorrelationMethod::kKendall), -0.5143444998736398, 1e-12);
}

TEST(RankCorrelation, IdentityAndReversal) {
  const auto a = as_map({1, 2, 3, 4, 5});
  const auto r = as_map({50, 40, 30, 20, 10});
  for (auto m : {CorrelationMethod::kSpearman, CorrelationMethod::kKendall}) {
    EXPECT_DOUBLE_EQ(rank_correlation(a, a, m), 1.0);
    EXPECT_DOUBLE_EQ(rank_correlation(a, r, m), -1.0);
  }
  EXPECT_THROW(rank_correlation(a, as_map({1, 2, 3}), CorrelationMethod::kKendall), Error);
  EXPECT_THROW(rank_correlation(a, as_map({1, 1, 1, 1, 1}), CorrelationMethod::kSpearman), Error);
}

TEST(LengthBias, LinearIsOneAffineInvariant) {
  const std::vector<double> len{100, 150, 220, 300, 410};
  std::vector<double> score, shifted;
  for (double l : len) {
    score.push_back(0.1 * l + 5);
    shifted.push_back(-3.0 * (0.1 * l + 5) + 40);
  }
  EXPECT_NEAR(compute_length_bias(score, len), 1.0, 1e-12);
  EXPECT_NEAR(compute_length_bias(shifted, len), 1.0, 1e-12);
  const std::vector<double> noisy{10, 40, 20, 55, 30};
  std::vector<double> len2;
  for (double l : len) len2.push_back(7.0 * l + 13.0);
  EXPECT_NEAR(compute_length_bias(noisy, len), compute_length_bias(noisy, len2), 1e-12);
}

TEST(LengthBias, OrthogonalIsZeroAndErrors) {
  const std::vector<double> len{1, 2, 3, 4, 5};
  const std::vector<double> score{2, 1, 0, 1, 2};  // symmetric around the mean length
  EXPECT_NEAR(compute_length_bias(score, len), 0.0, 1e-12);
  const std::vector<double> flat{3, 3, 3, 3, 3};
  try {
    compute_length_bias(score, flat);
    FAIL() << "expected DegenerateVariance";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kDegenerateVariance);
  }
  EXPECT_THROW(compute_length_bias(std::vector<double>{1, 2}, std::vector<double>{1, 2}), Error);
}

LabeledMatrix square(const std::vector<std::string>& ids, const std::vector<std::vector<double>>& v) {
  LabeledMatrix m;
  m.rows = ids;
  m.cols = ids;
  for (const auto& row : v) {
    std::vector<std::optional<double>> r(row.begin(), row.end());
    m.values.push_back(r);
  }
  return m;
}

TEST(TopK, PicksLargestOffDiagonalAndMarksMutual) {
  const auto m = square({"a", "b", "c"}, {{9, 0.5, 0.2}, {0.7, 9, 0.1}, {0.3, 0.3, 9}});
  const auto edges = top_k_graph(m, 1);
  ASSERT_EQ(edges.size(), 3u);
  EXPECT_EQ(edges[0].to, "b");
  EXPECT_TRUE(edges[0].mutual);
  EXPECT_EQ(edges[1].to, "a");
  EXPECT_EQ(edges[2].to, "a");  // equal values: first by id
  EXPECT_FALSE(edges[2].mutual);
  EXPECT_EQ(top_k_graph(m, 5).size(), 6u);
  EXPECT_THROW(top_k_graph(m, 0), Error);
}

std::vector<Ballot> affinity_fixture() {
  // Judge "r1" always prefers itself; "j2" rates everyone evenly.
  std::vector<Ballot> b;
  for (int d = 0; d < 12; ++d) {
    const std::string dil = "d" + std::to_string(d);
    add_couplet(b, "r1", dil, "r1", Verdict::kABetter, Verdict::kBBetter);
    add_couplet(b, "r1", dil, "r2", d % 2 ? Verdict::kABetter : Verdict::kBBetter,
                d % 2 ? Verdict::kBBetter : Verdict::kABetter);
    add_couplet(b, "j2", dil, "r1", d % 2 ? Verdict::kABetter : Verdict::kBBetter,
                d % 2 ? Verdict::kBBetter : Verdict::kABetter);
    add_couplet(b, "j2", dil, "r2", d % 3 ? Verdict::kABetter : Verdict::kBBetter,
                d % 3 ? Verdict::kBBetter : Verdict::kABetter);
  }
  return b;
}

TEST(Affinity, EqualsFitOnJudgeBallotsOnly) {
  const auto all = affinity_fixture();
  const auto aff = compute_affinity(all, "j2", kRef);
  const auto direct = fit_bt(build_battle_list(ballots_of(all, "j2"), AggregationMode::kNoAggregation, kRef), kRef);
  for (const auto& [id, s] : direct.scores) EXPECT_DOUBLE_EQ(aff.at(id), s);
  EXPECT_THROW(compute_affinity(all, "nobody", kRef), Error);
}

TEST(Affinity, MatrixNormalizesByCouncilScore) {
  testing::WarningCapture quiet;
  const auto all = affinity_fixture();
  const std::map<std::string, double> council{{"r1", 60.0}, {"r2", 55.0}, {kRef, 50.0}};
  const auto m = build_affinity_matrix(all, kRef, council);
  for (std::size_t i = 0; i < m.judges.size(); ++i) {
    for (std::size_t j = 0; j < m.respondents.size(); ++j) {
      EXPECT_NEAR(m.normalized[i][j], m.entries[i][j] - council.at(m.respondents[j]), 1e-12);
    }
  }
}

TEST(JudgeProfile, SelfEnhancementAndPolarization) {
  testing::WarningCapture quiet;
  const auto all = affinity_fixture();
  ProfileInputs in;
  in.reference_id = kRef;
  in.council_scores = {{"r1", 60.0}, {"r2", 55.0}, {kRef, 50.0}};
  in.bootstrap_rounds = 20;
  const auto self = build_judge_profile(all, "r1", in);
  ASSERT_TRUE(self.self_enhancement.has_value());
  EXPECT_GT(*self.self_enhancement, 0.0);
  EXPECT_DOUBLE_EQ(self.ppc, 1.0);
  EXPECT_GT(self.polarization, 0.0);
  const auto other = build_judge_profile(all, "j2", in);
  EXPECT_FALSE(other.self_enhancement.has_value());
  const std::vector<JudgeProfile> both{self, other};
  const auto avg = average_profile(both);
  EXPECT_DOUBLE_EQ(avg.ppc, 1.0);
  EXPECT_EQ(avg.self_enhancement, self.self_enhancement);
  EXPECT_EQ(avg.ballots, self.ballots + other.ballots);
}

}  // namespace
}  // namespace lmc
