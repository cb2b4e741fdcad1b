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

// Judge-quality metrics: positional consistency and bias, conviction,
// affinity and self-enhancement, polarization, length bias, sidewise Cohen's
// kappa agreement and contrarianism, calibration invariability, rank
// correlations and top-k relation graphs.

#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

#include "lmc/ballots.hpp"
#include "lmc/common.hpp"
#include "lmc/ranking.hpp"

namespace lmc {

// ---------------------------------------------------------------------------
// Positional consistency

struct PpcResult {
  double ppc = 0.0;
  double bias_first = 0.0;
  double bias_second = 0.0;
  std::size_t total = 0;
};

// bias_second is taken as the complement so the three parts sum to exactly 1.
inline PpcResult compute_ppc(std::span<const Couplet> couplets) {
  if (couplets.empty()) throw Error(ErrorCode::kEmptyInput, "no couplets");
  std::size_t consistent = 0;
  std::size_t first = 0;
  for (const auto& c : couplets) {
    switch (classify_couplet(c)) {
      case Consistency::kConsistent: ++consistent; break;
      case Consistency::kInconsistentFirst: ++first; break;
      case Consistency::kInconsistentSecond: break;
    }
  }
  PpcResult r;
  r.total = couplets.size();
  const double n = static_cast<double>(r.total);
  r.ppc = static_cast<double>(consistent) / n;
  r.bias_first = static_cast<double>(first) / n;
  r.bias_second = 1.0 - (r.ppc + r.bias_first);
  return r;
}

inline double compute_conviction(std::span<const Ballot> ballots) {
  if (ballots.empty()) throw Error(ErrorCode::kEmptyInput, "no ballots");
  const auto strong = std::count_if(ballots.begin(), ballots.end(), [](const Ballot& b) { return is_strong(b.verdict); });
  return static_cast<double>(strong) / static_cast<double>(ballots.size());
}

inline std::vector<Ballot> ballots_of(std::span<const Ballot> ballots, std::string_view judge_id) {
  std::vector<Ballot> out;
  for (const auto& b : ballots) {
    if (b.judge_id == judge_id) out.push_back(b);
  }
  return out;
}

inline std::vector<std::string> judges_in(std::span<const Ballot> ballots) {
  std::set<std::string> ids;
  for (const auto& b : ballots) ids.insert(b.judge_id);
  return {ids.begin(), ids.end()};
}

// Keeps only ballots belonging to position-consistent couplets.
inline std::vector<Ballot> filter_consistent(std::span<const Ballot> ballots, std::string_view reference_id) {
  using Key = std::tuple<std::string, std::string, std::string>;
  std::map<Key, std::array<std::vector<const Ballot*>, 2>> grouped;
  for (const auto& b : ballots) {
    auto game = classify_game(b, reference_id);
    if (!game) continue;
    grouped[{b.judge_id, b.dilemma_id, b.respondent(reference_id)}][static_cast<int>(*game)].push_back(&b);
  }
  std::vector<Ballot> out;
  for (const auto& [key, games] : grouped) {
    const std::size_t paired = std::min(games[0].size(), games[1].size());
    for (std::size_t i = 0; i < paired; ++i) {
      if (classify_couplet(games[0][i]->verdict, games[1][i]->verdict) == Consistency::kConsistent) {
        out.push_back(*games[0][i]);
        out.push_back(*games[1][i]);
      }
    }
  }
  return out;
}

// Consistency of a council: PPC over couplets of the pooled verdicts for the
// aggregated modes, over every judge's couplets for no aggregation.
inline PpcResult council_consistency(std::span<const Ballot> ballots, std::string_view reference_id,
                                     AggregationMode mode) {
  const auto set = pooled_couplets(ballots, reference_id, mode);
  return compute_ppc(set.couplets);
}

// ---------------------------------------------------------------------------
// Affinity

// Scores the respondents receive when only `judge_id`'s ballots count.
inline std::map<std::string, double> compute_affinity(std::span<const Ballot> ballots, std::string_view judge_id,
                                                      std::string_view reference_id) {
  const auto mine = ballots_of(ballots, judge_id);
  if (mine.empty()) throw Error(ErrorCode::kEmptyInput, "judge " + std::string(judge_id) + " has no ballots");
  const auto battles = build_battle_list(mine, AggregationMode::kNoAggregation, reference_id);
  return fit_bt(battles, reference_id).scores;
}

struct AffinityMatrix {
  std::vector<std::string> judges;
  std::vector<std::string> respondents;
  std::vector<std::vector<double>> entries;     // [judge][respondent]
  std::vector<std::vector<double>> normalized;  // entries minus council score

  double at(std::string_view judge, std::string_view respondent) const {
    const auto i = std::find(judges.begin(), judges.end(), judge) - judges.begin();
    const auto j = std::find(respondents.begin(), respondents.end(), respondent) - respondents.begin();
    if (i >= static_cast<long>(judges.size()) || j >= static_cast<long>(respondents.size())) {
      throw Error(ErrorCode::kInvalidArgument, "no affinity entry for " + std::string(judge) + " -> " + std::string(respondent));
    }
    return entries[i][j];
  }
};

inline AffinityMatrix build_affinity_matrix(std::span<const Ballot> ballots, std::string_view reference_id,
                                            const std::map<std::string, double>& council_scores) {
  AffinityMatrix m;
  m.judges = judges_in(ballots);
  for (const auto& [id, s] : council_scores) m.respondents.push_back(id);
  for (const auto& judge : m.judges) {
    const auto row_scores = compute_affinity(ballots, judge, reference_id);
    std::vector<double> row;
    std::vector<double> norm;
    for (const auto& r : m.respondents) {
      auto it = row_scores.find(r);
      const double v = it == row_scores.end() ? std::nan("") : it->second;
      row.push_back(v);
      norm.push_back(v - council_scores.at(r));
    }
    m.entries.push_back(std::move(row));
    m.normalized.push_back(std::move(norm));
  }
  return m;
}

// ---------------------------------------------------------------------------
// Length bias

// Coefficient of determination of an ordinary least squares fit of score on
// average response length.
inline double compute_length_bias(std::span<const double> scores, std::span<const double> lengths) {
  if (scores.size() != lengths.size()) throw Error(ErrorCode::kSizeMismatch, "scores and lengths differ in size");
  if (scores.size() < 3) throw Error(ErrorCode::kInvalidArgument, "length bias needs at least 3 respondents");
  const double n = static_cast<double>(scores.size());
  const double mx = std::accumulate(lengths.begin(), lengths.end(), 0.0) / n;
  const double my = std::accumulate(scores.begin(), scores.end(), 0.0) / n;
  double sxx = 0.0;
  double sxy = 0.0;
  double syy = 0.0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const double dx = lengths[i] - mx;
    const double dy = scores[i] - my;
    sxx += dx * dx;
    sxy += dx * dy;
    syy += dy * dy;
  }
  if (sxx <= 0.0) throw Error(ErrorCode::kDegenerateVariance, "response lengths have zero variance");
  if (syy <= 0.0) return 0.0;
  return std::clamp(sxy * sxy / (sxx * syy), 0.0, 1.0);
}

// ---------------------------------------------------------------------------
// Agreement

// Cohen's kappa over paired categorical labels. nullopt when chance agreement
// is 1 (both raters constant on the same label), where kappa is undefined.
template <class Label>
std::optional<double> cohen_kappa(std::span<const std::pair<Label, Label>> pairs) {
  if (pairs.empty()) throw Error(ErrorCode::kNoOverlap, "no shared items");
  std::map<Label, double> ma;
  std::map<Label, double> mb;
  double agree = 0.0;
  for (const auto& [a, b] : pairs) {
    ma[a] += 1.0;
    mb[b] += 1.0;
    if (a == b) agree += 1.0;
  }
  const double n = static_cast<double>(pairs.size());
  const double po = agree / n;
  double pe = 0.0;
  for (const auto& [label, count] : ma) {
    auto it = mb.find(label);
    if (it != mb.end()) pe += (count / n) * (it->second / n);
  }
  if (pe >= 1.0 - 1e-15) return std::nullopt;
  return (po - pe) / (1.0 - pe);
}

using BattleKey = std::tuple<std::string, std::string, std::string>;  // dilemma, first, second

inline BattleKey battle_key(const Ballot& b) { return {b.dilemma_id, b.first_id, b.second_id}; }

struct KappaResult {
  std::optional<double> kappa;
  std::size_t shared = 0;
};

// Sidewise agreement: verdicts collapse to the preferred side, so A>B and
// A>>B agree. Ballots are matched by (dilemma, first, second).
inline KappaResult compute_kappa(std::span<const Ballot> a, std::span<const Ballot> b) {
  std::map<BattleKey, Side> left;
  for (const auto& x : a) left.emplace(battle_key(x), side(x.verdict));
  std::vector<std::pair<Side, Side>> pairs;
  std::set<BattleKey> used;
  for (const auto& y : b) {
    const auto key = battle_key(y);
    auto it = left.find(key);
    if (it == left.end() || !used.insert(key).second) continue;
    pairs.emplace_back(it->second, side(y.verdict));
  }
  if (pairs.empty()) throw Error(ErrorCode::kNoOverlap, "judges share no battles");
  return {cohen_kappa<Side>(pairs), pairs.size()};
}

// Majority verdict of every judge except `excluded` per battle.
inline std::vector<Ballot> majority_ballots(std::span<const Ballot> ballots, std::string_view excluded = {}) {
  std::map<BattleKey, std::vector<Verdict>> pooled;
  for (const auto& b : ballots) {
    if (!excluded.empty() && b.judge_id == excluded) continue;
    pooled[battle_key(b)].push_back(b.verdict);
  }
  std::vector<Ballot> out;
  out.reserve(pooled.size());
  for (const auto& [key, votes] : pooled) {
    Ballot b;
    std::tie(b.dilemma_id, b.first_id, b.second_id) = key;
    b.judge_id = "majority";
    b.verdict = aggregate_majority(votes);
    out.push_back(std::move(b));
  }
  return out;
}

// 1 - kappa against the majority of the other judges.
inline std::optional<double> compute_contrarianism(std::span<const Ballot> ballots, std::string_view judge_id) {
  const auto mine = ballots_of(ballots, judge_id);
  const auto council = majority_ballots(ballots, judge_id);
  if (mine.empty() || council.empty()) return std::nullopt;
  try {
    auto k = compute_kappa(mine, council);
    if (!k.kappa) return std::nullopt;
    return 1.0 - *k.kappa;
  } catch (const Error&) {
    return std::nullopt;
  }
}

struct LabeledMatrix {
  std::vector<std::string> rows;
  std::vector<std::string> cols;
  std::vector<std::vector<std::optional<double>>> values;
};

// Symmetric judge-by-judge kappa; the diagonal is 1 by definition.
inline LabeledMatrix build_agreement_matrix(std::span<const Ballot> ballots) {
  LabeledMatrix m;
  m.rows = judges_in(ballots);
  m.cols = m.rows;
  const std::size_t n = m.rows.size();
  std::vector<std::vector<Ballot>> per(n);
  for (std::size_t i = 0; i < n; ++i) per[i] = ballots_of(ballots, m.rows[i]);
  m.values.assign(n, std::vector<std::optional<double>>(n));
  for (std::size_t i = 0; i < n; ++i) {
    m.values[i][i] = 1.0;
    for (std::size_t j = i + 1; j < n; ++j) {
      std::optional<double> k;
      try {
        k = compute_kappa(per[i], per[j]).kappa;
      } catch (const Error&) {
      }
      m.values[i][j] = k;
      m.values[j][i] = k;
    }
  }
  return m;
}

inline LabeledMatrix to_labeled(const AffinityMatrix& a, bool normalized = false) {
  LabeledMatrix m;
  m.rows = a.judges;
  m.cols = a.respondents;
  for (const auto& row : normalized ? a.normalized : a.entries) {
    std::vector<std::optional<double>> r;
    for (double v : row) r.push_back(std::isnan(v) ? std::nullopt : std::optional<double>(v));
    m.values.push_back(std::move(r));
  }
  return m;
}

// ---------------------------------------------------------------------------
// Calibration

// Mean over pairs of the modal result's frequency among same-order repeats.
inline double compute_invariability(std::span<const std::vector<Verdict>> repeats) {
  if (repeats.empty()) throw Error(ErrorCode::kEmptyInput, "no calibration pairs");
  double sum = 0.0;
  for (const auto& reps : repeats) {
    if (reps.empty()) throw Error(ErrorCode::kEmptyInput, "calibration pair without repetitions");
    std::map<Verdict, int> counts;
    for (Verdict v : reps) ++counts[v];
    int mode = 0;
    for (const auto& [v, c] : counts) mode = std::max(mode, c);
    sum += static_cast<double>(mode) / static_cast<double>(reps.size());
  }
  return sum / static_cast<double>(repeats.size());
}

struct CalibrationPair {
  std::string pair_id;
  std::vector<Verdict> original;  // repeats in (x, y) order
  std::vector<Verdict> swapped;   // repeats in (y, x) order
};

struct CalibrationReport {
  double invariability = 0.0;
  double ppc = 0.0;
  std::size_t repetitions = 0;
  std::size_t pairs = 0;
};

// Invariability averages over both orders of every pair; PPC counts
// consistent couplets among all original x swapped repeat combinations.
inline CalibrationReport compute_calibration(std::span<const CalibrationPair> pairs) {
  if (pairs.empty()) throw Error(ErrorCode::kEmptyInput, "no calibration pairs");
  std::vector<std::vector<Verdict>> same_order;
  double ppc_sum = 0.0;
  std::size_t reps = 0;
  for (const auto& p : pairs) {
    if (p.original.empty() || p.swapped.empty()) {
      throw Error(ErrorCode::kEmptyInput, "calibration pair " + p.pair_id + " lacks repeats in one order");
    }
    same_order.push_back(p.original);
    same_order.push_back(p.swapped);
    std::size_t consistent = 0;
    for (Verdict a : p.original) {
      for (Verdict b : p.swapped) {
        if (classify_couplet(a, b) == Consistency::kConsistent) ++consistent;
      }
    }
    ppc_sum += static_cast<double>(consistent) / static_cast<double>(p.original.size() * p.swapped.size());
    reps = std::max(reps, std::max(p.original.size(), p.swapped.size()));
  }
  return {compute_invariability(same_order), ppc_sum / static_cast<double>(pairs.size()), reps, pairs.size()};
}

// ---------------------------------------------------------------------------
// Rank correlation

enum class CorrelationMethod { kSpearman, kKendall };

namespace detail {

// Average (fractional) ranks, 1-based, ascending.
inline std::vector<double> average_ranks(const std::vector<double>& x) {
  std::vector<std::size_t> idx(x.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](auto a, auto b) { return x[a] < x[b]; });
  std::vector<double> r(x.size());
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    while (j + 1 < idx.size() && x[idx[j + 1]] == x[idx[i]]) ++j;
    const double avg = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
    for (std::size_t k = i; k <= j; ++k) r[idx[k]] = avg;
    i = j + 1;
  }
  return r;
}

inline double pearson(const std::vector<double>& a, const std::vector<double>& b) {
  const double n = static_cast<double>(a.size());
  const double ma = std::accumulate(a.begin(), a.end(), 0.0) / n;
  const double mb = std::accumulate(b.begin(), b.end(), 0.0) / n;
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  if (saa <= 0.0 || sbb <= 0.0) throw Error(ErrorCode::kDegenerateVariance, "constant ranking");
  return sab / std::sqrt(saa * sbb);
}

// Kendall tau-b, which handles ties in either ranking.
inline double kendall_tau_b(const std::vector<double>& a, const std::vector<double>& b) {
  double concordant = 0.0, discordant = 0.0, ties_a = 0.0, ties_b = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    for (std::size_t j = i + 1; j < a.size(); ++j) {
      const double da = a[i] - a[j];
      const double db = b[i] - b[j];
      if (da == 0.0 && db == 0.0) continue;
      if (da == 0.0) {
        ties_a += 1.0;
      } else if (db == 0.0) {
        ties_b += 1.0;
      } else if ((da > 0) == (db > 0)) {
        concordant += 1.0;
      } else {
        discordant += 1.0;
      }
    }
  }
  const double denom = std::sqrt((concordant + discordant + ties_a) * (concordant + discordant + ties_b));
  if (denom <= 0.0) throw Error(ErrorCode::kDegenerateVariance, "constant ranking");
  return (concordant - discordant) / denom;
}

}  // namespace detail

// Correlation over the members both inputs share. Values may be ranks or
// scores; only their order matters.
inline double rank_correlation(const std::map<std::string, double>& a, const std::map<std::string, double>& b,
                               CorrelationMethod method) {
  std::vector<double> xa, xb;
  for (const auto& [id, v] : a) {
    auto it = b.find(id);
    if (it == b.end()) continue;
    xa.push_back(v);
    xb.push_back(it->second);
  }
  if (xa.size() != a.size() || xa.size() != b.size()) {
    throw Error(ErrorCode::kSizeMismatch, "rankings cover different members");
  }
  if (xa.size() < 3) throw Error(ErrorCode::kInvalidArgument, "rank correlation needs at least 3 members");
  if (method == CorrelationMethod::kSpearman) {
    return detail::pearson(detail::average_ranks(xa), detail::average_ranks(xb));
  }
  return detail::kendall_tau_b(xa, xb);
}

// ---------------------------------------------------------------------------
// Top-k graphs

struct Edge {
  std::string from;
  std::string to;
  double value = 0.0;
  bool mutual = false;  // the reverse edge is present too
};

// Edge a -> b when entry (a, b) is among a's k largest off-diagonal entries.
// Equal values are ordered by column id.
inline std::vector<Edge> top_k_graph(const LabeledMatrix& m, std::size_t k) {
  if (k < 1) throw Error(ErrorCode::kInvalidArgument, "k must be >= 1");
  std::vector<Edge> edges;
  for (std::size_t i = 0; i < m.rows.size(); ++i) {
    std::vector<std::pair<std::string, double>> row;
    for (std::size_t j = 0; j < m.cols.size(); ++j) {
      if (m.cols[j] == m.rows[i] || !m.values[i][j]) continue;
      row.emplace_back(m.cols[j], *m.values[i][j]);
    }
    std::sort(row.begin(), row.end(), [](const auto& a, const auto& b) {
      if (a.second != b.second) return a.second > b.second;
      return a.first < b.first;
    });
    for (std::size_t t = 0; t < std::min(k, row.size()); ++t) edges.push_back({m.rows[i], row[t].first, row[t].second});
  }
  std::set<std::pair<std::string, std::string>> present;
  for (const auto& e : edges) present.emplace(e.from, e.to);
  for (auto& e : edges) e.mutual = present.count({e.to, e.from}) > 0;
  return edges;
}

// ---------------------------------------------------------------------------
// Judge profiles

struct JudgeProfile {
  std::string judge_id;
  double ppc = 0.0;
  double position_bias_first = 0.0;
  double position_bias_second = 0.0;
  double conviction = 0.0;
  double polarization = 0.0;
  std::optional<double> length_bias_r2;
  std::optional<double> self_enhancement;  // absent when the judge is not a respondent
  std::optional<double> contrarianism;
  double separability = 0.0;  // of the judge's own bootstrapped ranking
  std::size_t ballots = 0;
};

struct ProfileInputs {
  std::string reference_id;
  std::map<std::string, double> council_scores;
  std::map<std::string, double> avg_lengths;  // optional; enables length bias
  int bootstrap_rounds = 100;
  std::uint64_t rng_seed = 0;
};

inline JudgeProfile build_judge_profile(std::span<const Ballot> ballots, std::string_view judge_id,
                                        const ProfileInputs& in) {
  JudgeProfile p;
  p.judge_id = std::string(judge_id);
  const auto mine = ballots_of(ballots, judge_id);
  if (mine.empty()) throw Error(ErrorCode::kEmptyInput, "judge " + p.judge_id + " has no ballots");
  p.ballots = mine.size();
  const auto couplets = form_couplets(mine, in.reference_id);
  const auto ppc = compute_ppc(couplets.couplets);
  p.ppc = ppc.ppc;
  p.position_bias_first = ppc.bias_first;
  p.position_bias_second = ppc.bias_second;
  p.conviction = compute_conviction(mine);

  const auto battles = battles_from_couplets(couplets.couplets);
  const auto report = bootstrap_cis(battles, in.reference_id, in.bootstrap_rounds, in.rng_seed);
  p.separability = report.separability;
  const auto& affinity = report.model.scores;
  double lo = 1e300, hi = -1e300;
  for (const auto& [id, s] : affinity) {
    lo = std::min(lo, s);
    hi = std::max(hi, s);
  }
  p.polarization = hi - lo;
  if (auto self = affinity.find(p.judge_id); self != affinity.end()) {
    if (auto c = in.council_scores.find(p.judge_id); c != in.council_scores.end()) {
      p.self_enhancement = self->second - c->second;
    }
  }
  if (!in.avg_lengths.empty()) {
    std::vector<double> s, l;
    for (const auto& [id, score] : affinity) {
      if (auto it = in.avg_lengths.find(id); it != in.avg_lengths.end()) {
        s.push_back(score);
        l.push_back(it->second);
      }
    }
    try {
      p.length_bias_r2 = compute_length_bias(s, l);
    } catch (const Error&) {
    }
  }
  p.contrarianism = compute_contrarianism(ballots, judge_id);
  return p;
}

// Unweighted mean over judges; optional fields average over judges that
// have them.
inline JudgeProfile average_profile(std::span<const JudgeProfile> profiles) {
  JudgeProfile avg;
  avg.judge_id = "average_judge";
  if (profiles.empty()) return avg;
  const double n = static_cast<double>(profiles.size());
  auto mean_opt = [&](auto member) -> std::optional<double> {
    double sum = 0.0;
    std::size_t k = 0;
    for (const auto& p : profiles) {
      if (p.*member) {
        sum += *(p.*member);
        ++k;
      }
    }
    if (k == 0) return std::nullopt;
    return sum / static_cast<double>(k);
  };
  for (const auto& p : profiles) {
    avg.ppc += p.ppc / n;
    avg.position_bias_first += p.position_bias_first / n;
    avg.position_bias_second += p.position_bias_second / n;
    avg.conviction += p.conviction / n;
    avg.polarization += p.polarization / n;
    avg.separability += p.separability / n;
    avg.ballots += p.ballots;
  }
  avg.length_bias_r2 = mean_opt(&JudgeProfile::length_bias_r2);
  avg.self_enhancement = mean_opt(&JudgeProfile::self_enhancement);
  avg.contrarianism = mean_opt(&JudgeProfile::contrarianism);
  return avg;
}

// Mean final word count per member over non-missing responses.
template <class ResponseRange>
std::map<std::string, double> average_lengths(const ResponseRange& responses) {
  std::map<std::string, std::pair<double, std::size_t>> acc;
  for (const auto& r : responses) {
    if (r.missing) continue;
    acc[r.member_id].first += static_cast<double>(r.word_count);
    acc[r.member_id].second += 1;
  }
  std::map<std::string, double> out;
  for (const auto& [id, v] : acc) out[id] = v.first / static_cast<double>(v.second);
  return out;
}

}  // namespace lmc
