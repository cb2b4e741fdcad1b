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

// Monte Carlo council / test-set resampling and rank-stability measures.
//
// A trial samples c judges and t items with replacement, replays the
// matching couplets (a judge drawn twice counts twice), fits Bradley-Terry
// on the no-aggregation battles and records scores and ranks. Adversarial
// judges vote uniformly at random, independently per game.
//
// MERV is the mean over members of the sample variance (divisor n - 1) of
// each member's rank across trials.

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

#include "lmc/analytics.hpp"
#include "lmc/ballots.hpp"
#include "lmc/common.hpp"
#include "lmc/ranking.hpp"

namespace lmc {

// Couplets indexed by (judge, item); each cell holds one couplet per
// respondent the judge rated on that item.
class BallotStore {
 public:
  BallotStore() = default;

  BallotStore(std::span<const Ballot> ballots, std::string reference_id) : reference_id_(std::move(reference_id)) {
    const auto set = form_couplets(ballots, reference_id_);
    std::set<std::string> judges, items, respondents;
    for (const auto& c : set.couplets) {
      judges.insert(c.judge_id);
      items.insert(c.dilemma_id);
      respondents.insert(c.respondent_id);
    }
    judges_.assign(judges.begin(), judges.end());
    items_.assign(items.begin(), items.end());
    respondents_.assign(respondents.begin(), respondents.end());
    std::map<std::string, std::size_t> ji, ti, ri;
    for (std::size_t i = 0; i < judges_.size(); ++i) ji[judges_[i]] = i;
    for (std::size_t i = 0; i < items_.size(); ++i) ti[items_[i]] = i;
    for (std::size_t i = 0; i < respondents_.size(); ++i) ri[respondents_[i]] = i;
    cells_.assign(judges_.size() * items_.size(), {});
    for (const auto& c : set.couplets) {
      cells_[ji[c.judge_id] * items_.size() + ti[c.dilemma_id]].push_back(
          {static_cast<std::uint32_t>(ri[c.respondent_id]), c.original, c.swapped});
    }
  }

  struct Entry {
    std::uint32_t respondent;
    Verdict original;
    Verdict swapped;
  };

  const std::vector<std::string>& judges() const { return judges_; }
  const std::vector<std::string>& items() const { return items_; }
  const std::vector<std::string>& respondents() const { return respondents_; }  // excludes the reference
  const std::string& reference_id() const { return reference_id_; }

  const std::vector<Entry>& cell(std::size_t judge, std::size_t item) const {
    return cells_[judge * items_.size() + item];
  }

  bool empty() const { return cells_.empty(); }

 private:
  std::string reference_id_;
  std::vector<std::string> judges_;
  std::vector<std::string> items_;
  std::vector<std::string> respondents_;
  std::vector<std::vector<Entry>> cells_;
};

enum class SimulationSource { kReplay, kSynthetic };

struct SimulationConfig {
  int council_size = 1;  // c, adversaries included
  int test_size = 1;     // t
  int trials = 100;
  int adversarial_count = 0;
  std::uint64_t rng_seed = 0;
  SimulationSource source = SimulationSource::kReplay;

  void validate() const {
    if (council_size < 1) throw Error(ErrorCode::kInvalidArgument, "council size must be >= 1");
    if (test_size < 1) throw Error(ErrorCode::kInvalidArgument, "test size must be >= 1");
    if (trials < 1) throw Error(ErrorCode::kInvalidArgument, "trials must be >= 1");
    if (adversarial_count < 0 || adversarial_count > council_size) {
      throw Error(ErrorCode::kInvalidArgument, "adversarial_count must lie in [0, council size]");
    }
  }
};

struct TrialResult {
  int trial_index = 0;
  std::vector<std::string> sampled_judges;
  std::vector<std::string> sampled_items;
  std::map<std::string, double> scores;
  std::map<std::string, int> ranks;
  std::size_t battle_count = 0;
};

// Adds both games of a couplet to the tally, resolved as in resolve_couplet.
inline void tally_couplet(MemberTally& t, Verdict original, Verdict swapped) {
  const Side first = side(original);
  if (classify_couplet(original, swapped) != Consistency::kConsistent || first == Side::kTie) {
    t.add(BattleResult::kTie, 1.0);
    t.add(BattleResult::kTie, 1.0);
    return;
  }
  const BattleResult r = first == Side::kA ? BattleResult::kWin : BattleResult::kLoss;
  t.add(r, is_strong(original) ? kStrongVoteWeight : 1.0);
  t.add(r, is_strong(swapped) ? kStrongVoteWeight : 1.0);
}

inline TrialResult run_trial(const SimulationConfig& cfg, const BallotStore& store, int trial_index) {
  const std::size_t n_judges = store.judges().size();
  const std::size_t n_items = store.items().size();
  const int honest = cfg.council_size - cfg.adversarial_count;
  if (store.empty() || n_items == 0 || (honest > 0 && n_judges == 0)) {
    throw Error(ErrorCode::kCoverageGap, "ballot store is empty");
  }
  Rng rng = make_stream(cfg.rng_seed, static_cast<std::uint64_t>(trial_index));
  TrialResult tr;
  tr.trial_index = trial_index;
  std::vector<std::size_t> judges, items;
  for (int k = 0; k < honest; ++k) judges.push_back(uniform_index(rng, n_judges));
  for (int k = 0; k < cfg.test_size; ++k) items.push_back(uniform_index(rng, n_items));
  for (auto j : judges) tr.sampled_judges.push_back(store.judges()[j]);
  for (int k = 0; k < cfg.adversarial_count; ++k) tr.sampled_judges.push_back("adversary-" + std::to_string(k));
  for (auto t : items) tr.sampled_items.push_back(store.items()[t]);

  std::vector<MemberTally> tallies(store.respondents().size());
  for (auto j : judges) {
    for (auto t : items) {
      const auto& cell = store.cell(j, t);
      if (cell.empty()) {
        throw Error(ErrorCode::kCoverageGap,
                    "no ballots from judge " + store.judges()[j] + " on item " + store.items()[t]);
      }
      for (const auto& e : cell) tally_couplet(tallies[e.respondent], e.original, e.swapped);
      tr.battle_count += 2 * cell.size();
    }
  }
  for (int k = 0; k < cfg.adversarial_count; ++k) {
    for (std::size_t t = 0; t < items.size(); ++t) {
      for (auto& tally : tallies) {
        const Verdict a = kRawVerdicts[uniform_index(rng, 4)];
        const Verdict b = kRawVerdicts[uniform_index(rng, 4)];
        tally_couplet(tally, a, b);
        tr.battle_count += 2;
      }
    }
  }
  std::map<std::string, MemberTally> named;
  for (std::size_t r = 0; r < tallies.size(); ++r) {
    if (tallies[r].wins + tallies[r].losses <= 0.0) {
      throw Error(ErrorCode::kCoverageGap, "respondent " + store.respondents()[r] + " has no battles in trial");
    }
    named.emplace(store.respondents()[r], tallies[r]);
  }
  BtOptions quiet;
  quiet.warn_degenerate = false;
  tr.scores = fit_bt_tallies(named, store.reference_id(), quiet).scores;
  tr.ranks = assign_ranks(tr.scores);
  return tr;
}

// Trial i draws from make_stream(rng_seed, i); output is in trial order.
inline std::vector<TrialResult> run_trials(const SimulationConfig& cfg, const BallotStore& store) {
  cfg.validate();
  std::vector<TrialResult> out(static_cast<std::size_t>(cfg.trials));
  parallel_for(out.size(), [&](std::size_t i) { out[i] = run_trial(cfg, store, static_cast<int>(i)); });
  return out;
}

struct StabilityReport {
  std::optional<double> merv;  // undefined with fewer than two trials
  double mean_separability = 0.0;
  std::map<std::string, double> per_member_erv;
};

inline StabilityReport compute_merv(std::span<const TrialResult> trials) {
  if (trials.size() < 2) throw Error(ErrorCode::kInsufficientTrials, "MERV needs at least two trials");
  std::map<std::string, std::vector<double>> ranks;
  for (const auto& t : trials) {
    for (const auto& [id, r] : t.ranks) ranks[id].push_back(r);
  }
  StabilityReport rep;
  double total = 0.0;
  for (const auto& [id, rs] : ranks) {
    if (rs.size() != trials.size()) throw Error(ErrorCode::kCoverageGap, "member " + id + " missing from some trials");
    const double n = static_cast<double>(rs.size());
    double mean = 0.0;
    for (double r : rs) mean += r;
    mean /= n;
    double ss = 0.0;
    for (double r : rs) ss += (r - mean) * (r - mean);
    rep.per_member_erv[id] = ss / (n - 1.0);
    total += rep.per_member_erv[id];
  }
  rep.merv = ranks.empty() ? 0.0 : total / static_cast<double>(ranks.size());
  return rep;
}

// Separability with per-member intervals taken directly from the 2.5th and
// 97.5th percentiles of the trial scores.
inline double trial_separability(std::span<const TrialResult> trials) {
  if (trials.size() < 2) throw Error(ErrorCode::kInsufficientTrials, "separability needs at least two trials");
  std::map<std::string, std::vector<double>> scores;
  for (const auto& t : trials) {
    for (const auto& [id, s] : t.scores) scores[id].push_back(s);
  }
  std::vector<Interval> intervals;
  for (const auto& [id, s] : scores) intervals.push_back({quantile(s, 0.025), quantile(s, 0.975)});
  return separability(intervals);
}

inline StabilityReport summarize_trials(std::span<const TrialResult> trials) {
  if (trials.size() < 2) return {};
  StabilityReport rep = compute_merv(trials);
  rep.mean_separability = trial_separability(trials);
  return rep;
}

// ---------------------------------------------------------------------------
// Synthetic judges

struct SyntheticJudgeSpec {
  std::string judge_id;
  std::map<std::string, double> true_skills;  // respondent -> positive skill
  double noise_temperature = 1.0;
  double position_bias_prob = 0.0;
  double strong_vote_threshold = 2.0;
  bool adversarial = false;
};

// Honest judges draw one latent margin per (item, respondent):
//   z = log(s_r / s_ref) / T + logistic noise,
// so P(prefer respondent) = s_r^(1/T) / (s_r^(1/T) + s_ref^(1/T)). The
// preference is strong when |z| exceeds the threshold. In each game the judge
// independently falls back to the first position with position_bias_prob.
// T = 0 is the noiseless limit. Adversarial judges draw each game's verdict
// uniformly from the four raw verdicts.
inline std::vector<Ballot> synth_ballots(std::span<const SyntheticJudgeSpec> specs,
                                         std::span<const std::string> respondents, std::span<const std::string> items,
                                         const std::string& reference_id, std::uint64_t rng_seed) {
  if (std::find(respondents.begin(), respondents.end(), reference_id) == respondents.end()) {
    throw Error(ErrorCode::kInvalidArgument, "reference must be among the respondents");
  }
  std::vector<Ballot> out;
  for (std::size_t js = 0; js < specs.size(); ++js) {
    const auto& spec = specs[js];
    Rng rng = make_stream(rng_seed, js);
    for (const auto& item : items) {
      for (const auto& r : respondents) {
        if (r == reference_id) continue;
        Verdict games[2];
        if (spec.adversarial) {
          games[0] = kRawVerdicts[uniform_index(rng, 4)];
          games[1] = kRawVerdicts[uniform_index(rng, 4)];
        } else {
          const double delta = std::log(spec.true_skills.at(r)) - std::log(spec.true_skills.at(reference_id));
          double z;
          if (spec.noise_temperature <= 0.0) {
            z = delta != 0.0 ? std::copysign(HUGE_VAL, delta) : (uniform_unit(rng) < 0.5 ? -HUGE_VAL : HUGE_VAL);
          } else {
            double u = uniform_unit(rng);
            u = std::clamp(u, 1e-12, 1.0 - 1e-12);
            z = delta / spec.noise_temperature + std::log(u / (1.0 - u));
          }
          const bool prefer_respondent = z > 0.0;
          const bool strong = std::abs(z) > spec.strong_vote_threshold;
          for (int g = 0; g < 2; ++g) {
            const bool respondent_first = g == 0;
            bool vote_first = prefer_respondent == respondent_first;
            if (spec.position_bias_prob > 0.0 && uniform_unit(rng) < spec.position_bias_prob) vote_first = true;
            games[g] = vote_first ? (strong ? Verdict::kAMuchBetter : Verdict::kABetter)
                                  : (strong ? Verdict::kBMuchBetter : Verdict::kBBetter);
          }
        }
        out.push_back(Ballot{item, spec.judge_id, r, reference_id, games[0], "", Game::kOriginal});
        out.push_back(Ballot{item, spec.judge_id, reference_id, r, games[1], "", Game::kSwapped});
      }
    }
  }
  return out;
}

// Skills spaced geometrically from 1 to `spread` over the respondents.
inline std::map<std::string, double> geometric_skills(std::span<const std::string> respondents, double spread) {
  std::map<std::string, double> skills;
  const double n = static_cast<double>(respondents.size());
  for (std::size_t i = 0; i < respondents.size(); ++i) {
    skills[respondents[i]] = n > 1 ? std::pow(spread, static_cast<double>(i) / (n - 1.0)) : 1.0;
  }
  return skills;
}

// ---------------------------------------------------------------------------
// Sweeps and gradient maps

struct Grid {
  std::vector<int> row_values;  // council sizes
  std::vector<int> col_values;  // test sizes
  std::vector<std::vector<double>> values;
};

struct GradientGrid {
  std::vector<std::vector<double>> row_gradient;  // change per row step
  std::vector<std::vector<double>> col_gradient;  // change per column step
  std::vector<std::vector<double>> magnitude;     // |row| + |col|
  std::vector<std::vector<double>> direction;     // atan2(row, col), radians
};

// Per-cell differences between adjacent cells: central in the interior,
// one-sided on the boundary, zero along an axis of length one. Magnitude is
// the Manhattan combination of the two components with unit weights.
inline GradientGrid gradient_map(const Grid& grid) {
  const auto& v = grid.values;
  if (v.empty() || v.front().empty()) throw Error(ErrorCode::kIncompleteGrid, "empty grid");
  const std::size_t rows = v.size();
  const std::size_t cols = v.front().size();
  for (const auto& row : v) {
    if (row.size() != cols) throw Error(ErrorCode::kIncompleteGrid, "ragged grid");
    for (double x : row) {
      if (!std::isfinite(x)) throw Error(ErrorCode::kIncompleteGrid, "grid has undefined cells");
    }
  }
  auto diff = [](double lo, double hi, std::size_t span) { return (hi - lo) / static_cast<double>(span); };
  GradientGrid g;
  g.row_gradient.assign(rows, std::vector<double>(cols, 0.0));
  g.col_gradient = g.row_gradient;
  g.magnitude = g.row_gradient;
  g.direction = g.row_gradient;
  for (std::size_t i = 0; i < rows; ++i) {
    for (std::size_t j = 0; j < cols; ++j) {
      if (rows > 1) {
        const std::size_t lo = i == 0 ? 0 : i - 1;
        const std::size_t hi = i + 1 == rows ? i : i + 1;
        g.row_gradient[i][j] = diff(v[lo][j], v[hi][j], hi - lo);
      }
      if (cols > 1) {
        const std::size_t lo = j == 0 ? 0 : j - 1;
        const std::size_t hi = j + 1 == cols ? j : j + 1;
        g.col_gradient[i][j] = diff(v[i][lo], v[i][hi], hi - lo);
      }
      g.magnitude[i][j] = std::abs(g.row_gradient[i][j]) + std::abs(g.col_gradient[i][j]);
      g.direction[i][j] = std::atan2(g.row_gradient[i][j], g.col_gradient[i][j]);
    }
  }
  return g;
}

struct SweepSpec {
  std::vector<int> council_sizes;
  std::vector<int> test_sizes;
  int trials = 100;
  // Adversaries per council: fixed count, or ceil(c * ratio) when ratio > 0.
  int adversarial_count = 0;
  double adversarial_ratio = 0.0;
  std::uint64_t rng_seed = 0;

  int adversaries_for(int c) const {
    if (adversarial_ratio > 0.0) return std::min(c, static_cast<int>(std::ceil(c * adversarial_ratio - 1e-9)));
    return std::min(c, adversarial_count);
  }
};

struct SweepCell {
  int council_size = 0;
  int test_size = 0;
  int adversaries = 0;
  StabilityReport stability;
};

struct SweepResult {
  std::vector<SweepCell> cells;  // row-major over (council_sizes, test_sizes)
  Grid merv;
  Grid separability;
};

inline SweepResult run_sweep(const SweepSpec& spec, const BallotStore& store) {
  if (spec.council_sizes.empty() || spec.test_sizes.empty()) throw Error(ErrorCode::kIncompleteGrid, "empty sweep");
  SweepResult out;
  out.merv.row_values = out.separability.row_values = spec.council_sizes;
  out.merv.col_values = out.separability.col_values = spec.test_sizes;
  std::size_t cell_index = 0;
  for (int c : spec.council_sizes) {
    std::vector<double> merv_row, sep_row;
    for (int t : spec.test_sizes) {
      SimulationConfig cfg;
      cfg.council_size = c;
      cfg.test_size = t;
      cfg.trials = spec.trials;
      cfg.adversarial_count = spec.adversaries_for(c);
      cfg.rng_seed = splitmix64(spec.rng_seed ^ splitmix64(cell_index++));
      const auto trials = run_trials(cfg, store);
      SweepCell cell{c, t, cfg.adversarial_count, summarize_trials(trials)};
      merv_row.push_back(cell.stability.merv.value_or(std::nan("")));
      sep_row.push_back(cell.stability.mean_separability);
      out.cells.push_back(std::move(cell));
    }
    out.merv.values.push_back(std::move(merv_row));
    out.separability.values.push_back(std::move(sep_row));
  }
  return out;
}

}  // namespace lmc
