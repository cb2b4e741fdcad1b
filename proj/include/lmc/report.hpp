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

// CSV tables and SVG heatmaps for rankings, judge profiles, matrices and
// simulation sweeps.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <optional>
#include <string>
#include <vector>

#include "lmc/analytics.hpp"
#include "lmc/common.hpp"
#include "lmc/config.hpp"
#include "lmc/ranking.hpp"
#include "lmc/simulate.hpp"

namespace lmc {

inline std::string fmt_num(double x, int digits = 6) {
  if (std::isnan(x)) return "";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, x);
  return buf;
}

inline std::string fmt_opt(const std::optional<double>& x, int digits = 6) {
  return x ? fmt_num(*x, digits) : std::string("undefined");
}

inline std::string csv_escape(std::string_view s) {
  if (s.find_first_of(",\"\n\r") == std::string_view::npos) return std::string(s);
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

class CsvTable {
 public:
  explicit CsvTable(std::vector<std::string> header) : header_(std::move(header)) {}

  void add(std::vector<std::string> row) { rows_.push_back(std::move(row)); }

  // Lines starting with '#' precede the header.
  void comment(std::string line) { comments_.push_back(std::move(line)); }

  std::string str() const {
    std::string out;
    for (const auto& c : comments_) out += "# " + c + "\n";
    auto line = [&](const std::vector<std::string>& cells) {
      for (std::size_t i = 0; i < cells.size(); ++i) {
        if (i) out += ',';
        out += csv_escape(cells[i]);
      }
      out += '\n';
    };
    line(header_);
    for (const auto& r : rows_) line(r);
    return out;
  }

  void write(const fs::path& path) const { write_file_atomic(path, str()); }

 private:
  std::vector<std::string> comments_;
  std::vector<std::string> header_;
  std::vector<std::vector<std::string>> rows_;
};

inline CsvTable leaderboard_table(const RankingReport& r) {
  CsvTable t({"member_id", "score", "ci_low", "ci_high", "rank"});
  for (const auto& e : r.entries) {
    t.add({e.member_id, fmt_num(e.score), fmt_num(e.ci_low), fmt_num(e.ci_high), std::to_string(e.rank)});
  }
  return t;
}

inline RankingReport leaderboard_from_csv(std::string_view csv) {
  const auto rows = parse_csv(csv);
  RankingReport r;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    if (rows[i].size() < 5 || (!rows[i][0].empty() && rows[i][0][0] == '#')) continue;
    r.entries.push_back({rows[i][0], std::stod(rows[i][1]), std::stoi(rows[i][4]), std::stod(rows[i][2]),
                         std::stod(rows[i][3])});
  }
  return r;
}

inline CsvTable winrate_table(const WinRateMatrix& m) {
  std::vector<std::string> header{"member_id"};
  header.insert(header.end(), m.ids.begin(), m.ids.end());
  CsvTable t(header);
  for (std::size_t i = 0; i < m.ids.size(); ++i) {
    std::vector<std::string> row{m.ids[i]};
    for (double p : m.p[i]) row.push_back(fmt_num(p));
    t.add(std::move(row));
  }
  return t;
}

inline CsvTable matrix_table(const LabeledMatrix& m, const std::string& corner = "row") {
  std::vector<std::string> header{corner};
  header.insert(header.end(), m.cols.begin(), m.cols.end());
  CsvTable t(header);
  for (std::size_t i = 0; i < m.rows.size(); ++i) {
    std::vector<std::string> row{m.rows[i]};
    for (const auto& v : m.values[i]) row.push_back(fmt_opt(v));
    t.add(std::move(row));
  }
  return t;
}

inline CsvTable profiles_table(std::span<const JudgeProfile> profiles, const JudgeProfile* average) {
  CsvTable t({"judge_id", "ballots", "ppc", "position_bias_first", "position_bias_second", "conviction",
              "polarization", "length_bias_r2", "self_enhancement", "contrarianism", "separability"});
  auto add = [&](const JudgeProfile& p) {
    t.add({p.judge_id, std::to_string(p.ballots), fmt_num(p.ppc), fmt_num(p.position_bias_first),
           fmt_num(p.position_bias_second), fmt_num(p.conviction), fmt_num(p.polarization),
           fmt_opt(p.length_bias_r2), fmt_opt(p.self_enhancement), fmt_opt(p.contrarianism),
           fmt_num(p.separability)});
  };
  for (const auto& p : profiles) add(p);
  if (average) add(*average);
  return t;
}

inline CsvTable edges_table(std::span<const Edge> edges) {
  CsvTable t({"from", "to", "value", "mutual"});
  for (const auto& e : edges) t.add({e.from, e.to, fmt_num(e.value), e.mutual ? "true" : "false"});
  return t;
}

inline CsvTable sweep_table(const SweepResult& s) {
  CsvTable t({"council_size", "test_size", "adversaries", "merv", "mean_separability"});
  for (const auto& c : s.cells) {
    t.add({std::to_string(c.council_size), std::to_string(c.test_size), std::to_string(c.adversaries),
           fmt_opt(c.stability.merv), fmt_num(c.stability.mean_separability)});
  }
  return t;
}

inline CsvTable gradient_table(const Grid& grid, const GradientGrid& g) {
  CsvTable t({"council_size", "test_size", "row_gradient", "col_gradient", "magnitude", "direction_rad"});
  t.comment("gradients in grid-index units; magnitude = |row_gradient| + |col_gradient| (unit weights)");
  t.comment("direction_rad = atan2(row_gradient, col_gradient)");
  for (std::size_t i = 0; i < grid.row_values.size(); ++i) {
    for (std::size_t j = 0; j < grid.col_values.size(); ++j) {
      t.add({std::to_string(grid.row_values[i]), std::to_string(grid.col_values[j]), fmt_num(g.row_gradient[i][j]),
             fmt_num(g.col_gradient[i][j]), fmt_num(g.magnitude[i][j]), fmt_num(g.direction[i][j])});
    }
  }
  return t;
}

// ---------------------------------------------------------------------------
// SVG

inline std::string xml_escape(std::string_view s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

struct HeatmapStyle {
  std::string title;
  std::optional<double> lo;      // color range; defaults to data range
  std::optional<double> hi;
  std::optional<double> center;  // diverging palette around this value
  int digits = 2;
};

inline HeatmapStyle titled(std::string title) {
  HeatmapStyle s;
  s.title = std::move(title);
  return s;
}

// Sequential (white to blue) or diverging (red, white, blue) heatmap.
// Undefined cells are drawn grey.
inline std::string heatmap_svg(const LabeledMatrix& m, const HeatmapStyle& style) {
  double lo = 1e300, hi = -1e300;
  for (const auto& row : m.values) {
    for (const auto& v : row) {
      if (v && std::isfinite(*v)) {
        lo = std::min(lo, *v);
        hi = std::max(hi, *v);
      }
    }
  }
  if (lo > hi) lo = hi = 0.0;
  if (style.lo) lo = *style.lo;
  if (style.hi) hi = *style.hi;
  if (style.center) {
    const double span = std::max(std::abs(hi - *style.center), std::abs(*style.center - lo));
    lo = *style.center - span;
    hi = *style.center + span;
  }
  const double range = hi > lo ? hi - lo : 1.0;

  auto color = [&](double v) {
    double x = std::clamp((v - lo) / range, 0.0, 1.0);
    int r, g, b;
    if (style.center) {
      if (x < 0.5) {
        const double k = x / 0.5;
        r = 214 + static_cast<int>((255 - 214) * k);
        g = 96 + static_cast<int>((255 - 96) * k);
        b = 77 + static_cast<int>((255 - 77) * k);
      } else {
        const double k = (x - 0.5) / 0.5;
        r = 255 - static_cast<int>((255 - 66) * k);
        g = 255 - static_cast<int>((255 - 133) * k);
        b = 255 - static_cast<int>((255 - 194) * k);
      }
    } else {
      r = 255 - static_cast<int>((255 - 33) * x);
      g = 255 - static_cast<int>((255 - 102) * x);
      b = 255 - static_cast<int>((255 - 172) * x);
    }
    char buf[16];
    std::snprintf(buf, sizeof buf, "#%02x%02x%02x", r, g, b);
    return std::string(buf);
  };

  std::size_t label_w = 0;
  for (const auto& r : m.rows) label_w = std::max(label_w, r.size());
  std::size_t col_label_h = 0;
  for (const auto& c : m.cols) col_label_h = std::max(col_label_h, c.size());
  const int cell = 44;
  const int left = 12 + static_cast<int>(label_w) * 7;
  const int top = 40 + static_cast<int>(col_label_h) * 6;
  const int width = left + cell * static_cast<int>(m.cols.size()) + 20;
  const int height = top + cell * static_cast<int>(m.rows.size()) + 20;

  std::string svg;
  svg += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + std::to_string(width) + "\" height=\"" +
         std::to_string(height) + "\" font-family=\"sans-serif\" font-size=\"11\">\n";
  svg += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  svg += "<text x=\"" + std::to_string(left) + "\" y=\"18\" font-size=\"14\">" + xml_escape(style.title) + "</text>\n";
  for (std::size_t j = 0; j < m.cols.size(); ++j) {
    const int x = left + cell * static_cast<int>(j) + cell / 2;
    svg += "<text transform=\"translate(" + std::to_string(x) + "," + std::to_string(top - 4) +
           ") rotate(-60)\">" + xml_escape(m.cols[j]) + "</text>\n";
  }
  for (std::size_t i = 0; i < m.rows.size(); ++i) {
    const int y = top + cell * static_cast<int>(i);
    svg += "<text x=\"" + std::to_string(left - 4) + "\" y=\"" + std::to_string(y + cell / 2 + 4) +
           "\" text-anchor=\"end\">" + xml_escape(m.rows[i]) + "</text>\n";
    for (std::size_t j = 0; j < m.cols.size(); ++j) {
      const int x = left + cell * static_cast<int>(j);
      const auto& v = m.values[i][j];
      const std::string fill = v && std::isfinite(*v) ? color(*v) : "#cccccc";
      svg += "<rect x=\"" + std::to_string(x) + "\" y=\"" + std::to_string(y) + "\" width=\"" + std::to_string(cell) +
             "\" height=\"" + std::to_string(cell) + "\" fill=\"" + fill + "\" stroke=\"white\"/>\n";
      svg += "<text x=\"" + std::to_string(x + cell / 2) + "\" y=\"" + std::to_string(y + cell / 2 + 4) +
             "\" text-anchor=\"middle\" font-size=\"9\">" + (v ? fmt_num(*v, style.digits) : std::string("n/a")) +
             "</text>\n";
    }
  }
  svg += "</svg>\n";
  return svg;
}

inline LabeledMatrix grid_matrix(const Grid& g, const std::vector<std::vector<double>>& values) {
  LabeledMatrix m;
  for (int c : g.row_values) m.rows.push_back("c=" + std::to_string(c));
  for (int t : g.col_values) m.cols.push_back("t=" + std::to_string(t));
  for (const auto& row : values) {
    std::vector<std::optional<double>> r;
    for (double v : row) r.push_back(std::isfinite(v) ? std::optional<double>(v) : std::nullopt);
    m.values.push_back(std::move(r));
  }
  return m;
}

inline LabeledMatrix winrate_labeled(const WinRateMatrix& w) {
  LabeledMatrix m{w.ids, w.ids, {}};
  for (const auto& row : w.p) m.values.emplace_back(row.begin(), row.end());
  return m;
}

}  // namespace lmc
