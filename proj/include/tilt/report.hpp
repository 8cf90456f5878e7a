#pragma once

// Report generation: ASR tables over persisted verdicts (never re-querying a
// model), score histograms, and the manifest chain that ties every report
// cell back to its verdict, run, ranking and corpus files by hash.

#include <algorithm>
#include <map>
#include <string>
#include <vector>

#include "tilt/evaluate.hpp"
#include "tilt/ranker.hpp"

namespace tilt {

// One (model, evaluator) column worth of verdicts.
struct ReportInput {
  std::string model;
  std::string evaluator;
  std::vector<VerdictRecord> verdicts;
};

struct ReportCell {
  bool present = false;
  AsrCell asr;
};

struct ReportTable {
  std::vector<std::string> row_labels;
  std::vector<std::string> column_labels;
  std::vector<std::vector<ReportCell>> cells;  // [row][column]
};

namespace detail {

inline std::string strategy_display(const std::string& tag) {
  if (tag == "none") return "None";
  if (tag == "comp") return "Comp.";
  if (tag == "evil") return "Evil";
  if (tag == "dist") return "Dist.";
  if (tag == "suffix") return "Suffix";
  if (tag == "ours") return "Ours";
  return tag;
}

inline size_t strategy_order(const std::string& tag) {
  static const std::vector<std::string> order{"none", "comp", "evil", "dist", "suffix", "ours"};
  auto it = std::find(order.begin(), order.end(), tag);
  return it == order.end() ? order.size() : static_cast<size_t>(it - order.begin());
}

}  // namespace detail

// Rows: one line per manual strategy; dagger lines (one per attempt) plus a
// double-dagger union line for strategies observed with several attempts.
inline ReportTable build_report_table(const std::vector<ReportInput>& inputs) {
  if (inputs.empty()) fail(ErrorKind::precondition, "report needs at least one verdict set");

  // Attempt span per strategy across all inputs.
  std::map<std::string, size_t> max_attempts;
  for (const ReportInput& input : inputs) {
    for (const VerdictRecord& r : input.verdicts) {
      size_t& n = max_attempts[r.strategy];
      n = std::max(n, r.attempt_index + 1);
    }
  }
  std::vector<std::string> strategies;
  for (const auto& [tag, n] : max_attempts) strategies.push_back(tag);
  std::sort(strategies.begin(), strategies.end(), [](const std::string& a, const std::string& b) {
    return detail::strategy_order(a) < detail::strategy_order(b);
  });

  struct RowKey {
    std::string strategy;
    int attempt = -1;  // -1: single-attempt or union row
    bool is_union = false;
  };
  std::vector<RowKey> rows;
  ReportTable table;
  for (const std::string& tag : strategies) {
    size_t attempts = max_attempts[tag];
    if (attempts <= 1) {
      rows.push_back({tag, -1, false});
      table.row_labels.push_back(detail::strategy_display(tag));
    } else {
      for (size_t a = 0; a < attempts; ++a) {
        rows.push_back({tag, static_cast<int>(a), false});
        table.row_labels.push_back(detail::strategy_display(tag) + "†(" +
                                   std::to_string(a + 1) + ")");
      }
      rows.push_back({tag, -1, true});
      table.row_labels.push_back(detail::strategy_display(tag) + "‡");
    }
  }

  for (const ReportInput& input : inputs) {
    table.column_labels.push_back(input.model + " / " + input.evaluator);
  }
  table.cells.assign(rows.size(), std::vector<ReportCell>(inputs.size()));

  for (size_t c = 0; c < inputs.size(); ++c) {
    // strategy -> probe -> attempt verdicts
    std::map<std::string, std::map<std::string, std::vector<Verdict>>> grouped;
    std::map<std::string, std::map<size_t, std::vector<Verdict>>> per_attempt;
    for (const VerdictRecord& r : inputs[c].verdicts) {
      grouped[r.strategy][r.probe_id].push_back(r.verdict);
      per_attempt[r.strategy][r.attempt_index].push_back(r.verdict);
    }
    for (size_t row = 0; row < rows.size(); ++row) {
      const RowKey& key = rows[row];
      ReportCell& cell = table.cells[row][c];
      try {
        if (key.is_union) {
          std::vector<std::vector<Verdict>> per_probe;
          for (auto& [probe, verdicts] : grouped[key.strategy]) per_probe.push_back(verdicts);
          if (per_probe.empty()) continue;
          cell.asr = union_asr_counts(per_probe);
        } else if (key.attempt >= 0) {
          auto it = per_attempt[key.strategy].find(static_cast<size_t>(key.attempt));
          if (it == per_attempt[key.strategy].end()) continue;
          cell.asr = asr_counts(it->second);
        } else {
          auto it = per_attempt[key.strategy].find(0);
          if (it == per_attempt[key.strategy].end()) continue;
          cell.asr = asr_counts(it->second);
        }
        cell.present = true;
      } catch (const Error&) {
        // no determinate verdicts in this cell; leave it absent
      }
    }
  }
  return table;
}

inline std::string format_pct(double pct) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.1f", pct);
  return buf;
}

// Long-form machine CSV: one line per (row, column) cell.
inline std::string report_csv(const ReportTable& table) {
  std::string out = "strategy,column,asr_pct,successes,evaluated,indeterminate\n";
  for (size_t r = 0; r < table.row_labels.size(); ++r) {
    for (size_t c = 0; c < table.column_labels.size(); ++c) {
      const ReportCell& cell = table.cells[r][c];
      if (!cell.present) continue;
      out += "\"" + table.row_labels[r] + "\",\"" + table.column_labels[c] + "\"," +
             format_pct(cell.asr.pct) + "," + std::to_string(cell.asr.successes) + "," +
             std::to_string(cell.asr.evaluated) + "," +
             std::to_string(cell.asr.indeterminate) + "\n";
    }
  }
  return out;
}

// Aligned markdown matrix for humans.
inline std::string report_markdown(const ReportTable& table) {
  std::vector<std::vector<std::string>> grid;
  std::vector<std::string> header{"Strategy"};
  for (const std::string& c : table.column_labels) header.push_back(c);
  grid.push_back(header);
  for (size_t r = 0; r < table.row_labels.size(); ++r) {
    std::vector<std::string> row{table.row_labels[r]};
    for (size_t c = 0; c < table.column_labels.size(); ++c) {
      const ReportCell& cell = table.cells[r][c];
      row.push_back(cell.present
                        ? format_pct(cell.asr.pct) + " (" + std::to_string(cell.asr.successes) +
                              "/" + std::to_string(cell.asr.evaluated) + ")"
                        : "-");
    }
    grid.push_back(row);
  }
  std::vector<size_t> widths(grid.front().size(), 0);
  for (const auto& row : grid) {
    for (size_t i = 0; i < row.size(); ++i) widths[i] = std::max(widths[i], row[i].size());
  }
  std::string out;
  for (size_t r = 0; r < grid.size(); ++r) {
    out += "|";
    for (size_t i = 0; i < grid[r].size(); ++i) {
      out += " " + grid[r][i] + std::string(widths[i] - grid[r][i].size(), ' ') + " |";
    }
    out += "\n";
    if (r == 0) {
      out += "|";
      for (size_t i = 0; i < widths.size(); ++i) out += std::string(widths[i] + 2, '-') + "|";
      out += "\n";
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Score histogram export (plot-ready CSV, no plotting here).

struct Histogram {
  std::vector<double> edges;   // bins + 1 monotone edges over [min, max]
  std::vector<size_t> counts;  // conserve the record count
};

inline Histogram compute_histogram(const std::vector<double>& values, size_t bins) {
  if (values.empty()) fail(ErrorKind::precondition, "histogram needs at least one value");
  if (bins < 1) fail(ErrorKind::precondition, "histogram needs at least one bin");
  double lo = values.front(), hi = values.front();
  for (double v : values) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  Histogram h;
  double width = (hi - lo) / static_cast<double>(bins);
  for (size_t i = 0; i <= bins; ++i) {
    h.edges.push_back(i == bins ? hi : lo + width * static_cast<double>(i));
  }
  h.counts.assign(bins, 0);
  for (double v : values) {
    size_t idx = 0;
    if (width > 0) {
      idx = static_cast<size_t>((v - lo) / width);
      if (idx >= bins) idx = bins - 1;  // max lands in the last (inclusive) bin
    }
    ++h.counts[idx];
  }
  return h;
}

inline std::string histogram_csv(const Histogram& h) {
  std::string out = "bin_lo,bin_hi,count\n";
  char buf[64];
  for (size_t i = 0; i < h.counts.size(); ++i) {
    std::snprintf(buf, sizeof(buf), "%.9g,%.9g,%zu\n", h.edges[i], h.edges[i + 1], h.counts[i]);
    out += buf;
  }
  return out;
}

inline Histogram histogram_export(const RankingResult& ranking, size_t bins) {
  std::vector<double> scores;
  scores.reserve(ranking.ranking.size());
  for (const RankedInstruction& ri : ranking.ranking) scores.push_back(ri.score);
  return compute_histogram(scores, bins);
}

}  // namespace tilt
