// Tests for tilt/report.hpp and the redaction rules: table shape, dagger and
// union rows, CSV/markdown rendering, recomputability, and histograms.

#include "tilt/report.hpp"

#include <gtest/gtest.h>

#include "tilt/config.hpp"

namespace {

using tilt::ReportInput;
using tilt::ReportTable;
using tilt::Verdict;
using tilt::VerdictRecord;

VerdictRecord record(const std::string& probe, size_t attempt, const std::string& strategy,
                     bool success) {
  VerdictRecord r;
  r.probe_id = probe;
  r.attempt_index = attempt;
  r.strategy = strategy;
  r.evaluator = "kwm";
  r.verdict.success = success;
  return r;
}

ReportInput sample_input() {
  ReportInput input;
  input.model = "mock:target";
  input.evaluator = "kwm";
  // manual baseline: single attempt
  input.verdicts.push_back(record("p1", 0, "comp", true));
  input.verdicts.push_back(record("p2", 0, "comp", false));
  // ours: two attempts with disjoint successes
  input.verdicts.push_back(record("p1", 0, "ours", true));
  input.verdicts.push_back(record("p1", 1, "ours", false));
  input.verdicts.push_back(record("p2", 0, "ours", false));
  input.verdicts.push_back(record("p2", 1, "ours", true));
  return input;
}

TEST(ReportTable, RowsAndCells) {
  ReportTable table = tilt::build_report_table({sample_input()});
  ASSERT_EQ(table.column_labels.size(), 1u);
  EXPECT_EQ(table.column_labels[0], "mock:target / kwm");
  // comp is manual -> one row; ours is automatic -> two dagger rows + union
  ASSERT_EQ(table.row_labels.size(), 4u);
  EXPECT_EQ(table.row_labels[0], "Comp.");
  EXPECT_EQ(table.row_labels[1], "Ours†(1)");
  EXPECT_EQ(table.row_labels[2], "Ours†(2)");
  EXPECT_EQ(table.row_labels[3], "Ours‡");

  EXPECT_DOUBLE_EQ(table.cells[0][0].asr.pct, 50.0);  // comp
  EXPECT_DOUBLE_EQ(table.cells[1][0].asr.pct, 50.0);  // ours attempt 1
  EXPECT_DOUBLE_EQ(table.cells[2][0].asr.pct, 50.0);  // ours attempt 2
  EXPECT_DOUBLE_EQ(table.cells[3][0].asr.pct, 100.0); // union of disjoint successes

  // union dominates every dagger row
  EXPECT_GE(table.cells[3][0].asr.pct, table.cells[1][0].asr.pct);
  EXPECT_GE(table.cells[3][0].asr.pct, table.cells[2][0].asr.pct);
}

TEST(ReportTable, CsvAndMarkdownCarryEveryCell) {
  ReportTable table = tilt::build_report_table({sample_input()});
  std::string csv = tilt::report_csv(table);
  EXPECT_NE(csv.find("strategy,column,asr_pct,successes,evaluated,indeterminate"),
            std::string::npos);
  EXPECT_NE(csv.find("\"Ours‡\",\"mock:target / kwm\",100.0,2,2,0"), std::string::npos);
  EXPECT_NE(csv.find("\"Comp.\",\"mock:target / kwm\",50.0,1,2,0"), std::string::npos);

  std::string md = tilt::report_markdown(table);
  EXPECT_NE(md.find("| Strategy"), std::string::npos);
  EXPECT_NE(md.find("100.0 (2/2)"), std::string::npos);
}

TEST(ReportTable, CellsRecomputableFromVerdicts) {
  ReportInput input = sample_input();
  ReportTable table = tilt::build_report_table({input});
  // naive recount of the Ours union cell straight from the records
  std::map<std::string, bool> probe_success;
  for (const VerdictRecord& r : input.verdicts) {
    if (r.strategy != "ours") continue;
    probe_success[r.probe_id] = probe_success[r.probe_id] || r.verdict.success;
  }
  size_t successes = 0;
  for (const auto& [probe, success] : probe_success) successes += success;
  double expected = 100.0 * static_cast<double>(successes) /
                    static_cast<double>(probe_success.size());
  EXPECT_DOUBLE_EQ(table.cells[3][0].asr.pct, expected);
}

TEST(ReportTable, MultipleColumns) {
  ReportInput kwm = sample_input();
  ReportInput judge = sample_input();
  judge.evaluator = "judge";
  ReportTable table = tilt::build_report_table({kwm, judge});
  ASSERT_EQ(table.column_labels.size(), 2u);
  EXPECT_EQ(table.cells[0].size(), 2u);
  EXPECT_TRUE(table.cells[3][1].present);
}

TEST(Histogram, ThreeScoresThreeBins) {
  tilt::Histogram h = tilt::compute_histogram({0.5, 1.0, 2.0}, 3);
  ASSERT_EQ(h.counts.size(), 3u);
  EXPECT_EQ(h.counts[0], 1u);
  EXPECT_EQ(h.counts[1], 1u);
  EXPECT_EQ(h.counts[2], 1u);
  for (size_t i = 1; i < h.edges.size(); ++i) EXPECT_GT(h.edges[i], h.edges[i - 1]);
}

TEST(Histogram, SingleBinTakesEverything) {
  tilt::Histogram h = tilt::compute_histogram({0.5, 1.0, 2.0, 2.0}, 1);
  ASSERT_EQ(h.counts.size(), 1u);
  EXPECT_EQ(h.counts[0], 4u);
}

TEST(Histogram, ConservationUnderRandomInput) {
  tilt::DetRng rng(2);
  std::vector<double> values;
  for (int i = 0; i < 500; ++i) values.push_back(0.2 + 2.0 * rng.unit());
  tilt::Histogram h = tilt::compute_histogram(values, 17);
  size_t total = 0;
  for (size_t c : h.counts) total += c;
  EXPECT_EQ(total, values.size());
}

TEST(Histogram, DegenerateAndErrorCases) {
  // all-equal scores land in the first bin
  tilt::Histogram h = tilt::compute_histogram({1.0, 1.0, 1.0}, 4);
  EXPECT_EQ(h.counts[0], 3u);
  EXPECT_THROW(tilt::compute_histogram({}, 3), tilt::Error);
  EXPECT_THROW(tilt::compute_histogram({1.0}, 0), tilt::Error);
}

TEST(Histogram, CsvShape) {
  std::string csv = tilt::histogram_csv(tilt::compute_histogram({0.5, 1.0, 2.0}, 3));
  EXPECT_EQ(csv.rfind("bin_lo,bin_hi,count\n", 0), 0u);
  size_t lines = 0;
  for (char c : csv) lines += c == '\n';
  EXPECT_EQ(lines, 4u);  // header + 3 bins
}

TEST(Redaction, SecretsNeverSurvive) {
  tilt::json cfg{{"kind", "http"},
                 {"endpoint", "http://x"},
                 {"auth_token", "sk-very-secret"},
                 {"auth_token_env", "TILT_AUTH_TOKEN"},
                 {"nested", {{"api_key", "key-123"}, {"note", "fine"}}},
                 {"list", tilt::json::array({tilt::json{{"password", "hunter2"}}})}};
  tilt::json masked = tilt::redact_secrets(cfg);
  std::string dumped = masked.dump();
  EXPECT_EQ(dumped.find("sk-very-secret"), std::string::npos);
  EXPECT_EQ(dumped.find("key-123"), std::string::npos);
  EXPECT_EQ(dumped.find("hunter2"), std::string::npos);
  EXPECT_EQ(masked.at("auth_token"), "[redacted]");
  // env variable NAMES are not secrets
  EXPECT_EQ(masked.at("auth_token_env"), "TILT_AUTH_TOKEN");
  EXPECT_EQ(masked.at("nested").at("note"), "fine");
}

}  // namespace
