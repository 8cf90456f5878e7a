// Tests for tilt/corpus.hpp: alpaca ingestion, dedup, stable ids, and the
// text-manipulation filter.

#include "tilt/corpus.hpp"

#include <gtest/gtest.h>

namespace {

std::string fixture(const std::string& name) {
  return std::string(TILT_TEST_FIXTURES) + "/" + name;
}

TEST(IngestCorpus, FiltersInputEntriesAndDuplicates) {
  std::vector<tilt::InstructionRecord> records =
      tilt::ingest_corpus(fixture("corpus_small.json"));
  // 11 entries: one has non-empty input, one is a duplicate -> 9 records
  ASSERT_EQ(records.size(), 9u);
  for (const tilt::InstructionRecord& r : records) {
    EXPECT_FALSE(r.text.empty());
    EXPECT_EQ(r.id, tilt::instruction_id(r.text));
    EXPECT_EQ(r.id.size(), 64u);
  }
  // order preserved, duplicate kept first
  EXPECT_EQ(records[0].text, "Describe the structure of an atom.");
  EXPECT_EQ(records[1].text, "Give three tips for staying healthy.");
}

TEST(IngestCorpus, IdsReproducible) {
  std::vector<tilt::InstructionRecord> a = tilt::ingest_corpus(fixture("corpus_small.json"));
  std::vector<tilt::InstructionRecord> b = tilt::ingest_corpus(fixture("corpus_small.json"));
  ASSERT_EQ(a.size(), b.size());
  for (size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a[i].id, b[i].id);
}

TEST(IngestCorpus, Errors) {
  EXPECT_THROW(tilt::ingest_corpus("/nonexistent.json"), tilt::Error);
  EXPECT_THROW(tilt::parse_corpus(tilt::json::object(), "x"), tilt::Error);
  EXPECT_THROW(tilt::parse_corpus(tilt::json::array({tilt::json{{"output", "y"}}}), "x"),
               tilt::Error);
  // all entries unusable
  tilt::json only_input = tilt::json::array(
      {tilt::json{{"instruction", "a"}, {"input", "context"}}});
  EXPECT_THROW(tilt::parse_corpus(only_input, "x"), tilt::Error);
}

TEST(FilterTextManipulation, DefaultPatterns) {
  std::vector<tilt::InstructionRecord> records{
      tilt::make_record("Please translate the following sentence", "t"),
      tilt::make_record("Please change the following text", "t"),
      tilt::make_record("Describe the structure of an atom.", "t"),
      tilt::make_record("Summarize this article in two lines", "t"),
      tilt::make_record("REWRITE the story ending", "t"),  // case-insensitive
  };
  tilt::FilterResult result = tilt::filter_text_manipulation(records);
  EXPECT_EQ(result.removed, 4u);
  ASSERT_EQ(result.kept.size(), 1u);
  EXPECT_EQ(result.kept[0].text, "Describe the structure of an atom.");
}

TEST(FilterTextManipulation, ConfigurablePatterns) {
  std::vector<tilt::InstructionRecord> records{
      tilt::make_record("Compose a limerick", "t"),
      tilt::make_record("Translate to German", "t"),
  };
  tilt::FilterResult none = tilt::filter_text_manipulation(records, {"zzz"});
  EXPECT_EQ(none.removed, 0u);
  EXPECT_EQ(none.kept.size(), 2u);
  tilt::FilterResult custom = tilt::filter_text_manipulation(records, {"limerick"});
  EXPECT_EQ(custom.removed, 1u);
  EXPECT_EQ(custom.kept[0].text, "Translate to German");
}

TEST(FilterTextManipulation, EmptyInputIsFine) {
  tilt::FilterResult result = tilt::filter_text_manipulation({});
  EXPECT_EQ(result.removed, 0u);
  EXPECT_TRUE(result.kept.empty());
}

}  // namespace
