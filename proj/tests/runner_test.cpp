// Tests for tilt/runner.hpp: attempt execution in both modes, error
// isolation, follow-up, campaign streaming/resume, and replay determinism.

#include "tilt/runner.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <regex>

#include "tilt/mock_backend.hpp"

namespace {

using tilt::AttemptOutcome;
using tilt::AttemptPolicy;
using tilt::AttemptSpec;
using tilt::ChatTranscript;
using tilt::MockBackend;
using tilt::ProbeInstruction;
using tilt::RankedInstruction;

std::filesystem::path tmp_file(const std::string& name) {
  return std::filesystem::temp_directory_path() / name;
}

tilt::RankingResult tiny_ranking() {
  tilt::RankingResult result;
  for (int i = 0; i < 6; ++i) {
    RankedInstruction ri;
    ri.record = tilt::make_record("benign instruction " + std::to_string(i), "test");
    ri.score = 2.0 - 0.2 * i;
    result.ranking.push_back(ri);
  }
  tilt::sort_ranking(result.ranking);
  return result;
}

std::vector<ProbeInstruction> probes(int n) {
  std::vector<ProbeInstruction> out;
  for (int i = 0; i < n; ++i) {
    std::string text = "probe instruction " + std::to_string(i);
    out.push_back({tilt::instruction_id(text), text});
  }
  return out;
}

tilt::json plain_chat_script() {
  return tilt::json{{"schema", "tilt-mock/1"},
                    {"chat", {{"default_reply", "canned reply {hash8}"}}}};
}

TEST(RunAttempt, ParallelProducesTwoMessages) {
  MockBackend target(plain_chat_script());
  tilt::AttackPrompt prompt = tilt::baseline_none("do the thing");
  AttemptOutcome outcome = tilt::run_attempt(target, prompt, {});
  EXPECT_TRUE(outcome.ok);
  ASSERT_EQ(outcome.transcript.messages.size(), 2u);
  EXPECT_EQ(outcome.transcript.messages[0].role, "user");
  EXPECT_EQ(outcome.transcript.messages[0].content, "do the thing");
  EXPECT_EQ(outcome.transcript.messages[1].role, "assistant");
}

TEST(RunAttempt, PipelineRunsRoundsSequentially) {
  MockBackend target(plain_chat_script());
  tilt::RoundPlan plan = tilt::pipeline_plan(
      {tilt::make_record("b1", "t"), tilt::make_record("b2", "t")}, "the probe");
  AttemptOutcome outcome = tilt::run_attempt(target, plan, {});
  EXPECT_TRUE(outcome.ok);
  ASSERT_EQ(outcome.transcript.messages.size(), 6u);
  EXPECT_EQ(outcome.transcript.messages[4].role, "user");
  EXPECT_EQ(outcome.transcript.messages[4].content, "the probe");
  EXPECT_EQ(outcome.transcript.messages[5].role, "assistant");
}

TEST(RunAttempt, BackendErrorKeepsPartialTranscript) {
  tilt::json script = plain_chat_script();
  script["faults"] = tilt::json{{"rate", 1.0}, {"seed", 1}, {"scope", "chat"}};
  MockBackend target(script);
  AttemptOutcome outcome = tilt::run_attempt(target, tilt::baseline_none("x"), {});
  EXPECT_FALSE(outcome.ok);
  EXPECT_NE(outcome.error.find("transport"), std::string::npos);
  ASSERT_EQ(outcome.transcript.messages.size(), 1u);  // the user message survives
}

TEST(RunFollowUp, AppendsQuestionAndReply) {
  MockBackend target(plain_chat_script());
  ChatTranscript t = ChatTranscript::single_user("q");
  t.append("assistant", "brief");
  tilt::FollowUpPolicy policy;
  policy.enabled = true;
  tilt::FollowUpOutcome outcome = tilt::run_follow_up(target, t, policy, {});
  EXPECT_TRUE(outcome.applied);
  EXPECT_TRUE(outcome.ok);
  ASSERT_EQ(outcome.transcript.messages.size(), 4u);
  EXPECT_EQ(outcome.transcript.messages[2].content, tilt::kDefaultFollowUpQuestion);
  EXPECT_FALSE(outcome.reply.empty());
  // original untouched
  EXPECT_EQ(t.messages.size(), 2u);
}

TEST(RunFollowUp, DisabledReturnsUnchanged) {
  MockBackend target(plain_chat_script());
  ChatTranscript t = ChatTranscript::single_user("q");
  t.append("assistant", "brief");
  tilt::FollowUpOutcome outcome = tilt::run_follow_up(target, t, {}, {});
  EXPECT_FALSE(outcome.applied);
  EXPECT_EQ(outcome.transcript.messages.size(), 2u);
}

AttemptPolicy two_attempt_policy() {
  AttemptPolicy policy = tilt::default_policy();
  policy.attempts[1].splice.k = 4;
  return policy;
}

tilt::CampaignOptions options_for(const std::filesystem::path& out) {
  tilt::CampaignOptions options;
  options.out_path = out.string();
  options.record_timestamps = false;
  options.workers = 3;
  return options;
}

TEST(RunCampaign, EveryProbeGetsEveryAttempt) {
  MockBackend target(plain_chat_script());
  tilt::RankingResult ranking = tiny_ranking();
  auto out = tmp_file("tilt_campaign_basic.jsonl");
  tilt::CampaignSummary summary =
      tilt::run_campaign(probes(3), two_attempt_policy(), target, &ranking, options_for(out));
  EXPECT_EQ(summary.total, 3u);
  EXPECT_EQ(summary.errored, 0u);

  tilt::json manifest;
  std::vector<tilt::json> records = tilt::load_run_records(out.string(), &manifest);
  ASSERT_EQ(records.size(), 3u);
  EXPECT_EQ(manifest.at("target_id"), target.id());
  size_t attempt_records = 0;
  for (const tilt::json& r : records) {
    attempt_records += r.at("attempts").size();
    for (const tilt::json& a : r.at("attempts")) {
      EXPECT_EQ(a.at("status"), "ok");
      EXPECT_EQ(a.at("strategy"), "ours");
      EXPECT_EQ(a.at("transcript").size(), 2u);
    }
  }
  EXPECT_EQ(attempt_records, 6u);
  // records stream in probe order
  for (size_t i = 0; i < records.size(); ++i) {
    EXPECT_EQ(records[i].at("probe_id"), probes(3)[i].id);
  }
  std::filesystem::remove(out);
}

TEST(RunCampaign, ReplayDeterminism) {
  auto out_a = tmp_file("tilt_campaign_det_a.jsonl");
  auto out_b = tmp_file("tilt_campaign_det_b.jsonl");
  tilt::RankingResult ranking = tiny_ranking();
  for (const auto& out : {out_a, out_b}) {
    MockBackend target(plain_chat_script());
    tilt::run_campaign(probes(4), two_attempt_policy(), target, &ranking, options_for(out));
  }
  EXPECT_EQ(tilt::read_text_file(out_a.string()), tilt::read_text_file(out_b.string()));
  std::filesystem::remove(out_a);
  std::filesystem::remove(out_b);
}

TEST(RunCampaign, TimestampedRunsIdenticalModuloTimestamps) {
  auto out_a = tmp_file("tilt_campaign_ts_a.jsonl");
  auto out_b = tmp_file("tilt_campaign_ts_b.jsonl");
  tilt::RankingResult ranking = tiny_ranking();
  for (const auto& out : {out_a, out_b}) {
    MockBackend target(plain_chat_script());
    tilt::CampaignOptions options = options_for(out);
    options.record_timestamps = true;
    tilt::run_campaign(probes(2), two_attempt_policy(), target, &ranking, options);
  }
  std::regex ts_re("\"(ts|elapsed_ms)\":(\"[^\"]*\"|[0-9.e+-]+)");
  std::string a = std::regex_replace(tilt::read_text_file(out_a.string()), ts_re, "\"$1\":null");
  std::string b = std::regex_replace(tilt::read_text_file(out_b.string()), ts_re, "\"$1\":null");
  EXPECT_EQ(a, b);
  std::filesystem::remove(out_a);
  std::filesystem::remove(out_b);
}

TEST(RunCampaign, FaultIsolationAndExitAccounting) {
  // persistent faults on a fraction of chats: errored attempts are marked,
  // sibling attempts and probes are untouched
  tilt::json script = plain_chat_script();
  script["faults"] = tilt::json{{"rate", 0.3}, {"seed", 11}, {"scope", "chat"}};
  MockBackend target(script);
  tilt::RankingResult ranking = tiny_ranking();
  auto out = tmp_file("tilt_campaign_faults.jsonl");
  tilt::CampaignSummary summary =
      tilt::run_campaign(probes(10), two_attempt_policy(), target, &ranking, options_for(out));
  std::vector<tilt::json> records = tilt::load_run_records(out.string());
  ASSERT_EQ(records.size(), 10u);
  size_t errored_attempts = 0, ok_attempts = 0;
  for (const tilt::json& r : records) {
    for (const tilt::json& a : r.at("attempts")) {
      if (a.at("status") == "errored") {
        ++errored_attempts;
        EXPECT_FALSE(a.at("error").get<std::string>().empty());
        EXPECT_EQ(a.at("transcript").size(), 1u);
      } else {
        ++ok_attempts;
        EXPECT_EQ(a.at("transcript").size(), 2u);
      }
    }
  }
  EXPECT_GT(errored_attempts, 0u);
  EXPECT_GT(ok_attempts, 0u);
  EXPECT_GT(summary.errored, 0u);
  EXPECT_LT(summary.errored, 10u);
  std::filesystem::remove(out);
}

TEST(RunCampaign, ResumeSkipsCompletedProbes) {
  tilt::RankingResult ranking = tiny_ranking();
  auto out = tmp_file("tilt_campaign_resume.jsonl");

  // first pass with faults: some probes end up errored
  tilt::json faulty = plain_chat_script();
  faulty["faults"] = tilt::json{{"rate", 0.35}, {"seed", 23}, {"scope", "chat"}};
  MockBackend faulty_target(faulty);
  tilt::run_campaign(probes(8), two_attempt_policy(), faulty_target, &ranking,
                     options_for(out));
  std::vector<tilt::json> first = tilt::load_run_records(out.string());
  size_t complete_before = 0;
  for (const tilt::json& r : first) {
    bool ok = true;
    for (const tilt::json& a : r.at("attempts")) ok &= a.at("status") == "ok";
    complete_before += ok;
  }
  ASSERT_GT(complete_before, 0u);
  ASSERT_LT(complete_before, 8u);

  // resume against a clean target: only incomplete probes re-run
  MockBackend clean_target(plain_chat_script());
  tilt::CampaignOptions options = options_for(out);
  options.resume = true;
  tilt::CampaignSummary summary =
      tilt::run_campaign(probes(8), two_attempt_policy(), clean_target, &ranking, options);
  EXPECT_EQ(summary.reused, complete_before);
  EXPECT_EQ(summary.errored, 0u);
  EXPECT_EQ(clean_target.chat_calls(), (8 - complete_before) * 2);

  // the resumed file equals a clean full run byte for byte
  auto reference = tmp_file("tilt_campaign_resume_ref.jsonl");
  MockBackend reference_target(plain_chat_script());
  tilt::run_campaign(probes(8), two_attempt_policy(), reference_target, &ranking,
                     options_for(reference));
  EXPECT_EQ(tilt::read_text_file(out.string()), tilt::read_text_file(reference.string()));
  std::filesystem::remove(out);
  std::filesystem::remove(reference);
}

TEST(RunCampaign, ResumeToleratesTruncatedTrailingLine) {
  tilt::RankingResult ranking = tiny_ranking();
  auto out = tmp_file("tilt_campaign_trunc.jsonl");
  MockBackend first_target(plain_chat_script());
  tilt::run_campaign(probes(4), two_attempt_policy(), first_target, &ranking, options_for(out));

  // simulate a crash mid-write: chop the last record in half
  std::string content = tilt::read_text_file(out.string());
  size_t cut = content.rfind("{\"attempts\"");
  ASSERT_NE(cut, std::string::npos);
  {
    std::ofstream trunc(out.string(), std::ios::binary | std::ios::trunc);
    trunc << content.substr(0, cut + 12);
  }

  MockBackend resume_target(plain_chat_script());
  tilt::CampaignOptions options = options_for(out);
  options.resume = true;
  tilt::CampaignSummary summary =
      tilt::run_campaign(probes(4), two_attempt_policy(), resume_target, &ranking, options);
  EXPECT_EQ(summary.reused, 3u);
  EXPECT_EQ(summary.executed, 1u);
  EXPECT_EQ(tilt::read_text_file(out.string()), content);  // replays byte-identically
  std::filesystem::remove(out);
}

TEST(RunCampaign, FollowUpOnBriefSuccess) {
  // target complies briefly for one probe, refuses the other
  tilt::json script{{"schema", "tilt-mock/1"},
                    {"chat",
                     {{"contains_replies",
                       tilt::json::array(
                           {{{"contains", "brief-probe"}, {"reply", "Sure: step 1, step 2."}},
                            {{"contains", "refused-probe"},
                             {"reply", "I'm sorry, but I can't help with that."}}})}}}};
  MockBackend target(script);
  AttemptPolicy policy;
  AttemptSpec spec;
  spec.strategy = "none";
  policy.attempts = {spec};
  policy.follow_up.enabled = true;
  policy.follow_up.brief_word_threshold = 50;

  auto out = tmp_file("tilt_campaign_follow.jsonl");
  std::vector<ProbeInstruction> ps{{"p1", "brief-probe"}, {"p2", "refused-probe"}};
  tilt::run_campaign(ps, policy, target, nullptr, options_for(out));
  std::vector<tilt::json> records = tilt::load_run_records(out.string());
  ASSERT_EQ(records.size(), 2u);
  EXPECT_FALSE(records[0].at("follow_up").is_null());
  EXPECT_EQ(records[0].at("follow_up").at("question"), tilt::kDefaultFollowUpQuestion);
  EXPECT_EQ(records[0].at("follow_up").at("status"), "ok");
  EXPECT_TRUE(records[1].at("follow_up").is_null());  // refusal -> no follow-up
  std::filesystem::remove(out);
}

TEST(RunCampaign, RankingRequiredForSpliceBuilders) {
  MockBackend target(plain_chat_script());
  auto out = tmp_file("tilt_campaign_norank.jsonl");
  EXPECT_THROW(
      tilt::run_campaign(probes(1), two_attempt_policy(), target, nullptr, options_for(out)),
      tilt::Error);
}

TEST(PolicyParsing, DefaultsAndRoundTrip) {
  AttemptPolicy def = tilt::default_policy();
  ASSERT_EQ(def.attempts.size(), 2u);
  EXPECT_EQ(def.attempts[0].splice.k, 2u);
  EXPECT_EQ(def.attempts[1].splice.k, 4u);
  EXPECT_FALSE(def.stop_on_success);

  tilt::json doc{{"schema", "tilt-policy/1"},
                 {"stop_on_success", true},
                 {"sampling", {{"temperature", 0.5}, {"max_tokens", 64}}},
                 {"follow_up", {{"enabled", true}, {"question", "More?"}}},
                 {"attempts",
                  tilt::json::array(
                      {{{"strategy", "ours"}, {"k", 2}, {"position", "middle"}},
                       {{"strategy", "suffix"}, {"suffix", "ZZZ"}},
                       {{"strategy", "dist"}, {"k", 3}, {"seed", 5}},
                       {{"strategy", "comp"}}})}};
  AttemptPolicy policy = tilt::parse_policy(doc);
  ASSERT_EQ(policy.attempts.size(), 4u);
  EXPECT_TRUE(policy.stop_on_success);
  EXPECT_EQ(policy.attempts[0].splice.position, tilt::ProbePosition::middle);
  EXPECT_EQ(policy.attempts[1].attack_suffix, "ZZZ");
  EXPECT_EQ(policy.attempts[2].seed, 5u);
  EXPECT_EQ(policy.sampling.max_tokens, 64);
  EXPECT_TRUE(policy.follow_up.enabled);
  EXPECT_EQ(policy.follow_up.question, "More?");

  EXPECT_THROW(
      tilt::parse_policy(tilt::json{{"attempts", tilt::json::array(
                                                     {{{"strategy", "bogus"}}})}}),
      tilt::Error);
}

TEST(ProbeFile, LoadAndValidate) {
  auto path = tmp_file("tilt_probes.json");
  tilt::write_text_file_atomic(
      path.string(),
      tilt::json::array({tilt::json{{"id", "x1"}, {"text", "alpha"}},
                         tilt::json{{"text", "beta"}}})
          .dump());
  std::vector<ProbeInstruction> loaded = tilt::load_probe_file(path.string());
  ASSERT_EQ(loaded.size(), 2u);
  EXPECT_EQ(loaded[0].id, "x1");
  EXPECT_EQ(loaded[1].id, tilt::instruction_id("beta"));
  std::filesystem::remove(path);

  tilt::write_text_file_atomic(path.string(), "[]");
  EXPECT_THROW(tilt::load_probe_file(path.string()), tilt::Error);
  std::filesystem::remove(path);
}

}  // namespace
