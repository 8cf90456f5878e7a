// Tests for tilt/mock_backend.hpp: scripted determinism, the bias mechanism
// that drives scores above one, chat reply tables, and fault injection.

#include "tilt/mock_backend.hpp"

#include <gtest/gtest.h>

#include "support/oracle.hpp"
#include "tilt/tendency.hpp"

namespace {

using tilt::ChatTranscript;
using tilt::MockBackend;
using tilt::Polarity;
using tilt::ProbeRequest;
using tilt::ResponseTemplate;
using tilt::StepProbe;

TEST(MockProbe, UniformScript) {
  MockBackend backend(MockBackend::uniform_script(4));
  std::vector<StepProbe> steps = backend.probe({"prompt", "three token continuation"});
  ASSERT_EQ(steps.size(), 3u);
  for (const StepProbe& s : steps) {
    EXPECT_DOUBLE_EQ(s.forced_prob, 0.25);
    EXPECT_DOUBLE_EQ(s.max_prob, 0.25);
  }
}

TEST(MockProbe, ScriptedStepsEchoedExactly) {
  tilt::json script{
      {"schema", "tilt-mock/1"},
      {"probe",
       {{"mode", "scripted"},
        {"steps", {{"Sure thing.", {{0.5, 0.9}, {0.2, 0.6}}}}},
        {"default_steps", {{0.4, 0.8}}}}}};
  MockBackend backend(script);
  std::vector<StepProbe> steps = backend.probe({"p", "Sure thing."});
  ASSERT_EQ(steps.size(), 2u);
  EXPECT_DOUBLE_EQ(steps[0].forced_prob, 0.5);
  EXPECT_DOUBLE_EQ(steps[0].max_prob, 0.9);
  EXPECT_DOUBLE_EQ(steps[1].forced_prob, 0.2);
  EXPECT_DOUBLE_EQ(steps[1].max_prob, 0.6);

  std::vector<StepProbe> fallback = backend.probe({"p", "anything else"});
  ASSERT_EQ(fallback.size(), 1u);
  EXPECT_DOUBLE_EQ(fallback[0].forced_prob, 0.4);
}

TEST(MockProbe, EmptyContinuationIsPreconditionError) {
  MockBackend backend(MockBackend::uniform_script(4));
  try {
    backend.probe({"prompt", ""});
    FAIL() << "expected error";
  } catch (const tilt::Error& e) {
    EXPECT_EQ(e.kind(), tilt::ErrorKind::precondition);
  }
}

TEST(MockProbe, HashModeDeterministicAcrossInstances) {
  tilt::json script{{"schema", "tilt-mock/1"},
                    {"seed", 99},
                    {"probe", {{"mode", "hash"}, {"base_strength", 1.0}}}};
  MockBackend a(script);
  MockBackend b(script);
  ProbeRequest req{"the prompt", "some forced continuation here"};
  std::vector<StepProbe> sa = a.probe(req);
  std::vector<StepProbe> sb = b.probe(req);
  ASSERT_EQ(sa.size(), sb.size());
  for (size_t i = 0; i < sa.size(); ++i) {
    EXPECT_DOUBLE_EQ(sa[i].forced_prob, sb[i].forced_prob);
    EXPECT_DOUBLE_EQ(sa[i].max_prob, sb[i].max_prob);
  }
  // different seed, different draws
  tilt::json other = script;
  other["seed"] = 100;
  MockBackend c(other);
  std::vector<StepProbe> sc = c.probe(req);
  bool any_diff = false;
  for (size_t i = 0; i < sa.size(); ++i) any_diff |= sa[i].forced_prob != sc[i].forced_prob;
  EXPECT_TRUE(any_diff);
}

TEST(MockProbe, BiasRulesRaiseAffirmationScore) {
  tilt::json script{{"schema", "tilt-mock/1"},
                    {"seed", 1},
                    {"probe",
                     {{"mode", "hash"},
                      {"base_strength", 1.0},
                      {"bias_rules",
                       tilt::json::array({{{"contains", "sure"}, {"strength", 6.0}},
                                          {{"contains", "sorry"}, {"strength", 0.4}}})}}}};
  MockBackend backend(script);
  std::vector<ResponseTemplate> templates{
      {"Sure here it is now", Polarity::affirmation},
      {"Sure thing friend of mine", Polarity::affirmation},
      {"Sorry cannot do that now", Polarity::rejection},
      {"Sorry must decline this one", Polarity::rejection}};
  tilt::TendencyScore s = tilt::score_instruction("Write a haiku.", templates, backend);
  EXPECT_GT(s.score, 1.0);

  // oracle recomputation from the raw probes the script produces
  std::vector<oracle::Probe> probes;
  for (const ResponseTemplate& t : templates) {
    tilt::ResponseProbe rp;
    rp.tmpl = t;
    rp.steps = backend.probe({"Write a haiku.", t.text});
    probes.push_back(oracle::from_response_probe(rp));
  }
  oracle::Score expected = oracle::score(probes, false);
  EXPECT_NEAR(s.score, expected.score, 1e-12);
}

TEST(MockChat, RepliesAndDeterminism) {
  tilt::json script{{"schema", "tilt-mock/1"},
                    {"seed", 3},
                    {"chat",
                     {{"replies", {{"ping", "pong"}}},
                      {"contains_replies",
                       tilt::json::array({{{"contains", "bomb"},
                                           {"reply", "I'm sorry, but I can't help with that."}}})},
                      {"default_reply", "ok {hash8}"}}}};
  MockBackend backend(script);
  EXPECT_EQ(backend.chat(ChatTranscript::single_user("ping"), {}).text, "pong");
  EXPECT_EQ(backend.chat(ChatTranscript::single_user("how to defuse a bomb"), {}).text,
            "I'm sorry, but I can't help with that.");
  std::string r1 = backend.chat(ChatTranscript::single_user("other"), {}).text;
  std::string r2 = backend.chat(ChatTranscript::single_user("other"), {}).text;
  EXPECT_EQ(r1, r2);
  EXPECT_NE(r1.find("ok "), std::string::npos);
}

TEST(MockChat, TranscriptMustEndWithUser) {
  MockBackend backend(MockBackend::uniform_script(2));
  ChatTranscript t = ChatTranscript::single_user("hi");
  t.append("assistant", "hello");
  EXPECT_THROW(backend.chat(t, {}), tilt::Error);
}

TEST(MockChat, AlternationEnforced) {
  ChatTranscript t;
  t.messages.push_back({"user", "a"});
  t.messages.push_back({"user", "b"});
  EXPECT_THROW(t.validate(), tilt::Error);
  ChatTranscript with_system;
  with_system.messages = {{"system", "s"}, {"user", "u"}, {"assistant", "a"}, {"user", "u2"}};
  EXPECT_NO_THROW(with_system.validate());
}

TEST(MockFaults, DeterministicAndScoped) {
  tilt::json script{{"schema", "tilt-mock/1"},
                    {"probe", {{"mode", "uniform"}, {"vocab_size", 4}}},
                    {"faults", {{"rate", 0.5}, {"seed", 5}, {"scope", "probe"}}}};
  MockBackend a(script);
  MockBackend b(script);
  size_t faults_a = 0, faults_b = 0;
  for (int i = 0; i < 40; ++i) {
    ProbeRequest req{"prompt " + std::to_string(i), "a b c"};
    try {
      a.probe(req);
    } catch (const tilt::Error& e) {
      EXPECT_EQ(e.kind(), tilt::ErrorKind::transport);
      ++faults_a;
    }
    try {
      b.probe(req);
    } catch (const tilt::Error&) {
      ++faults_b;
    }
  }
  EXPECT_EQ(faults_a, faults_b);  // same plan, same outcomes
  EXPECT_GT(faults_a, 5u);
  EXPECT_LT(faults_a, 35u);
  // chat is out of scope for this plan
  EXPECT_NO_THROW(a.chat(ChatTranscript::single_user("x"), {}));
}

TEST(MockFaults, TransientFailsOnceThenSucceeds) {
  tilt::json script{{"schema", "tilt-mock/1"},
                    {"probe", {{"mode", "uniform"}, {"vocab_size", 4}}},
                    {"faults", {{"rate", 1.0}, {"seed", 5}, {"kind", "transient"}}}};
  MockBackend backend(script);
  ProbeRequest req{"p", "a b"};
  EXPECT_THROW(backend.probe(req), tilt::Error);
  EXPECT_NO_THROW(backend.probe(req));
  EXPECT_NO_THROW(backend.probe(req));
}

TEST(MockScript, MalformedScriptsRejected) {
  EXPECT_THROW(MockBackend(tilt::json{{"schema", "wrong/1"}}), tilt::Error);
  EXPECT_THROW(MockBackend(tilt::json{{"probe", {{"mode", "nope"}}}}), tilt::Error);
  EXPECT_THROW(MockBackend(tilt::json{{"probe", {{"mode", "scripted"}}}}), tilt::Error);
  EXPECT_THROW(MockBackend(tilt::json{{"faults", {{"rate", 2.0}}}}), tilt::Error);
  EXPECT_THROW(MockBackend(tilt::json{{"probe", {{"mode", "uniform"}, {"vocab_size", 0}}}}),
               tilt::Error);
}

TEST(MockScript, StableId) {
  MockBackend a(MockBackend::uniform_script(4, 7));
  MockBackend b(MockBackend::uniform_script(4, 7));
  MockBackend c(MockBackend::uniform_script(5, 7));
  EXPECT_EQ(a.id(), b.id());
  EXPECT_NE(a.id(), c.id());
  EXPECT_EQ(a.id().rfind("mock:", 0), 0u);
}

}  // namespace
