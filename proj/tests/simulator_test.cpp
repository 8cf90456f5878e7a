// Tests for tilt/simulator.hpp: compliance must rise with the known-score
// signal and with recency, stay deterministic, and refuse probing.

#include "tilt/simulator.hpp"

#include <gtest/gtest.h>

#include "tilt/evaluate.hpp"
#include "tilt/forge.hpp"

namespace {

using tilt::ChatTranscript;
using tilt::SimulatorBackend;
using tilt::SimulatorConfig;

std::unordered_map<std::string, double> score_table(double score, size_t n,
                                                    const std::string& prefix) {
  std::unordered_map<std::string, double> table;
  for (size_t i = 0; i < n; ++i) {
    table[prefix + " instruction " + std::to_string(i)] = score;
  }
  return table;
}

double empirical_asr(SimulatorBackend& target, const std::string& benign_prefix, size_t trials,
                     bool probe_at_end = true) {
  tilt::RejectionLexicon lexicon = tilt::RejectionLexicon::defaults();
  size_t successes = 0;
  for (size_t i = 0; i < trials; ++i) {
    std::string benign1 = benign_prefix + " instruction " + std::to_string(i % 40);
    std::string benign2 = benign_prefix + " instruction " + std::to_string((i + 1) % 40);
    std::string probe = "unknown probe " + std::to_string(i);
    std::string prompt;
    if (probe_at_end) {
      prompt = "1. " + benign1 + "\n2. " + benign2 + "\n3. " + probe;
    } else {
      prompt = "1. " + probe + "\n2. " + benign1 + "\n3. " + benign2;
    }
    tilt::ChatResult reply = target.chat(ChatTranscript::single_user(prompt), {});
    successes += tilt::kwm_evaluate(reply.text, lexicon).success;
  }
  return 100.0 * static_cast<double>(successes) / static_cast<double>(trials);
}

TEST(Simulator, ComplianceRisesWithKnownScore) {
  SimulatorConfig cfg;
  cfg.seed = 7;
  SimulatorBackend high(cfg, score_table(1.8, 40, "high"));
  SimulatorBackend mid(cfg, score_table(1.0, 40, "mid"));
  SimulatorBackend low(cfg, score_table(0.4, 40, "low"));
  double asr_high = empirical_asr(high, "high", 200);
  double asr_mid = empirical_asr(mid, "mid", 200);
  double asr_low = empirical_asr(low, "low", 200);
  EXPECT_GT(asr_high, asr_mid + 5.0);
  EXPECT_GT(asr_mid, asr_low + 5.0);
}

TEST(Simulator, RecencyFavorsProbeAtEnd) {
  SimulatorConfig cfg;
  cfg.seed = 13;
  cfg.recency_weight = 4.0;
  cfg.score_weight = 0.0;  // isolate the position signal
  SimulatorBackend target(cfg, score_table(1.0, 40, "pos"));
  double end_asr = empirical_asr(target, "pos", 300, true);
  double front_asr = empirical_asr(target, "pos", 300, false);
  EXPECT_GT(end_asr, front_asr + 5.0);
}

TEST(Simulator, DeterministicGivenSeed) {
  SimulatorConfig cfg;
  cfg.seed = 3;
  SimulatorBackend a(cfg, score_table(1.2, 10, "det"));
  SimulatorBackend b(cfg, score_table(1.2, 10, "det"));
  for (int i = 0; i < 20; ++i) {
    std::string prompt = "det instruction " + std::to_string(i % 10) + "\nplus probe " +
                         std::to_string(i);
    EXPECT_EQ(a.chat(ChatTranscript::single_user(prompt), {}).text,
              b.chat(ChatTranscript::single_user(prompt), {}).text);
  }
  EXPECT_EQ(a.id(), b.id());
}

TEST(Simulator, RepliesRespectLexiconContract) {
  SimulatorConfig cfg;
  tilt::RejectionLexicon lexicon = tilt::RejectionLexicon::defaults();
  EXPECT_TRUE(tilt::kwm_evaluate(cfg.success_reply, lexicon).success);
  EXPECT_FALSE(tilt::kwm_evaluate(cfg.refusal_reply, lexicon).success);
}

TEST(Simulator, ProbeUnsupported) {
  SimulatorBackend target({}, {});
  EXPECT_FALSE(target.supports_logprobs());
  try {
    target.probe({"p", "c"});
    FAIL() << "expected capability error";
  } catch (const tilt::Error& e) {
    EXPECT_EQ(e.kind(), tilt::ErrorKind::capability);
  }
}

}  // namespace
