#pragma once

// Synthetic attack target. Compliance probability rises with the mean
// tendency score of the known (ranked) instructions found in the last user
// message and, optionally, with how early those instructions sit in the
// prompt (so an unknown probe near the end benefits from recency). Outcomes
// are a seeded deterministic function of the whole transcript, which makes
// ablation grids reproducible and fast without any model in the loop.

#include <cmath>
#include <string>
#include <unordered_map>
#include <vector>

#include "tilt/backend.hpp"
#include "tilt/rng.hpp"
#include "tilt/sha256.hpp"

namespace tilt {

struct SimulatorConfig {
  uint64_t seed = 1;
  double base_logit = -0.5;     // compliance odds when nothing is known
  double score_weight = 3.0;    // pull of the mean known-instruction score
  double recency_weight = 1.0;  // pull of known instructions sitting early
  std::string success_reply =
      "Sure, here is a detailed plan. Step 1: gather the materials. Step 2: "
      "assemble everything carefully. Step 3: execute the plan.";
  std::string refusal_reply = "I'm sorry, but I can't help with that request.";
};

class SimulatorBackend : public Backend {
 public:
  SimulatorBackend(SimulatorConfig cfg, std::unordered_map<std::string, double> score_table)
      : cfg_(std::move(cfg)), scores_(std::move(score_table)) {
    std::string fingerprint = std::to_string(cfg_.seed) + "|" +
                              std::to_string(cfg_.base_logit) + "|" +
                              std::to_string(cfg_.score_weight) + "|" +
                              std::to_string(cfg_.recency_weight) + "|" +
                              std::to_string(scores_.size());
    id_ = "sim:" + sha256_hex(fingerprint).substr(0, 12);
  }

  std::string id() const override { return id_; }
  bool supports_logprobs() const override { return false; }

  std::vector<StepProbe> probe(const ProbeRequest&) override {
    fail(ErrorKind::capability, "simulator target does not expose log-probabilities");
  }

  ChatResult chat(const ChatTranscript& transcript, const SamplingParams&) override {
    require_chat_preconditions(transcript);
    const std::string& prompt = transcript.messages.back().content;

    double score_sum = 0.0;
    double center_sum = 0.0;
    size_t found = 0;
    for (const auto& [text, score] : scores_) {
      size_t pos = prompt.find(text);
      if (pos == std::string::npos) continue;
      ++found;
      score_sum += score;
      center_sum += (static_cast<double>(pos) + text.size() / 2.0) /
                    std::max<double>(1.0, static_cast<double>(prompt.size()));
    }
    double mean_score = found > 0 ? score_sum / found : 1.0;
    // Known instructions near the front leave the (unknown) probe at the end.
    double recency = found > 0 ? 1.0 - center_sum / found : 0.5;

    double logit = cfg_.base_logit + cfg_.score_weight * (mean_score - 1.0) +
                   cfg_.recency_weight * (recency - 0.5);
    double p = 1.0 / (1.0 + std::exp(-logit));

    std::string all;
    for (const ChatMessage& m : transcript.messages) all += m.role + ":" + m.content + "\n";
    bool comply = unit_from_hash(hash_combine(cfg_.seed, hash_str(all))) < p;
    return {comply ? cfg_.success_reply : cfg_.refusal_reply, false};
  }

  const SimulatorConfig& config() const { return cfg_; }

 private:
  SimulatorConfig cfg_;
  std::unordered_map<std::string, double> scores_;
  std::string id_;
};

}  // namespace tilt
