#pragma once

// Fully deterministic scripted backend. Given the same script and seed, probe
// and chat outputs are byte-identical across runs, which makes every
// downstream artifact reproducible in tests and dry runs.
//
// Script document (schema tilt-mock/1):
// {
//   "schema": "tilt-mock/1",
//   "seed": 42,
//   "probe": {
//     "mode": "uniform" | "scripted" | "hash",
//     "vocab_size": 4,                       // uniform: every step (1/V, 1/V)
//     "steps": {"<continuation>": [[f,m],..]},  // scripted: exact steps
//     "default_steps": [[f,m], ..],             // scripted fallback
//     "base_strength": 1.0,                  // hash mode
//     "bias_rules": [{"contains": "...", "strength": 4.0}, ...]
//   },
//   "chat": {
//     "replies": {"<exact last user message>": "reply"},
//     "contains_replies": [{"contains": "...", "reply": "..."}],
//     "default_reply": "Mock reply {hash8}."
//   },
//   "faults": {"rate": 0.2, "seed": 7, "kind": "persistent" | "transient",
//              "scope": "probe" | "chat" | "both"}
// }
//
// Hash mode draws per-step (max, ratio) pairs from a seeded hash of
// (prompt, continuation, step). A bias rule raises the forced/max ratio for
// continuations containing its substring: ratio = u^(1/strength), so larger
// strength pushes ratios toward 1 and the polarity carrying it scores higher.
// Continuations tokenize on whitespace; one step per word.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <map>
#include <mutex>
#include <string>
#include <vector>

#include "tilt/backend.hpp"
#include "tilt/rng.hpp"
#include "tilt/sha256.hpp"
#include "tilt/text.hpp"

namespace tilt {

struct MockFaultPlan {
  double rate = 0.0;
  uint64_t seed = 0;
  bool transient = false;    // transient: first hit fails, retry succeeds
  bool on_probe = true;
  bool on_chat = true;
};

class MockBackend : public Backend {
 public:
  explicit MockBackend(const json& script) : script_(script) {
    if (!script.is_object()) fail(ErrorKind::config, "mock script must be a JSON object");
    if (script.contains("schema") && script.at("schema") != "tilt-mock/1") {
      fail(ErrorKind::config, "mock script schema must be tilt-mock/1");
    }
    seed_ = script.value("seed", uint64_t{0});
    if (script.contains("probe")) parse_probe_section(script.at("probe"));
    if (script.contains("chat")) parse_chat_section(script.at("chat"));
    if (script.contains("faults")) parse_faults_section(script.at("faults"));
    id_ = "mock:" + sha256_hex(script.dump()).substr(0, 12);
  }

  static json uniform_script(int vocab_size, uint64_t seed = 0) {
    return json{{"schema", "tilt-mock/1"},
                {"seed", seed},
                {"probe", {{"mode", "uniform"}, {"vocab_size", vocab_size}}}};
  }

  std::string id() const override { return id_; }
  bool supports_logprobs() const override { return true; }

  std::vector<StepProbe> probe(const ProbeRequest& req) override {
    validate_probe_request(req);
    probe_calls_.fetch_add(1);
    maybe_fault("probe", req.prompt + "\x1f" + req.continuation, faults_.on_probe);
    std::vector<StepProbe> steps;
    if (probe_mode_ == "uniform") {
      double p = 1.0 / static_cast<double>(vocab_size_);
      size_t n = std::max<size_t>(1, split_words(req.continuation).size());
      steps.assign(n, StepProbe{p, p});
    } else if (probe_mode_ == "scripted") {
      auto it = scripted_steps_.find(req.continuation);
      const std::vector<StepProbe>* src = nullptr;
      if (it != scripted_steps_.end()) {
        src = &it->second;
      } else if (!default_steps_.empty()) {
        src = &default_steps_;
      } else {
        fail(ErrorKind::config,
             "mock script has no steps for continuation \"" + req.continuation + "\"");
      }
      steps = *src;
    } else {  // hash
      double strength = base_strength_;
      std::string lowered = to_lower_copy(req.continuation);
      for (const auto& rule : bias_rules_) {
        if (lowered.find(rule.first) != std::string::npos) {
          strength = rule.second;
          break;
        }
      }
      size_t n = std::max<size_t>(1, split_words(req.continuation).size());
      uint64_t base = hash_combine(seed_, hash_str(req.prompt));
      base = hash_combine(base, hash_str(req.continuation));
      for (size_t i = 0; i < n; ++i) {
        uint64_t hm = hash_combine(base, 2 * i);
        uint64_t hr = hash_combine(base, 2 * i + 1);
        double max_p = 0.25 + 0.75 * unit_from_hash(hm);
        double ratio = std::pow(unit_from_hash(hr), 1.0 / strength);
        steps.push_back(StepProbe{max_p * ratio, max_p});
      }
    }
    validate_steps(steps);
    return steps;
  }

  ChatResult chat(const ChatTranscript& transcript, const SamplingParams&) override {
    require_chat_preconditions(transcript);
    chat_calls_.fetch_add(1);
    std::string all;
    for (const ChatMessage& m : transcript.messages) all += m.role + ":" + m.content + "\n";
    maybe_fault("chat", all, faults_.on_chat);
    const std::string& last = transcript.messages.back().content;
    auto it = chat_replies_.find(last);
    if (it != chat_replies_.end()) return {it->second, false};
    std::string lowered = to_lower_copy(last);
    for (const auto& rule : contains_replies_) {
      if (lowered.find(rule.first) != std::string::npos) return {rule.second, false};
    }
    std::string reply = default_reply_;
    size_t pos = reply.find("{hash8}");
    if (pos != std::string::npos) reply.replace(pos, 7, sha256_hex(all).substr(0, 8));
    return {reply, false};
  }

  size_t probe_calls() const { return probe_calls_.load(); }
  size_t chat_calls() const { return chat_calls_.load(); }
  const json& script() const { return script_; }

 private:
  void parse_probe_section(const json& p) {
    probe_mode_ = p.value("mode", std::string("uniform"));
    if (probe_mode_ == "uniform") {
      vocab_size_ = p.value("vocab_size", 4);
      if (vocab_size_ < 1) fail(ErrorKind::config, "mock vocab_size must be >= 1");
    } else if (probe_mode_ == "scripted") {
      if (p.contains("steps")) {
        for (const auto& [key, arr] : p.at("steps").items()) {
          scripted_steps_[key] = parse_steps(arr);
        }
      }
      if (p.contains("default_steps")) default_steps_ = parse_steps(p.at("default_steps"));
      if (scripted_steps_.empty() && default_steps_.empty()) {
        fail(ErrorKind::config, "scripted mock needs steps or default_steps");
      }
    } else if (probe_mode_ == "hash") {
      base_strength_ = p.value("base_strength", 1.0);
      if (!(base_strength_ > 0)) fail(ErrorKind::config, "base_strength must be positive");
      if (p.contains("bias_rules")) {
        for (const json& rule : p.at("bias_rules")) {
          double strength = rule.at("strength").get<double>();
          if (!(strength > 0)) fail(ErrorKind::config, "bias strength must be positive");
          bias_rules_.emplace_back(to_lower_copy(rule.at("contains").get<std::string>()),
                                   strength);
        }
      }
    } else {
      fail(ErrorKind::config, "mock probe mode must be uniform|scripted|hash");
    }
  }

  static std::vector<StepProbe> parse_steps(const json& arr) {
    if (!arr.is_array() || arr.empty()) {
      fail(ErrorKind::config, "mock steps must be a non-empty array of [forced, max] pairs");
    }
    std::vector<StepProbe> steps;
    for (const json& pair : arr) {
      if (!pair.is_array() || pair.size() != 2) {
        fail(ErrorKind::config, "mock step must be a [forced, max] pair");
      }
      steps.push_back(StepProbe{pair[0].get<double>(), pair[1].get<double>()});
    }
    return steps;
  }

  void parse_chat_section(const json& c) {
    if (c.contains("replies")) {
      for (const auto& [key, value] : c.at("replies").items()) {
        chat_replies_[key] = value.get<std::string>();
      }
    }
    if (c.contains("contains_replies")) {
      for (const json& rule : c.at("contains_replies")) {
        contains_replies_.emplace_back(to_lower_copy(rule.at("contains").get<std::string>()),
                                       rule.at("reply").get<std::string>());
      }
    }
    default_reply_ = c.value("default_reply", default_reply_);
  }

  void parse_faults_section(const json& f) {
    faults_.rate = f.value("rate", 0.0);
    if (faults_.rate < 0.0 || faults_.rate > 1.0) {
      fail(ErrorKind::config, "fault rate must be in [0, 1]");
    }
    faults_.seed = f.value("seed", uint64_t{0});
    std::string kind = f.value("kind", std::string("persistent"));
    if (kind != "persistent" && kind != "transient") {
      fail(ErrorKind::config, "fault kind must be persistent|transient");
    }
    faults_.transient = (kind == "transient");
    std::string scope = f.value("scope", std::string("both"));
    if (scope != "probe" && scope != "chat" && scope != "both") {
      fail(ErrorKind::config, "fault scope must be probe|chat|both");
    }
    faults_.on_probe = (scope != "chat");
    faults_.on_chat = (scope != "probe");
  }

  void maybe_fault(const char* op, const std::string& payload, bool enabled) {
    if (!enabled || faults_.rate <= 0.0) return;
    uint64_t fp = hash_combine(hash_str(op), hash_str(payload));
    if (unit_from_hash(hash_combine(faults_.seed, fp)) >= faults_.rate) return;
    if (faults_.transient) {
      std::lock_guard<std::mutex> lock(fault_mutex_);
      if (fault_hits_[fp]++ > 0) return;  // already failed once, let it through
    }
    fail(ErrorKind::transport, std::string("injected ") + op + " fault");
  }

  json script_;
  std::string id_;
  uint64_t seed_ = 0;

  std::string probe_mode_ = "uniform";
  int vocab_size_ = 4;
  std::map<std::string, std::vector<StepProbe>> scripted_steps_;
  std::vector<StepProbe> default_steps_;
  double base_strength_ = 1.0;
  std::vector<std::pair<std::string, double>> bias_rules_;

  std::map<std::string, std::string> chat_replies_;
  std::vector<std::pair<std::string, std::string>> contains_replies_;
  std::string default_reply_ = "Mock reply {hash8}.";

  MockFaultPlan faults_;
  std::mutex fault_mutex_;
  std::map<uint64_t, int> fault_hits_;

  std::atomic<size_t> probe_calls_{0};
  std::atomic<size_t> chat_calls_{0};
};

}  // namespace tilt
