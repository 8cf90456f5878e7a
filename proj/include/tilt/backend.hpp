#pragma once

// Uniform access to chat models: forced-continuation probability probing and
// multi-round chat. Implementations: HttpBackend (OpenAI-compatible wire
// protocol or the simple first-party probe protocol), MockBackend (scripted,
// deterministic, hermetic), SimulatorBackend (synthetic attack target).

#include <memory>
#include <string>
#include <vector>

#include "tilt/error.hpp"
#include "tilt/io.hpp"
#include "tilt/tendency.hpp"

namespace tilt {

struct ChatMessage {
  std::string role;  // "system" | "user" | "assistant"
  std::string content;
};

inline void to_json(json& j, const ChatMessage& m) {
  j = json{{"role", m.role}, {"content", m.content}};
}

inline void from_json(const json& j, ChatMessage& m) {
  m.role = j.at("role").get<std::string>();
  m.content = j.at("content").get<std::string>();
}

// Ordered dialogue: optional leading system message, then strict
// user/assistant alternation starting with user.
struct ChatTranscript {
  std::vector<ChatMessage> messages;

  static ChatTranscript single_user(const std::string& content) {
    ChatTranscript t;
    t.messages.push_back({"user", content});
    return t;
  }

  void append(const std::string& role, const std::string& content) {
    messages.push_back({role, content});
    validate();
  }

  bool ends_with_user() const {
    return !messages.empty() && messages.back().role == "user";
  }

  void validate() const {
    size_t start = 0;
    if (!messages.empty() && messages.front().role == "system") start = 1;
    for (size_t i = start; i < messages.size(); ++i) {
      const std::string& role = messages[i].role;
      const std::string expected = ((i - start) % 2 == 0) ? "user" : "assistant";
      if (role != expected) {
        fail(ErrorKind::precondition,
             "transcript roles must alternate user/assistant; message " +
                 std::to_string(i) + " has role \"" + role + "\"");
      }
    }
  }
};

struct SamplingParams {
  double temperature = 0.0;  // greedy by default for reproducibility
  int max_tokens = 1024;
};

struct ChatResult {
  std::string text;
  bool truncated = false;
};

// How an instruction is rendered into the completion prompt before the
// forced continuation is appended. Default is bare user content; real
// chat checkpoints usually need their serving template spelled out here.
struct ChatTemplate {
  std::string system;
  std::string user_prefix;
  std::string user_suffix;
  std::string assistant_prefix;

  std::string render(const std::string& user_text) const {
    return system + user_prefix + user_text + user_suffix + assistant_prefix;
  }
};

struct BackendConfig {
  std::string endpoint;
  std::string model_id;
  std::string auth_token;                           // secret, never persisted
  std::string auth_token_env = "TILT_AUTH_TOKEN";   // env override wins
  double timeout_s = 60.0;
  int max_retries = 2;
  double retry_backoff_s = 0.5;
  int max_parallel_requests = 4;
  int logprobs_top_k = 5;
  std::string probe_protocol = "openai";  // "openai" | "simple"
  ChatTemplate chat_template;

  void validate() const {
    if (endpoint.empty()) fail(ErrorKind::config, "backend endpoint is empty");
    if (!(timeout_s > 0)) fail(ErrorKind::config, "backend timeout must be positive");
    if (max_parallel_requests < 1) {
      fail(ErrorKind::config, "max_parallel_requests must be >= 1");
    }
    if (max_retries < 0) fail(ErrorKind::config, "max_retries must be >= 0");
    if (probe_protocol != "openai" && probe_protocol != "simple") {
      fail(ErrorKind::config, "probe_protocol must be openai|simple");
    }
  }
};

class Backend {
 public:
  virtual ~Backend() = default;

  // Stable identity recorded in manifests.
  virtual std::string id() const = 0;

  virtual bool supports_logprobs() const = 0;

  // One StepProbe per continuation token under the backend's tokenizer.
  virtual std::vector<StepProbe> probe(const ProbeRequest& req) = 0;

  // Assistant reply for a transcript that ends with a user message.
  virtual ChatResult chat(const ChatTranscript& transcript, const SamplingParams& sampling) = 0;

  virtual int max_parallel_requests() const { return 1; }

 protected:
  static void require_chat_preconditions(const ChatTranscript& transcript) {
    transcript.validate();
    if (!transcript.ends_with_user()) {
      fail(ErrorKind::precondition, "transcript must end with a user message");
    }
  }
};

using BackendPtr = std::unique_ptr<Backend>;

}  // namespace tilt
