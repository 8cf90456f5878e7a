#pragma once

// HTTP chat-model client. Two probe protocols:
//
//   openai - POST {completions_path} with {"model", "prompt": rendered
//            prompt + continuation, "max_tokens": 0, "echo": true,
//            "logprobs": K, "temperature": 0}. The echoed logprobs are
//            aligned so that exactly the continuation's tokens become steps.
//   simple - POST {probe_path} with {"model", "prompt", "continuation"};
//            the server answers {"steps": [{"token", "logprob",
//            "top_logprob"}, ...]} covering the continuation only.
//
// Chat always uses the OpenAI chat-completions shape. Full field tables live
// in docs/protocol.md. Auth is a bearer header; the token can be overridden
// by the environment variable named in BackendConfig.auth_token_env.

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <string>
#include <thread>
#include <vector>

#include <httplib.h>

#include "tilt/backend.hpp"
#include "tilt/parallel.hpp"

namespace tilt {

namespace detail {

// Wire responses come from arbitrary servers; surprise value types must
// surface as schema errors, not raw json exceptions.
template <typename Fn>
auto guard_response_types(const char* what, Fn&& fn) {
  try {
    return fn();
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::schema, std::string(what) + ": " + e.what());
  }
}

inline std::vector<StepProbe> parse_openai_echo_probe_impl(const json& response,
                                                           const std::string& rendered_prompt,
                                                           const std::string& continuation) {
  if (!response.contains("choices") || !response.at("choices").is_array() ||
      response.at("choices").empty()) {
    fail(ErrorKind::schema, "completions response has no choices");
  }
  const json& choice = response.at("choices").at(0);
  if (!choice.contains("logprobs") || choice.at("logprobs").is_null()) {
    fail(ErrorKind::capability, "backend returned no log-probabilities");
  }
  const json& lp = choice.at("logprobs");
  if (!lp.contains("tokens") || !lp.contains("token_logprobs")) {
    fail(ErrorKind::capability, "logprobs lack tokens/token_logprobs");
  }
  const json& tokens = lp.at("tokens");
  const json& token_logprobs = lp.at("token_logprobs");
  if (!tokens.is_array() || !token_logprobs.is_array() ||
      tokens.size() != token_logprobs.size()) {
    fail(ErrorKind::schema, "tokens and token_logprobs disagree in shape");
  }

  // Locate the continuation span: trust text_offset when present, otherwise
  // walk tokens from the end until their concatenation covers the
  // continuation.
  size_t start = tokens.size();
  if (lp.contains("text_offset") && lp.at("text_offset").is_array() &&
      lp.at("text_offset").size() == tokens.size()) {
    const json& offsets = lp.at("text_offset");
    start = 0;
    while (start < tokens.size() &&
           offsets.at(start).get<size_t>() < rendered_prompt.size()) {
      ++start;
    }
  } else {
    size_t acc = 0;
    while (start > 0 && acc < continuation.size()) {
      --start;
      acc += tokens.at(start).get<std::string>().size();
    }
  }
  std::string rebuilt;
  for (size_t i = start; i < tokens.size(); ++i) {
    rebuilt += tokens.at(i).get<std::string>();
  }
  if (rebuilt != continuation) {
    fail(ErrorKind::alignment, "echoed tokens do not reconstruct the continuation (got \"" +
                                   rebuilt + "\")");
  }
  if (start == tokens.size()) {
    fail(ErrorKind::alignment, "no echoed tokens cover the continuation");
  }

  bool have_top = lp.contains("top_logprobs") && lp.at("top_logprobs").is_array() &&
                  lp.at("top_logprobs").size() == tokens.size();
  std::vector<StepProbe> steps;
  for (size_t i = start; i < tokens.size(); ++i) {
    const json& flp = token_logprobs.at(i);
    if (flp.is_null()) {
      fail(ErrorKind::capability,
           "missing token logprob at continuation step " + std::to_string(i - start));
    }
    double forced = std::exp(flp.get<double>());
    if (!have_top || lp.at("top_logprobs").at(i).is_null() ||
        lp.at("top_logprobs").at(i).empty()) {
      fail(ErrorKind::capability,
           "missing top_logprobs at continuation step " + std::to_string(i - start));
    }
    double top = -std::numeric_limits<double>::infinity();
    for (const auto& [tok, val] : lp.at("top_logprobs").at(i).items()) {
      (void)tok;
      top = std::max(top, val.get<double>());
    }
    // If the forced token is itself the top-1 alternative the two coincide.
    double max_p = std::max(std::exp(top), forced);
    steps.push_back(StepProbe{forced, max_p});
  }
  validate_steps(steps);
  return steps;
}

inline std::vector<StepProbe> parse_simple_probe_impl(const json& response,
                                                      const std::string& continuation) {
  if (!response.contains("steps") || !response.at("steps").is_array()) {
    fail(ErrorKind::capability, "probe response has no steps");
  }
  std::string rebuilt;
  std::vector<StepProbe> steps;
  for (const json& s : response.at("steps")) {
    if (!s.contains("token") || !s.contains("logprob") || !s.contains("top_logprob")) {
      fail(ErrorKind::capability, "probe step lacks token/logprob/top_logprob");
    }
    rebuilt += s.at("token").get<std::string>();
    double forced = std::exp(s.at("logprob").get<double>());
    double max_p = std::max(std::exp(s.at("top_logprob").get<double>()), forced);
    steps.push_back(StepProbe{forced, max_p});
  }
  if (rebuilt != continuation) {
    fail(ErrorKind::alignment, "probe steps do not reconstruct the continuation (got \"" +
                                   rebuilt + "\")");
  }
  validate_steps(steps);
  return steps;
}

inline ChatResult parse_chat_response_impl(const json& response) {
  if (!response.contains("choices") || !response.at("choices").is_array() ||
      response.at("choices").empty()) {
    fail(ErrorKind::schema, "chat response has no choices");
  }
  const json& choice = response.at("choices").at(0);
  if (!choice.contains("message") || !choice.at("message").contains("content")) {
    fail(ErrorKind::schema, "chat response lacks message content");
  }
  ChatResult out;
  out.text = choice.at("message").at("content").get<std::string>();
  out.truncated = choice.value("finish_reason", std::string()) == "length";
  return out;
}

}  // namespace detail

// Extracts the continuation's StepProbes from an OpenAI completions response
// with echoed logprobs. The echoed tokens must reconstruct the continuation
// byte-exactly, otherwise the probe fails with an alignment error.
inline std::vector<StepProbe> parse_openai_echo_probe(const json& response,
                                                      const std::string& rendered_prompt,
                                                      const std::string& continuation) {
  return detail::guard_response_types("malformed completions response", [&] {
    return detail::parse_openai_echo_probe_impl(response, rendered_prompt, continuation);
  });
}

// {"steps": [{"token", "logprob", "top_logprob"}, ...]} covering exactly the
// continuation.
inline std::vector<StepProbe> parse_simple_probe(const json& response,
                                                 const std::string& continuation) {
  return detail::guard_response_types("malformed probe response", [&] {
    return detail::parse_simple_probe_impl(response, continuation);
  });
}

inline ChatResult parse_chat_response(const json& response) {
  return detail::guard_response_types(
      "malformed chat response", [&] { return detail::parse_chat_response_impl(response); });
}

class HttpBackend : public Backend {
 public:
  explicit HttpBackend(BackendConfig cfg, std::string completions_path = "/v1/completions",
                       std::string chat_path = "/v1/chat/completions",
                       std::string probe_path = "/probe")
      : cfg_(std::move(cfg)),
        completions_path_(std::move(completions_path)),
        chat_path_(std::move(chat_path)),
        probe_path_(std::move(probe_path)),
        semaphore_(std::max(1, cfg_.max_parallel_requests)) {
    cfg_.validate();
    if (!cfg_.auth_token_env.empty()) {
      if (const char* env = std::getenv(cfg_.auth_token_env.c_str());
          env != nullptr && *env != '\0') {
        cfg_.auth_token = env;
      }
    }
  }

  std::string id() const override { return "http:" + cfg_.endpoint + "#" + cfg_.model_id; }
  bool supports_logprobs() const override { return true; }
  int max_parallel_requests() const override { return cfg_.max_parallel_requests; }
  const BackendConfig& config() const { return cfg_; }

  std::vector<StepProbe> probe(const ProbeRequest& req) override {
    validate_probe_request(req);
    std::string rendered = cfg_.chat_template.render(req.prompt);
    if (cfg_.probe_protocol == "simple") {
      json body{{"model", cfg_.model_id}, {"prompt", rendered}, {"continuation", req.continuation}};
      json response = post_with_retries(probe_path_, body);
      return parse_simple_probe(response, req.continuation);
    }
    json body{{"model", cfg_.model_id},
              {"prompt", rendered + req.continuation},
              {"max_tokens", 0},
              {"temperature", 0},
              {"logprobs", cfg_.logprobs_top_k},
              {"echo", true}};
    json response = post_with_retries(completions_path_, body);
    return parse_openai_echo_probe(response, rendered, req.continuation);
  }

  ChatResult chat(const ChatTranscript& transcript, const SamplingParams& sampling) override {
    require_chat_preconditions(transcript);
    json messages = json::array();
    for (const ChatMessage& m : transcript.messages) {
      messages.push_back({{"role", m.role}, {"content", m.content}});
    }
    json body{{"model", cfg_.model_id},
              {"messages", messages},
              {"temperature", sampling.temperature},
              {"max_tokens", sampling.max_tokens}};
    json response = post_with_retries(chat_path_, body);
    return parse_chat_response(response);
  }

 private:
  static bool retryable_status(int status) {
    return status == 408 || status == 429 || status >= 500;
  }

  json post_with_retries(const std::string& path, const json& body) {
    SemaphoreGuard guard(semaphore_);
    std::string payload = body.dump();
    std::string last_error;
    for (int attempt = 0; attempt <= cfg_.max_retries; ++attempt) {
      if (attempt > 0) {
        std::this_thread::sleep_for(
            std::chrono::duration<double>(cfg_.retry_backoff_s * attempt));
      }
      httplib::Client client(cfg_.endpoint);
      client.set_connection_timeout(std::chrono::duration<double>(cfg_.timeout_s));
      client.set_read_timeout(std::chrono::duration<double>(cfg_.timeout_s));
      httplib::Headers headers;
      if (!cfg_.auth_token.empty()) {
        headers.emplace("Authorization", "Bearer " + cfg_.auth_token);
      }
      auto res = client.Post(path, headers, payload, "application/json");
      if (!res) {
        last_error = "connection failed: " + httplib::to_string(res.error());
        continue;
      }
      if (res->status >= 200 && res->status < 300) {
        return parse_json(res->body, "response from " + path);
      }
      last_error = "HTTP " + std::to_string(res->status) + " from " + path;
      if (!res->body.empty()) {
        last_error += ": " + res->body.substr(0, 200);
      }
      if (!retryable_status(res->status)) break;
    }
    fail(ErrorKind::transport, last_error + " (endpoint " + cfg_.endpoint + ")");
  }

  BackendConfig cfg_;
  std::string completions_path_;
  std::string chat_path_;
  std::string probe_path_;
  Semaphore semaphore_;
};

}  // namespace tilt
