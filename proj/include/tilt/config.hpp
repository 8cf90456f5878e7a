#pragma once

// Backend configuration loading. One JSON document selects the backend kind
// and its parameters; relative paths inside the document resolve against the
// document's directory. Secrets never survive into manifests: embed configs
// with redact_secrets().
//
// {"schema": "tilt-backend/1", "kind": "http" | "mock" | "simulator", ...}

#include <memory>
#include <string>

#include "tilt/backend.hpp"
#include "tilt/http_backend.hpp"
#include "tilt/mock_backend.hpp"
#include "tilt/ranker.hpp"
#include "tilt/simulator.hpp"

namespace tilt {

// Any key that smells like a credential gets masked, recursively.
inline json redact_secrets(json doc) {
  if (doc.is_object()) {
    for (auto& [key, value] : doc.items()) {
      std::string lowered = to_lower_copy(key);
      bool secret = lowered.find("token") != std::string::npos ||
                    lowered.find("api_key") != std::string::npos ||
                    lowered.find("secret") != std::string::npos ||
                    lowered.find("password") != std::string::npos;
      bool is_env_name = lowered.size() >= 4 && lowered.substr(lowered.size() - 4) == "_env";
      if (secret && !is_env_name && value.is_string() &&
          !value.get<std::string>().empty()) {
        value = "[redacted]";
      } else if (value.is_object() || value.is_array()) {
        value = redact_secrets(value);
      }
    }
  } else if (doc.is_array()) {
    for (auto& value : doc) {
      if (value.is_object() || value.is_array()) value = redact_secrets(value);
    }
  }
  return doc;
}

inline BackendConfig parse_backend_config(const json& h) {
  BackendConfig cfg;
  cfg.endpoint = h.value("endpoint", std::string());
  cfg.model_id = h.contains("model") ? h.value("model", std::string())
                                     : h.value("model_id", std::string());
  cfg.auth_token = h.value("auth_token", std::string());
  cfg.auth_token_env = h.value("auth_token_env", cfg.auth_token_env);
  cfg.timeout_s = h.value("timeout_s", cfg.timeout_s);
  cfg.max_retries = h.value("max_retries", cfg.max_retries);
  cfg.retry_backoff_s = h.value("retry_backoff_s", cfg.retry_backoff_s);
  cfg.max_parallel_requests = h.value("max_parallel_requests", cfg.max_parallel_requests);
  cfg.logprobs_top_k = h.value("logprobs_top_k", cfg.logprobs_top_k);
  cfg.probe_protocol = h.value("probe_protocol", cfg.probe_protocol);
  if (h.contains("chat_template")) {
    const json& t = h.at("chat_template");
    cfg.chat_template.system = t.value("system", std::string());
    cfg.chat_template.user_prefix = t.value("user_prefix", std::string());
    cfg.chat_template.user_suffix = t.value("user_suffix", std::string());
    cfg.chat_template.assistant_prefix = t.value("assistant_prefix", std::string());
  }
  cfg.validate();
  return cfg;
}

inline BackendPtr make_backend(const json& doc, const std::string& base_dir = "") {
  if (!doc.is_object()) fail(ErrorKind::config, "backend config must be a JSON object");
  if (doc.contains("schema") && doc.at("schema") != "tilt-backend/1") {
    fail(ErrorKind::config, "backend config schema must be tilt-backend/1");
  }
  std::string kind = doc.value("kind", std::string());
  auto resolve = [&base_dir](const std::string& p) {
    std::filesystem::path path(p);
    if (path.is_relative() && !base_dir.empty()) {
      path = std::filesystem::path(base_dir) / path;
    }
    return path.string();
  };

  if (kind == "mock") {
    if (doc.contains("script_file")) {
      return std::make_unique<MockBackend>(
          read_json_file(resolve(doc.at("script_file").get<std::string>())));
    }
    if (doc.contains("script")) return std::make_unique<MockBackend>(doc.at("script"));
    fail(ErrorKind::config, "mock backend config needs \"script\" or \"script_file\"");
  }
  if (kind == "http") {
    BackendConfig cfg = parse_backend_config(doc);
    return std::make_unique<HttpBackend>(
        std::move(cfg), doc.value("completions_path", std::string("/v1/completions")),
        doc.value("chat_path", std::string("/v1/chat/completions")),
        doc.value("probe_path", std::string("/probe")));
  }
  if (kind == "simulator") {
    SimulatorConfig cfg;
    cfg.seed = doc.value("seed", cfg.seed);
    cfg.base_logit = doc.value("base_logit", cfg.base_logit);
    cfg.score_weight = doc.value("score_weight", cfg.score_weight);
    cfg.recency_weight = doc.value("recency_weight", cfg.recency_weight);
    cfg.success_reply = doc.value("success_reply", cfg.success_reply);
    cfg.refusal_reply = doc.value("refusal_reply", cfg.refusal_reply);
    std::unordered_map<std::string, double> table;
    if (doc.contains("ranking_file")) {
      RankingResult ranking =
          load_ranking(resolve(doc.at("ranking_file").get<std::string>()));
      for (const RankedInstruction& ri : ranking.ranking) {
        table[ri.record.text] = ri.score;
      }
    } else if (doc.contains("score_table")) {
      for (const auto& [text, score] : doc.at("score_table").items()) {
        table[text] = score.get<double>();
      }
    } else {
      fail(ErrorKind::config,
           "simulator backend config needs \"ranking_file\" or \"score_table\"");
    }
    return std::make_unique<SimulatorBackend>(std::move(cfg), std::move(table));
  }
  fail(ErrorKind::config, "backend kind must be mock|http|simulator (got \"" + kind + "\")");
}

inline BackendPtr load_backend(const std::string& path) {
  std::filesystem::path p(path);
  return make_backend(read_json_file(path), p.parent_path().string());
}

}  // namespace tilt
