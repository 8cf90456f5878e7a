#pragma once

// Real-world instruction corpus ingestion. Input is an alpaca-style JSON
// list; entries with a non-empty "input" field are skipped because the probe
// only makes sense for self-contained instructions. Instructions that
// manipulate trailing text (translate/rewrite/...) are filtered before
// ranking since they would operate on the spliced probe instead of answering.

#include <string>
#include <unordered_set>
#include <vector>

#include "tilt/io.hpp"
#include "tilt/sha256.hpp"
#include "tilt/text.hpp"

namespace tilt {

struct InstructionRecord {
  std::string id;      // sha256 hex of text; stable join key across runs
  std::string text;
  std::string source;
};

inline void to_json(json& j, const InstructionRecord& r) {
  j = json{{"id", r.id}, {"text", r.text}, {"source", r.source}};
}

inline void from_json(const json& j, InstructionRecord& r) {
  r.id = j.at("id").get<std::string>();
  r.text = j.at("text").get<std::string>();
  r.source = j.value("source", std::string());
}

inline std::string instruction_id(const std::string& text) { return sha256_hex(text); }

inline InstructionRecord make_record(const std::string& text, const std::string& source) {
  return InstructionRecord{instruction_id(text), text, source};
}

inline std::vector<InstructionRecord> parse_corpus(const json& doc, const std::string& source) {
  if (!doc.is_array()) {
    fail(ErrorKind::schema, source + ": corpus must be a JSON list of records");
  }
  std::vector<InstructionRecord> out;
  std::unordered_set<std::string> texts;
  for (const json& entry : doc) {
    if (!entry.is_object() || !entry.contains("instruction")) {
      fail(ErrorKind::schema, source + ": corpus entries need an \"instruction\" field");
    }
    if (entry.contains("input") && entry.at("input").is_string() &&
        !entry.at("input").get<std::string>().empty()) {
      continue;  // instruction depends on extra input; not usable standalone
    }
    std::string text = entry.at("instruction").get<std::string>();
    if (text.empty()) continue;
    if (!texts.insert(text).second) continue;  // duplicate, keep first
    out.push_back(make_record(text, source));
  }
  if (out.empty()) fail(ErrorKind::schema, source + ": no usable instruction records");
  return out;
}

inline std::vector<InstructionRecord> ingest_corpus(const std::string& path) {
  return parse_corpus(read_json_file(path), path);
}

// Reconstruction of the text-manipulation filter; the exact list is
// configuration, these are the defaults.
inline std::vector<std::string> default_manipulation_patterns() {
  return {
      "translate",          "rewrite",          "rephrase",
      "paraphrase",         "summarize",        "summarise",
      "edit the following", "change the following", "correct the following",
      "convert the following", "capitalize the following", "proofread",
  };
}

struct FilterResult {
  std::vector<InstructionRecord> kept;
  size_t removed = 0;
};

// Case-insensitive substring match against the pattern list.
inline FilterResult filter_text_manipulation(
    const std::vector<InstructionRecord>& records,
    const std::vector<std::string>& patterns = default_manipulation_patterns()) {
  std::vector<std::string> lowered;
  lowered.reserve(patterns.size());
  for (const std::string& p : patterns) lowered.push_back(to_lower_copy(p));
  FilterResult result;
  for (const InstructionRecord& r : records) {
    std::string text = to_lower_copy(r.text);
    bool matched = false;
    for (const std::string& p : lowered) {
      if (!p.empty() && text.find(p) != std::string::npos) {
        matched = true;
        break;
      }
    }
    if (matched) {
      ++result.removed;
    } else {
      result.kept.push_back(r);
    }
  }
  return result;
}

inline std::vector<std::string> load_patterns(const std::string& path) {
  json doc = read_json_file(path);
  if (!doc.is_array()) fail(ErrorKind::schema, path + ": pattern file must be a JSON list");
  std::vector<std::string> out;
  for (const json& p : doc) out.push_back(p.get<std::string>());
  return out;
}

}  // namespace tilt
