#pragma once

// File helpers shared by every module that persists artifacts. Writes that
// replace a file go through write-temp-then-rename.

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "tilt/error.hpp"

namespace tilt {

using json = nlohmann::json;

inline std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::io, "cannot open file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_text_file_atomic(const std::string& path, const std::string& content) {
  std::filesystem::path target(path);
  if (target.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(target.parent_path(), ec);
  }
  std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorKind::io, "cannot write file: " + tmp);
    out << content;
    out.flush();
    if (!out.good()) fail(ErrorKind::io, "short write: " + tmp);
  }
  std::error_code ec;
  std::filesystem::rename(tmp, target, ec);
  if (ec) fail(ErrorKind::io, "rename failed for " + path + ": " + ec.message());
}

inline json parse_json(const std::string& text, const std::string& what) {
  json j = json::parse(text, nullptr, false);
  if (j.is_discarded()) fail(ErrorKind::schema, "malformed JSON in " + what);
  return j;
}

inline json read_json_file(const std::string& path) {
  return parse_json(read_text_file(path), path);
}

// Reads one JSON value per non-empty line.
inline std::vector<json> read_jsonl(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::io, "cannot open file: " + path);
  std::vector<json> out;
  std::string line;
  size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    json j = json::parse(line, nullptr, false);
    if (j.is_discarded()) {
      fail(ErrorKind::schema, path + ":" + std::to_string(lineno) + ": malformed JSONL line");
    }
    out.push_back(std::move(j));
  }
  return out;
}

// Like read_jsonl but stops at the first malformed line instead of failing.
// Interrupted writers leave at most one truncated trailing line; everything
// before it is a valid prefix worth resuming from.
inline std::vector<json> read_jsonl_prefix(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::io, "cannot open file: " + path);
  std::vector<json> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    json j = json::parse(line, nullptr, false);
    if (j.is_discarded()) break;
    out.push_back(std::move(j));
  }
  return out;
}

// Append-as-you-go JSONL writer; each write lands on disk before returning.
class JsonlWriter {
 public:
  explicit JsonlWriter(const std::string& path, bool truncate = true)
      : path_(path),
        out_(path, std::ios::binary | (truncate ? std::ios::trunc : std::ios::app)) {
    if (!out_) fail(ErrorKind::io, "cannot open file for writing: " + path);
  }

  void write(const json& j) {
    out_ << j.dump() << '\n';
    out_.flush();
    if (!out_.good()) fail(ErrorKind::io, "write failed: " + path_);
  }

  const std::string& path() const { return path_; }

 private:
  std::string path_;
  std::ofstream out_;
};

}  // namespace tilt
