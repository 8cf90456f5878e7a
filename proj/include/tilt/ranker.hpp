#pragma once

// Scores a corpus with score_instruction under bounded parallelism and
// persists a deterministic ranking: descending score, ties broken by
// ascending id, ranks contiguous from 1. Long runs checkpoint completed
// scores every N records so they can resume.
//
// Ranking file: JSONL. First line is the manifest, then one line per ranked
// instruction.

#include <algorithm>
#include <mutex>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "tilt/backend.hpp"
#include "tilt/corpus.hpp"
#include "tilt/parallel.hpp"
#include "tilt/rng.hpp"
#include "tilt/time.hpp"

namespace tilt {

struct RankedInstruction {
  InstructionRecord record;
  double t_a = 0.0;
  double t_r = 0.0;
  double score = 0.0;
  int rank = 0;
};

struct RankingManifest {
  std::string backend_id;
  std::string template_hash;
  std::string corpus_hash;
  std::string mode = "linear";
  std::string timestamp;  // empty when timestamps are disabled
  size_t count = 0;
  std::vector<json> failures;  // {"id", "error"} when skip_failures is on
};

struct RankingResult {
  RankingManifest manifest;
  std::vector<RankedInstruction> ranking;
};

struct RankOptions {
  ScoreMode mode = ScoreMode::linear;
  bool skip_failures = false;
  int workers = 4;
  size_t checkpoint_every = 500;
  std::string checkpoint_path;  // empty disables checkpointing
  bool resume = false;
  bool record_timestamps = true;
  std::string template_hash;  // hash of the template file, for the manifest
  std::string corpus_hash;    // hash of the corpus file, for the manifest
};

namespace detail {

struct ScoredEntry {
  TendencyScore score;
  bool done = false;
};

inline json checkpoint_header(const std::string& backend_id, ScoreMode mode,
                              const std::string& template_hash) {
  return json{{"schema", "tilt-rank-ckpt/1"},
              {"backend_id", backend_id},
              {"mode", score_mode_name(mode)},
              {"template_hash", template_hash}};
}

}  // namespace detail

inline void sort_ranking(std::vector<RankedInstruction>& ranking) {
  std::sort(ranking.begin(), ranking.end(),
            [](const RankedInstruction& a, const RankedInstruction& b) {
              if (a.score != b.score) return a.score > b.score;
              return a.record.id < b.record.id;
            });
  for (size_t i = 0; i < ranking.size(); ++i) ranking[i].rank = static_cast<int>(i) + 1;
}

inline RankingResult rank_corpus(const std::vector<InstructionRecord>& records,
                                 const std::vector<ResponseTemplate>& templates,
                                 Backend& prober, const RankOptions& options = {}) {
  if (records.empty()) fail(ErrorKind::precondition, "cannot rank an empty record set");
  validate_template_set(templates);

  std::vector<detail::ScoredEntry> scored(records.size());
  json ckpt_header = detail::checkpoint_header(prober.id(), options.mode, options.template_hash);

  // Resume: pre-fill scores from a compatible checkpoint.
  if (options.resume && !options.checkpoint_path.empty() &&
      std::filesystem::exists(options.checkpoint_path)) {
    std::vector<json> lines = read_jsonl(options.checkpoint_path);
    if (lines.empty() || lines.front() != ckpt_header) {
      fail(ErrorKind::config,
           "checkpoint does not match this backend/template/mode: " + options.checkpoint_path);
    }
    std::unordered_map<std::string, TendencyScore> by_id;
    for (size_t i = 1; i < lines.size(); ++i) {
      const json& l = lines[i];
      by_id[l.at("id").get<std::string>()] =
          TendencyScore{l.at("t_a").get<double>(), l.at("t_r").get<double>(),
                        l.at("score").get<double>()};
    }
    for (size_t i = 0; i < records.size(); ++i) {
      auto it = by_id.find(records[i].id);
      if (it != by_id.end()) {
        scored[i] = {it->second, true};
      }
    }
  }

  std::mutex state_mutex;
  std::vector<json> failures;
  size_t completed_since_checkpoint = 0;

  auto write_checkpoint = [&]() {  // caller holds state_mutex
    if (options.checkpoint_path.empty()) return;
    std::string body = ckpt_header.dump() + "\n";
    for (size_t i = 0; i < records.size(); ++i) {
      if (!scored[i].done) continue;
      body += json{{"id", records[i].id},
                   {"t_a", scored[i].score.t_a},
                   {"t_r", scored[i].score.t_r},
                   {"score", scored[i].score.score}}
                  .dump() +
              "\n";
    }
    write_text_file_atomic(options.checkpoint_path, body);
  };

  parallel_for(records.size(), std::max(1, options.workers), [&](size_t i) {
    {
      std::lock_guard<std::mutex> lock(state_mutex);
      if (scored[i].done) return;
    }
    TendencyScore s;
    try {
      s = score_instruction(records[i].text, templates, prober, options.mode);
    } catch (const Error& e) {
      if (!options.skip_failures) {
        fail(e.kind(), "scoring failed for instruction " + records[i].id + ": " + e.what());
      }
      std::lock_guard<std::mutex> lock(state_mutex);
      failures.push_back(json{{"id", records[i].id}, {"error", e.what()}});
      return;
    }
    std::lock_guard<std::mutex> lock(state_mutex);
    scored[i] = {s, true};
    if (++completed_since_checkpoint >= options.checkpoint_every) {
      completed_since_checkpoint = 0;
      write_checkpoint();
    }
  });

  RankingResult result;
  result.manifest.backend_id = prober.id();
  result.manifest.template_hash = options.template_hash;
  result.manifest.corpus_hash = options.corpus_hash;
  result.manifest.mode = score_mode_name(options.mode);
  result.manifest.failures = std::move(failures);
  if (options.record_timestamps) result.manifest.timestamp = now_rfc3339();
  for (size_t i = 0; i < records.size(); ++i) {
    if (!scored[i].done) continue;  // skipped failure
    RankedInstruction ri;
    ri.record = records[i];
    ri.t_a = scored[i].score.t_a;
    ri.t_r = scored[i].score.t_r;
    ri.score = scored[i].score.score;
    result.ranking.push_back(std::move(ri));
  }
  sort_ranking(result.ranking);
  result.manifest.count = result.ranking.size();

  if (!options.checkpoint_path.empty()) {
    std::error_code ec;
    std::filesystem::remove(options.checkpoint_path, ec);
  }
  return result;
}

inline void save_ranking(const std::string& path, const RankingResult& result) {
  json manifest{{"schema", "tilt-ranking/1"},
                {"backend_id", result.manifest.backend_id},
                {"template_hash", result.manifest.template_hash},
                {"corpus_hash", result.manifest.corpus_hash},
                {"mode", result.manifest.mode},
                {"count", result.manifest.count},
                {"failures", result.manifest.failures},
                {"ts", result.manifest.timestamp}};
  std::string body = manifest.dump() + "\n";
  for (const RankedInstruction& ri : result.ranking) {
    body += json{{"id", ri.record.id},
                 {"text", ri.record.text},
                 {"source", ri.record.source},
                 {"t_a", ri.t_a},
                 {"t_r", ri.t_r},
                 {"score", ri.score},
                 {"rank", ri.rank}}
                .dump() +
            "\n";
  }
  write_text_file_atomic(path, body);
}

inline RankingResult load_ranking(const std::string& path) {
  std::vector<json> lines = read_jsonl(path);
  if (lines.empty() || !lines.front().contains("schema") ||
      lines.front().at("schema") != "tilt-ranking/1") {
    fail(ErrorKind::schema, path + ": not a tilt-ranking/1 file");
  }
  RankingResult result;
  const json& m = lines.front();
  result.manifest.backend_id = m.value("backend_id", std::string());
  result.manifest.template_hash = m.value("template_hash", std::string());
  result.manifest.corpus_hash = m.value("corpus_hash", std::string());
  result.manifest.mode = m.value("mode", std::string("linear"));
  result.manifest.timestamp = m.value("ts", std::string());
  result.manifest.count = m.value("count", size_t{0});
  for (size_t i = 1; i < lines.size(); ++i) {
    const json& l = lines[i];
    RankedInstruction ri;
    ri.record.id = l.at("id").get<std::string>();
    ri.record.text = l.at("text").get<std::string>();
    ri.record.source = l.value("source", std::string());
    ri.t_a = l.at("t_a").get<double>();
    ri.t_r = l.at("t_r").get<double>();
    ri.score = l.at("score").get<double>();
    ri.rank = l.at("rank").get<int>();
    result.ranking.push_back(std::move(ri));
  }
  if (result.ranking.empty()) fail(ErrorKind::schema, path + ": ranking has no records");
  return result;
}

// ---------------------------------------------------------------------------
// Selection strategies over a ranking.

enum class SelectionKind { top, top_n, random, bottom_n };

inline const char* selection_kind_name(SelectionKind k) {
  switch (k) {
    case SelectionKind::top: return "top";
    case SelectionKind::top_n: return "topn";
    case SelectionKind::random: return "random";
    case SelectionKind::bottom_n: return "bottomn";
  }
  return "unknown";
}

inline SelectionKind selection_kind_from_name(const std::string& s) {
  if (s == "top") return SelectionKind::top;
  if (s == "topn" || s == "top_n") return SelectionKind::top_n;
  if (s == "random") return SelectionKind::random;
  if (s == "bottomn" || s == "bottom_n") return SelectionKind::bottom_n;
  fail(ErrorKind::config, "unknown selection strategy: \"" + s + "\"");
}

struct SelectionStrategy {
  SelectionKind kind = SelectionKind::top;
  size_t k = 2;
  double top_threshold = 1.1;     // pool floor for top_n
  double bottom_threshold = 0.6;  // pool ceiling for bottom_n
  uint64_t seed = 0;

  void validate() const {
    if (k < 1) fail(ErrorKind::config, "selection k must be >= 1");
    if (!(top_threshold > bottom_threshold)) {
      fail(ErrorKind::config, "top_threshold must exceed bottom_threshold");
    }
  }
};

// Draw order is preserved for the random strategies; "top" is the first k by
// rank.
inline std::vector<InstructionRecord> select_instructions(
    const std::vector<RankedInstruction>& ranking, const SelectionStrategy& strategy) {
  strategy.validate();
  std::vector<const RankedInstruction*> pool;
  for (const RankedInstruction& ri : ranking) {
    switch (strategy.kind) {
      case SelectionKind::top:
      case SelectionKind::random:
        pool.push_back(&ri);
        break;
      case SelectionKind::top_n:
        if (ri.score >= strategy.top_threshold) pool.push_back(&ri);
        break;
      case SelectionKind::bottom_n:
        if (ri.score <= strategy.bottom_threshold) pool.push_back(&ri);
        break;
    }
  }
  if (pool.size() < strategy.k) {
    fail(ErrorKind::precondition,
         std::string(selection_kind_name(strategy.kind)) + " selection pool has " +
             std::to_string(pool.size()) + " members, need " + std::to_string(strategy.k));
  }
  std::vector<InstructionRecord> out;
  out.reserve(strategy.k);
  if (strategy.kind == SelectionKind::top) {
    for (size_t i = 0; i < strategy.k; ++i) out.push_back(pool[i]->record);
    return out;
  }
  DetRng rng(strategy.seed);
  for (size_t idx : sample_indices(pool.size(), strategy.k, rng)) {
    out.push_back(pool[idx]->record);
  }
  return out;
}

}  // namespace tilt
