#pragma once

// Inherent response tendency math. A backend probes a forced continuation
// (one of the affirmation/rejection templates) against an instruction and
// reports, per continuation token, the probability of the forced token and
// the step's maximum token probability. From those we compute per-template
// path values, per-polarity tendency means, and the affirmation/rejection
// score used to rank instructions.
//
// Two scoring modes:
//   linear - per-template ratio = (sum of forced probs) / (sum of max probs).
//            Path values are literal sums of per-step conditional
//            probabilities.
//   log    - per-template ratio = exp(sum log forced - sum log max), i.e. the
//            ratio of path products computed in log space.
// Both keep every ratio in (0, 1], so tendencies and scores stay positive.

#include <cmath>
#include <string>
#include <vector>

#include "tilt/error.hpp"
#include "tilt/io.hpp"

namespace tilt {

enum class Polarity { affirmation, rejection };

inline const char* polarity_name(Polarity p) {
  return p == Polarity::affirmation ? "affirmation" : "rejection";
}

inline Polarity polarity_from_name(const std::string& s) {
  if (s == "affirmation") return Polarity::affirmation;
  if (s == "rejection") return Polarity::rejection;
  fail(ErrorKind::schema, "unknown polarity: \"" + s + "\"");
}

enum class ScoreMode { linear, log };

inline const char* score_mode_name(ScoreMode m) {
  return m == ScoreMode::linear ? "linear" : "log";
}

inline ScoreMode score_mode_from_name(const std::string& s) {
  if (s == "linear") return ScoreMode::linear;
  if (s == "log") return ScoreMode::log;
  fail(ErrorKind::config, "unknown score mode: \"" + s + "\" (expected linear|log)");
}

// One generic affirmation or rejection sentence forced as a continuation.
struct ResponseTemplate {
  std::string text;
  Polarity polarity = Polarity::affirmation;
};

// Per-step pair reported by the backend for one continuation token.
struct StepProbe {
  double forced_prob = 0.0;  // P(forced token | prompt, prefix)
  double max_prob = 0.0;     // max over tokens at this step
};

// All steps of one (instruction, template) probe.
struct ResponseProbe {
  ResponseTemplate tmpl;
  std::vector<StepProbe> steps;
};

struct TendencyScore {
  double t_a = 0.0;
  double t_r = 0.0;
  double score = 0.0;
};

// The (prompt, forced continuation) pair handed to a backend.
struct ProbeRequest {
  std::string prompt;
  std::string continuation;
};

inline void validate_probe_request(const ProbeRequest& req) {
  if (req.prompt.empty()) fail(ErrorKind::precondition, "probe prompt is empty");
  if (req.continuation.empty()) fail(ErrorKind::precondition, "probe continuation is empty");
}

// Rejects malformed step data outright; probabilities are never clamped.
inline void validate_steps(const std::vector<StepProbe>& steps) {
  if (steps.empty()) fail(ErrorKind::precondition, "probe has no steps");
  for (size_t i = 0; i < steps.size(); ++i) {
    const StepProbe& s = steps[i];
    if (!(s.forced_prob > 0.0) || !(s.max_prob > 0.0)) {
      fail(ErrorKind::schema, "malformed step probe at index " + std::to_string(i) +
                                  ": probabilities must be positive");
    }
    if (s.forced_prob > s.max_prob || s.max_prob > 1.0) {
      fail(ErrorKind::schema, "malformed step probe at index " + std::to_string(i) +
                                  ": need 0 < forced <= max <= 1");
    }
  }
}

inline void validate_probe(const ResponseProbe& probe) { validate_steps(probe.steps); }

inline double path_prob(const ResponseProbe& probe) {
  validate_probe(probe);
  double sum = 0.0;
  for (const StepProbe& s : probe.steps) sum += s.forced_prob;
  return sum;
}

inline double argmax_path_prob(const ResponseProbe& probe) {
  validate_probe(probe);
  double sum = 0.0;
  for (const StepProbe& s : probe.steps) sum += s.max_prob;
  return sum;
}

inline double path_log_prob(const ResponseProbe& probe) {
  validate_probe(probe);
  double sum = 0.0;
  for (const StepProbe& s : probe.steps) sum += std::log(s.forced_prob);
  return sum;
}

inline double argmax_path_log_prob(const ResponseProbe& probe) {
  validate_probe(probe);
  double sum = 0.0;
  for (const StepProbe& s : probe.steps) sum += std::log(s.max_prob);
  return sum;
}

// Per-template ratio in (0, 1]; the summand of the tendency mean.
inline double probe_ratio(const ResponseProbe& probe, ScoreMode mode) {
  if (mode == ScoreMode::linear) return path_prob(probe) / argmax_path_prob(probe);
  return std::exp(path_log_prob(probe) - argmax_path_log_prob(probe));
}

// Mean of per-template ratios over all probes of one polarity.
inline double tendency(const std::vector<ResponseProbe>& probes, Polarity polarity,
                       ScoreMode mode = ScoreMode::linear) {
  if (probes.empty()) {
    fail(ErrorKind::precondition,
         std::string("no templates for polarity ") + polarity_name(polarity));
  }
  double sum = 0.0;
  for (const ResponseProbe& probe : probes) {
    if (probe.tmpl.polarity != polarity) {
      fail(ErrorKind::precondition, "mixed polarity in probe set");
    }
    sum += probe_ratio(probe, mode);
  }
  return sum / static_cast<double>(probes.size());
}

inline double inherent_score(double t_a, double t_r) {
  if (!(t_a > 0.0)) fail(ErrorKind::precondition, "degenerate affirmation tendency");
  if (!(t_r > 0.0)) fail(ErrorKind::precondition, "degenerate rejection tendency");
  return t_a / t_r;
}

inline void validate_template_set(const std::vector<ResponseTemplate>& templates) {
  bool has_a = false, has_r = false;
  for (const ResponseTemplate& t : templates) {
    if (t.text.empty()) fail(ErrorKind::schema, "template with empty text");
    (t.polarity == Polarity::affirmation ? has_a : has_r) = true;
  }
  if (!has_a) fail(ErrorKind::schema, "template set has no affirmation templates");
  if (!has_r) fail(ErrorKind::schema, "template set has no rejection templates");
}

// Probes every template against one instruction and assembles the score.
// A failing probe aborts the instruction with the template named in the
// error; templates are never silently dropped.
template <typename Prober>
TendencyScore score_instruction(const std::string& instruction_text,
                                const std::vector<ResponseTemplate>& templates,
                                Prober& prober, ScoreMode mode = ScoreMode::linear) {
  if (instruction_text.empty()) fail(ErrorKind::precondition, "instruction text is empty");
  validate_template_set(templates);
  std::vector<ResponseProbe> affirmations;
  std::vector<ResponseProbe> rejections;
  for (const ResponseTemplate& tmpl : templates) {
    ResponseProbe probe;
    probe.tmpl = tmpl;
    try {
      probe.steps = prober.probe(ProbeRequest{instruction_text, tmpl.text});
      validate_probe(probe);
    } catch (const Error& e) {
      fail(e.kind(), "probe failed for " + std::string(polarity_name(tmpl.polarity)) +
                         " template \"" + tmpl.text + "\": " + e.what());
    }
    (tmpl.polarity == Polarity::affirmation ? affirmations : rejections)
        .push_back(std::move(probe));
  }
  TendencyScore out;
  out.t_a = tendency(affirmations, Polarity::affirmation, mode);
  out.t_r = tendency(rejections, Polarity::rejection, mode);
  out.score = inherent_score(out.t_a, out.t_r);
  return out;
}

// Template file format: a JSON list of {"text": ..., "polarity": ...}.
inline std::vector<ResponseTemplate> parse_templates(const json& doc, const std::string& what) {
  if (!doc.is_array()) fail(ErrorKind::schema, what + ": template file must be a JSON list");
  std::vector<ResponseTemplate> out;
  for (const json& item : doc) {
    if (!item.is_object() || !item.contains("text") || !item.contains("polarity")) {
      fail(ErrorKind::schema, what + ": template records need \"text\" and \"polarity\"");
    }
    ResponseTemplate t;
    t.text = item.at("text").get<std::string>();
    t.polarity = polarity_from_name(item.at("polarity").get<std::string>());
    out.push_back(std::move(t));
  }
  validate_template_set(out);
  return out;
}

inline std::vector<ResponseTemplate> load_templates(const std::string& path) {
  return parse_templates(read_json_file(path), path);
}

}  // namespace tilt
