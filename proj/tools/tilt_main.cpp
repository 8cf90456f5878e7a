// tilt command line: rank instructions by inherent response tendency, select
// and forge attack prompts, run campaigns, evaluate verdicts, and emit
// reports. Every subcommand reads/writes versioned artifacts with manifest
// hashes so any report number can be traced back to its inputs.

#include <CLI11.hpp>

#include <iostream>
#include <string>
#include <vector>

#include "tilt/tilt.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInternal = 1;
constexpr int kExitUsage = 2;
constexpr int kExitMissingFile = 3;
constexpr int kExitBadContent = 4;
constexpr int kExitBackend = 5;
constexpr int kExitErroredItems = 6;

constexpr const char* kExitCodeFooter =
    "Exit codes:\n"
    "  0  success\n"
    "  1  unexpected internal error\n"
    "  2  usage error (unknown flag, missing required option)\n"
    "  3  missing or unreadable file\n"
    "  4  malformed content (schema, config, precondition)\n"
    "  5  backend failure (transport, capability, alignment)\n"
    "  6  campaign finished but some items errored\n";

int exit_code_for(const tilt::Error& e) {
  switch (e.kind()) {
    case tilt::ErrorKind::io:
      return kExitMissingFile;
    case tilt::ErrorKind::transport:
    case tilt::ErrorKind::capability:
    case tilt::ErrorKind::alignment:
      return kExitBackend;
    default:
      return kExitBadContent;
  }
}

std::string file_hash(const std::string& path) { return tilt::Sha256::hex_file(path); }

std::string manifest_path_for(const std::string& out, const std::string& explicit_path) {
  return explicit_path.empty() ? out + ".manifest.json" : explicit_path;
}

void write_manifest(const std::string& path, tilt::json manifest) {
  manifest["schema"] = "tilt-manifest/1";
  manifest["tool_version"] = tilt::kVersion;
  tilt::write_text_file_atomic(path, manifest.dump(2) + "\n");
}

std::vector<size_t> parse_size_list(const std::string& csv) {
  std::vector<size_t> out;
  std::string cur;
  for (char c : csv + ",") {
    if (c == ',') {
      if (!cur.empty()) out.push_back(static_cast<size_t>(std::stoul(cur)));
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  return out;
}

std::vector<std::string> parse_name_list(const std::string& csv) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : csv + ",") {
    if (c == ',') {
      if (!cur.empty()) out.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------

struct RankArgs {
  std::string corpus, backend, templates, out = "ranking.jsonl";
  std::string mode = "linear";
  std::string filter_patterns;
  bool no_filter = false;
  bool skip_failures = false;
  bool resume = false;
  bool no_timestamps = false;
  size_t checkpoint_every = 500;
  int workers = 0;
};

int cmd_rank(const RankArgs& args) {
  std::vector<tilt::InstructionRecord> records = tilt::ingest_corpus(args.corpus);
  size_t removed = 0;
  if (!args.no_filter) {
    std::vector<std::string> patterns = args.filter_patterns.empty()
                                            ? tilt::default_manipulation_patterns()
                                            : tilt::load_patterns(args.filter_patterns);
    tilt::FilterResult filtered = tilt::filter_text_manipulation(records, patterns);
    removed = filtered.removed;
    records = std::move(filtered.kept);
    if (records.empty()) {
      tilt::fail(tilt::ErrorKind::precondition, "text-manipulation filter removed every record");
    }
  }
  std::vector<tilt::ResponseTemplate> templates = tilt::load_templates(args.templates);
  tilt::BackendPtr backend = tilt::load_backend(args.backend);

  tilt::RankOptions options;
  options.mode = tilt::score_mode_from_name(args.mode);
  options.skip_failures = args.skip_failures;
  options.workers = args.workers > 0 ? args.workers : backend->max_parallel_requests();
  options.checkpoint_every = args.checkpoint_every;
  options.checkpoint_path = args.out + ".ckpt";
  options.resume = args.resume;
  options.record_timestamps = !args.no_timestamps;
  options.template_hash = file_hash(args.templates);
  options.corpus_hash = file_hash(args.corpus);

  tilt::RankingResult result = tilt::rank_corpus(records, templates, *backend, options);
  tilt::save_ranking(args.out, result);
  std::cerr << "ranked " << result.ranking.size() << " instructions (filtered " << removed
            << ", failures " << result.manifest.failures.size() << ") -> " << args.out << "\n";
  return result.manifest.failures.empty() ? kExitOk : kExitErroredItems;
}

struct SelectArgs {
  std::string ranking, out = "selection.json";
  std::string strategy = "top";
  size_t k = 2;
  double top_threshold = 1.1;
  double bottom_threshold = 0.6;
  uint64_t seed = 0;
};

int cmd_select(const SelectArgs& args) {
  tilt::RankingResult ranking = tilt::load_ranking(args.ranking);
  tilt::SelectionStrategy strategy;
  strategy.kind = tilt::selection_kind_from_name(args.strategy);
  strategy.k = args.k;
  strategy.top_threshold = args.top_threshold;
  strategy.bottom_threshold = args.bottom_threshold;
  strategy.seed = args.seed;
  std::vector<tilt::InstructionRecord> picked =
      tilt::select_instructions(ranking.ranking, strategy);
  tilt::json doc{{"schema", "tilt-selection/1"},
                 {"strategy", args.strategy},
                 {"k", args.k},
                 {"seed", args.seed},
                 {"ranking_hash", file_hash(args.ranking)},
                 {"records", picked}};
  tilt::write_text_file_atomic(args.out, doc.dump(2) + "\n");
  std::cerr << "selected " << picked.size() << " instructions -> " << args.out << "\n";
  return kExitOk;
}

struct ForgeArgs {
  std::string probes, ranking, out = "prompts.jsonl";
  std::string strategy = "ours";
  std::string selection = "top";
  size_t k = 2;
  std::string position = "end";
  std::string numbering = "numbered_list";
  std::string preamble;
  std::string role_template;
  std::string suffix;
  std::string suffix_file;
  size_t suffix_index = 0;
  uint64_t seed = 0;
  bool pipeline = false;
};

int cmd_forge(const ForgeArgs& args) {
  std::vector<tilt::ProbeInstruction> probes = tilt::load_probe_file(args.probes);
  tilt::RankingResult ranking;
  bool have_ranking = !args.ranking.empty();
  if (have_ranking) ranking = tilt::load_ranking(args.ranking);

  tilt::AttemptSpec spec;
  spec.strategy = args.strategy;
  spec.splice.k = args.k;
  spec.splice.position = tilt::probe_position_from_name(args.position);
  spec.splice.numbering = tilt::numbering_from_name(args.numbering);
  spec.splice.preamble = args.preamble;
  spec.selection.kind = tilt::selection_kind_from_name(args.selection);
  spec.selection.k = args.k;
  spec.selection.seed = args.seed;
  spec.pipeline = args.pipeline;
  spec.seed = args.seed;
  if (!args.role_template.empty()) spec.role_template = tilt::read_text_file(args.role_template);
  if (!args.suffix.empty()) {
    spec.attack_suffix = args.suffix;
  } else if (!args.suffix_file.empty()) {
    std::vector<std::string> lines;
    for (const std::string& line : tilt::split_lines(tilt::read_text_file(args.suffix_file))) {
      if (!line.empty()) lines.push_back(line);
    }
    if (args.suffix_index >= lines.size()) {
      tilt::fail(tilt::ErrorKind::config, "suffix index out of range for " + args.suffix_file);
    }
    spec.attack_suffix = lines[args.suffix_index];
  }
  if (spec.needs_ranking() && !have_ranking) {
    tilt::fail(tilt::ErrorKind::precondition,
               "strategy \"" + args.strategy + "\" requires --ranking");
  }

  tilt::JsonlWriter writer(args.out);
  writer.write(tilt::json{{"schema", "tilt-prompts/1"},
                          {"strategy", args.strategy},
                          {"probes_hash", file_hash(args.probes)},
                          {"ranking_hash", have_ranking ? file_hash(args.ranking) : ""},
                          {"numbering", args.numbering},
                          {"position", args.position},
                          {"k", args.k},
                          {"seed", args.seed},
                          {"count", probes.size()}});
  for (const tilt::ProbeInstruction& probe : probes) {
    tilt::BuiltAttempt built =
        tilt::build_attempt(spec, 0, probe, have_ranking ? &ranking : nullptr);
    tilt::json line{{"probe_id", probe.id}, {"strategy", built.strategy_tag()}};
    if (built.pipeline) {
      tilt::json rounds = tilt::json::array();
      for (const tilt::AttackPrompt& r : built.plan.rounds) rounds.push_back(r.rendered);
      line["mode"] = "pipeline";
      line["rounds"] = rounds;
    } else {
      tilt::json segments = tilt::json::array();
      for (const tilt::Segment& s : built.prompt.segments) {
        segments.push_back(tilt::json{
            {"text", s.text}, {"kind", s.kind == tilt::SegmentKind::probe ? "probe" : "benign"}});
      }
      line["mode"] = "parallel";
      line["prompt"] = built.prompt.rendered;
      line["segments"] = segments;
    }
    writer.write(line);
  }
  std::cerr << "forged " << probes.size() << " prompts -> " << args.out << "\n";
  return kExitOk;
}

struct AttackArgs {
  std::string probes, ranking, target, policy, out = "runs.jsonl";
  std::string lexicon;
  bool resume = false;
  bool no_timestamps = false;
  int workers = 0;
};

int cmd_attack(const AttackArgs& args) {
  std::vector<tilt::ProbeInstruction> probes = tilt::load_probe_file(args.probes);
  tilt::BackendPtr target = tilt::load_backend(args.target);
  tilt::AttemptPolicy policy =
      args.policy.empty() ? tilt::default_policy() : tilt::load_policy(args.policy);

  tilt::RankingResult ranking;
  bool have_ranking = !args.ranking.empty();
  if (have_ranking) ranking = tilt::load_ranking(args.ranking);

  tilt::CampaignOptions options;
  options.out_path = args.out;
  options.resume = args.resume;
  options.workers = args.workers;
  options.record_timestamps = !args.no_timestamps;
  options.ranking_hash = have_ranking ? file_hash(args.ranking) : "";
  options.probes_hash = file_hash(args.probes);
  options.policy_hash = args.policy.empty() ? "" : file_hash(args.policy);
  options.target_config = tilt::redact_secrets(tilt::read_json_file(args.target));
  if (!args.lexicon.empty()) options.lexicon = tilt::RejectionLexicon::load(args.lexicon);

  tilt::CampaignSummary summary = tilt::run_campaign(
      probes, policy, *target, have_ranking ? &ranking : nullptr, options);
  std::cerr << "campaign: " << summary.total << " probes, " << summary.reused << " reused, "
            << summary.errored << " errored -> " << args.out << "\n";
  return summary.errored == 0 ? kExitOk : kExitErroredItems;
}

struct EvalArgs {
  std::string runs, out = "verdicts.jsonl";
  std::string evaluator = "kwm";
  std::string lexicon;
  std::string judge;
  std::string judge_template;
  std::string harmful_label = "harmful";
  std::string harmless_label = "harmless";
};

int cmd_eval(const EvalArgs& args) {
  tilt::json runs_manifest;
  std::vector<tilt::json> records = tilt::load_run_records(args.runs, &runs_manifest);
  std::vector<tilt::VerdictRecord> verdicts;
  tilt::json manifest{{"evaluator", args.evaluator},
                      {"runs_hash", file_hash(args.runs)},
                      {"target_id", runs_manifest.value("target_id", std::string())}};
  if (args.evaluator == "kwm") {
    tilt::RejectionLexicon lexicon = args.lexicon.empty()
                                         ? tilt::RejectionLexicon::defaults()
                                         : tilt::RejectionLexicon::load(args.lexicon);
    manifest["lexicon_hash"] =
        args.lexicon.empty() ? "builtin" : file_hash(args.lexicon);
    verdicts = tilt::evaluate_runs_kwm(records, lexicon);
  } else if (args.evaluator == "judge") {
    if (args.judge.empty() || args.judge_template.empty()) {
      tilt::fail(tilt::ErrorKind::config,
                 "judge evaluation needs --judge and --judge-template");
    }
    tilt::BackendPtr judge = tilt::load_backend(args.judge);
    tilt::JudgeTemplate tmpl = tilt::JudgeTemplate::load(args.judge_template);
    tilt::JudgeLabels labels{args.harmful_label, args.harmless_label};
    manifest["judge_id"] = judge->id();
    manifest["judge_config"] = tilt::redact_secrets(tilt::read_json_file(args.judge));
    manifest["judge_template_hash"] = file_hash(args.judge_template);
    verdicts = tilt::evaluate_runs_judge(records, *judge, tmpl, labels);
  } else {
    tilt::fail(tilt::ErrorKind::config, "evaluator must be kwm|judge");
  }
  tilt::save_verdicts(args.out, verdicts, manifest);
  size_t indeterminate = 0;
  for (const tilt::VerdictRecord& v : verdicts) {
    if (v.verdict.status == tilt::VerdictStatus::indeterminate) ++indeterminate;
  }
  std::cerr << "evaluated " << verdicts.size() << " responses (" << indeterminate
            << " indeterminate) -> " << args.out << "\n";
  return kExitOk;
}

struct ReportArgs {
  std::vector<std::string> runs;
  std::vector<std::string> verdicts;
  std::string out_csv = "report.csv";
  std::string out_md = "report.md";
  std::string out_manifest;
};

int cmd_report(const ReportArgs& args) {
  if (args.verdicts.empty()) {
    tilt::fail(tilt::ErrorKind::precondition, "report needs at least one --verdicts file");
  }
  if (!args.runs.empty() && args.runs.size() != args.verdicts.size()) {
    tilt::fail(tilt::ErrorKind::precondition,
               "--runs and --verdicts must pair up (got " + std::to_string(args.runs.size()) +
                   " vs " + std::to_string(args.verdicts.size()) + ")");
  }
  std::vector<tilt::ReportInput> inputs;
  tilt::json chain = tilt::json::array();
  for (size_t i = 0; i < args.verdicts.size(); ++i) {
    tilt::json verdict_manifest;
    tilt::ReportInput input;
    input.verdicts = tilt::load_verdicts(args.verdicts[i], &verdict_manifest);
    input.evaluator = verdict_manifest.value("evaluator", std::string("kwm"));
    input.model = verdict_manifest.value("target_id", std::string("unknown"));
    tilt::json link{{"verdicts", args.verdicts[i]},
                    {"verdicts_hash", file_hash(args.verdicts[i])},
                    {"runs_hash", verdict_manifest.value("runs_hash", std::string())}};
    if (!args.runs.empty()) {
      std::string actual = file_hash(args.runs[i]);
      std::string expected = verdict_manifest.value("runs_hash", std::string());
      if (!expected.empty() && expected != actual) {
        tilt::fail(tilt::ErrorKind::schema, "verdicts " + args.verdicts[i] +
                                                " were not produced from runs " + args.runs[i]);
      }
      tilt::json runs_manifest;
      std::vector<tilt::json> records = tilt::load_run_records(args.runs[i], &runs_manifest);
      (void)records;
      if (input.model == "unknown") {
        input.model = runs_manifest.value("target_id", std::string("unknown"));
      }
      link["runs"] = args.runs[i];
      link["ranking_hash"] = runs_manifest.value("ranking_hash", std::string());
    }
    chain.push_back(link);
    inputs.push_back(std::move(input));
  }
  tilt::ReportTable table = tilt::build_report_table(inputs);
  tilt::write_text_file_atomic(args.out_csv, tilt::report_csv(table));
  tilt::write_text_file_atomic(args.out_md, tilt::report_markdown(table));
  write_manifest(manifest_path_for(args.out_csv, args.out_manifest),
                 tilt::json{{"kind", "report"},
                            {"inputs", chain},
                            {"csv", args.out_csv},
                            {"csv_hash", file_hash(args.out_csv)},
                            {"md", args.out_md},
                            {"md_hash", file_hash(args.out_md)}});
  std::cerr << "report -> " << args.out_csv << ", " << args.out_md << "\n";
  return kExitOk;
}

struct HistogramArgs {
  std::string ranking, out = "histogram.csv";
  std::string out_manifest;
  size_t bins = 50;
};

int cmd_histogram(const HistogramArgs& args) {
  tilt::RankingResult ranking = tilt::load_ranking(args.ranking);
  tilt::Histogram hist = tilt::histogram_export(ranking, args.bins);
  tilt::write_text_file_atomic(args.out, tilt::histogram_csv(hist));
  write_manifest(manifest_path_for(args.out, args.out_manifest),
                 tilt::json{{"kind", "histogram"},
                            {"ranking_hash", file_hash(args.ranking)},
                            {"bins", args.bins},
                            {"count", ranking.ranking.size()},
                            {"csv_hash", file_hash(args.out)}});
  std::cerr << "histogram (" << args.bins << " bins) -> " << args.out << "\n";
  return kExitOk;
}

struct AblationArgs {
  std::string probes, ranking, target, out = "ablation.csv";
  std::string out_manifest;
  std::string ks = "2,4";
  std::string positions = "front,middle,end";
  std::string strategies = "top,topn,random,bottomn";
  std::string lexicon;
  double top_threshold = 1.1;
  double bottom_threshold = 0.6;
  uint64_t seed = 0;
};

int cmd_ablation(const AblationArgs& args) {
  std::vector<tilt::ProbeInstruction> probes = tilt::load_probe_file(args.probes);
  tilt::RankingResult ranking = tilt::load_ranking(args.ranking);
  tilt::BackendPtr target = tilt::load_backend(args.target);
  tilt::AblationSettings settings;
  settings.ks = parse_size_list(args.ks);
  settings.positions.clear();
  for (const std::string& p : parse_name_list(args.positions)) {
    settings.positions.push_back(tilt::probe_position_from_name(p));
  }
  settings.strategies.clear();
  for (const std::string& s : parse_name_list(args.strategies)) {
    settings.strategies.push_back(tilt::selection_kind_from_name(s));
  }
  settings.top_threshold = args.top_threshold;
  settings.bottom_threshold = args.bottom_threshold;
  settings.seed = args.seed;
  tilt::RejectionLexicon lexicon = args.lexicon.empty()
                                       ? tilt::RejectionLexicon::defaults()
                                       : tilt::RejectionLexicon::load(args.lexicon);
  tilt::AblationResult result =
      tilt::ablation_grid(ranking, probes, *target, settings, lexicon);
  tilt::write_text_file_atomic(args.out, tilt::ablation_csv(result, settings));
  write_manifest(manifest_path_for(args.out, args.out_manifest),
                 tilt::json{{"kind", "ablation"},
                            {"ranking_hash", file_hash(args.ranking)},
                            {"probes_hash", file_hash(args.probes)},
                            {"target_id", target->id()},
                            {"seed", args.seed},
                            {"csv_hash", file_hash(args.out)}});
  std::cerr << "ablation grid (" << result.cells.size() << " cells) -> " << args.out << "\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"tilt: inherent-response-tendency probing and splice-attack harness"};
  app.require_subcommand(1);
  app.footer(kExitCodeFooter);

  RankArgs rank_args;
  CLI::App* rank = app.add_subcommand("rank", "Score and rank an instruction corpus");
  rank->add_option("--corpus", rank_args.corpus, "Alpaca-style corpus JSON")->required();
  rank->add_option("--backend", rank_args.backend, "Backend config JSON")->required();
  rank->add_option("--templates", rank_args.templates, "Response template JSON")->required();
  rank->add_option("--out", rank_args.out, "Output ranking JSONL");
  rank->add_option("--mode", rank_args.mode, "Scoring mode: linear|log");
  rank->add_option("--filter-patterns", rank_args.filter_patterns,
                   "JSON list of text-manipulation patterns");
  rank->add_flag("--no-filter", rank_args.no_filter, "Skip the text-manipulation filter");
  rank->add_flag("--skip-failures", rank_args.skip_failures,
                 "List failing instructions in the manifest instead of aborting");
  rank->add_flag("--resume", rank_args.resume, "Resume from the checkpoint file");
  rank->add_flag("--no-timestamps", rank_args.no_timestamps,
                 "Omit timestamps for byte-reproducible output");
  rank->add_option("--checkpoint-every", rank_args.checkpoint_every,
                   "Checkpoint cadence in records");
  rank->add_option("--workers", rank_args.workers,
                   "Scoring fan-out (default: backend max_parallel_requests)");

  SelectArgs select_args;
  CLI::App* select = app.add_subcommand("select", "Select instructions from a ranking");
  select->add_option("--ranking", select_args.ranking, "Ranking JSONL")->required();
  select->add_option("--strategy", select_args.strategy, "top|topn|random|bottomn");
  select->add_option("--k", select_args.k, "Number of instructions");
  select->add_option("--top-threshold", select_args.top_threshold, "TopN pool floor");
  select->add_option("--bottom-threshold", select_args.bottom_threshold,
                     "BottomN pool ceiling");
  select->add_option("--seed", select_args.seed, "Draw seed");
  select->add_option("--out", select_args.out, "Output selection JSON");

  ForgeArgs forge_args;
  CLI::App* forge = app.add_subcommand("forge", "Assemble attack prompts");
  forge->add_option("--probes", forge_args.probes, "Probe instructions JSON")->required();
  forge->add_option("--ranking", forge_args.ranking, "Ranking JSONL (ours/dist)");
  forge->add_option("--strategy", forge_args.strategy, "ours|none|comp|evil|dist|suffix");
  forge->add_option("--selection", forge_args.selection, "Benign choice: top|topn|random|bottomn");
  forge->add_option("--k", forge_args.k, "Spliced instruction count");
  forge->add_option("--position", forge_args.position, "Probe position: front|middle|end");
  forge->add_option("--numbering", forge_args.numbering, "numbered_list|blank_line");
  forge->add_option("--preamble", forge_args.preamble, "Optional preamble line");
  forge->add_option("--role-template", forge_args.role_template,
                    "Role template file with {PROBE} (evil)");
  forge->add_option("--suffix", forge_args.suffix, "Attack suffix string (suffix)");
  forge->add_option("--suffix-file", forge_args.suffix_file, "Suffix list, one per line");
  forge->add_option("--suffix-index", forge_args.suffix_index, "Line to use from --suffix-file");
  forge->add_option("--seed", forge_args.seed, "Draw seed (dist / non-top selection)");
  forge->add_flag("--pipeline", forge_args.pipeline, "One instruction per round, probe last");
  forge->add_option("--out", forge_args.out, "Output prompts JSONL");

  AttackArgs attack_args;
  CLI::App* attack = app.add_subcommand("attack", "Run an attack campaign");
  attack->add_option("--probes", attack_args.probes, "Probe instructions JSON")->required();
  attack->add_option("--ranking", attack_args.ranking, "Ranking JSONL");
  attack->add_option("--target", attack_args.target, "Target backend config JSON")->required();
  attack->add_option("--policy", attack_args.policy,
                     "Attempt policy JSON (default: splice top-2 then top-4, probe at end)");
  attack->add_option("--lexicon", attack_args.lexicon, "Refusal lexicon for follow-up gating");
  attack->add_option("--out", attack_args.out, "Output runs JSONL");
  attack->add_flag("--resume", attack_args.resume, "Skip probes already completed in --out");
  attack->add_flag("--no-timestamps", attack_args.no_timestamps,
                   "Omit timestamps for byte-reproducible output");
  attack->add_option("--workers", attack_args.workers,
                     "Probe fan-out (default: target max_parallel_requests)");

  EvalArgs eval_args;
  CLI::App* eval = app.add_subcommand("eval", "Evaluate campaign runs");
  eval->add_option("--runs", eval_args.runs, "Runs JSONL")->required();
  eval->add_option("--out", eval_args.out, "Output verdicts JSONL");
  eval->add_option("--evaluator", eval_args.evaluator, "kwm|judge");
  eval->add_option("--lexicon", eval_args.lexicon, "Refusal lexicon JSON (kwm)");
  eval->add_option("--judge", eval_args.judge, "Judge backend config JSON");
  eval->add_option("--judge-template", eval_args.judge_template,
                   "Judge prompt template with {PROBE}/{RESPONSE}");
  eval->add_option("--harmful-label", eval_args.harmful_label, "Judge harmful label");
  eval->add_option("--harmless-label", eval_args.harmless_label, "Judge harmless label");

  ReportArgs report_args;
  CLI::App* report = app.add_subcommand("report", "Aggregate verdicts into ASR tables");
  report->add_option("--runs", report_args.runs, "Runs JSONL (repeatable, pairs with --verdicts)");
  report->add_option("--verdicts", report_args.verdicts, "Verdicts JSONL (repeatable)")
      ->required();
  report->add_option("--out-csv", report_args.out_csv, "Machine-readable CSV");
  report->add_option("--out-md", report_args.out_md, "Human-readable markdown");
  report->add_option("--out-manifest", report_args.out_manifest,
                     "Manifest path (default <out-csv>.manifest.json)");

  HistogramArgs hist_args;
  CLI::App* histogram = app.add_subcommand("histogram", "Export the score distribution");
  histogram->add_option("--ranking", hist_args.ranking, "Ranking JSONL")->required();
  histogram->add_option("--bins", hist_args.bins, "Bin count");
  histogram->add_option("--out", hist_args.out, "Output CSV");
  histogram->add_option("--out-manifest", hist_args.out_manifest,
                        "Manifest path (default <out>.manifest.json)");

  AblationArgs ablation_args;
  CLI::App* ablation = app.add_subcommand("ablation", "Run the k/position/strategy grid");
  ablation->add_option("--probes", ablation_args.probes, "Probe instructions JSON")->required();
  ablation->add_option("--ranking", ablation_args.ranking, "Ranking JSONL")->required();
  ablation->add_option("--target", ablation_args.target, "Target backend config JSON")
      ->required();
  ablation->add_option("--ks", ablation_args.ks, "Comma list of k values");
  ablation->add_option("--positions", ablation_args.positions, "Comma list of positions");
  ablation->add_option("--strategies", ablation_args.strategies, "Comma list of strategies");
  ablation->add_option("--lexicon", ablation_args.lexicon, "Refusal lexicon JSON");
  ablation->add_option("--top-threshold", ablation_args.top_threshold, "TopN pool floor");
  ablation->add_option("--bottom-threshold", ablation_args.bottom_threshold,
                       "BottomN pool ceiling");
  ablation->add_option("--seed", ablation_args.seed, "Grid seed");
  ablation->add_option("--out", ablation_args.out, "Output CSV");
  ablation->add_option("--out-manifest", ablation_args.out_manifest,
                       "Manifest path (default <out>.manifest.json)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (rank->parsed()) return cmd_rank(rank_args);
    if (select->parsed()) return cmd_select(select_args);
    if (forge->parsed()) return cmd_forge(forge_args);
    if (attack->parsed()) return cmd_attack(attack_args);
    if (eval->parsed()) return cmd_eval(eval_args);
    if (report->parsed()) return cmd_report(report_args);
    if (histogram->parsed()) return cmd_histogram(hist_args);
    if (ablation->parsed()) return cmd_ablation(ablation_args);
  } catch (const tilt::Error& e) {
    std::cerr << "error (" << tilt::error_kind_name(e.kind()) << "): " << e.what() << "\n";
    return exit_code_for(e);
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "error (schema): unexpected value type: " << e.what() << "\n";
    return kExitBadContent;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return kExitInternal;
  }
  return kExitUsage;
}
